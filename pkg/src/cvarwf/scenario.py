"""Scenario ingestion: TOML files and built-in presets.

A scenario bundles the terminal set, per-terminal fading models, solver
parameters, the output smoothing window, and (optionally) a confidence
sweep grid. Built-in presets encode the reference experiment parameters so
acceptance runs never depend on hand-typed values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .fading import FadingModel
from .policy import TerminalConfig
from .radius import confidence_from_radius
from .solver import Mode, SolverConfig
from .utility import UtilityKind


class ScenarioError(ValueError):
    """Malformed scenario file or invalid field values."""


@dataclass(frozen=True)
class SweepGrid:
    """Confidence grid for the low/high terminal groups."""

    phi_low: tuple[float, ...]
    phi_high: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.phi_low or not self.phi_high:
            raise ScenarioError("sweep grids must be nonempty")
        for v in (*self.phi_low, *self.phi_high):
            if not (0.0 < v <= 1.0):
                raise ScenarioError(f"sweep: confidence {v} outside (0, 1]")


@dataclass(frozen=True)
class Scenario:
    name: str
    terminals: tuple[TerminalConfig, ...]
    fading: tuple[FadingModel, ...]
    solver: SolverConfig
    window: int = 200
    groups: tuple[str, ...] | None = None
    sweep: SweepGrid | None = None

    def __post_init__(self) -> None:
        if len(self.terminals) < 1:
            raise ScenarioError("scenario needs at least one terminal")
        if len(self.fading) != len(self.terminals):
            raise ScenarioError("one fading model per terminal is required")
        if self.window < 1:
            raise ScenarioError("window must be >= 1")
        if self.groups is not None and len(self.groups) != len(self.terminals):
            raise ScenarioError("one group tag per terminal is required")
        if self.sweep is not None and self.groups is None:
            raise ScenarioError("a sweep requires per-terminal group tags ('low'/'high')")

    def with_phi(self, phis) -> "Scenario":
        """Copy with per-terminal confidence levels replaced. A scalar
        applies to every terminal."""
        try:
            values = [float(phis)] * len(self.terminals)
        except TypeError:
            values = [float(v) for v in phis]
        if len(values) != len(self.terminals):
            raise ScenarioError("expected one confidence level per terminal")
        terminals = tuple(replace(tc, phi=v) for tc, v in zip(self.terminals, values))
        return replace(self, terminals=terminals)

    def with_grid_point(self, phi_low: float, phi_high: float) -> "Scenario":
        """Copy with group confidences set to one sweep grid point."""
        if self.groups is None:
            raise ScenarioError("scenario has no group tags")
        values = [phi_low if grp == "low" else phi_high for grp in self.groups]
        return self.with_phi(values)

    def with_solver(self, **changes) -> "Scenario":
        return replace(self, solver=replace(self.solver, **changes))

    def with_utility(self, utility: UtilityKind) -> "Scenario":
        return self.with_solver(utility=utility)


_MODES = {m.value: m for m in Mode}
_UTILITIES = {
    "sumrate": UtilityKind.SUMRATE,
    "pf": UtilityKind.PROPORTIONAL_FAIRNESS,
    "proportional-fairness": UtilityKind.PROPORTIONAL_FAIRNESS,
}


def _terminal_from_table(idx: int, table: dict) -> tuple[TerminalConfig, FadingModel, str | None]:
    where = f"terminal[{idx}]"
    unknown = set(table) - {"noise_var", "phi", "radius", "weight", "mean_square", "group"}
    if unknown:
        raise ScenarioError(f"{where}: unknown fields {sorted(unknown)}")
    if "noise_var" not in table:
        raise ScenarioError(f"{where}: noise_var is required")
    has_phi, has_radius = "phi" in table, "radius" in table
    if has_phi == has_radius:
        raise ScenarioError(f"{where}: give exactly one of 'phi' or 'radius'")
    phi = float(table["phi"]) if has_phi else confidence_from_radius(float(table["radius"]))
    if phi == 0.0:
        raise ScenarioError(f"{where}: infinite radius (phi = 0) is not admissible")
    try:
        tc = TerminalConfig(
            noise_var=float(table["noise_var"]),
            phi=phi,
            weight=float(table.get("weight", 1.0)),
        )
        fm = FadingModel(mean_square=float(table.get("mean_square", 1.0)))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    group = table.get("group")
    if group is not None and group not in ("low", "high"):
        raise ScenarioError(f"{where}: group must be 'low' or 'high', got {group!r}")
    return tc, fm, group


def _solver_from_table(table: dict) -> SolverConfig:
    known = {
        "p0", "step_dual", "step_z", "iterations", "seed", "mode", "utility",
        "z_resolve_period", "mc_samples", "diminishing", "var_tol",
    }
    unknown = set(table) - known
    if unknown:
        raise ScenarioError(f"solver: unknown fields {sorted(unknown)}")
    if "p0" not in table:
        raise ScenarioError("solver: p0 is required")
    kwargs = dict(table)
    if "mode" in kwargs:
        try:
            kwargs["mode"] = _MODES[kwargs["mode"]]
        except KeyError:
            raise ScenarioError(f"solver: unknown mode {kwargs['mode']!r}") from None
    if "utility" in kwargs:
        try:
            kwargs["utility"] = _UTILITIES[kwargs["utility"]]
        except KeyError:
            raise ScenarioError(f"solver: unknown utility {kwargs['utility']!r}") from None
    try:
        return SolverConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"solver: {exc}") from exc


def scenario_from_mapping(data: dict, default_name: str = "scenario") -> Scenario:
    unknown = set(data) - {"name", "window", "solver", "terminal", "sweep"}
    if unknown:
        raise ScenarioError(f"unknown top-level fields {sorted(unknown)}")
    if "solver" not in data:
        raise ScenarioError("missing [solver] block")
    tables = data.get("terminal", [])
    if not isinstance(tables, list) or not tables:
        raise ScenarioError("at least one [[terminal]] block is required")
    parsed = [_terminal_from_table(i, t) for i, t in enumerate(tables)]
    terminals = tuple(p[0] for p in parsed)
    fading = tuple(p[1] for p in parsed)
    raw_groups = [p[2] for p in parsed]
    groups = tuple(g or "low" for g in raw_groups) if any(raw_groups) else None
    sweep = None
    if "sweep" in data:
        s = data["sweep"]
        unknown = set(s) - {"phi_low", "phi_high"}
        if unknown:
            raise ScenarioError(f"sweep: unknown fields {sorted(unknown)}")
        sweep = SweepGrid(
            phi_low=tuple(float(v) for v in s.get("phi_low", ())),
            phi_high=tuple(float(v) for v in s.get("phi_high", ())),
        )
    return Scenario(
        name=str(data.get("name", default_name)),
        terminals=terminals,
        fading=fading,
        solver=_solver_from_table(data["solver"]),
        window=int(data.get("window", 200)),
        groups=groups,
        sweep=sweep,
    )


def _preset_table1(utility: UtilityKind, name: str) -> Scenario:
    third = 1.0 / 3.0
    return Scenario(
        name=name,
        terminals=(
            TerminalConfig(noise_var=1.0, phi=0.90, weight=third),
            TerminalConfig(noise_var=2.0, phi=0.85, weight=third),
            TerminalConfig(noise_var=3.0, phi=0.80, weight=third),
        ),
        fading=(FadingModel(),) * 3,
        solver=SolverConfig(
            p0=15.0,
            step_dual=3e-5,
            iterations=200_000,
            seed=11,
            utility=utility,
            z_resolve_period=2000,
            mc_samples=100_000,
        ),
        window=200,
    )


def _preset_toy8(utility: UtilityKind, name: str) -> Scenario:
    eighth = 1.0 / 8.0
    return Scenario(
        name=name,
        terminals=tuple(
            TerminalConfig(noise_var=float(v), phi=0.80, weight=eighth)
            for v in range(1, 9)
        ),
        fading=(FadingModel(),) * 8,
        solver=SolverConfig(
            p0=40.0,
            step_dual=3e-5,
            iterations=200_000,
            seed=13,
            utility=utility,
            z_resolve_period=2000,
            mc_samples=100_000,
        ),
        window=200,
    )


def _preset_realistic8(utility: UtilityKind, name: str) -> Scenario:
    eighth = 1.0 / 8.0
    terminals = tuple(
        TerminalConfig(noise_var=1.0, phi=0.40, weight=eighth) for _ in range(6)
    ) + tuple(
        TerminalConfig(noise_var=10.0, phi=0.80, weight=eighth) for _ in range(2)
    )
    grid = tuple(round(0.70 + 0.05 * k, 2) for k in range(7))
    return Scenario(
        name=name,
        terminals=terminals,
        fading=(FadingModel(),) * 8,
        solver=SolverConfig(
            p0=40.0,
            step_dual=3e-5,
            iterations=200_000,
            seed=17,
            utility=utility,
            z_resolve_period=2000,
            mc_samples=100_000,
        ),
        window=200,
        groups=("low",) * 6 + ("high",) * 2,
        sweep=SweepGrid(phi_low=grid, phi_high=grid),
    )


PRESETS = {
    "table1-3term": lambda: _preset_table1(UtilityKind.SUMRATE, "table1-3term"),
    "table1-3term-pf": lambda: _preset_table1(UtilityKind.PROPORTIONAL_FAIRNESS, "table1-3term-pf"),
    "table2-toy8": lambda: _preset_toy8(UtilityKind.SUMRATE, "table2-toy8"),
    "table2-toy8-pf": lambda: _preset_toy8(UtilityKind.PROPORTIONAL_FAIRNESS, "table2-toy8-pf"),
    "table2-realistic8": lambda: _preset_realistic8(UtilityKind.PROPORTIONAL_FAIRNESS, "table2-realistic8"),
    "table2-realistic8-sr": lambda: _preset_realistic8(UtilityKind.SUMRATE, "table2-realistic8-sr"),
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a preset name or a TOML file path."""
    key = str(source)
    if key in PRESETS:
        return PRESETS[key]()
    path = Path(source)
    if not path.exists():
        raise ScenarioError(
            f"{source!r} is neither a preset ({', '.join(preset_names())}) nor a file"
        )
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries line and column information
        raise ScenarioError(f"parse error in {path}: {exc}") from exc
    return scenario_from_mapping(data, default_name=path.stem)
