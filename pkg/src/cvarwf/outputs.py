"""Experiment execution and figure-ready table emission.

Each run writes whitespace-delimited text tables with a header row, using
the same column names and file-stem convention as the reference plotting
pipeline (p1..pN/sum_p instances, per-terminal power and rate CDFs, moving
average rates, a key/value summary, and x/y/z mesh files for sweeps).
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import solver
from .scenario import Scenario, ScenarioError
from .utility import UtilityKind

log = logging.getLogger("cvarwf")

#: Rows in the CDF tables.
CDF_POINTS = 512

#: Rows in the moving-average table (the learning period shown in plots).
RATE_INSTANCE_ROWS = 500


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Windowed mean along axis 0, expanding until ``window`` samples exist.

    Satisfies the exact recurrence: entry t averages samples
    max(0, t-window+1)..t.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(x, dtype=float)
    tt = x.shape[0]
    cs = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)], axis=0)
    idx = np.arange(tt)
    lo = np.maximum(idx + 1 - window, 0)
    counts = (idx + 1 - lo).astype(float)
    counts = counts.reshape((-1,) + (1,) * (x.ndim - 1))
    return (cs[idx + 1] - cs[lo]) / counts


def file_stem(scenario: Scenario) -> str:
    util = "sr" if scenario.solver.utility == UtilityKind.SUMRATE else "pf"
    phis = "_".join(f"{tc.phi:.2f}" for tc in scenario.terminals)
    variances = "_".join(f"{tc.noise_var:.1f}" for tc in scenario.terminals)
    return f"{util}_n{len(scenario.terminals)}_P{scenario.solver.p0:g}_phi{phis}_var{variances}"


def _write_table(path: Path, header: list[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(rows)
    with open(path, "w") as fh:
        fh.write(" ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")


def _empirical_cdf_table(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # samples: (T, N); one CDF column per terminal on the shared grid
    tt, n = samples.shape
    cols = [grid]
    for i in range(n):
        s = np.sort(samples[:, i])
        cols.append(np.searchsorted(s, grid, side="right") / tt)
    return np.column_stack(cols)


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path,
    kernel: str = "auto",
) -> dict[str, Path]:
    """Run one scenario and emit its output tables into ``out_dir``.

    Returns a mapping from table kind to file path. Instances tables cover
    the trajectory tail; the moving-average table covers the learning
    period from the first iteration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = solver.run(scenario.solver, scenario.terminals, scenario.fading, kernel=kernel)
    if len(traj) == 0:
        raise ScenarioError("scenario produced an empty trajectory; nothing to emit")
    stem = file_stem(scenario)
    n = len(scenario.terminals)
    paths: dict[str, Path] = {}

    window = traj.tail()
    tail_p = traj.p[window]
    tail_r = traj.rates[window]
    times = np.arange(window.start, window.stop, dtype=float)

    ids = [str(i + 1) for i in range(n)]

    paths["p_instances"] = out / f"{stem}_p_instances.txt"
    _write_table(
        paths["p_instances"],
        ["time"] + [f"p{i}" for i in ids] + ["sum_p"],
        np.column_stack([times, tail_p, tail_p.sum(axis=1)]),
    )

    p_grid = np.linspace(0.0, float(tail_p.max()) * 1.02 + 1e-12, CDF_POINTS)
    paths["p_CDF"] = out / f"{stem}_p_CDF.txt"
    _write_table(
        paths["p_CDF"],
        ["power"] + [f"cdf_p{i}" for i in ids],
        _empirical_cdf_table(tail_p, p_grid),
    )

    r_grid = np.linspace(0.0, float(tail_r.max()) * 1.02 + 1e-12, CDF_POINTS)
    paths["rate_CDF"] = out / f"{stem}_rate_CDF.txt"
    _write_table(
        paths["rate_CDF"],
        ["rate"] + [f"cdf_rate{i}" for i in ids],
        _empirical_cdf_table(tail_r, r_grid),
    )

    rows = min(RATE_INSTANCE_ROWS, len(traj))
    ma = moving_average(traj.rates[:rows], scenario.window)
    paths["rate_instances"] = out / f"{stem}_rate_instances.txt"
    _write_table(
        paths["rate_instances"],
        ["time_r"] + [f"cum_r{i}" for i in ids] + ["sum_cum_r"],
        np.column_stack([np.arange(1, rows + 1, dtype=float), ma, ma.mean(axis=1)]),
    )

    paths["summary"] = out / f"{stem}_summary.txt"
    _write_summary(paths["summary"], scenario, traj)
    log.info("run %s: %d iterations, %d quantile re-solves", scenario.name, len(traj), traj.n_resolves)
    return paths


def _write_summary(path: Path, scenario: Scenario, traj) -> None:
    tail_p = traj.tail_mean_powers()
    tail_r = traj.tail_mean_rates()
    tail_z = traj.tail_mean_z()
    cvars = traj.tail_cvar_powers()
    lines = [("p0", scenario.solver.p0), ("mu", traj.final_duals.mu)]
    for i, tc in enumerate(scenario.terminals):
        lines.append((f"lambda_{i+1}", traj.final_duals.lam[i]))
    for i in range(len(scenario.terminals)):
        lines.append((f"z_{i+1}", traj.z[-1, i]))
    for i in range(len(scenario.terminals)):
        lines.append((f"tail_mean_p_{i+1}", tail_p[i]))
    for i in range(len(scenario.terminals)):
        lines.append((f"tail_mean_rate_{i+1}", tail_r[i]))
    for i in range(len(scenario.terminals)):
        lines.append((f"tail_mean_z_{i+1}", tail_z[i]))
    for i, tc in enumerate(scenario.terminals):
        lines.append((f"tail_cvar_p_{i+1}", cvars[i]))
    lines.append(("sum_tail_cvar_p", float(cvars.sum())))
    lines.append(("tail_mean_rate_network", float(tail_r.mean())))
    lines.append(("tail_utility", traj.tail_utility()))
    with open(path, "w") as fh:
        fh.write("key value\n")
        for key, value in lines:
            fh.write(f"{key} {value:.10g}\n")


def read_summary(path: str | Path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            key, value = line.split()
            out[key] = float(value)
    return out


def _grid_point_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1)[0])


class SweepPointError(RuntimeError):
    """A grid-point run failed; carries the grid coordinates."""

    def __init__(self, phi_low: float, phi_high: float, cause: BaseException):
        self.phi_low = phi_low
        self.phi_high = phi_high
        super().__init__(
            f"sweep failed at grid point (phi_low={phi_low:g}, phi_high={phi_high:g}): {cause}"
        )


def _sweep_point(args) -> tuple[float, float, float]:
    scenario, phi_low, phi_high, index, kernel = args
    try:
        point = scenario.with_grid_point(phi_low, phi_high).with_solver(
            seed=_grid_point_seed(scenario.solver.seed, index)
        )
        traj = solver.run(point.solver, point.terminals, point.fading, kernel=kernel)
        return phi_low, phi_high, float(traj.tail_mean_rates().mean())
    except Exception as exc:
        raise SweepPointError(phi_low, phi_high, exc) from exc


def sweep_surface(
    scenario: Scenario,
    out_dir: str | Path,
    workers: int | None = None,
    kernel: str = "auto",
) -> Path:
    """Run one solver run per (phi_low, phi_high) grid point and emit the
    rate surface as an x/y/z mesh table.

    Grid points get independent seeds derived from the master seed and the
    grid index, and run concurrently when ``workers`` allows.
    """
    if scenario.sweep is None:
        raise ScenarioError(f"scenario {scenario.name!r} has no sweep grid")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (scenario, pl, ph, k, kernel)
        for k, (pl, ph) in enumerate(
            (pl, ph) for pl in scenario.sweep.phi_low for ph in scenario.sweep.phi_high
        )
    ]
    if workers is None:
        import os

        workers = min(4, os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    util = "sr" if scenario.solver.utility == UtilityKind.SUMRATE else "pf"
    path = out / f"mesh_{util}_data.txt"
    _write_table(path, ["x", "y", "z"], np.array(results))
    log.info("sweep %s: %d grid points -> %s", scenario.name, len(results), path)
    return path


def surface_max_at(path: str | Path) -> tuple[float, float]:
    """(x, y) of the maximal z entry in a mesh table."""
    data = np.loadtxt(path, skiprows=1)
    best = int(np.argmax(data[:, 2]))
    return float(data[best, 0]), float(data[best, 1])
