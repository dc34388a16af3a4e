"""Dual-descent solver for the CVaR-constrained power allocation problem.

Two variants share one loop. The model-based variant re-solves the
quantile levels from the fading sample set whenever the multipliers have
moved; the model-free variant updates them with stochastic supergradient
steps, one fading draw at a time. Multipliers descend along stochastic
subgradients of the dual with projection onto the nonnegative orthant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .fading import FadingModel
from .policy import DualState, TerminalConfig
from .utility import UtilityKind
from .var_levels import BracketExpansionError, TIE_TOL, equal_mass_bins

#: Relative multiplier movement that forces a quantile-level re-solve.
DUAL_MOVE_TOL = 0.01

#: Floor keeping mu strictly positive so the unbounded policy branch
#: (lam > 0, mu = 0) is unreachable during iteration. Far below any active
#: constraint's multiplier.
MU_FLOOR = 1e-8

#: Floor on rate multipliers in proportional-fairness mode; keeps x* = 1/lam
#: bounded. Numerical guard, not part of the model.
LAMBDA_FLOOR = 1e-6

#: Abort threshold for the power multiplier.
MU_DIVERGENCE_CAP = 1e6

#: Bin count for the kernels' compressed quantile-solver sample sets.
KERNEL_BINS = 512


class Mode(str, Enum):
    MODEL_BASED = "model-based"
    MODEL_FREE = "model-free"


class SolverDivergenceError(RuntimeError):
    """The power multiplier blew past the divergence cap."""

    def __init__(self, iteration: int, mu: float):
        self.iteration = iteration
        self.mu = mu
        super().__init__(
            f"dual iteration diverged at t={iteration}: mu={mu:.3g} exceeds "
            f"{MU_DIVERGENCE_CAP:g}; reduce the step size"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    p0               -- total power budget
    step_dual        -- dual step size (one value for all multipliers)
    step_z           -- quantile-level step size, model-free mode only
    iterations       -- trajectory length
    seed             -- master seed; fixes fading and sample-set draws
    mode             -- model-based or model-free quantile updates
    utility          -- network utility driving the rate multipliers
    z_resolve_period -- model-based: force a re-solve every this many
                        iterations (1 = every iteration); a re-solve also
                        fires whenever a multiplier moved more than 1%
                        since the last one
    mc_samples       -- size of the fixed sample set behind the model-based
                        quantile solves
    diminishing      -- scale both step sizes by 1/sqrt(n)
    var_tol          -- quantile-solve bisection tolerance
    """

    p0: float
    step_dual: float = 3e-5
    step_z: float = 0.1
    iterations: int = 200_000
    seed: int = 0
    mode: Mode = Mode.MODEL_BASED
    utility: UtilityKind = UtilityKind.SUMRATE
    z_resolve_period: int = 1
    mc_samples: int = 100_000
    diminishing: bool = False
    var_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not (self.p0 > 0.0):
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if not (self.step_dual > 0.0 and self.step_z > 0.0):
            raise ValueError("step sizes must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.z_resolve_period < 1:
            raise ValueError("z_resolve_period must be >= 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if not (self.var_tol > 0.0):
            raise ValueError("var_tol must be positive")


@dataclass(frozen=True)
class IterationRecord:
    """One fading realization with the resulting primal/dual state."""

    t: int
    h: np.ndarray
    p: np.ndarray
    z: np.ndarray
    duals: DualState
    rates: np.ndarray


@dataclass
class Trajectory:
    """Full run history, stored as arrays of shape (iterations, terminals).

    Indexing returns an :class:`IterationRecord` view. The dual snapshots
    per record are the multipliers that produced that iteration's powers;
    ``final_duals`` is the state after the last update.
    """

    terminals: tuple[TerminalConfig, ...]
    config: SolverConfig
    h: np.ndarray
    p: np.ndarray
    rates: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    final_duals: DualState
    n_resolves: int = 0
    tail_fraction: float = field(default=0.2, repr=False)

    def __len__(self) -> int:
        return self.p.shape[0]

    def __getitem__(self, t: int) -> IterationRecord:
        if not -len(self) <= t < len(self):
            raise IndexError(t)
        t = t % len(self) if len(self) else t
        return IterationRecord(
            t=t,
            h=self.h[t],
            p=self.p[t],
            z=self.z[t],
            duals=DualState(self.lam[t].copy(), float(self.mu[t])),
            rates=self.rates[t],
        )

    @property
    def phis(self) -> np.ndarray:
        return np.array([tc.phi for tc in self.terminals])

    @property
    def weights(self) -> np.ndarray:
        return np.array([tc.weight for tc in self.terminals])

    def tail(self) -> slice:
        """Index window for converged statistics: the final 20% of iterations."""
        n = len(self)
        start = n - max(1, int(round(self.tail_fraction * n)))
        return slice(max(start, 0), n)

    def tail_mean_powers(self) -> np.ndarray:
        return self.p[self.tail()].mean(axis=0)

    def tail_mean_rates(self) -> np.ndarray:
        return self.rates[self.tail()].mean(axis=0)

    def tail_mean_z(self) -> np.ndarray:
        return self.z[self.tail()].mean(axis=0)

    def tail_sum_power(self) -> np.ndarray:
        return self.p[self.tail()].sum(axis=1)

    def tail_cvar_powers(self) -> np.ndarray:
        """Per-terminal empirical CVaR of the tail power samples at each
        terminal's own confidence level."""
        from .cvar import empirical_cvar

        window = self.tail()
        return np.array(
            [empirical_cvar(self.p[window, i], tc.phi) for i, tc in enumerate(self.terminals)]
        )

    def tail_utility(self) -> float:
        """Utility of the tail-mean rate vector under the run's utility."""
        from .utility import utility_value

        x = self.tail_mean_rates()
        if self.config.utility == UtilityKind.PROPORTIONAL_FAIRNESS:
            return utility_value(self.config.utility, x)
        return utility_value(self.config.utility, x, self.weights)


def dual_subgradient(
    record: IterationRecord,
    x_star: np.ndarray,
    config: SolverConfig,
    terminals: Sequence[TerminalConfig],
) -> tuple[np.ndarray, float]:
    """Stochastic dual subgradient at one iteration.

    Rate part: observed rates minus the rate-vector maximizer. Power part:
    budget minus the sampled CVaR surrogate sum(z_i + (p_i - z_i)_+/phi_i).
    """
    phis = np.array([tc.phi for tc in terminals])
    g_lam = record.rates - np.asarray(x_star, dtype=float)
    g_mu = config.p0 - float(
        np.sum(record.z + np.maximum(record.p - record.z, 0.0) / phis)
    )
    return g_lam, g_mu


def dual_update(
    duals: DualState,
    g_lam: np.ndarray,
    g_mu: float,
    step: float,
    pinned_lambda: bool = False,
) -> DualState:
    """Projected subgradient step on the multipliers.

    ``pinned_lambda`` reflects sumrate mode, where the rate multipliers stay
    fixed at the utility weights and only mu moves.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    lam = duals.lam if pinned_lambda else np.maximum(duals.lam - step * np.asarray(g_lam), 0.0)
    mu = max(duals.mu - step * g_mu, 0.0)
    return DualState(np.array(lam, dtype=float), mu)


def _as_models(model, n: int) -> list[FadingModel]:
    if isinstance(model, FadingModel):
        return [model] * n
    models = list(model)
    if len(models) != n:
        raise ValueError(f"expected {n} fading models, got {len(models)}")
    return models


def run(
    config: SolverConfig,
    terminals: Sequence[TerminalConfig],
    model: FadingModel | Sequence[FadingModel],
    kernel: str = "auto",
) -> Trajectory:
    """Execute the dual-descent loop and return the full trajectory.

    Deterministic for a fixed (config, terminals, model) triple: the master
    seed fixes both the fading sequence and the quantile-solver sample
    sets. ``iterations = 0`` returns an empty trajectory carrying the
    initial duals.
    """
    terminals = tuple(terminals)
    n = len(terminals)
    if n < 1:
        raise ValueError("at least one terminal is required")
    models = _as_models(model, n)

    weights = np.array([tc.weight for tc in terminals])
    sig2 = np.array([tc.noise_var for tc in terminals])
    phis = np.array([tc.phi for tc in terminals])

    # Initialization: lam = weights (exact for sumrate, warm start for
    # proportional fairness), mu = 1, z = 0.
    lam0 = weights.copy()
    mu0 = 1.0
    z0 = np.zeros(n)

    iters = config.iterations
    if iters == 0:
        empty = np.empty((0, n))
        return Trajectory(
            terminals=terminals,
            config=config,
            h=empty,
            p=empty.copy(),
            rates=empty.copy(),
            z=empty.copy(),
            lam=empty.copy(),
            mu=np.empty(0),
            final_duals=DualState(lam0, mu0),
        )

    master = np.random.SeedSequence(config.seed)
    fading_ss, mc_ss = master.spawn(2)
    fading_rng = np.random.Generator(np.random.PCG64(fading_ss))

    gains = np.empty((iters, n))
    for i in range(n):
        gains[:, i] = models[i].sample_gains(fading_rng, iters)

    # Fixed per-terminal sample sets for the model-based quantile solves,
    # compressed to equal-mass bins for the kernel's inner loop.
    n_bins = min(KERNEL_BINS, config.mc_samples)
    bin_g = np.empty((n, n_bins))
    bin_w = np.empty((n, n_bins))
    bin_cw = np.zeros((n, n_bins + 1))
    for i, child in enumerate(mc_ss.spawn(n)):
        rng = np.random.Generator(np.random.PCG64(child))
        raw = models[i].sample_gains(rng, config.mc_samples)
        bg, bw = equal_mass_bins(raw, n_bins)
        bin_g[i], bin_w[i] = bg, bw
        bin_cw[i, 1:] = np.cumsum(bw)

    out_p = np.empty((iters, n))
    out_r = np.empty((iters, n))
    out_z = np.empty((iters, n))
    out_lam = np.empty((iters, n))
    out_mu = np.empty(iters)

    k = kernels.select(kernel)
    res = k.run_trajectory(
        gains,
        sig2,
        phis,
        bin_g,
        bin_w,
        bin_cw,
        lam0,
        z0,
        mu0,
        config.p0,
        config.step_dual,
        config.step_z,
        config.z_resolve_period,
        DUAL_MOVE_TOL,
        config.var_tol,
        MU_FLOOR,
        LAMBDA_FLOOR,
        MU_DIVERGENCE_CAP,
        config.mode == Mode.MODEL_FREE,
        config.utility == UtilityKind.PROPORTIONAL_FAIRNESS,
        config.diminishing,
        TIE_TOL,
        out_p,
        out_r,
        out_z,
        out_lam,
        out_mu,
    )

    if res.get("bracket_failed"):
        raise BracketExpansionError(
            "quantile-level bracket expansion failed during the run"
        )
    if res["diverged_at"] >= 0:
        raise SolverDivergenceError(int(res["diverged_at"]), float(res["final_mu"]))

    return Trajectory(
        terminals=terminals,
        config=config,
        h=np.sqrt(gains),
        p=out_p,
        rates=out_r,
        z=out_z,
        lam=out_lam,
        mu=out_mu,
        final_duals=DualState(np.asarray(res["final_lam"], dtype=float), float(res["final_mu"])),
        n_resolves=int(res["n_resolves"]),
    )
