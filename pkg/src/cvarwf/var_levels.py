"""Optimal quantile levels for the CVaR power constraint.

For fixed multipliers (lam_i, mu) each terminal has a scalar concave
subproblem in its quantile level z. Stationarity classifies z* into one of
three branches delimited by the waterfilling cap ``level = lam*phi/mu``:

    AtZero -- z* = 0
    Low    -- z* in (0, level], root of a truncated-expectation equation
    High   -- z* in (level, inf), root of E[C_z] = phi

The expectations are evaluated by Monte Carlo over a single fixed sample
set of squared gains (common random numbers), which keeps the subgradient
monotone in z so bisection is valid. A stochastic supergradient step is
also provided for the model-free variant that never forms expectations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fading import FadingModel

#: Absolute tolerance for detecting the measure-zero tie p* = z.
TIE_TOL = 1e-12

#: Hard cap on upper-bracket doubling, as a multiple of level.
BRACKET_CAP = float(2**30)


class BracketExpansionError(RuntimeError):
    """Upper-bracket doubling exceeded the hard cap: the root equation has
    no solution below ``2^30 * level``, which signals a modeling
    inconsistency (e.g. a corrupt sample set)."""


class Branch(Enum):
    AT_ZERO = "at_zero"
    LOW = "low"
    HIGH = "high"


@dataclass
class VarLevels:
    """Per-terminal quantile levels, same units as power."""

    z: np.ndarray

    def __post_init__(self) -> None:
        self.z = np.asarray(self.z, dtype=float)


@dataclass(frozen=True)
class BranchEval:
    """Outcome of the branch classification.

    kappa  -- composite parameter lam*phi/(mu*sigma^2)
    h_bar  -- fading threshold H(z) = sqrt(sigma^2/(level - z)) at the
              boundary that defined the branch (inf when z >= level)
    branch -- which inclusion holds for z*
    """

    kappa: float
    h_bar: float
    branch: Branch


def h_bar(z: float, kappa: float, noise_var: float) -> float:
    """Fading threshold below which the policy sits at its quantile floor."""
    level = kappa * noise_var
    if z >= level:
        return math.inf
    return math.sqrt(noise_var / (level - z))


def _check_duals(lam_i: float, mu: float) -> None:
    if mu <= 0.0:
        raise ValueError("quantile-level subproblem requires mu > 0")
    if lam_i <= 0.0:
        raise ValueError("quantile-level subproblem requires lam > 0")


def _normalized_subgradient(
    z: float,
    level: float,
    sig2: float,
    phi: float,
    g: np.ndarray,
    w: np.ndarray,
    cw: np.ndarray,
) -> float:
    """Subgradient of the quantile subproblem divided by mu/phi.

    ``g`` holds squared-gain samples sorted ascending, ``w`` their weights
    (summing to 1) and ``cw`` the weight prefix sums (len(g)+1). Monotone
    nonincreasing and continuous in z.
    """
    if z < level:
        hbar2 = sig2 / (level - z)
        idx = int(np.searchsorted(g, hbar2, side="right"))
        head = g[:idx]
        s = float(np.sum(w[:idx] * head / (sig2 + z * head)))
        return (1.0 - phi) + level * s - float(cw[idx])
    s = float(np.sum(w * g / (sig2 + z * g)))
    return level * s - phi


def _uniform_weights(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = g.size
    w = np.full(n, 1.0 / n)
    cw = np.arange(n + 1, dtype=float) / n
    return w, cw


def z_subgradient(
    z: float,
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    gains: np.ndarray,
) -> float:
    """Supergradient of the quantile subproblem objective at z.

    ``gains`` is the fixed Monte Carlo sample set of squared gains h^2.
    For z < 0 the value is the constant mu*(1-phi)/phi; at z = 0 the
    lower-semicontinuous selection C_0 = kappa*h^2 is used, which makes the
    z >= 0 region a single continuous formula.
    """
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    _check_duals(lam_i, mu)
    if z < 0.0:
        return mu * (1.0 - phi) / phi
    g = np.sort(np.asarray(gains, dtype=float))
    w, cw = _uniform_weights(g)
    level = lam_i * phi / mu
    nu = _normalized_subgradient(z, level, noise_var, phi, g, w, cw)
    return (mu / phi) * nu


def classify_branch(
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    gains: np.ndarray,
) -> BranchEval:
    """Decide which of the three inclusions holds for z* on this sample set."""
    _check_duals(lam_i, mu)
    level = lam_i * phi / mu
    kappa = level / noise_var
    g = np.sort(np.asarray(gains, dtype=float))
    w, cw = _uniform_weights(g)
    if _normalized_subgradient(0.0, level, noise_var, phi, g, w, cw) <= 0.0:
        return BranchEval(kappa, h_bar(0.0, kappa, noise_var), Branch.AT_ZERO)
    if _normalized_subgradient(level, level, noise_var, phi, g, w, cw) <= 0.0:
        return BranchEval(kappa, math.inf, Branch.LOW)
    return BranchEval(kappa, math.inf, Branch.HIGH)


def _bisect(
    nu,
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 300,
) -> float:
    """Bisection on a continuous nonincreasing function with nu(lo) >= 0 >= nu(hi)."""
    width_floor = 1e-15 * max(hi, 1.0)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = nu(mid)
        if abs(val) <= tol:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= width_floor:
            break
    return mid


def solve_weighted(
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    g: np.ndarray,
    w: np.ndarray,
    cw: np.ndarray,
    tol: float,
    z_hint: float | None = None,
) -> float:
    """Quantile-level solve on an explicit weighted, ascending sample set.

    The public entry points wrap this with uniform weights; the iteration
    kernels feed it equal-mass bins. ``z_hint`` narrows the initial bracket
    when the previous solution is known to be close.
    """
    if phi >= 1.0:
        return 0.0
    level = lam_i * phi / mu

    def nu(z: float) -> float:
        return _normalized_subgradient(z, level, noise_var, phi, g, w, cw)

    if nu(0.0) <= 0.0:
        return 0.0
    if z_hint is not None and z_hint > 0.0:
        lo, hi = 0.95 * z_hint, 1.05 * z_hint
        if nu(lo) >= 0.0 >= nu(hi):
            return _bisect(nu, lo, hi, tol)
    if nu(level) <= 0.0:
        return _bisect(nu, 0.0, level, tol)
    lo, hi = level, 2.0 * level
    while nu(hi) > 0.0:
        lo = hi
        hi *= 2.0
        if hi > BRACKET_CAP * level:
            raise BracketExpansionError(
                f"no root below {BRACKET_CAP:g} * level (level={level:g})"
            )
    return _bisect(nu, lo, hi, tol)


def solve_var_level(
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    model: FadingModel,
    tol: float = 1e-6,
    *,
    n_samples: int = 100_000,
    gains: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Optimal quantile level z* >= 0 for one terminal at fixed multipliers.

    Classification and root finding run on a single fixed Monte Carlo
    sample set, drawn from ``model`` (or supplied via ``gains`` for common
    random numbers with an external check). The returned point satisfies
    |z_subgradient(z*)| <= tol * mu / phi on that sample set, or is exactly
    0 when the at-zero condition holds.
    """
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    _check_duals(lam_i, mu)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if phi == 1.0:
        # CVaR at confidence 1 is the expectation; the quantile variable is inert.
        return 0.0
    if gains is None:
        rng = np.random.Generator(np.random.PCG64(seed))
        gains = model.sample_gains(rng, n_samples)
    g = np.sort(np.asarray(gains, dtype=float))
    w, cw = _uniform_weights(g)
    return solve_weighted(lam_i, mu, phi, noise_var, g, w, cw, tol)


def var_supergradient_step(
    z: float,
    h: float,
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    step: float,
    p_star: float | None = None,
) -> float:
    """One stochastic supergradient ascent step on the quantile level.

    The stochastic supergradient is -mu + (mu/phi) * C with C picked by the
    realized policy: 1 when p* > z, 0 when p* < z, and the policy's
    Heaviside parameter clamped to [0, 1] at the tie (detected with
    absolute tolerance ``TIE_TOL``). ``p_star`` defaults to the closed-form
    policy at the current z.
    """
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    if mu <= 0.0:
        raise ValueError("supergradient step requires mu > 0")
    if step <= 0.0:
        raise ValueError("step must be positive")
    if p_star is None:
        from .policy import optimal_power

        p_star = optimal_power(h, lam_i, mu, phi, noise_var, z)
    if p_star > z + TIE_TOL:
        c = 1.0
    elif p_star < z - TIE_TOL:
        c = 0.0
    else:
        g = h * h
        c = (lam_i * phi / mu) * g / (noise_var + z * g)
        c = min(max(c, 0.0), 1.0)
    return z + step * (-mu + (mu / phi) * c)


def equal_mass_bins(gains: np.ndarray, n_bins: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Compress a squared-gain sample set into equal-count bins.

    Returns (bin means ascending, bin weights). The compressed set is what
    the iteration kernels evaluate the quantile subgradient on; the bin
    means preserve E[g] exactly and the integrands are smooth in g, so the
    compression error on the root is far below the solver tolerance.
    """
    g = np.sort(np.asarray(gains, dtype=float))
    n = g.size
    if n_bins >= n:
        return g, np.full(n, 1.0 / n)
    edges = np.linspace(0, n, n_bins + 1).astype(np.intp)
    counts = np.diff(edges)
    sums = np.add.reduceat(g, edges[:-1])
    return sums / counts, counts / float(n)
