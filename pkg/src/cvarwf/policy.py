"""Instantaneous rate model and the closed-form risk-aware power policy.

The per-terminal policy is a waterfilling rule with a quantile-level floor:

    p*(h) = max{ (lam*phi/mu - sigma^2/h^2)_+ , (z)_+ }

valid whenever the rate multiplier ``lam`` and the power multiplier ``mu``
are not both zero. With lam > 0 and mu = 0 the per-realization subproblem is
unbounded, which surfaces as :class:`UnboundedPolicyError` rather than a
sentinel power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnboundedPolicyError(RuntimeError):
    """Raised when lam > 0 and mu = 0: the policy subproblem has no finite
    maximizer. Callers must keep mu strictly positive (the solver enforces a
    floor)."""


@dataclass(frozen=True)
class TerminalConfig:
    """Static per-terminal parameters.

    noise_var  -- noise power sigma^2 of the link
    phi        -- CVaR confidence level in (0, 1]; smaller is stricter
    weight     -- utility weight for the sumrate objective
    """

    noise_var: float
    phi: float = 1.0
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (self.noise_var > 0.0) or not np.isfinite(self.noise_var):
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")
        if not (0.0 < self.phi <= 1.0):
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if not (self.weight > 0.0) or not np.isfinite(self.weight):
            raise ValueError(f"weight must be positive, got {self.weight}")


@dataclass
class DualState:
    """Lagrange multipliers: per-terminal rate multipliers and the shared
    power multiplier. Both are kept on the nonnegative orthant."""

    lam: np.ndarray
    mu: float

    def __post_init__(self) -> None:
        self.lam = np.asarray(self.lam, dtype=float)
        if np.any(self.lam < 0.0) or self.mu < 0.0:
            raise ValueError("multipliers must be nonnegative")

    def copy(self) -> "DualState":
        return DualState(self.lam.copy(), self.mu)


def rate(p, h, noise_var: float):
    """Instantaneous rate log(1 + p h^2 / sigma^2), natural log."""
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    out = np.log1p(p * h * h / noise_var)
    return float(out) if out.ndim == 0 else out


def optimal_power(
    h: float,
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
    z: float,
) -> float:
    """Optimal transmit power for one fading draw.

    Degenerate multiplier cases: both zero gives 0; lam zero gives (z)_+;
    mu zero with lam positive raises :class:`UnboundedPolicyError`.
    h = 0 is treated as zero gain (the waterfilling term vanishes).
    """
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    if lam_i < 0.0 or mu < 0.0:
        raise ValueError("multipliers must be nonnegative")
    if h < 0.0:
        raise ValueError("fading coefficient must be nonnegative")
    if mu == 0.0:
        if lam_i == 0.0:
            return 0.0
        raise UnboundedPolicyError(
            "power subproblem is unbounded for lam > 0 with mu = 0"
        )
    z_floor = max(z, 0.0)
    if lam_i == 0.0:
        return z_floor
    g = h * h  # may underflow to 0 for denormal h; treat as zero gain
    if g == 0.0:
        return z_floor
    waterfill = lam_i * phi / mu - noise_var / g
    return max(max(waterfill, 0.0), z_floor)


def c_parameter(
    p_star: float,
    h: float,
    lam_i: float,
    mu: float,
    phi: float,
    noise_var: float,
) -> float:
    """Heaviside selection parameter of the policy at the kink:

        C = (lam*phi/mu) * h^2 / (sigma^2 + p* h^2)

    Lies in [0, 1] whenever p* is the policy optimum at or above the
    waterfilling term. Requires mu > 0.
    """
    if mu <= 0.0:
        raise ValueError("c_parameter requires mu > 0")
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    if h == 0.0:
        return 0.0
    g = h * h
    return (lam_i * phi / mu) * g / (noise_var + p_star * g)
