"""Empirical Conditional Value-at-Risk on finite sample batches.

Used for verification and constraint monitoring: the solver regulates the
CVaR of allocated power, and these estimators let us check the achieved
risk directly on trajectory samples.
"""

from __future__ import annotations

import math

import numpy as np

# Snap phi*n to an integer when it is one up to float fuzz, so e.g.
# phi=0.3, n=10 lands on exactly 3 tail samples.
_INT_SNAP = 1e-9


def _as_batch(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size < 1:
        raise ValueError("sample batch must contain at least one value")
    return arr


def _check_phi(phi: float) -> float:
    phi = float(phi)
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"confidence level must lie in (0, 1], got {phi}")
    return phi


def cvar_objective(z: float, values, phi: float) -> float:
    """Rockafellar-Uryasev objective z + E[(xi - z)_+] / phi on the batch.

    Convex in z; its minimum over z is the empirical CVaR.
    """
    phi = _check_phi(phi)
    arr = _as_batch(values)
    excess = np.maximum(arr - z, 0.0)
    return float(z + excess.mean() / phi)


def empirical_cvar(values, phi: float) -> float:
    """Mean of the worst phi-fraction of the batch (upper tail of costs).

    Discrete order-statistic evaluation: the top ceil(phi*n) samples enter,
    with the boundary sample weighted by the fractional remainder of phi*n.
    This is the exact minimizer of ``cvar_objective`` for the empirical
    measure, with no grid error.
    """
    phi = _check_phi(phi)
    arr = _as_batch(values)
    if phi == 1.0:
        # CVaR at confidence 1 is the plain expectation, bit for bit.
        return float(arr.mean())
    n = arr.size
    k = phi * n
    m = math.ceil(k - _INT_SNAP)  # number of samples touching the tail
    m = min(max(m, 1), n)
    frac = k - (m - 1)  # weight of the m-th largest, in (0, 1]
    top = np.partition(arr, n - m)[n - m:]
    total = top.sum() - (1.0 - frac) * top.min()
    return float(total / k)


def value_at_risk(values, phi: float) -> float:
    """Empirical upper-phi-quantile: the ceil(phi*n)-th largest sample."""
    phi = _check_phi(phi)
    arr = _as_batch(values)
    n = arr.size
    m = math.ceil(phi * n - _INT_SNAP)
    m = min(max(m, 1), n)
    return float(np.partition(arr, n - m)[n - m])
