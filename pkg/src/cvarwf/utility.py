"""Network utilities and the ergodic rate-vector subproblem.

Two utilities are supported. Weighted sumrate pins the rate multipliers to
the weights, so the rate vector drops out of the dual dynamics and is kept
only for reporting (as the running mean of observed rates). Proportional
fairness has the closed-form maximizer x* = 1/lam.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class UtilityKind(str, Enum):
    SUMRATE = "sumrate"
    PROPORTIONAL_FAIRNESS = "pf"


def optimal_rate_vector(
    utility: UtilityKind,
    lam: np.ndarray,
    mean_rates: np.ndarray | None = None,
) -> np.ndarray:
    """Maximizer of f0(x) - lam.x over the admissible rate set.

    Proportional fairness: x*_i = 1/lam_i, requiring lam > 0 elementwise.
    Sumrate: the subproblem is linear and x never feeds back into the dual
    updates; the reported value is the running empirical mean rate, which
    the caller supplies.
    """
    lam = np.asarray(lam, dtype=float)
    if utility == UtilityKind.PROPORTIONAL_FAIRNESS:
        if np.any(lam <= 0.0):
            raise ValueError("proportional fairness needs lam > 0; x is unbounded otherwise")
        return 1.0 / lam
    if mean_rates is None:
        raise ValueError("sumrate reporting requires the running mean rates")
    return np.asarray(mean_rates, dtype=float)


def utility_value(utility: UtilityKind, x, weights=None) -> float:
    """Utility of a rate vector: w.x for sumrate, sum(log x) for
    proportional fairness (which requires x > 0)."""
    x = np.asarray(x, dtype=float)
    if utility == UtilityKind.PROPORTIONAL_FAIRNESS:
        if np.any(x <= 0.0):
            raise ValueError("proportional fairness utility needs x > 0")
        return float(np.sum(np.log(x)))
    if weights is None:
        raise ValueError("sumrate utility needs weights")
    w = np.asarray(weights, dtype=float)
    if w.shape != x.shape:
        raise ValueError("weights and rates must have matching shapes")
    return float(np.dot(w, x))
