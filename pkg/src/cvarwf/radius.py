"""Conversion between the ambiguity-ball radius and the CVaR confidence level.

The robustness knob can be stated either as a confidence level phi in (0, 1]
or as the radius eps = log(1/phi) of a density-ratio ball (in nats) around
the reference fading distribution. Everything downstream runs on phi.
"""

from __future__ import annotations

import math

#: Sentinel confidence returned for an infinite radius. It encodes the
#: essential-supremum limit and is rejected by TerminalConfig, which
#: requires phi in (0, 1].
ESS_SUP_CONFIDENCE = 0.0


def confidence_from_radius(epsilon: float) -> float:
    """Map a ball radius (nats) to a confidence level: phi = exp(-eps).

    eps = 0 gives phi = 1 (the ergodic limit where CVaR reduces to the
    expectation). eps = inf returns ``ESS_SUP_CONFIDENCE`` (0.0), which is
    not admissible as a solver input.
    """
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon < 0.0:
        raise ValueError(f"radius must be nonnegative, got {epsilon}")
    if math.isinf(epsilon):
        return ESS_SUP_CONFIDENCE
    return math.exp(-epsilon)


def radius_from_confidence(phi: float) -> float:
    """Inverse map: eps = log(1/phi). Round-trips with confidence_from_radius
    up to floating point."""
    phi = float(phi)
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"confidence level must lie in (0, 1], got {phi}")
    return -math.log(phi)
