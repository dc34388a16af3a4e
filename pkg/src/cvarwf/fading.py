"""Channel fading models: seeded sampling and exact CDF evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class FadingKind(str, Enum):
    """Supported fading laws. Only Rayleigh ships for now; the enum exists so
    heavier-tailed laws can be added without touching callers."""

    RAYLEIGH = "rayleigh"


@dataclass(frozen=True)
class FadingModel:
    """Per-link fading law, parameterized by the mean square gain E[h^2].

    ``mean_square`` defaults to 1 so the per-terminal noise variance is the
    sole SNR knob.
    """

    kind: FadingKind = FadingKind.RAYLEIGH
    mean_square: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (FadingKind.RAYLEIGH,):
            raise ValueError(f"unsupported fading kind: {self.kind!r}")
        if not (self.mean_square > 0.0) or not np.isfinite(self.mean_square):
            raise ValueError(f"mean_square must be positive, got {self.mean_square}")

    def sample_gains(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. squared-gain samples h^2.

        For Rayleigh h, h^2 is exponential with mean ``mean_square``.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        return rng.exponential(scale=self.mean_square, size=n)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. fading coefficients h >= 0 with E[h^2] = mean_square.

        Identical generator state yields identical output.
        """
        return np.sqrt(self.sample_gains(rng, n))

    def cdf(self, h):
        """Exact analytic CDF F(h) = 1 - exp(-h^2 / mean_square)."""
        arr = np.asarray(h, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("fading coefficients are nonnegative; got h < 0")
        out = -np.expm1(-arr * arr / self.mean_square)
        return float(out) if np.isscalar(h) or arr.ndim == 0 else out

    def gain_cdf(self, g):
        """CDF of the squared gain h^2 (exponential for Rayleigh)."""
        arr = np.asarray(g, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("squared gains are nonnegative; got g < 0")
        out = -np.expm1(-arr / self.mean_square)
        return float(out) if np.isscalar(g) or arr.ndim == 0 else out
