import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvarwf import FadingKind, FadingModel


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        FadingModel(mean_square=0.0)
    with pytest.raises(ValueError):
        FadingModel(mean_square=-1.0)
    with pytest.raises(ValueError):
        FadingModel().sample(np.random.default_rng(0), 0)


def test_sampling_is_deterministic_for_a_seed():
    model = FadingModel(mean_square=1.0)
    a = model.sample(np.random.Generator(np.random.PCG64(7)), 2)
    b = model.sample(np.random.Generator(np.random.PCG64(7)), 2)
    np.testing.assert_array_equal(a, b)
    assert np.all(a >= 0.0)


@pytest.mark.parametrize("mean_square,tol", [(1.0, 0.01), (2.0, 0.02)])
def test_mean_square_gain_matches(mean_square, tol, rng):
    model = FadingModel(mean_square=mean_square)
    h = model.sample(rng, 1_000_000)
    assert abs(np.mean(h * h) - mean_square) <= tol


def test_cdf_values():
    model = FadingModel(mean_square=1.0)
    assert model.cdf(0.0) == 0.0
    assert model.cdf(math.sqrt(math.log(2.0))) == pytest.approx(0.5, abs=1e-12)
    assert model.cdf(50.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        model.cdf(-0.1)


@settings(max_examples=100)
@given(
    h1=st.floats(min_value=0.0, max_value=20.0),
    h2=st.floats(min_value=0.0, max_value=20.0),
    m=st.floats(min_value=0.1, max_value=5.0),
)
def test_cdf_monotone_and_bounded(h1, h2, m):
    model = FadingModel(mean_square=m)
    lo, hi = sorted((h1, h2))
    assert 0.0 <= model.cdf(lo) <= model.cdf(hi) <= 1.0


def test_empirical_cdf_close_to_analytic(rng):
    # Kolmogorov-Smirnov distance on 1e5 samples
    model = FadingModel(mean_square=1.3)
    h = np.sort(model.sample(rng, 100_000))
    n = h.size
    analytic = model.cdf(h)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    ks = max(np.max(upper - analytic), np.max(analytic - lower))
    assert ks <= 0.01


def test_sample_gains_match_squared_samples_in_law(rng):
    # same mean and tail mass, since h^2 is exponential
    model = FadingModel(mean_square=2.0)
    g = model.sample_gains(rng, 200_000)
    assert abs(g.mean() - 2.0) < 0.03
    assert abs(np.mean(g > 2.0 * math.log(2.0)) - 0.5) < 0.01


def test_kind_is_extensible_enum():
    assert FadingKind.RAYLEIGH.value == "rayleigh"
    assert FadingModel().kind is FadingKind.RAYLEIGH
