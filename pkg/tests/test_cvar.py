import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvarwf import cvar_objective, empirical_cvar, value_at_risk

batches = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False),
    min_size=1,
    max_size=200,
)


def test_objective_examples():
    assert cvar_objective(0.0, [1, 2, 3, 4], 1.0) == pytest.approx(2.5)
    assert cvar_objective(4.0, [1, 2, 3, 4], 0.5) == pytest.approx(4.0)
    assert cvar_objective(2.0, [1, 2, 3, 4], 0.5) == pytest.approx(3.5)


def test_empirical_cvar_examples():
    assert empirical_cvar([1, 2, 3, 4], 0.5) == pytest.approx(3.5)
    assert empirical_cvar([1, 2, 3, 4], 1.0) == pytest.approx(2.5)
    for phi in (0.1, 0.37, 0.8, 1.0):
        assert empirical_cvar([7.0, 7.0, 7.0], phi) == pytest.approx(7.0)


def test_value_at_risk_examples():
    assert value_at_risk([1, 2, 3, 4], 0.5) == 3.0
    assert value_at_risk([1, 2, 3, 4], 1.0) == 1.0
    assert value_at_risk([5.0], 0.3) == 5.0


def test_phi_validation():
    for fn in (empirical_cvar, value_at_risk):
        with pytest.raises(ValueError):
            fn([1.0], 0.0)
        with pytest.raises(ValueError):
            fn([1.0], 1.2)
    with pytest.raises(ValueError):
        cvar_objective(0.0, [1.0], -0.5)
    with pytest.raises(ValueError):
        empirical_cvar([], 0.5)


@settings(max_examples=150)
@given(batch=batches)
def test_cvar_at_one_is_exactly_the_mean(batch):
    arr = np.asarray(batch, dtype=float)
    assert empirical_cvar(arr, 1.0) == arr.mean()


@settings(max_examples=100)
@given(batch=batches)
def test_cvar_nonincreasing_in_phi(batch):
    values = [empirical_cvar(batch, phi) for phi in np.linspace(0.1, 1.0, 10)]
    assert np.all(np.diff(values) <= 1e-9)
    assert min(batch) - 1e-9 <= values[-1] <= max(batch) + 1e-9


@settings(max_examples=100)
@given(
    batch=st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=100
    ),
    phi=st.floats(min_value=0.05, max_value=1.0),
    shift=st.floats(min_value=-100, max_value=100),
    scale=st.floats(min_value=0.01, max_value=50),
)
def test_translation_and_homogeneity(batch, phi, shift, scale):
    arr = np.asarray(batch, dtype=float)
    base = empirical_cvar(arr, phi)
    assert empirical_cvar(arr + shift, phi) == pytest.approx(base + shift, abs=1e-9)
    assert empirical_cvar(scale * arr, phi) == pytest.approx(scale * base, abs=1e-8, rel=1e-12)


@settings(max_examples=100)
@given(batch=batches, phi=st.floats(min_value=0.05, max_value=1.0))
def test_cvar_minimizes_the_objective_over_sample_points(batch, phi):
    # the minimizer of the objective is attained at a sample point for the
    # empirical measure, so scanning samples is an exact grid
    best = min(cvar_objective(z, batch, phi) for z in batch)
    assert empirical_cvar(batch, phi) == pytest.approx(best, abs=1e-9, rel=1e-12)


@settings(max_examples=60)
@given(batch=batches, phi=st.floats(min_value=0.05, max_value=1.0))
def test_var_is_objective_minimizer(batch, phi):
    z = value_at_risk(batch, phi)
    assert z in np.asarray(batch, dtype=float)
    assert cvar_objective(z, batch, phi) == pytest.approx(
        empirical_cvar(batch, phi), abs=1e-9, rel=1e-12
    )
