import math

import numpy as np
import pytest

from cvarwf import (
    Branch,
    BracketExpansionError,
    FadingModel,
    classify_branch,
    solve_var_level,
    var_supergradient_step,
    z_subgradient,
)
from cvarwf import var_levels
from cvarwf.var_levels import equal_mass_bins, h_bar, solve_weighted, _uniform_weights
from oracles import (
    grid_argmax_concave,
    grid_argmin_convex,
    mc_cvar_component,
    mc_quantile_objective,
)


def _random_params(rng):
    lam = rng.uniform(0.1, 2.0)
    mu = rng.uniform(0.05, 1.5)
    phi = rng.uniform(0.3, 0.95)
    sig2 = rng.uniform(0.4, 4.0)
    return lam, mu, phi, sig2


def test_negative_z_branch_is_constant(rng):
    gains = rng.exponential(1.0, 1000)
    for z in (-5.0, -0.2, -1e-9):
        val = z_subgradient(z, 0.7, 0.3, 0.8, 1.5, gains)
        assert val == pytest.approx(0.3 * 0.2 / 0.8, rel=1e-12)


def test_phi_one_subgradient_nonpositive_at_zero(rng):
    gains = rng.exponential(1.0, 50_000)
    assert z_subgradient(0.0, 1.0, 0.5, 1.0, 1.0, gains) <= 0.0


def test_subgradient_requires_positive_duals(rng):
    gains = rng.exponential(1.0, 10)
    with pytest.raises(ValueError):
        z_subgradient(0.5, 0.0, 1.0, 0.9, 1.0, gains)
    with pytest.raises(ValueError):
        z_subgradient(0.5, 1.0, 0.0, 0.9, 1.0, gains)


def test_subgradient_matches_finite_differences_of_mc_objective(rng):
    # common random numbers: the sampled objective's derivative is the
    # subgradient evaluated on the same sample set
    for _ in range(8):
        lam, mu, phi, sig2 = _random_params(rng)
        gains = np.sort(rng.exponential(rng.uniform(0.5, 2.0), 200_000))
        level = lam * phi / mu
        objective = mc_quantile_objective(lam, mu, phi, sig2, gains)
        for z in (0.13 * level, 0.6 * level, 1.7 * level):
            delta = 1e-5 * level
            fd = (objective(z + delta) - objective(z - delta)) / (2.0 * delta)
            sg = z_subgradient(z, lam, mu, phi, sig2, gains)
            se = 3.0 * (mu / phi) / math.sqrt(gains.size)
            assert sg == pytest.approx(fd, abs=max(se, 1e-7))


def test_subgradient_nonincreasing_in_z(rng):
    lam, mu, phi, sig2 = _random_params(rng)
    gains = rng.exponential(1.0, 100_000)
    level = lam * phi / mu
    zs = np.linspace(0.0, 3.0 * level, 40)
    vals = [z_subgradient(z, lam, mu, phi, sig2, gains) for z in zs]
    assert np.all(np.diff(vals) <= 1e-12)


def test_subgradient_continuous_across_branch_boundary(rng):
    # at z = level the truncated-expectation equation degrades into the
    # full-support one; the subgradient must be continuous there
    for _ in range(5):
        lam, mu, phi, sig2 = _random_params(rng)
        gains = rng.exponential(1.0, 200_000)
        level = lam * phi / mu
        below = z_subgradient(level * (1.0 - 1e-9), lam, mu, phi, sig2, gains)
        at = z_subgradient(level, lam, mu, phi, sig2, gains)
        assert below == pytest.approx(at, abs=1e-6 * mu / phi)


def test_h_bar_threshold():
    kappa, sig2 = 2.0, 1.5
    assert h_bar(0.0, kappa, sig2) == pytest.approx(math.sqrt(1.0 / kappa))
    assert h_bar(kappa * sig2, kappa, sig2) == math.inf
    assert h_bar(10.0 * kappa * sig2, kappa, sig2) == math.inf


def test_phi_one_solves_to_zero():
    model = FadingModel()
    for lam, mu, sig2 in [(0.3, 0.1, 1.0), (2.0, 1.0, 3.0), (1.0, 0.02, 0.5)]:
        assert solve_var_level(lam, mu, 1.0, sig2, model) == 0.0


def test_vanishing_level_solves_to_zero():
    model = FadingModel()
    assert solve_var_level(1e-7, 1.0, 0.9, 2.0, model, n_samples=10_000) == 0.0


def test_solution_satisfies_tolerance_and_branch(rng):
    model = FadingModel()
    for _ in range(10):
        lam, mu, phi, sig2 = _random_params(rng)
        gains = model.sample_gains(rng, 100_000)
        tol = 1e-6
        z_star = solve_var_level(lam, mu, phi, sig2, model, tol, gains=gains)
        branch = classify_branch(lam, mu, phi, sig2, gains).branch
        level = lam * phi / mu
        assert z_star >= 0.0
        if z_star == 0.0:
            assert branch is Branch.AT_ZERO
            assert z_subgradient(0.0, lam, mu, phi, sig2, gains) <= 0.0
        else:
            assert abs(z_subgradient(z_star, lam, mu, phi, sig2, gains)) <= tol * mu / phi
            if z_star <= level:
                assert branch is Branch.LOW
            else:
                assert branch is Branch.HIGH


def test_solver_agrees_with_objective_grid_argmax(rng):
    model = FadingModel()
    for _ in range(5):
        lam, mu, phi, sig2 = _random_params(rng)
        gains = np.sort(model.sample_gains(rng, 200_000))
        level = lam * phi / mu
        z_star = solve_var_level(lam, mu, phi, sig2, model, 1e-6, gains=gains)
        objective = mc_quantile_objective(lam, mu, phi, sig2, gains)
        z_grid = grid_argmax_concave(objective, 1e-3 * level, level)
        assert abs(z_star - z_grid) <= 2e-3 * level


def test_reference_network_first_terminal_quantile_is_zero(rng):
    # sigma^2 = 1, phi = 0.9 at unit multipliers: the at-zero condition
    # holds, and the budget-side component of the objective is minimized
    # at zero as well
    model = FadingModel()
    gains = np.sort(model.sample_gains(rng, 1_000_000))
    tol = 1e-6
    z_star = solve_var_level(1.0, 1.0, 0.9, 1.0, model, tol, gains=gains)
    component = mc_cvar_component(1.0, 1.0, 0.9, 1.0, gains)
    level = 0.9
    z_grid = grid_argmin_convex(component, 1e-3 * level, level)
    assert z_star == 0.0
    assert abs(z_star - z_grid) <= 2.0 * tol


def test_solve_validation():
    model = FadingModel()
    with pytest.raises(ValueError):
        solve_var_level(1.0, 0.0, 0.9, 1.0, model)
    with pytest.raises(ValueError):
        solve_var_level(0.0, 1.0, 0.9, 1.0, model)
    with pytest.raises(ValueError):
        solve_var_level(1.0, 1.0, 0.9, 1.0, model, tol=0.0)


def test_bracket_cap_surfaces_as_error(rng, monkeypatch):
    # force a subgradient that never crosses zero above the level
    monkeypatch.setattr(var_levels, "_normalized_subgradient", lambda *a: 1.0)
    g = np.sort(rng.exponential(1.0, 100))
    w, cw = _uniform_weights(g)
    with pytest.raises(BracketExpansionError):
        solve_weighted(1.0, 1.0, 0.5, 1.0, g, w, cw, 1e-6)


def test_supergradient_step_examples():
    # realized policy above the level: full tail indicator
    z1 = var_supergradient_step(2.0, 1.0, 1.0, 1.0, 0.5, 1.0, step=0.1, p_star=3.0)
    assert z1 == pytest.approx(2.0 + 0.1 * (-1.0 + 2.0 * 1.0))
    # realized policy below: zero indicator, unit descent
    z2 = var_supergradient_step(2.0, 1.0, 1.0, 1.0, 0.5, 1.0, step=0.1, p_star=1.0)
    assert z2 == pytest.approx(2.0 - 0.1)
    with pytest.raises(ValueError):
        var_supergradient_step(0.0, 1.0, 1.0, 0.0, 0.5, 1.0, step=0.1)


def test_supergradient_tie_uses_clamped_policy_parameter():
    lam, mu, phi, sig2 = 0.4, 0.2, 0.5, 1.0
    z, h = 1.5, 0.8
    g = h * h
    c = min(max((lam * phi / mu) * g / (sig2 + z * g), 0.0), 1.0)
    out = var_supergradient_step(z, h, lam, mu, phi, sig2, step=0.2, p_star=z)
    assert out == pytest.approx(z + 0.2 * (-mu + mu / phi * c))


def test_supergradient_long_run_average_tracks_model_based_solution(rng):
    lam, mu, phi, sig2 = 1.0 / 3.0, 0.0372, 0.85, 2.0
    model = FadingModel()
    z_star = solve_var_level(lam, mu, phi, sig2, model, 1e-8, n_samples=2_000_000, seed=90)
    h = model.sample(rng, 300_000)
    z = 0.0
    zs = np.empty(h.size)
    for t in range(h.size):
        z = var_supergradient_step(z, h[t], lam, mu, phi, sig2, step=5.0 / math.sqrt(t + 1.0))
        zs[t] = z
    tail = zs[int(0.8 * h.size):]
    assert abs(tail.mean() - z_star) / z_star <= 0.05


def test_equal_mass_bins_preserve_mass_and_mean(rng):
    gains = rng.exponential(1.3, 57_123)
    bg, bw = equal_mass_bins(gains, 512)
    assert bg.size == 512
    assert bw.sum() == pytest.approx(1.0, abs=1e-12)
    assert float(bg @ bw) == pytest.approx(gains.mean(), rel=1e-12)
    assert np.all(np.diff(bg) >= 0.0)
    small = rng.exponential(1.0, 100)
    bg2, bw2 = equal_mass_bins(small, 512)
    assert bg2.size == 100


def test_binned_solve_matches_raw_solve(rng):
    model = FadingModel()
    for _ in range(5):
        lam, mu, phi, sig2 = _random_params(rng)
        gains = model.sample_gains(rng, 100_000)
        level = lam * phi / mu
        z_raw = solve_var_level(lam, mu, phi, sig2, model, 1e-8, gains=gains)
        bg, bw = equal_mass_bins(gains, 512)
        bcw = np.concatenate([[0.0], np.cumsum(bw)])
        z_bin = solve_weighted(lam, mu, phi, sig2, bg, bw, bcw, 1e-8)
        assert abs(z_bin - z_raw) <= 2e-3 * level
