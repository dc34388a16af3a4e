import numpy as np
import pytest

from cvarwf import (
    DualState,
    FadingModel,
    Mode,
    SolverConfig,
    SolverDivergenceError,
    TerminalConfig,
    UtilityKind,
    dual_subgradient,
    dual_update,
    run,
)
from cvarwf.solver import IterationRecord, LAMBDA_FLOOR, MU_FLOOR


def _terminals():
    third = 1.0 / 3.0
    return (
        TerminalConfig(noise_var=1.0, phi=0.9, weight=third),
        TerminalConfig(noise_var=2.0, phi=0.85, weight=third),
        TerminalConfig(noise_var=3.0, phi=0.8, weight=third),
    )


def _record(p, z, rates, phis=None):
    n = len(p)
    return IterationRecord(
        t=0,
        h=np.ones(n),
        p=np.asarray(p, dtype=float),
        z=np.asarray(z, dtype=float),
        duals=DualState(np.ones(n), 1.0),
        rates=np.asarray(rates, dtype=float),
    )


def test_dual_subgradient_examples():
    cfg = SolverConfig(p0=15.0)
    tc = (TerminalConfig(noise_var=1.0, phi=0.5),)
    _, g_mu = dual_subgradient(_record([5.0], [5.0], [1.0]), np.array([1.0]), cfg, tc)
    assert g_mu == pytest.approx(10.0)
    _, g_mu = dual_subgradient(_record([7.0], [5.0], [1.0]), np.array([1.0]), cfg, tc)
    assert g_mu == pytest.approx(6.0)
    g_lam, _ = dual_subgradient(_record([1.0], [0.0], [0.7]), np.array([0.7]), cfg, tc)
    np.testing.assert_allclose(g_lam, 0.0)


def test_dual_update_examples():
    d = dual_update(DualState(np.array([1.0]), 1.0), np.array([0.5]), 0.0, 0.1)
    assert d.lam[0] == pytest.approx(0.95)
    d = dual_update(DualState(np.array([1.0]), 0.01), np.array([0.0]), 10.0, 0.1)
    assert d.mu == 0.0
    d = dual_update(DualState(np.array([0.4, 0.6]), 0.7), np.zeros(2), 0.0, 0.1)
    np.testing.assert_array_equal(d.lam, [0.4, 0.6])
    assert d.mu == 0.7
    pinned = dual_update(DualState(np.array([0.4]), 0.7), np.array([5.0]), 0.0, 0.1, pinned_lambda=True)
    assert pinned.lam[0] == 0.4


def test_zero_iterations_returns_empty_trajectory_with_initial_duals():
    cfg = SolverConfig(p0=15.0, iterations=0)
    traj = run(cfg, _terminals(), FadingModel())
    assert len(traj) == 0
    np.testing.assert_allclose(traj.final_duals.lam, 1.0 / 3.0)
    assert traj.final_duals.mu == 1.0


def test_runs_are_bitwise_reproducible():
    cfg = SolverConfig(p0=15.0, iterations=4000, seed=5, z_resolve_period=100)
    a = run(cfg, _terminals(), FadingModel())
    b = run(cfg, _terminals(), FadingModel())
    np.testing.assert_array_equal(a.p, b.p)
    np.testing.assert_array_equal(a.mu, b.mu)
    np.testing.assert_array_equal(a.z, b.z)
    c = run(SolverConfig(p0=15.0, iterations=4000, seed=6, z_resolve_period=100), _terminals(), FadingModel())
    assert not np.array_equal(a.p, c.p)


def test_dual_feasibility_and_power_floor_along_run():
    cfg = SolverConfig(p0=5.0, iterations=3000, seed=1, z_resolve_period=50)
    traj = run(cfg, _terminals(), FadingModel())
    assert np.all(traj.lam >= 0.0)
    assert np.all(traj.mu >= MU_FLOOR)
    assert np.all(traj.p >= 0.0)
    assert np.all(traj.p >= np.maximum(traj.z, 0.0) - 1e-12)


def test_pf_keeps_lambda_floored():
    cfg = SolverConfig(
        p0=15.0, iterations=3000, seed=2, utility=UtilityKind.PROPORTIONAL_FAIRNESS,
        step_dual=2e-4, z_resolve_period=50,
    )
    traj = run(cfg, _terminals(), FadingModel())
    assert np.all(traj.lam >= LAMBDA_FLOOR)


def test_pf_lambda_floor_binds_instead_of_hitting_zero():
    # enormous budget keeps mu at its own floor, so the huge rates drive the
    # rate multiplier to the floor on the first update
    cfg = SolverConfig(
        p0=1e12, iterations=2, seed=2, utility=UtilityKind.PROPORTIONAL_FAIRNESS,
        step_dual=3.0,
    )
    terminals = (TerminalConfig(noise_var=1.0, phi=1.0, weight=5.0),)
    traj = run(cfg, terminals, FadingModel())
    assert traj.lam[1, 0] == LAMBDA_FLOOR


def test_sumrate_pins_lambda_to_weights():
    cfg = SolverConfig(p0=15.0, iterations=500, seed=3, z_resolve_period=50)
    traj = run(cfg, _terminals(), FadingModel())
    np.testing.assert_array_equal(traj.lam, np.broadcast_to(1.0 / 3.0, traj.lam.shape))
    np.testing.assert_allclose(traj.final_duals.lam, 1.0 / 3.0)


def test_divergence_detector_raises_with_diagnostics():
    cfg = SolverConfig(p0=1e-4, iterations=2000, seed=4, step_dual=1e6, z_resolve_period=50)
    with pytest.raises(SolverDivergenceError) as err:
        run(cfg, _terminals(), FadingModel())
    assert err.value.mu > 1e6
    assert err.value.iteration >= 0


def test_record_view_and_tail_window():
    cfg = SolverConfig(p0=15.0, iterations=1000, seed=5, z_resolve_period=100)
    traj = run(cfg, _terminals(), FadingModel())
    rec = traj[10]
    assert rec.t == 10
    np.testing.assert_array_equal(rec.p, traj.p[10])
    np.testing.assert_array_equal(rec.rates, traj.rates[10])
    assert rec.duals.mu == traj.mu[10]
    last = traj[-1]
    assert last.t == 999
    window = traj.tail()
    assert window.stop - window.start == 200
    with pytest.raises(IndexError):
        traj[1000]


def test_rates_match_policy_outputs():
    cfg = SolverConfig(p0=15.0, iterations=400, seed=6, z_resolve_period=50)
    traj = run(cfg, _terminals(), FadingModel())
    sig2 = np.array([tc.noise_var for tc in traj.terminals])
    np.testing.assert_allclose(
        traj.rates, np.log1p(traj.p * traj.h**2 / sig2), rtol=1e-12, atol=1e-12
    )


def test_per_terminal_fading_models():
    cfg = SolverConfig(p0=15.0, iterations=2000, seed=7, z_resolve_period=100)
    models = [FadingModel(mean_square=m) for m in (0.5, 1.0, 2.0)]
    traj = run(cfg, _terminals(), models)
    mean_sq = (traj.h**2).mean(axis=0)
    assert mean_sq[0] < mean_sq[1] < mean_sq[2]
    with pytest.raises(ValueError):
        run(cfg, _terminals(), models[:2])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(p0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(p0=1.0, step_dual=0.0)
    with pytest.raises(ValueError):
        SolverConfig(p0=1.0, iterations=-1)
    with pytest.raises(ValueError):
        SolverConfig(p0=1.0, z_resolve_period=0)


def test_model_free_mode_runs_and_tracks(rng):
    cfg = SolverConfig(
        p0=15.0, iterations=5000, seed=8, mode=Mode.MODEL_FREE, step_z=0.5,
    )
    traj = run(cfg, _terminals(), FadingModel())
    assert len(traj) == 5000
    assert traj.n_resolves == 0
    # quantile levels move away from the origin once mu settles
    assert np.any(traj.z[-1] != 0.0)
