"""Pure NumPy iteration kernel.

Fallback implementation of the dual-descent loop, selected at import time
when the compiled extension is unavailable. Semantics match
``_kernels_cy`` exactly; only speed differs. See ``kernels.select``.
"""

from __future__ import annotations

import math

import numpy as np

from .var_levels import solve_weighted

KERNEL_NAME = "python"


def power_constraint_gap(p0, z, p, inv_phi) -> float:
    """Stochastic subgradient of the dual in mu: budget minus the sampled
    CVaR surrogate sum(z_i + (p_i - z_i)_+ / phi_i)."""
    return float(p0 - np.sum(z + np.maximum(p - z, 0.0) * inv_phi))


def _resolve_levels(lam, mu, phi, sig2, bin_g, bin_w, bin_cw, var_tol, z):
    for i in range(lam.size):
        if phi[i] >= 1.0:
            z[i] = 0.0
            continue
        z[i] = solve_weighted(
            lam[i], mu, phi[i], sig2[i],
            bin_g[i], bin_w[i], bin_cw[i],
            var_tol, z_hint=z[i] if z[i] > 0.0 else None,
        )


def run_trajectory(
    gains,
    sig2,
    phi,
    bin_g,
    bin_w,
    bin_cw,
    lam0,
    z0,
    mu0,
    p0,
    step_dual,
    step_z,
    z_resolve_period,
    dual_move_tol,
    var_tol,
    mu_floor,
    lambda_floor,
    mu_cap,
    model_free,
    pf_utility,
    diminishing,
    tie_tol,
    out_p,
    out_r,
    out_z,
    out_lam,
    out_mu,
):
    iters, n = gains.shape
    lam = np.array(lam0, dtype=float)
    z = np.array(z0, dtype=float)
    mu = float(mu0)
    inv_phi = 1.0 / phi
    lam_ref = lam.copy()
    mu_ref = mu
    t_res = 0
    n_resolves = 0
    diverged_at = -1

    for t in range(iters):
        sched = 1.0 / math.sqrt(t + 1.0) if diminishing else 1.0
        step = step_dual * sched

        if not model_free:
            due = t == 0 or (t - t_res) >= z_resolve_period
            if not due:
                move = abs(mu - mu_ref) / mu_ref
                if pf_utility:
                    move = max(move, float(np.max(np.abs(lam - lam_ref) / lam_ref)))
                due = move > dual_move_tol
            if due:
                _resolve_levels(lam, mu, phi, sig2, bin_g, bin_w, bin_cw, var_tol, z)
                t_res = t
                lam_ref[:] = lam
                mu_ref = mu
                n_resolves += 1

        g = gains[t]
        level = lam * phi / mu
        with np.errstate(divide="ignore"):
            wf = np.where(g > 0.0, level - sig2 / g, 0.0)
        np.maximum(wf, 0.0, out=wf)

        if model_free:
            step_zn = step_z * sched
            p_prev = np.maximum(wf, np.maximum(z, 0.0))
            c_tie = np.where(g > 0.0, level * g / (sig2 + z * g), 0.0)
            c = np.where(
                p_prev > z + tie_tol,
                1.0,
                np.where(p_prev < z - tie_tol, 0.0, np.clip(c_tie, 0.0, 1.0)),
            )
            z = z + step_zn * (-mu + mu * inv_phi * c)

        p = np.maximum(wf, np.maximum(z, 0.0))
        r = np.log1p(p * g / sig2)

        out_p[t] = p
        out_r[t] = r
        out_z[t] = z
        out_lam[t] = lam
        out_mu[t] = mu

        g_mu = power_constraint_gap(p0, z, p, inv_phi)
        if pf_utility:
            g_lam = r - 1.0 / lam
            lam = np.maximum(np.maximum(lam - step * g_lam, 0.0), lambda_floor)
        mu = max(max(mu - step * g_mu, 0.0), mu_floor)
        if mu > mu_cap:
            diverged_at = t
            break

    return {
        "n_resolves": n_resolves,
        "diverged_at": diverged_at,
        "bracket_failed": False,
        "final_lam": lam,
        "final_mu": mu,
    }
