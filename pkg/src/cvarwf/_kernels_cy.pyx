# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled iteration kernel.

C implementation of the dual-descent loop, including the per-resolve
quantile-level bisection over the binned sample sets. Semantics match
``_kernels_py``; only speed differs.
"""

import numpy as np

from libc.math cimport fabs, log1p, sqrt

KERNEL_NAME = "compiled"


cdef int _upper_idx(double[:, ::1] bg, int i, int k_bins, double x) noexcept nogil:
    # first index k with bg[i, k] > x
    cdef int lo = 0, hi = k_bins, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if bg[i, mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef double _nu(double z, double level, double sig2, double phi,
                double[:, ::1] bg, double[:, ::1] bw, double[:, ::1] bcw,
                int i, int k_bins) noexcept nogil:
    # quantile subgradient divided by mu/phi; nonincreasing and continuous in z
    cdef double s = 0.0
    cdef double gk
    cdef int k, idx
    if z < level:
        idx = _upper_idx(bg, i, k_bins, sig2 / (level - z))
        for k in range(idx):
            gk = bg[i, k]
            s += bw[i, k] * gk / (sig2 + z * gk)
        return (1.0 - phi) + level * s - bcw[i, idx]
    for k in range(k_bins):
        gk = bg[i, k]
        s += bw[i, k] * gk / (sig2 + z * gk)
    return level * s - phi


cdef double _bisect(double lo, double hi, double level, double sig2, double phi,
                    double[:, ::1] bg, double[:, ::1] bw, double[:, ::1] bcw,
                    int i, int k_bins, double tol) noexcept nogil:
    cdef double mid = 0.5 * (lo + hi)
    cdef double val
    cdef double width_floor = 1e-15 * (hi if hi > 1.0 else 1.0)
    cdef int it
    for it in range(300):
        mid = 0.5 * (lo + hi)
        val = _nu(mid, level, sig2, phi, bg, bw, bcw, i, k_bins)
        if fabs(val) <= tol:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= width_floor:
            break
    return mid


cdef double _solve_z(double lam, double mu, double phi, double sig2,
                     double[:, ::1] bg, double[:, ::1] bw, double[:, ::1] bcw,
                     int i, int k_bins, double tol, double z_hint,
                     int* bracket_fail) noexcept nogil:
    cdef double level = lam * phi / mu
    cdef double lo, hi, a, b
    if phi >= 1.0:
        return 0.0
    if _nu(0.0, level, sig2, phi, bg, bw, bcw, i, k_bins) <= 0.0:
        return 0.0
    if z_hint > 0.0:
        a = 0.95 * z_hint
        b = 1.05 * z_hint
        if _nu(a, level, sig2, phi, bg, bw, bcw, i, k_bins) >= 0.0 and \
           _nu(b, level, sig2, phi, bg, bw, bcw, i, k_bins) <= 0.0:
            return _bisect(a, b, level, sig2, phi, bg, bw, bcw, i, k_bins, tol)
    if _nu(level, level, sig2, phi, bg, bw, bcw, i, k_bins) <= 0.0:
        return _bisect(0.0, level, level, sig2, phi, bg, bw, bcw, i, k_bins, tol)
    lo = level
    hi = 2.0 * level
    while _nu(hi, level, sig2, phi, bg, bw, bcw, i, k_bins) > 0.0:
        lo = hi
        hi *= 2.0
        if hi > 1073741824.0 * level:
            bracket_fail[0] = 1
            return z_hint
    return _bisect(lo, hi, level, sig2, phi, bg, bw, bcw, i, k_bins, tol)


def run_trajectory(
    double[:, ::1] gains,
    double[::1] sig2,
    double[::1] phi,
    double[:, ::1] bin_g,
    double[:, ::1] bin_w,
    double[:, ::1] bin_cw,
    double[::1] lam0,
    double[::1] z0,
    double mu0,
    double p0,
    double step_dual,
    double step_z,
    long z_resolve_period,
    double dual_move_tol,
    double var_tol,
    double mu_floor,
    double lambda_floor,
    double mu_cap,
    bint model_free,
    bint pf_utility,
    bint diminishing,
    double tie_tol,
    double[:, ::1] out_p,
    double[:, ::1] out_r,
    double[:, ::1] out_z,
    double[:, ::1] out_lam,
    double[::1] out_mu,
):
    cdef Py_ssize_t iters = gains.shape[0]
    cdef int n = <int> gains.shape[1]
    cdef int k_bins = <int> bin_g.shape[1]

    lam_arr = np.array(lam0, dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64)
    lam_ref_arr = lam_arr.copy()
    cdef double[::1] lam = lam_arr
    cdef double[::1] z = z_arr
    cdef double[::1] lam_ref = lam_ref_arr

    cdef double mu = mu0
    cdef double mu_ref = mu
    cdef Py_ssize_t t_res = 0
    cdef long n_resolves = 0
    cdef long diverged_at = -1
    cdef int bracket_fail = 0

    cdef Py_ssize_t t
    cdef int i, due
    cdef double sched, step, step_zn, move, m
    cdef double g, level, wf, zp, p, r, c, p_prev, g_mu, g_lam, nl

    with nogil:
        for t in range(iters):
            sched = 1.0 / sqrt(<double> (t + 1)) if diminishing else 1.0
            step = step_dual * sched

            if not model_free:
                due = 1 if (t == 0 or (t - t_res) >= z_resolve_period) else 0
                if due == 0:
                    move = fabs(mu - mu_ref) / mu_ref
                    if pf_utility:
                        for i in range(n):
                            m = fabs(lam[i] - lam_ref[i]) / lam_ref[i]
                            if m > move:
                                move = m
                    if move > dual_move_tol:
                        due = 1
                if due == 1:
                    for i in range(n):
                        z[i] = _solve_z(lam[i], mu, phi[i], sig2[i],
                                        bin_g, bin_w, bin_cw, i, k_bins,
                                        var_tol, z[i], &bracket_fail)
                    if bracket_fail:
                        diverged_at = -2
                        break
                    t_res = t
                    for i in range(n):
                        lam_ref[i] = lam[i]
                    mu_ref = mu
                    n_resolves += 1

            g_mu = p0
            step_zn = step_z * sched
            for i in range(n):
                g = gains[t, i]
                level = lam[i] * phi[i] / mu
                wf = level - sig2[i] / g if g > 0.0 else 0.0
                if wf < 0.0:
                    wf = 0.0

                if model_free:
                    zp = z[i] if z[i] > 0.0 else 0.0
                    p_prev = wf if wf > zp else zp
                    if p_prev > z[i] + tie_tol:
                        c = 1.0
                    elif p_prev < z[i] - tie_tol:
                        c = 0.0
                    else:
                        c = level * g / (sig2[i] + z[i] * g) if g > 0.0 else 0.0
                        if c < 0.0:
                            c = 0.0
                        elif c > 1.0:
                            c = 1.0
                    z[i] = z[i] + step_zn * (-mu + mu / phi[i] * c)

                zp = z[i] if z[i] > 0.0 else 0.0
                p = wf if wf > zp else zp
                r = log1p(p * g / sig2[i])

                out_p[t, i] = p
                out_r[t, i] = r
                out_z[t, i] = z[i]
                out_lam[t, i] = lam[i]

                g_mu -= z[i] + (p - z[i] if p > z[i] else 0.0) / phi[i]

                if pf_utility:
                    g_lam = r - 1.0 / lam[i]
                    nl = lam[i] - step * g_lam
                    if nl < 0.0:
                        nl = 0.0
                    if nl < lambda_floor:
                        nl = lambda_floor
                    lam[i] = nl

            out_mu[t] = mu
            mu = mu - step * g_mu
            if mu < 0.0:
                mu = 0.0
            if mu < mu_floor:
                mu = mu_floor
            if mu > mu_cap:
                diverged_at = t
                break

    if diverged_at == -2:
        return {
            "n_resolves": n_resolves,
            "diverged_at": -1,
            "bracket_failed": True,
            "final_lam": lam_arr,
            "final_mu": mu,
        }
    return {
        "n_resolves": n_resolves,
        "diverged_at": diverged_at,
        "bracket_failed": False,
        "final_lam": lam_arr,
        "final_mu": mu,
    }
