"""Self-contained verification suite and output-data checks.

Runs reduced-scale versions of the release oracles (risk-measure axioms,
policy brute force, quantile-level grid search, the risk-neutral
waterfilling reduction, and monotonicity of utility in the confidence
level) plus structural checks on any emitted tables found in the output
directory. Failures become report entries, never exceptions.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import solver
from .cvar import empirical_cvar
from .fading import FadingModel
from .policy import optimal_power
from .scenario import PRESETS
from .var_levels import solve_var_level

log = logging.getLogger("cvarwf")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    detail: str


def _golden_max(f, a: float, b: float, iters: int = 90) -> float:
    """Maximum value of a concave function on [a, b] by golden-section search."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    return max(f(mid), fc, fd)


def _check_cvar_axioms(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(200):
        batch = rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 3), size=rng.integers(2, 400))
        if abs(empirical_cvar(batch, 1.0) - batch.mean()) != 0.0:
            return CheckResult("cvar_axioms", "fail", "CVaR at confidence 1 != mean")
        values = [empirical_cvar(batch, p) for p in np.linspace(0.1, 1.0, 10)]
        if np.any(np.diff(values) > 1e-12):
            return CheckResult("cvar_axioms", "fail", "CVaR not nonincreasing in phi")
        phi = rng.uniform(0.05, 1.0)
        c, a = rng.uniform(-5, 5), rng.uniform(0.1, 10)
        worst = max(
            worst,
            abs(empirical_cvar(batch + c, phi) - empirical_cvar(batch, phi) - c),
            abs(empirical_cvar(a * batch, phi) - a * empirical_cvar(batch, phi)),
        )
    if worst > 1e-10:
        return CheckResult("cvar_axioms", "fail", f"axiom residual {worst:.2e}")
    return CheckResult("cvar_axioms", "pass", f"200 batches, max residual {worst:.2e}")


def _check_policy_bruteforce(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(300):
        lam = rng.uniform(0.05, 3.0)
        mu = rng.uniform(0.05, 3.0)
        phi = rng.uniform(0.05, 1.0)
        sig2 = rng.uniform(0.2, 5.0)
        z = rng.uniform(-2.0, 8.0)
        h = rng.uniform(0.05, 3.0)
        g = h * h

        def objective(p: float) -> float:
            return lam * math.log1p(p * g / sig2) - (mu / phi) * max(p - z, 0.0)

        p_star = optimal_power(h, lam, mu, phi, sig2, z)
        hi = 10.0 * lam * phi / mu + 2.0 * max(z, 0.0) + 1.0
        gap = _golden_max(objective, 0.0, hi) - objective(p_star)
        worst = max(worst, gap)
    if worst > 1e-6:
        return CheckResult("policy_bruteforce", "fail", f"objective gap {worst:.2e} > 1e-6")
    return CheckResult("policy_bruteforce", "pass", f"300 tuples, max gap {worst:.2e}")


def _mc_objective_argmax(lam, mu, phi, sig2, gains_sorted, step) -> float:
    """Grid argmax of the sampled quantile-subproblem objective.

    The objective is concave in z, so a golden-style narrowing over the
    uniform grid plus a local scan finds the exact grid argmax.
    """
    g = gains_sorted
    n = g.size
    level = lam * phi / mu
    wf = np.maximum(level - sig2 / g, 0.0)
    rate_wf = np.log1p(wf * g / sig2)
    suf_rate = np.concatenate([np.cumsum(rate_wf[::-1])[::-1], [0.0]])
    suf_wf = np.concatenate([np.cumsum(wf[::-1])[::-1], [0.0]])

    def value(z: float) -> float:
        j = int(np.searchsorted(wf, z, side="right"))
        head = float(np.log1p(z * g[:j] / sig2).sum())
        pen = (mu / phi) * (suf_wf[j] - (n - j) * z)
        return -mu * z + (lam * (head + suf_rate[j]) - pen) / n

    z_hi = level
    while value(2.0 * z_hi) > value(z_hi):
        z_hi *= 2.0
    n_grid = int(math.ceil(2.0 * z_hi / step)) + 1

    cache: dict[int, float] = {}

    def val_idx(j: int) -> float:
        if j not in cache:
            cache[j] = value(j * step)
        return cache[j]

    lo, hi = 0, n_grid - 1
    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        f1, f2 = val_idx(m1), val_idx(m2)
        if f1 < f2:
            lo = m1 + 1
        elif f1 > f2:
            hi = m2 - 1
        else:
            lo, hi = m1, m2
    center = max(range(lo, hi + 1), key=val_idx)
    lo = max(center - 8, 0)
    hi = min(center + 8, n_grid - 1)
    best = max(range(lo, hi + 1), key=val_idx)
    return best * step


def _check_var_level_grid(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(4):
        lam = rng.uniform(0.1, 2.0)
        mu = rng.uniform(0.05, 1.5)
        phi = rng.uniform(0.3, 0.95)
        sig2 = rng.uniform(0.4, 4.0)
        model = FadingModel(mean_square=rng.uniform(0.5, 2.0))
        gains = np.sort(model.sample_gains(rng, 200_000))
        level = lam * phi / mu
        z_solver = solve_var_level(lam, mu, phi, sig2, model, 1e-6, gains=gains)
        z_grid = _mc_objective_argmax(lam, mu, phi, sig2, gains, 1e-3 * level)
        worst = max(worst, abs(z_solver - z_grid) / level)
    if worst > 2e-3:
        return CheckResult("var_level_grid", "fail", f"max |z* - grid|/level = {worst:.2e} > 2e-3")
    return CheckResult("var_level_grid", "pass", f"4 tuples, max |z* - grid|/level = {worst:.2e}")


def _waterfilling_mu(weights, sig2, gains, p0) -> float:
    """Budget-matching multiplier for the risk-neutral waterfilling policy,
    found by bisection on the Monte Carlo mean total power."""

    def total(mu: float) -> float:
        return sum(
            float(np.maximum(w / mu - s / g, 0.0).mean())
            for w, s, g in zip(weights, sig2, gains)
        )

    lo, hi = 1e-8, 1e4
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if total(mid) > p0:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    return math.sqrt(lo * hi)


def _check_waterfilling_reduction(kernel: str) -> CheckResult:
    scenario = PRESETS["table1-3term"]().with_phi(1.0).with_solver(iterations=50_000, seed=3)
    traj = solver.run(scenario.solver, scenario.terminals, scenario.fading, kernel=kernel)
    rng = np.random.Generator(np.random.PCG64(1234))
    weights = [tc.weight for tc in scenario.terminals]
    sig2 = [tc.noise_var for tc in scenario.terminals]
    gains = [fm.sample_gains(rng, 400_000) for fm in scenario.fading]
    mu_star = _waterfilling_mu(weights, sig2, gains, scenario.solver.p0)
    expected = np.array(
        [float(np.maximum(w / mu_star - s / g, 0.0).mean()) for w, s, g in zip(weights, sig2, gains)]
    )
    got = traj.tail_mean_powers()
    rel = np.abs(got - expected) / expected
    total_ok = abs(got.sum() / scenario.solver.p0 - 1.0) <= 0.03
    if not total_ok or np.any(rel > 0.03):
        return CheckResult(
            "waterfilling_reduction",
            "fail",
            f"per-terminal rel err {np.array2string(rel, precision=4)} vs bisected policy",
        )
    return CheckResult(
        "waterfilling_reduction", "pass", f"max rel err {rel.max():.3f} at 50k iterations"
    )


def _check_phi_monotonicity(kernel: str) -> CheckResult:
    base = PRESETS["table1-3term"]().with_solver(iterations=50_000, seed=5)
    utilities = []
    for phi in (0.7, 0.85, 1.0):
        sc = base.with_phi(phi)
        traj = solver.run(sc.solver, sc.terminals, sc.fading, kernel=kernel)
        window = traj.tail()
        per_iter = traj.rates[window] @ traj.weights
        batches = np.array_split(per_iter, 20)
        means = np.array([b.mean() for b in batches])
        utilities.append((per_iter.mean(), means.std(ddof=1) / math.sqrt(len(means))))
    for (u_lo, se_lo), (u_hi, se_hi) in zip(utilities, utilities[1:]):
        if u_lo - u_hi > math.hypot(se_lo, se_hi):
            return CheckResult(
                "phi_monotonicity",
                "fail",
                f"utility not nondecreasing in phi: {[u for u, _ in utilities]}",
            )
    return CheckResult(
        "phi_monotonicity", "pass",
        "utility nondecreasing over phi in (0.7, 0.85, 1.0): "
        + ", ".join(f"{u:.4f}" for u, _ in utilities),
    )


def _iter_tables(out_dir: Path, suffix: str):
    for path in sorted(out_dir.glob(f"*_{suffix}.txt")):
        with open(path) as fh:
            header = fh.readline().split()
        data = np.loadtxt(path, skiprows=1, ndmin=2)
        yield path, header, data


def _check_output_tables(out_dir: Path) -> list[CheckResult]:
    results = []
    found = False
    for path, header, data in _iter_tables(out_dir, "p_CDF"):
        found = True
        cols = data[:, 1:]
        ok = (
            np.all(np.diff(cols, axis=0) >= -1e-12)
            and np.all(cols >= -1e-12)
            and np.all(cols <= 1.0 + 1e-12)
            and np.allclose(cols[-1], 1.0)
        )
        results.append(
            CheckResult(f"cdf_monotone:{path.name}", "pass" if ok else "fail",
                        "CDF columns monotone in [0, 1]" if ok else "CDF column violates monotonicity")
        )
    for path, header, data in _iter_tables(out_dir, "rate_CDF"):
        found = True
        cols = data[:, 1:]
        ok = np.all(np.diff(cols, axis=0) >= -1e-12) and np.all(cols >= -1e-12) and np.all(cols <= 1 + 1e-12)
        results.append(
            CheckResult(f"cdf_monotone:{path.name}", "pass" if ok else "fail",
                        "CDF columns monotone in [0, 1]" if ok else "CDF column violates monotonicity")
        )
    for path, header, data in _iter_tables(out_dir, "p_instances"):
        found = True
        powers = data[:, 1:-1]
        ok = np.all(powers >= 0.0) and np.allclose(powers.sum(axis=1), data[:, -1], atol=1e-6)
        results.append(
            CheckResult(f"p_instances:{path.name}", "pass" if ok else "fail",
                        "powers nonnegative, sum_p consistent" if ok else "power column inconsistency")
        )
    for path, header, data in _iter_tables(out_dir, "rate_instances"):
        found = True
        ok = np.allclose(data[:, 1:-1].mean(axis=1), data[:, -1], atol=1e-9)
        results.append(
            CheckResult(f"rate_instances:{path.name}", "pass" if ok else "fail",
                        "sum_cum_r equals terminal average" if ok else "sum_cum_r mismatch")
        )
    if not found:
        results.append(
            CheckResult("output_tables", "skipped", "no emitted tables in output directory; data-dependent checks skipped")
        )
    return results


def verify(out_dir: str | Path, kernel: str = "auto", seed: int = 2024) -> dict:
    """Run the oracle suite, check any emitted tables under ``out_dir``, and
    write a machine-readable report there. Returns the report dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    checks: list[CheckResult] = []
    suite = [
        ("cvar_axioms", lambda: _check_cvar_axioms(rng)),
        ("policy_bruteforce", lambda: _check_policy_bruteforce(rng)),
        ("var_level_grid", lambda: _check_var_level_grid(rng)),
        ("waterfilling_reduction", lambda: _check_waterfilling_reduction(kernel)),
        ("phi_monotonicity", lambda: _check_phi_monotonicity(kernel)),
    ]
    for name, fn in suite:
        try:
            checks.append(fn())
        except Exception as exc:  # a crash is a failed check, not a crash of verify
            checks.append(CheckResult(name, "fail", f"exception: {exc!r}"))
    checks.extend(_check_output_tables(out))
    report = {
        "checks": [asdict(c) for c in checks],
        "n_failed": sum(c.status == "fail" for c in checks),
        "n_skipped": sum(c.status == "skipped" for c in checks),
    }
    with open(out / "verify_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    for c in checks:
        log.info("%-7s %s: %s", c.status.upper(), c.name, c.detail)
    return report
