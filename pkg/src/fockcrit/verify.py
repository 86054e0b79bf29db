"""Self-verification suite behind ``fockcrit verify``.

Each check returns a :class:`CheckResult`; the suite passes when every check
does.  ``quick`` shrinks the Monte Carlo sample sizes and the minimizer grid.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import bounds
from .criteria import DEFAULT_WS, covariance_matrix, crit_counting, crit_epr, crit_hyperbola
from .fock import MomentReport, apply_difference, make_binomial_state, moments
from .minimizer import gaussian_fit, gaussian_trial_bound, solve_min_direct, solve_min_recurrence
from .sampler import SOUNDNESS_FAMILIES, fig1_dataset, fig2_dataset, soundness_scan


@dataclass
class VerifyConfig:
    quick: bool = False
    seed: int = 20240601
    workers: int = 1
    soundness_count: int | None = None
    n_max: float = 50.0

    @property
    def samples(self) -> int:
        if self.soundness_count is not None:
            return self.soundness_count
        return 1500 if self.quick else 10000


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


# grids shared by the bound checks
def n_grid(points: int = 600) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-3, 400.0, points)])


def w_grid(points: int = 99) -> np.ndarray:
    return np.linspace(0.01, 0.99, points)


def check_kernel(n_values=range(1, 201)) -> CheckResult:
    worst = 0.0
    for N in n_values:
        st = make_binomial_state(N)
        m = moments(st)
        worst = max(worst, apply_difference(st).norm, abs(m.var_n), abs(m.var_diff))
    return CheckResult("kernel_fixture", worst <= 1e-12, f"max |(a-b)psi|, var_n, var_diff = {worst:.3g}")


def expected_gamma(N: int) -> np.ndarray:
    return np.array([[N + 1, 0, N, 0], [0, N + 1, 0, N], [N, 0, N + 1, 0], [0, N, 0, N + 1]], dtype=float)


def check_covariance(n_values=range(1, 11)) -> CheckResult:
    err, eig = 0.0, math.inf
    for N in n_values:
        rep = covariance_matrix(make_binomial_state(N))
        err = max(err, float(np.max(np.abs(rep.gamma - expected_gamma(N)))))
        eig = min(eig, rep.min_eig)
    ok = err <= 1e-10 and eig >= -1e-9
    return CheckResult("covariance_fixture", ok, f"max entry error {err:.3g}, min eig {eig:.6g}")


def check_epr(n_max: int = 50) -> CheckResult:
    err, detected = 0.0, 0
    for N in range(1, n_max + 1):
        v = crit_epr(moments(make_binomial_state(N)))
        err = max(err, abs(v.lhs - (2 * N + 2)))
        detected += v.detected
    return CheckResult("epr_baseline", err <= 1e-9 and detected == 0,
                       f"max |lhs - (2N+2)| = {err:.3g}, detections {detected}")


def check_hyperbola_threshold(n_max: int = 60) -> CheckResult:
    wrong = [N for N in range(1, n_max + 1)
             if crit_hyperbola(moments(make_binomial_state(N))).detected != (N >= 4)]
    return CheckResult("hyperbola_threshold", not wrong, f"mismatched N: {wrong}" if wrong else "detected iff N >= 4")


def check_soundness(cfg: VerifyConfig) -> CheckResult:
    parts, total = [], 0
    for fam in SOUNDNESS_FAMILIES:
        rep = soundness_scan(cfg.seed, cfg.samples, cfg.n_max, fam, DEFAULT_WS, workers=cfg.workers)
        total += rep.total_detections
        parts.append(f"{fam}: {rep.total_detections} det, max margin {max(rep.max_margin.values()):.3g}")
    return CheckResult("soundness_monte_carlo", total == 0, f"{cfg.samples}/family; " + "; ".join(parts))


def _tangency_gap(N: float, w: float) -> float:
    C = bounds.hyperbola_rhs(N)
    ft = bounds.bound_f_tilde(N, w)
    x0, _ = bounds.tangent_point(N, w)

    def gap(x):
        return (C / (x + 1.0) - 1.0) - (ft - w * x) / (1.0 - w)

    # the tangent point sits at x0; search a bracket around it on the x > -1 branch
    lo = -1.0 + 0.5 * (x0 + 1.0)
    hi = x0 + 2.0 * (x0 + 1.0)
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


def check_bounds() -> CheckResult:
    Ns, ws = n_grid(), w_grid()
    fails = []
    L = bounds.bound_L
    n1, n2 = np.meshgrid(Ns[::6], Ns[::6])
    if np.min(L(n1) + L(n2) - L(n1 + n2) - L(0.0)) < -1e-12:
        fails.append("superadditivity L")
    h = 1e-3
    g = lambda x: L(x) + x * x
    xs = Ns + h
    if np.min(g(xs + h) - 2 * g(xs) + g(xs - h)) <= 0:
        fails.append("convexity L+N^2")
    tang = 0.0
    for w in ws:
        Lw = lambda x: bounds.bound_Lw(x, w)
        if np.min(Lw(n1) + Lw(n2) - Lw(n1 + n2) - Lw(0.0)) < -1e-12:
            fails.append(f"superadditivity L_w w={w:g}")
        gw = lambda x: Lw(x) + w * x * x
        if np.min(gw(xs + h) - 2 * gw(xs) + gw(xs - h)) <= 0:
            fails.append(f"convexity L_w w={w:g}")
        if np.max(bounds.bound_f_tilde(Ns, w) - bounds.bound_fw(Ns, w)) > 1e-12:
            fails.append(f"f_tilde <= f_w w={w:g}")
        nl = (1.0 - w) / (4.0 * w)
        d = 1e-7
        if abs(Lw(nl)) > 1e-12:
            fails.append(f"L_w(N_L) != 0 w={w:g}")
        right = (Lw(nl + d) - Lw(nl)) / d
        left = (Lw(nl) - Lw(max(nl - d, 0.0))) / d
        if abs(right - left) > 1e-6:
            fails.append(f"C1 at N_L w={w:g}")
        for N in (0.0, 1.0, 3.5, 20.0, 200.0, 400.0):
            tang = max(tang, abs(_tangency_gap(N, w)))
    if tang > 1e-9:
        fails.append(f"tangency gap {tang:.3g}")
    detail = "; ".join(fails[:5]) if fails else f"all properties hold, tangency gap {tang:.3g}"
    return CheckResult("bound_properties", not fails, detail)


def check_minimizer(cfg: VerifyConfig) -> CheckResult:
    grid = (1, 5, 20) if cfg.quick else (1, 5, 10, 20, 50, 100, 200)
    fails, worst = [], 0.0
    for T in grid:
        rec = solve_min_recurrence(T)
        dire = solve_min_direct(T)
        diff = abs(rec.value - dire.value)
        worst = max(worst, diff)
        L = bounds.bound_L(T)
        trial = gaussian_trial_bound(T)
        if diff > 1e-6:
            fails.append(f"T={T}: methods differ by {diff:.3g}")
        if not L - 1e-9 <= min(rec.value, dire.value) <= trial + 1e-9:
            fails.append(f"T={T}: sandwich L <= min <= trial fails")
    r2 = gaussian_fit(solve_min_recurrence(20).state).r2
    if r2 < 0.99:
        fails.append(f"Gaussian fit R^2 = {r2:.4f}")
    detail = "; ".join(fails) if fails else f"max method difference {worst:.3g}, R^2(N=20) = {r2:.6f}"
    return CheckResult("minimizer_crosscheck", not fails, detail)


def _synthetic(mean_n, var_n, var_diff=0.0, counting=0.0):
    return MomentReport(mean_n=mean_n, var_n=var_n, mean_diff=0j, var_diff=var_diff,
                        counting_diff=counting, epr_x=1.0, epr_p=1.0)


def check_counting_threshold() -> CheckResult:
    fails = []
    for mean_n in (4.0, 10.0, 50.0, 200.0):
        thr = mean_n / 4.0 - 7.0 / 8.0
        for var_n in np.linspace(0.0, mean_n / 4.0, 401):
            det = crit_counting(_synthetic(mean_n, var_n))[1].detected
            # stay clear of the tolerance band around the threshold
            if abs(var_n - thr) > 1e-8 and det != (var_n < thr):
                fails.append(f"<N>={mean_n}, var_n={var_n:g}")
        s = math.sqrt(mean_n / 4.0 + 0.125) - 1.0
        inside = crit_hyperbola(_synthetic(mean_n, s - 1e-8, s - 1e-8)).detected
        outside = crit_hyperbola(_synthetic(mean_n, s + 1e-8, s + 1e-8)).detected
        edge = abs(crit_hyperbola(_synthetic(mean_n, s, s)).margin)
        if not inside or outside or edge > 1e-9:
            fails.append(f"diagonal boundary at <N>={mean_n}")
    return CheckResult("counting_threshold", not fails, "; ".join(fails[:5]) if fails else "threshold exact")


def check_figures(cfg: VerifyConfig) -> CheckResult:
    fig1 = fig1_dataset(200.0, seed=cfg.seed, count=60 if cfg.quick else 300)
    rows = fig2_dataset((0.25, 1, 5, 20) if cfg.quick else (0.25, 0.5, 1, 2, 5, 10, 20, 50, 100, 200))
    bad = [r for r in rows if r.status != "ok" or r.gap < -1e-9]
    probe = [p for p in fig1.points if p.source == "entangled_probe"]
    ok = fig1.violations == 0 and not bad and probe and abs(probe[0].var_n) < 1e-9
    return CheckResult("figure_data", bool(ok),
                       f"fig1 violations {fig1.violations}, min hyperbola gap {fig1.min_hyperbola_gap:.4g}, "
                       f"fig2 bad rows {len(bad)}")


def suite(cfg: VerifyConfig) -> list[tuple[str, Callable[[], CheckResult]]]:
    return [
        ("kernel_fixture", check_kernel),
        ("covariance_fixture", check_covariance),
        ("epr_baseline", check_epr),
        ("hyperbola_threshold", check_hyperbola_threshold),
        ("soundness_monte_carlo", lambda: check_soundness(cfg)),
        ("bound_properties", check_bounds),
        ("minimizer_crosscheck", lambda: check_minimizer(cfg)),
        ("counting_threshold", check_counting_threshold),
        ("figure_data", lambda: check_figures(cfg)),
    ]


def run_verify(cfg: VerifyConfig, report: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    out = []
    for name, fn in suite(cfg):
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        out.append(res)
        if report is not None:
            report(res)
    return out
