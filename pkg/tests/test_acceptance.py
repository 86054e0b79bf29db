"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fockcrit import bounds
from fockcrit.cli import main
from fockcrit.criteria import (DEFAULT_WS, covariance_matrix, crit_counting, crit_covariance_ppt, crit_epr,
                               crit_hyperbola)
from fockcrit.fock import MomentReport, apply_difference, make_binomial_state, moments
from fockcrit.minimizer import gaussian_fit, gaussian_trial_bound, solve_min_direct, solve_min_recurrence
from fockcrit.sampler import SOUNDNESS_FAMILIES, soundness_scan
from fockcrit.verify import _tangency_gap
from oracles import brute_moments

ROOT = Path(__file__).resolve().parents[1]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def report(capsys, number, title, ok, detail, seconds, limit=None):
    if limit is not None and seconds >= limit:
        ok, detail = False, f"{detail}; {seconds:.1f}s over the {limit:g}s budget"
    with capsys.disabled():
        print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail} ({seconds:.1f}s)")
    assert ok, detail


def synthetic(mean_n, var_n, var_diff, counting):
    return MomentReport(mean_n=mean_n, var_n=var_n, mean_diff=0j, var_diff=var_diff,
                        counting_diff=counting, epr_x=1.0, epr_p=1.0)


def test_01_kernel_fixture(capsys):
    worst = 0.0
    with Timer() as t:
        for N in range(1, 201):
            s = make_binomial_state(N)
            m = moments(s)
            worst = max(worst, apply_difference(s).norm, abs(m.var_n), abs(m.var_diff))
    report(capsys, 1, "binomial kernel N=1..200", worst <= 1e-12, f"worst residual {worst:.2e}", t.seconds, 10)


def test_02_covariance_fixture(capsys):
    err, eig, detected = 0.0, math.inf, False
    with Timer() as t:
        for N in range(1, 11):
            rep = covariance_matrix(make_binomial_state(N))
            ref = np.array([[N + 1, 0, N, 0], [0, N + 1, 0, N], [N, 0, N + 1, 0], [0, N, 0, N + 1]])
            err = max(err, np.max(np.abs(rep.gamma - ref)))
            eig = min(eig, rep.min_eig)
            detected |= crit_covariance_ppt(rep).detected
    ok = err <= 1e-10 and eig >= -1e-9 and not detected
    report(capsys, 2, "covariance matrix N=1..10", ok, f"max entry error {err:.2e}, min eigenvalue {eig:.2e}",
           t.seconds)


def test_03_epr_baseline(capsys):
    err, brute, detected = 0.0, 0.0, False
    with Timer() as t:
        for N in range(0, 51):
            s = make_binomial_state(N)
            v = crit_epr(moments(s))
            err = max(err, abs(v.lhs - (2 * N + 2)))
            detected |= v.detected
            if N <= 8:
                b = brute_moments(s.amps)
                brute = max(brute, abs(b["epr_x"] + b["epr_p"] - v.lhs))
    ok = err <= 1e-9 and brute <= 1e-9 and not detected
    report(capsys, 3, "EPR lhs = 2N+2, N<=50", ok, f"max error {err:.2e}, brute-force diff {brute:.2e}", t.seconds)


def test_04_hyperbola_threshold(capsys):
    with Timer() as t:
        det = {N: crit_hyperbola(moments(make_binomial_state(N))).detected for N in range(0, 61)}
    ok = all(det[N] == (N >= 4) for N in det)
    first = min(N for N, d in det.items() if d)
    report(capsys, 4, "hyperbola detects binomial iff N>=4", ok, f"first detected N = {first}", t.seconds)


def test_05_soundness_monte_carlo(capsys):
    reps = []
    with Timer() as t:
        for family in SOUNDNESS_FAMILIES:
            reps.append(soundness_scan(20240601, 10_000, 50.0, family, DEFAULT_WS))
    hits = sum(r.total_detections for r in reps)
    worst = max(max(r.max_margin.values()) for r in reps)
    labels = set(reps[0].detections)
    covered = {"epr_sum", "simple_sum", "hyperbola", "counting_simple", "counting_hyperbola"} <= labels and \
        all(f"weighted_sum(w={w:g})" in labels for w in DEFAULT_WS)
    ok = hits == 0 and covered and all(r.count == 10_000 for r in reps)
    report(capsys, 5, "separable soundness, 3 x 10^4 ensembles", ok,
           f"{hits} detections, largest margin {worst:.2e}", t.seconds, 180)


def test_06_bound_properties(capsys):
    Ns = np.linspace(0.0, 400.0, 601)
    ws = np.linspace(0.01, 0.99, 99)
    fails = []
    with Timer() as t:
        L = bounds.bound_L
        n1, n2 = np.meshgrid(Ns[::5], Ns[::5])
        if np.min(L(n1) + L(n2) - L(n1 + n2) - L(0.0)) < -1e-12:
            fails.append("superadditivity of L")
        h = 1e-3
        xs = Ns + h
        g = lambda x: L(x) + x * x
        if np.min(g(xs + h) - 2 * g(xs) + g(xs - h)) <= 0:
            fails.append("second difference of L+N^2")
        slope_gap = tang = 0.0
        for w in ws:
            Lw = lambda x: bounds.bound_Lw(x, w)
            if np.min(Lw(n1) + Lw(n2) - Lw(n1 + n2) - Lw(0.0)) < -1e-12:
                fails.append(f"superadditivity of L_w, w={w:g}")
            gw = lambda x: Lw(x) + w * x * x
            if np.min(gw(xs + h) - 2 * gw(xs) + gw(xs - h)) <= 0:
                fails.append(f"second difference of L_w+wN^2, w={w:g}")
            if np.max(bounds.bound_f_tilde(Ns, w) - bounds.bound_fw(Ns, w)) > 1e-12:
                fails.append(f"f_tilde_w > f_w, w={w:g}")
            nl, d = bounds.WeightedBoundParams(w).n_l, 1e-7
            if abs(Lw(nl)) > 1e-12:
                fails.append(f"L_w(N_L) != 0, w={w:g}")
            left = (Lw(nl) - Lw(max(nl - d, 0.0))) / min(d, nl)
            slope_gap = max(slope_gap, abs((Lw(nl + d) - Lw(nl)) / d - left))
            for N in (0.0, 0.5, 3.5, 20.0, 200.0, 400.0):
                tang = max(tang, abs(_tangency_gap(N, w)))
        if slope_gap > 1e-6:
            fails.append(f"C1 slope gap {slope_gap:.2e}")
        if tang > 1e-9:
            fails.append(f"tangency gap {tang:.2e}")
    detail = "; ".join(fails[:4]) if fails else f"C1 slope gap {slope_gap:.2e}, tangency gap {tang:.2e}"
    report(capsys, 6, "bound properties", not fails, detail, t.seconds, 30)


def test_07_minimizer(capsys):
    fails, diff = [], 0.0
    with Timer() as t:
        for T in (1, 5, 10, 20, 50, 100, 200):
            rec, dire = solve_min_recurrence(T), solve_min_direct(T)
            diff = max(diff, abs(rec.value - dire.value))
            lo, hi = bounds.bound_L(T), gaussian_trial_bound(T)
            for v in (rec.value, dire.value):
                if not lo - 1e-9 <= v <= hi + 1e-9:
                    fails.append(f"T={T}: {v:.6g} outside [{lo:.6g}, {hi:.6g}]")
        r2 = gaussian_fit(solve_min_recurrence(20).state).r2
    if diff > 1e-6:
        fails.append(f"methods differ by {diff:.2e}")
    if r2 < 0.99:
        fails.append(f"R^2 {r2:.4f}")
    detail = "; ".join(fails) if fails else f"method difference {diff:.2e}, Gaussian R^2 at N=20 {r2:.5f}"
    report(capsys, 7, "minimizer cross-check", not fails, detail, t.seconds, 120)


def test_08_counting_threshold(capsys):
    fails, edge = [], 0.0
    with Timer() as t:
        for mean_n in (4.0, 10.0, 37.5, 200.0, 400.0):
            thr = mean_n / 4 - 7 / 8
            for var_n in np.linspace(0.0, mean_n / 4, 801):
                if abs(var_n - thr) < 1e-8:
                    continue
                if crit_counting(synthetic(mean_n, var_n, 3.0, 0.0))[1].detected != (var_n < thr):
                    fails.append(f"<N>={mean_n} var_n={var_n:g}")
            # bisect the diagonal boundary
            lo, hi = 0.0, mean_n
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if crit_hyperbola(synthetic(mean_n, mid, mid, mid), tol=0.0).detected:
                    lo = mid
                else:
                    hi = mid
            edge = max(edge, abs(lo - (math.sqrt(mean_n / 4 + 1 / 8) - 1)))
    if edge > 1e-9:
        fails.append(f"diagonal boundary off by {edge:.2e}")
    detail = "; ".join(fails[:4]) if fails else f"threshold exact, diagonal boundary error {edge:.2e}"
    report(capsys, 8, "counting threshold and diagonal", not fails, detail, t.seconds)


def test_09_figure_data(capsys, tmp_path, monkeypatch):
    import csv
    import io
    monkeypatch.delenv("FOCKCRIT_OUTDIR", raising=False)
    fails = []
    with Timer() as t:
        outs = [tmp_path / f"fig1_{i}.csv" for i in (0, 1)]
        for p in outs:
            if main(["fig1", "--n", "200", "--format", "csv", "--out", str(p)]) != 0:
                fails.append("fig1 exit code")
        if outs[0].read_bytes() != outs[1].read_bytes():
            fails.append("fig1 not deterministic")
        rows = list(csv.DictReader(io.StringIO(outs[0].read_text())))
        sources = {r["source"] for r in rows}
        need = {"boundary_curve", "simple_line", "weighted_line", "separable_sample"}
        if not need <= sources:
            fails.append(f"missing sources {need - sources}")
        if {r["w"] for r in rows if r["source"] == "weighted_line"} != {"0.3", "0.7"}:
            fails.append("weighted lines are not w=0.3, 0.7")
        C, f = bounds.hyperbola_rhs(200.0), bounds.bound_f(200.0)
        viol = 0
        for r in rows:
            if r["source"] == "separable_sample":
                x, y = float(r["var_n"]), float(r["var_diff"])
                bad = (x + 1) * (y + 1) < C - 1e-9 or x + y < f - 1e-9
                bad |= any(w * x + (1 - w) * y < bounds.bound_fw(200.0, w) - 1e-9 for w in (0.3, 0.7))
                viol += bad
        if viol:
            fails.append(f"{viol} separable points below a boundary")
        f2 = [tmp_path / f"fig2_{i}.csv" for i in (0, 1)]
        for p in f2:
            if main(["fig2", "--format", "csv", "--out", str(p), "--threads", "1"]) != 0:
                fails.append("fig2 exit code")
        if f2[0].read_bytes() != f2[1].read_bytes():
            fails.append("fig2 not deterministic")
        gaps = [float(r["gap"]) for r in csv.DictReader(io.StringIO(f2[0].read_text()))]
        if min(gaps) < 0:
            fails.append(f"negative fig2 gap {min(gaps):.3g}")
    detail = "; ".join(fails) if fails else f"{len(rows)} fig1 rows, 0 violations; fig2 min gap {min(gaps):.4g}"
    report(capsys, 9, "figure data", not fails, detail, t.seconds)


@pytest.mark.slow
def test_10_full_verify(capsys):
    with Timer() as t:
        proc = subprocess.run([sys.executable, "-m", "fockcrit", "verify"], cwd=ROOT, capture_output=True,
                              text=True, timeout=900)
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    report(capsys, 10, "full verify suite", proc.returncode == 0, f"exit {proc.returncode}, {last}", t.seconds,
           600)
