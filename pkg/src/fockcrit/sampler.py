"""Random separable ensembles, boundary curves and the two figure datasets.

Randomness comes from numpy's Philox counter-based generator.  Samples are
drawn in fixed-size chunks whose streams are keyed by (seed, family, chunk
index), so the output does not depend on how many workers are used.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import bounds
from .criteria import DEFAULT_WS, DETECTION_TOL, evaluate_moments
from .errors import ConvergenceError, DomainError, NonNormalizableError
from .fock import (MomentReport, ProductComponent, SeparableEnsemble, SingleModeState, coherent_state,
                   ensemble_moments, make_binomial_state, moments, number_state)
from .minimizer import gaussian_fit, solve_min_direct, solve_min_recurrence

FAMILIES = ("vacuum_product", "product", "mixture", "fock_mixture", "coherent_mixture")
SOUNDNESS_FAMILIES = ("vacuum_product", "product", "mixture")
CHUNK = 500
MAX_COMPONENTS = 8


def chunk_rng(seed: int, family: str, chunk: int) -> np.random.Generator:
    key = [int(seed), FAMILIES.index(family) if family in FAMILIES else 99, int(chunk)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


# ---------------------------------------------------------------------------
# random single-mode states
# ---------------------------------------------------------------------------

PROFILE_KINDS = ("random", "gaussian", "coherent", "fock")
_PROFILE_P = (0.4, 0.3, 0.2, 0.1)


def sample_cutoff(n_max: float) -> int:
    return int(math.ceil(n_max + 10.0 * math.sqrt(n_max) + 25.0))


def random_single_mode(rng: np.random.Generator, n_max: float, kind: str | None = None,
                       centre: float | None = None) -> SingleModeState:
    """Random normalized single-mode state with mean occupation of order ``centre``.

    ``random`` profiles are complex Gaussian amplitudes under an exponentially
    damped envelope; ``gaussian`` profiles are the near-optimal shapes that
    sit close to the separable boundary.
    """
    kind = kind or PROFILE_KINDS[rng.choice(len(PROFILE_KINDS), p=_PROFILE_P)]
    K = sample_cutoff(n_max)
    nc = rng.uniform(0.0, n_max) if centre is None else float(centre)
    n = np.arange(K + 1, dtype=float)
    if kind == "random":
        damping = rng.uniform(0.5, 2.0 + math.sqrt(max(nc, 1.0)))
        env = np.exp(-np.abs(n - nc) / damping)
        amps = (rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1)) * env
    elif kind == "gaussian":
        sigma = rng.uniform(0.25, 1.5) * max(nc, 1.0) ** 0.25
        logc = -((n - nc) ** 2) / (4.0 * sigma * sigma)
        amps = np.exp(logc - logc.max()) * np.exp(1j * rng.uniform(0, 2 * math.pi) * n)
    elif kind == "coherent":
        alpha = math.sqrt(nc) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        return coherent_state(alpha, cutoff=K)
    elif kind == "fock":
        return number_state(int(rng.integers(0, int(n_max) + 1)), K)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return SingleModeState(amps).normalized()


def tilt_to_mean(state: SingleModeState, target: float) -> SingleModeState:
    """Reweight c_n -> c_n exp(t n / 2) so that <N> equals ``target``."""
    c = state.amps
    n = np.arange(c.size, dtype=float)
    support = np.abs(c) > 0
    if target < n[support].min() or target > n[support].max():
        raise DomainError("target mean outside the support of the state")
    if n[support].min() == n[support].max():
        return state
    logp = np.full(c.size, -np.inf)
    logp[support] = 2.0 * np.log(np.abs(c[support]))

    def mean(t):
        lp = logp + t * n
        p = np.exp(lp - lp[support].max())
        return (p @ n) / p.sum() - target

    lo, hi = -1.0, 1.0
    while mean(lo) > 0:
        lo *= 2.0
    while mean(hi) < 0:
        hi *= 2.0
    t = brentq(mean, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=300)
    lp = 0.5 * (logp + t * n)
    out = np.zeros_like(c, dtype=complex)
    out[support] = np.exp(lp[support] - lp[support].max()) * np.exp(1j * np.angle(c[support]))
    return SingleModeState(out).normalized()


# ---------------------------------------------------------------------------
# separable ensembles
# ---------------------------------------------------------------------------

def _vacuum(K):
    return number_state(0, K)


def _sample_one(rng, family, n_max):
    K = sample_cutoff(n_max)
    if family == "vacuum_product":
        return SeparableEnsemble((ProductComponent(1.0, _vacuum(K), random_single_mode(rng, n_max)),))
    if family == "product":
        return SeparableEnsemble((ProductComponent(1.0, random_single_mode(rng, n_max / 2),
                                                   random_single_mode(rng, n_max / 2)),))
    k = int(rng.integers(1, MAX_COMPONENTS + 1))
    weights = rng.dirichlet(np.ones(k))
    weights /= math.fsum(weights)
    if family == "mixture":
        pairs = []
        for _ in range(k):
            if rng.random() < 0.25:
                pairs.append((_vacuum(K), random_single_mode(rng, n_max)))
            else:
                pairs.append((random_single_mode(rng, n_max / 2), random_single_mode(rng, n_max / 2)))
    elif family == "fock_mixture":
        total = int(rng.integers(0, int(n_max) + 1))
        occ = rng.integers(0, total + 1, size=k)
        pairs = [(number_state(int(i), K), number_state(int(total - i), K)) for i in occ]
    elif family == "coherent_mixture":
        r = math.sqrt(n_max / 4.0)
        shift = r * rng.random() * np.exp(1j * rng.uniform(0, 2 * math.pi))
        pairs = []
        for _ in range(k):
            alpha = r * rng.random() * np.exp(1j * rng.uniform(0, 2 * math.pi))
            pairs.append((coherent_state(alpha, cutoff=K), coherent_state(alpha + shift, cutoff=K)))
    else:
        raise ValueError(f"unknown family {family!r}")
    return SeparableEnsemble.from_products(weights, [p[0] for p in pairs], [p[1] for p in pairs])


def _sample_chunk(args):
    seed, family, chunk, size, n_max = args
    rng = chunk_rng(seed, family, chunk)
    return [_sample_one(rng, family, n_max) for _ in range(size)]


def _chunks(count, chunk=CHUNK):
    sizes = [chunk] * (count // chunk)
    if count % chunk:
        sizes.append(count % chunk)
    return sizes


def sample_separable(seed: int, count: int, n_max: float, family: str = "mixture",
                     workers: int = 1) -> list[SeparableEnsemble]:
    """``count`` random separable ensembles from one family, reproducible from ``seed``.

    Families: ``vacuum_product`` (|0> (x) |psi>), ``product`` (random
    products), ``mixture`` (Dirichlet-weighted mixtures of up to eight
    products), and the structured mixtures ``fock_mixture`` (|n_k>|N - n_k>)
    and ``coherent_mixture`` (|alpha_k>|alpha_k + c> with common c).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    tasks = [(seed, family, i, size, n_max) for i, size in enumerate(_chunks(count))]
    out: list[SeparableEnsemble] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_sample_chunk, tasks):
                out.extend(part)
    else:
        for t in tasks:
            out.extend(_sample_chunk(t))
    return out


@dataclass
class SoundnessReport:
    family: str
    count: int
    detections: dict = field(default_factory=dict)
    max_margin: dict = field(default_factory=dict)

    @property
    def total_detections(self) -> int:
        return sum(self.detections.values())

    @property
    def passed(self) -> bool:
        return self.total_detections == 0


def _soundness_chunk(args):
    seed, family, chunk, size, n_max, ws, tol = args
    rng = chunk_rng(seed, family, chunk)
    det: dict[str, int] = {}
    worst: dict[str, float] = {}
    for _ in range(size):
        verdicts = evaluate_moments(ensemble_moments(_sample_one(rng, family, n_max)), ws, tol)
        for v in verdicts:
            det[v.label] = det.get(v.label, 0) + int(v.detected)
            worst[v.label] = max(worst.get(v.label, -math.inf), v.margin)
    return det, worst


def soundness_scan(seed: int, count: int, n_max: float, family: str, ws: Sequence[float] = DEFAULT_WS,
                   tol: float = DETECTION_TOL, workers: int = 1) -> SoundnessReport:
    """Evaluate every moment criterion on ``count`` sampled separable ensembles.

    Streams the samples chunk by chunk; the same seed draws the same ensembles
    as :func:`sample_separable`.
    """
    tasks = [(seed, family, i, size, n_max, tuple(ws), tol) for i, size in enumerate(_chunks(count))]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_soundness_chunk, tasks))
    else:
        parts = [_soundness_chunk(t) for t in tasks]
    rep = SoundnessReport(family=family, count=count)
    for det, worst in parts:
        for k, v in det.items():
            rep.detections[k] = rep.detections.get(k, 0) + v
        for k, v in worst.items():
            rep.max_margin[k] = max(rep.max_margin.get(k, -math.inf), v)
    return rep


# ---------------------------------------------------------------------------
# the (var N, var(a-b)) plane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanePoint:
    """A point of the var(N) - var(a-b) plane.

    ``source`` is one of ``separable_sample``, ``boundary_curve`` (the
    hyperbola), ``simple_line``, ``weighted_line``, ``tangent_line`` or
    ``entangled_probe``; line sources carry their weight ``w``.
    """

    var_n: float
    var_diff: float
    mean_n: float
    source: str
    w: float | None = None


def _line(mean_n, w, rhs, source, resolution):
    # w x + (1 - w) y = rhs restricted to the first quadrant
    if rhs <= 0:
        return []
    xs = np.linspace(0.0, rhs / w, resolution)
    ys = (rhs - w * xs) / (1.0 - w)
    return [PlanePoint(float(x), float(max(y, 0.0)), mean_n, source, w) for x, y in zip(xs, ys)]


def boundary_scan(mean_n: float, w_grid: Iterable[float] = (0.3, 0.7), resolution: int = 200) -> list[PlanePoint]:
    """Hyperbola, simple-sum line, weighted lines and tangent lines at fixed <N>."""
    if not mean_n > 0:
        raise DomainError("mean_n must be positive")
    pts: list[PlanePoint] = []
    C = bounds.hyperbola_rhs(mean_n)
    if C > 1.0:
        xs = np.linspace(0.0, C - 1.0, resolution)
        pts += [PlanePoint(float(x), float(max(C / (x + 1.0) - 1.0, 0.0)), mean_n, "boundary_curve")
                for x in xs]
    f = bounds.bound_f(mean_n)
    if f > 0:
        xs = np.linspace(0.0, f, resolution)
        pts += [PlanePoint(float(x), float(max(f - x, 0.0)), mean_n, "simple_line") for x in xs]
    for w in w_grid:
        pts += _line(mean_n, float(w), bounds.bound_fw(mean_n, w), "weighted_line", resolution)
    for w in w_grid:
        pts += _line(mean_n, float(w), bounds.bound_f_tilde(mean_n, w), "tangent_line", resolution)
    return pts


def plane_point(m: MomentReport, source: str = "separable_sample", w: float | None = None) -> PlanePoint:
    return PlanePoint(float(m.var_n), float(m.var_diff), float(m.mean_n), source, w)


@dataclass
class Fig1Data:
    points: list[PlanePoint]
    violations: int
    min_hyperbola_gap: float
    min_simple_gap: float

    def rows(self):
        for p in self.points:
            yield (p.source, "" if p.w is None else p.w, p.var_n, p.var_diff, p.mean_n)


FIG1_COLUMNS = ("source", "w", "var_n", "var_diff", "mean_n")


def fig1_dataset(mean_n: float = 200.0, seed: int = 0, count: int = 400, w_grid=(0.3, 0.7),
                 optimized_ws: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
                 resolution: int = 200) -> Fig1Data:
    """Boundary curves plus separable states whose mean total number is ``mean_n``.

    Separable points: |0> (x) |psi> with random |psi>, products and mixtures
    whose components are tilted to the target mean, and |0> (x) |psi_w> with
    |psi_w> minimizing w var(N) + (1-w) var(a) (these hug the boundary).
    Every separable point is tested against all criteria at its own <N>.
    """
    pts = boundary_scan(mean_n, w_grid, resolution)
    rng = chunk_rng(seed, "fig1", 0)
    n_max = mean_n * 1.5
    K = sample_cutoff(n_max)
    samples: list[MomentReport] = []
    for i in range(count):
        try:
            mode = i % 3
            if mode == 0:
                psi = tilt_to_mean(random_single_mode(rng, n_max, rng.choice(["random", "gaussian"]),
                                                      centre=mean_n), mean_n)
                ens = SeparableEnsemble((ProductComponent(1.0, _vacuum(K), psi),))
            elif mode == 1:
                split = rng.uniform(0.05, 0.95) * mean_n
                a = tilt_to_mean(random_single_mode(rng, n_max, "random", centre=split), split)
                b = tilt_to_mean(random_single_mode(rng, n_max, "random", centre=mean_n - split), mean_n - split)
                ens = SeparableEnsemble((ProductComponent(1.0, a, b),))
            else:
                k = int(rng.integers(2, MAX_COMPONENTS + 1))
                wts = rng.dirichlet(np.ones(k))
                wts /= math.fsum(wts)
                comps = []
                for wt in wts:
                    split = rng.uniform(0.0, 1.0) * mean_n
                    a = (_vacuum(K) if split < 1.0 else
                         tilt_to_mean(random_single_mode(rng, n_max, "gaussian", centre=split), split))
                    b = tilt_to_mean(random_single_mode(rng, n_max, "gaussian", centre=mean_n - split),
                                     mean_n - (0.0 if split < 1.0 else split))
                    comps.append(ProductComponent(float(wt), a, b))
                ens = SeparableEnsemble(tuple(comps))
        except DomainError:
            continue
        samples.append(ensemble_moments(ens))
    for w in optimized_ws:
        psi = solve_min_direct(mean_n, w=w).state
        samples.append(ensemble_moments(SeparableEnsemble((ProductComponent(1.0, _vacuum(psi.cutoff), psi),))))
    violations = 0
    hyper_gap = simple_gap = math.inf
    for m in samples:
        verdicts = evaluate_moments(m, tuple(w_grid) + tuple(optimized_ws))
        violations += int(any(v.detected for v in verdicts))
        hyper_gap = min(hyper_gap, -next(v.margin for v in verdicts if v.criterion_id == "hyperbola"))
        simple_gap = min(simple_gap, -next(v.margin for v in verdicts if v.criterion_id == "simple_sum"))
        pts.append(plane_point(m))
    if float(mean_n).is_integer():
        pts.append(plane_point(moments(make_binomial_state(int(mean_n))), "entangled_probe"))
    return Fig1Data(points=pts, violations=violations, min_hyperbola_gap=hyper_gap, min_simple_gap=simple_gap)


# ---------------------------------------------------------------------------
# minimum of R versus <N_A>
# ---------------------------------------------------------------------------

FIG2_COLUMNS = ("target_n", "method", "numeric_min", "bound_L", "gap", "cross_check", "status")
AMPLITUDE_COLUMNS = ("n", "amplitude", "gaussian_fit")


@dataclass
class Fig2Row:
    target_n: float
    method: str
    numeric_min: float
    bound_L: float
    gap: float
    cross_check: float
    status: str

    def as_tuple(self):
        return (self.target_n, self.method, self.numeric_min, self.bound_L, self.gap, self.cross_check,
                self.status)


def _fig2_row(args) -> Fig2Row:
    N, method = args
    L = bounds.bound_L(N)
    try:
        if method == "direct":
            val = solve_min_direct(N).value
            cross = math.nan
        elif method == "recurrence":
            val = solve_min_recurrence(N).value
            cross = math.nan
        elif method == "both":
            val = solve_min_recurrence(N).value
            cross = abs(val - solve_min_direct(N).value)
        else:
            raise ValueError(f"unknown method {method!r}")
    except (ConvergenceError, NonNormalizableError, DomainError) as exc:
        return Fig2Row(N, method, math.nan, L, math.nan, math.nan, f"error: {exc}")
    return Fig2Row(N, method, val, L, val - L, cross, "ok")


def fig2_dataset(n_grid: Sequence[float], method: str = "recurrence", workers: int = 1) -> list[Fig2Row]:
    """Numerical minimum of R at each <N_A> next to L(<N_A>); failures are kept as rows."""
    tasks = [(float(N), method) for N in n_grid]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fig2_row, tasks))
    return [_fig2_row(t) for t in tasks]


def fig2_amplitudes(target_n: float = 20.0, method: str = "recurrence"):
    """(n, c_n, fitted Gaussian) rows of the minimizing wave function, plus the fit."""
    res = solve_min_recurrence(target_n) if method != "direct" else solve_min_direct(target_n)
    fit = gaussian_fit(res.state)
    c = res.state.amps.real
    n = np.arange(c.size)
    model = fit.height * np.exp(-((n - fit.centre) ** 2) / (2.0 * fit.width ** 2))
    last = int(np.max(np.nonzero(np.abs(c) > 1e-12)[0])) if np.any(np.abs(c) > 1e-12) else 0
    rows = [(int(k), float(c[k]), float(model[k])) for k in range(last + 1)]
    return rows, fit
