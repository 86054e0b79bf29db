"""Constrained minimization of the single-mode uncertainty functional.

R = var(N_A) + var(a) (or its weighted form w var(N_A) + (1-w) var(a)) is
minimized over single-mode states with fixed <N_A>.  Two routes are provided:

* ``solve_min_recurrence`` uses the stationarity condition of the Lagrange
  function, a three-term recurrence in the amplitudes parametrized by
  (A, mu1, mu2).  mu2 is fixed by normalizability (the nodeless branch), mu1
  by the particle-number constraint, and A by minimizing the Lagrange dual
  along the remaining one-parameter family, where A = <a> holds.
* ``solve_min_direct`` optimizes the amplitude vector itself with SLSQP and
  polishes the KKT system with Newton steps.  It shares no code with the
  recurrence route and serves as its oracle; it also covers weighted cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq, curve_fit, minimize, minimize_scalar

from . import bounds
from .errors import ConvergenceError, DomainError, NonNormalizableError, ValidationError
from .fock import NORM_TOL, SingleModeState

CONSTRAINT_TOL = 1e-8
SELF_CONSISTENCY_TOL = 1e-8
VALUE_TOL = 1e-10


def default_cutoff(target_n: float) -> int:
    return int(math.ceil(max(50.0, target_n + 10.0 * math.sqrt(target_n) + 25.0)))


# ---------------------------------------------------------------------------
# the functional
# ---------------------------------------------------------------------------

def _raw(c: np.ndarray):
    n = np.arange(c.size, dtype=float)
    p = np.abs(c) ** 2
    mean = float(p @ n)
    second = float(p @ (n * n))
    a = complex(np.vdot(c[:-1], np.sqrt(n[1:]) * c[1:]))
    return mean, second, a


def _weights(w):
    if w is None:
        return 1.0, 1.0
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"w must lie in [0, 1], got {w!r}")
    return float(w), 1.0 - float(w)


def r_functional(state: SingleModeState, w: float | None = None) -> float:
    """var(N_A) + var(a), or w var(N_A) + (1-w) var(a) when ``w`` is given.

    var(a) = <a^dag a> - |<a>|^2 is the non-Hermitian variance.
    """
    if not state.is_normalized():
        raise ValidationError(f"state not normalized (norm^2 = {state.norm ** 2!r})")
    wn, wa = _weights(w)
    mean, second, a = _raw(state.amps)
    return wn * (second - mean * mean) + wa * (mean - abs(a) ** 2)


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecurrenceParams:
    """Parameters of c_{n+1} = (n^2 + mu1 n + mu2)/(A sqrt(n+1)) c_n - sqrt(n/(n+1)) c_{n-1}."""

    A: float
    mu1: float
    mu2: float
    cutoff: int

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A!r}")
        if self.cutoff < 10:
            raise DomainError(f"cutoff must be at least 10, got {self.cutoff!r}")


_RESCALE_AT = 1e150


def recurrence_generate(p: RecurrenceParams, run_length: int = 20, tail_tol: float = 1e-6) -> SingleModeState:
    """Generate the (unnormalized, real) amplitudes from c_0 = 1.

    Only the nodeless decaying branch is normalizable.  Past its peak that
    branch must fall below ``tail_tol`` times the peak before rounding errors
    regrow the dominant solution; the sequence is cut at that minimum.  A
    sign change or ``run_length`` consecutive growing steps before then means
    the parameters sit on a divergent branch.  When the amplitudes would
    overflow, the whole prefix is rescaled, so only ratios are meaningful.
    """
    K = p.cutoff
    c = np.zeros(K + 1)
    c[0] = 1.0
    prev, cur = 0.0, 1.0
    peak = 0
    growing = 0
    seen_peak = False
    best = 0  # index of the smallest |c| after the peak
    A = p.A
    for n in range(K):
        nxt = (n * n + p.mu1 * n + p.mu2) / (A * math.sqrt(n + 1.0)) * cur
        if n:
            nxt -= math.sqrt(n / (n + 1.0)) * prev
        if not math.isfinite(nxt):
            raise NonNormalizableError("recurrence overflowed", index=n + 1)
        if abs(nxt) > _RESCALE_AT:
            c[: n + 1] /= _RESCALE_AT
            cur /= _RESCALE_AT
            nxt /= _RESCALE_AT
            prev /= _RESCALE_AT
        c[n + 1] = nxt
        if not seen_peak:
            if abs(nxt) < abs(cur):
                seen_peak = True
                peak, best = n, n + 1
            if nxt < 0 or (nxt == 0 and cur == 0):
                raise NonNormalizableError("sign change before the peak (nodal branch)", index=n + 1)
        else:
            if nxt <= 0 or abs(nxt) > abs(c[best]):
                if abs(c[best]) <= tail_tol * abs(c[peak]):
                    c[best + 1:] = 0.0
                    return SingleModeState(c)
                if nxt <= 0:
                    raise NonNormalizableError("sign change in the tail", index=n + 1)
                growing += 1
                if growing >= run_length:
                    raise NonNormalizableError("tail grows without bound", index=n + 1)
            else:
                best = n + 1
                growing = 0
        prev, cur = cur, nxt
    if not seen_peak:
        raise NonNormalizableError("sequence never decays before the cutoff", index=K)
    if abs(c[best]) > tail_tol * abs(c[peak]):
        raise NonNormalizableError("tail not resolved within the cutoff", index=K)
    return SingleModeState(c)


def _ground_mu2(A: float, mu1: float, K: int) -> float:
    """mu2 on the nodeless normalizable branch: minus the lowest eigenvalue of the truncated problem."""
    n = np.arange(K + 1, dtype=float)
    lam = eigvalsh_tridiagonal(n * n + mu1 * n, -A * np.sqrt(n[1:]), select="i", select_range=(0, 0))
    return -float(lam[0])


@dataclass
class _Branch:
    A: float
    mu1: float
    mu2: float
    state: SingleModeState  # normalized
    dual: float

    @property
    def mean_a(self) -> float:
        return _raw(self.state.amps)[2].real


def _branch(A: float, mu1: float, K: int, T: float) -> _Branch:
    mu2 = _ground_mu2(A, mu1, K)
    # mu2 is exact to rounding, so a late blow-up is numerical; the cut point
    # (first regrowth) does not depend on tail_tol, only acceptance does
    state = recurrence_generate(RecurrenceParams(A, mu1, mu2, K), tail_tol=1e-3).normalized()
    dual = A * A - mu2 - (mu1 - 1.0) * T - T * T
    return _Branch(A, mu1, mu2, state, dual)


def _solve_mu1(A: float, T: float, K: int) -> _Branch:
    def g(mu1):
        return _raw(_branch(A, mu1, K, T).state.amps)[0] - T

    centre = 1.0 - 2.0 * T
    step = 2.0 + math.sqrt(T)
    lo, hi = centre - step, centre + step
    for _ in range(60):
        if g(lo) > 0:
            break
        lo -= step
        step *= 2.0
    else:
        raise ConvergenceError("could not bracket mu1 from below", {"A": A, "target_n": T})
    step = 2.0 + math.sqrt(T)
    for _ in range(60):
        if g(hi) < 0:
            break
        hi += step
        step *= 2.0
    else:
        raise ConvergenceError("could not bracket mu1 from above", {"A": A, "target_n": T})
    mu1 = brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    return _branch(A, mu1, K, T)


@dataclass
class MinResult:
    state: SingleModeState
    value: float
    target_n: float
    residuals: dict
    method: str
    w: float | None = None
    params: RecurrenceParams | None = None
    info: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        if self.w is None:
            return bounds.bound_L(self.target_n)
        return bounds.bound_Lw(self.target_n, self.w) if self.w < 1.0 else 0.0

    @property
    def gap(self) -> float:
        return self.value - self.bound


def _check_target(target_n: float) -> float:
    T = float(target_n)
    if not (math.isfinite(T) and T > 0):
        raise DomainError(f"target_n must be positive, got {target_n!r}")
    return T


def solve_min_recurrence(target_n: float, cutoff: int | None = None, scan_points: int = 24) -> MinResult:
    """Minimum of var(N_A) + var(a) at fixed <N_A> via the Lagrange recurrence."""
    T = _check_target(target_n)
    K = default_cutoff(T) if cutoff is None else int(cutoff)
    top = math.sqrt(T)
    grid = top * np.linspace(0.0, 1.0, scan_points + 1)[1:]
    cache: dict[float, _Branch] = {}

    def branch(A):
        A = float(A)
        if A not in cache:
            cache[A] = _solve_mu1(A, T, K)
        return cache[A]

    duals = [branch(A).dual for A in grid]
    i = int(np.argmin(duals))
    lo = grid[i - 1] if i > 0 else grid[0] * 1e-3
    hi = grid[i + 1] if i + 1 < len(grid) else top

    # at the dual minimum d(dual)/dA = 2 (A - <a>) vanishes: self-consistency
    def F(A):
        return branch(A).mean_a - A

    A_star = None
    if F(lo) > 0 > F(hi):
        A_star = brentq(F, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    else:
        res = minimize_scalar(lambda A: branch(A).dual, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        A_star = float(res.x)
    best = branch(A_star)
    state = best.state
    mean, _, a = _raw(state.amps)
    residuals = {
        "constraint": abs(mean - T),
        "self_consistency": abs(a.real - best.A),
        "norm": abs(state.norm ** 2 - 1.0),
        "dual_gap": abs(r_functional(state) - best.dual),
    }
    if residuals["constraint"] > CONSTRAINT_TOL or residuals["self_consistency"] > SELF_CONSISTENCY_TOL:
        raise ConvergenceError("recurrence solve missed its tolerances", residuals)
    return MinResult(state=state, value=r_functional(state), target_n=T, residuals=residuals,
                     method="recurrence", params=RecurrenceParams(best.A, best.mu1, best.mu2, K),
                     info={"evaluations": len(cache)})


# ---------------------------------------------------------------------------
# direct optimization
# ---------------------------------------------------------------------------

def _objective(x, n, sq, wn, wa):
    s = x @ x
    nrm = math.sqrt(s)
    c = x / nrm
    p = c * c
    mean = p @ n
    a = np.dot(c[:-1], sq * c[1:])
    val = wn * (p @ (n * n) - mean * mean) + wa * (mean - a * a)
    da = np.zeros_like(c)
    da[:-1] += sq * c[1:]
    da[1:] += sq * c[:-1]
    g = wn * (2.0 * n * n * c - 4.0 * mean * n * c) + wa * (2.0 * n * c - 2.0 * a * da)
    return val, (g - (g @ c) * c) / nrm


def _number_constraint(x, n, T):
    return (x * x) @ n / (x @ x) - T


def _number_constraint_jac(x, n, T):
    s = x @ x
    return 2.0 * x * (n - (x * x) @ n / s) / s


def _kkt(c, lam, n, sq, wn, wa, T):
    p = c * c
    mean = p @ n
    a = np.dot(c[:-1], sq * c[1:])
    Sc = np.zeros_like(c)
    Sc[:-1] += 0.5 * sq * c[1:]
    Sc[1:] += 0.5 * sq * c[:-1]
    Dc = n * c
    grad = wn * (2.0 * n * n * c - 4.0 * mean * Dc) + wa * (2.0 * Dc - 4.0 * a * Sc)
    F = np.concatenate([grad + 2.0 * lam[0] * Dc + 2.0 * lam[1] * c, [c @ c - 1.0, Dc @ c - T]])
    m = c.size
    S = np.zeros((m, m))
    idx = np.arange(m - 1)
    S[idx, idx + 1] = S[idx + 1, idx] = 0.5 * sq
    H = (wn * (2.0 * np.diag(n * n) - 4.0 * (mean * np.diag(n) + 2.0 * np.outer(Dc, Dc)))
         + wa * (2.0 * np.diag(n) - 4.0 * (a * S + 2.0 * np.outer(Sc, Sc)))
         + 2.0 * lam[0] * np.diag(n) + 2.0 * lam[1] * np.eye(m))
    J = np.zeros((m + 2, m + 2))
    J[:m, :m] = H
    J[:m, m] = J[m + 1, :m] = 2.0 * Dc
    J[:m, m + 1] = J[m, :m] = 2.0 * c
    return F, J


def _multipliers(c, n, sq, wn, wa, T):
    F, _ = _kkt(c, np.zeros(2), n, sq, wn, wa, T)
    grad = F[:-2]
    basis = np.column_stack([2.0 * n * c, 2.0 * c])
    lam, *_ = np.linalg.lstsq(basis, -grad, rcond=None)
    return lam


def _newton_polish(c, n, sq, wn, wa, T, iters=30):
    lam = _multipliers(c, n, sq, wn, wa, T)
    F, J = _kkt(c, lam, n, sq, wn, wa, T)
    res = np.linalg.norm(F)
    for _ in range(iters):
        if res < 1e-13:
            break
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        c_new, lam_new = c + step[:-2], lam + step[-2:]
        F_new, J_new = _kkt(c_new, lam_new, n, sq, wn, wa, T)
        res_new = np.linalg.norm(F_new)
        if not res_new < res:
            break
        c, lam, F, J, res = c_new, lam_new, F_new, J_new, res_new
    return c, lam, res


def _gaussian_amps(n, centre, sigma):
    logc = -((n - centre) ** 2) / (4.0 * sigma * sigma)
    c = np.exp(logc - logc.max())
    return c / np.linalg.norm(c)


def _gaussian_centre(n, sigma, T):
    """Centre giving <N> = T for a truncated Gaussian profile of width sigma."""
    def g(x0):
        c = _gaussian_amps(n, x0, sigma)
        return (c * c) @ n - T

    lo, hi = min(T, 0.0) - 1.0, T + 1.0
    step = 1.0 + sigma * sigma
    while g(lo) > 0:
        lo -= step
        step *= 2.0
    step = 1.0 + sigma
    while g(hi) < 0:
        hi += step
        step *= 2.0
        if hi > 4 * n[-1] + 100:
            raise DomainError("target not reachable within the cutoff")
    return brentq(g, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=300)


@dataclass(frozen=True)
class GaussianTrial:
    value: float
    centre: float
    sigma: float
    state: SingleModeState


def gaussian_trial(target_n: float, w: float | None = None, cutoff: int | None = None) -> GaussianTrial:
    """Best state of the form c_n ~ exp(-(n - n0)^2 / (4 sigma^2)) at fixed <N_A>."""
    T = _check_target(target_n)
    wn, wa = _weights(w)
    K = default_cutoff(T) if cutoff is None else int(cutoff)
    n = np.arange(K + 1, dtype=float)

    def value(log_sigma):
        sigma = math.exp(log_sigma)
        c = _gaussian_amps(n, _gaussian_centre(n, sigma, T), sigma)
        mean, second, a = _raw(c)
        return wn * (second - mean * mean) + wa * (mean - a.real ** 2)

    grid = np.linspace(math.log(0.05), math.log(max(1.0, 0.5 * math.sqrt(K)) * 4.0), 40)
    vals = [value(s) for s in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(value, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    log_s = float(res.x) if res.fun <= vals[i] else float(grid[i])
    sigma = math.exp(log_s)
    centre = _gaussian_centre(n, sigma, T)
    state = SingleModeState(_gaussian_amps(n, centre, sigma))
    return GaussianTrial(value=r_functional(state, w), centre=centre, sigma=sigma, state=state)


def gaussian_trial_bound(target_n: float, w: float | None = None, cutoff: int | None = None) -> float:
    """Upper bound on the constrained minimum from the Gaussian-profile family."""
    return gaussian_trial(target_n, w, cutoff).value


def solve_min_direct(target_n: float, w: float | None = None, cutoff: int | None = None,
                     seed: int = 0, restarts: int = 1) -> MinResult:
    """Minimize R (or R_w) over real amplitude vectors with SLSQP plus a KKT Newton polish.

    Starts from the best Gaussian profile and ``restarts`` seeded random
    perturbations of it; the lowest converged value wins.
    """
    T = _check_target(target_n)
    wn, wa = _weights(w)
    K = default_cutoff(T) if cutoff is None else int(cutoff)
    rng = np.random.Generator(np.random.Philox(seed))

    trial = gaussian_trial(T, w, K)
    # optimize on a window around the trial profile; amplitudes beyond
    # 12 widths of a Gaussian are below exp(-36)
    half = 12.0 * trial.sigma + 10.0
    lo = max(0, int(math.floor(trial.centre - half)))
    hi = min(K, int(math.ceil(max(trial.centre, T) + half)))
    n = np.arange(lo, hi + 1, dtype=float)
    sq = np.sqrt(n[1:])
    starts = [trial.state.amps.real[lo:hi + 1].copy()]
    k = int(round(T))
    if abs(T - k) < 1e-12 and lo <= k <= hi:
        near_number = np.full(n.size, 1e-3)
        near_number[k - lo] = 1.0
        starts.append(near_number / np.linalg.norm(near_number))
    for _ in range(restarts):
        x = starts[0] * np.exp(0.3 * rng.standard_normal(n.size)) + 1e-4 * rng.random(n.size)
        starts.append(x / np.linalg.norm(x))

    cons = [{"type": "eq", "fun": _number_constraint, "jac": _number_constraint_jac, "args": (n, T)}]
    best = None
    for x0 in starts:
        res = minimize(_objective, x0, args=(n, sq, wn, wa), jac=True, method="SLSQP",
                       constraints=cons, options={"ftol": 1e-15, "maxiter": 3000})
        c = np.abs(res.x) / np.linalg.norm(res.x)
        c, lam, kkt_res = _newton_polish(c, n, sq, wn, wa, T)
        if np.any(c < 0):
            c = np.abs(c)
        c = c / np.linalg.norm(c)
        full = np.zeros(K + 1)
        full[lo:hi + 1] = c
        state = SingleModeState(full)
        mean = _raw(full)[0]
        if abs(mean - T) > CONSTRAINT_TOL:
            continue
        val = r_functional(state, w)
        if best is None or val < best[0] - VALUE_TOL:
            best = (val, state, lam, kkt_res, res.nit)
    if best is None:
        raise ConvergenceError("direct minimization did not satisfy the constraint", {"target_n": T, "w": w})
    val, state, lam, kkt_res, nit = best
    mean, _, a = _raw(state.amps)
    residuals = {"constraint": abs(mean - T), "norm": abs(state.norm ** 2 - 1.0), "kkt": float(kkt_res)}
    params = None
    if w is None:
        params = RecurrenceParams(max(a.real, 1e-300), 1.0 - 2.0 * T + lam[0], lam[1], K)
        residuals["stationarity"] = stationarity_residual(state, params)
    return MinResult(state=state, value=val, target_n=T, residuals=residuals, method="direct",
                     w=None if w is None else float(w), params=params,
                     info={"slsqp_iterations": nit, "starts": len(starts), "window": (lo, hi)})


def stationarity_residual(state: SingleModeState, p: RecurrenceParams) -> float:
    """max_n |(n^2 + mu1 n + mu2) c_n - A (sqrt(n+1) c_{n+1} + sqrt(n) c_{n-1})| for normalized c."""
    c = state.amps.real
    n = np.arange(c.size, dtype=float)
    nb = np.zeros_like(c)
    nb[:-1] += np.sqrt(n[1:]) * c[1:]
    nb[1:] += np.sqrt(n[1:]) * c[:-1]
    r = (n * n + p.mu1 * n + p.mu2) * c - p.A * nb
    return float(np.max(np.abs(r)))


def implied_params(state: SingleModeState) -> RecurrenceParams:
    """Least-squares (mu1, mu2) making a normalized real state satisfy the recurrence, with A = <a>."""
    c = state.amps.real
    n = np.arange(c.size, dtype=float)
    A = _raw(c)[2].real
    nb = np.zeros_like(c)
    nb[:-1] += np.sqrt(n[1:]) * c[1:]
    nb[1:] += np.sqrt(n[1:]) * c[:-1]
    M = np.column_stack([n * c, c])
    rhs = A * nb - n * n * c
    (mu1, mu2), *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return RecurrenceParams(A, float(mu1), float(mu2), max(c.size - 1, 10))


# ---------------------------------------------------------------------------
# shape of the minimizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianFit:
    height: float
    centre: float
    width: float
    r2: float


def gaussian_fit(state: SingleModeState, rel_floor: float = 1e-3) -> GaussianFit:
    """Least-squares fit of height * exp(-(n - centre)^2 / (2 width^2)) to |c_n|.

    The coefficient of determination is computed over the bulk, i.e. the
    points with |c_n| above ``rel_floor`` times the peak.
    """
    c = np.abs(state.amps)
    n = np.arange(c.size, dtype=float)
    mask = c >= rel_floor * c.max()
    p = c * c / (c @ c)
    mean = p @ n
    width0 = max(math.sqrt(max(p @ (n * n) - mean * mean, 1e-6)), 0.3)

    def model(x, h, x0, s):
        return h * np.exp(-((x - x0) ** 2) / (2.0 * s * s))

    popt, _ = curve_fit(model, n[mask], c[mask], p0=(c.max(), mean, width0), maxfev=20000)
    resid = c[mask] - model(n[mask], *popt)
    ss_tot = np.sum((c[mask] - c[mask].mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return GaussianFit(height=float(popt[0]), centre=float(popt[1]), width=abs(float(popt[2])), r2=float(r2))


__all__ = [
    "RecurrenceParams", "MinResult", "GaussianTrial", "GaussianFit",
    "r_functional", "recurrence_generate", "solve_min_recurrence", "solve_min_direct",
    "gaussian_trial", "gaussian_trial_bound", "gaussian_fit",
    "stationarity_residual", "implied_params", "default_cutoff", "NORM_TOL",
]
