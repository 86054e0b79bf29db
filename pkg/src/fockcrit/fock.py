"""Truncated Fock-space states, ensembles and exact moment evaluation.

Two-mode pure states are dense amplitude grids ``c[n, m]`` over ``|n, m>``.
Mixed separable states are convex lists of product components; everything the
criteria need is a first or second moment, so no density matrices are formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import CapacityError, ValidationError

NORM_TOL = 1e-10
LEAKAGE_TOL = 1e-12
# per-mode cutoff capacity; also the largest supported binomial / Fock index
MAX_CUTOFF = 1024


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def _check_capacity(cutoff: int, what: str = "cutoff") -> None:
    if cutoff > MAX_CUTOFF:
        raise CapacityError(f"{what} {cutoff} exceeds capacity {MAX_CUTOFF}")


# ---------------------------------------------------------------------------
# single mode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleModeMoments:
    """<a^dag a>, <(a^dag a)^2>, <a>, <a^2> of one mode."""

    n: float
    n2: float
    a: complex
    aa: complex


@dataclass(frozen=True, eq=False)
class SingleModeState:
    """Amplitudes ``c_n`` for ``n = 0..cutoff`` of a single bosonic mode."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.atleast_1d(np.asarray(self.amps, dtype=complex))
        if amps.ndim != 1 or amps.size == 0:
            raise ValidationError("single-mode amplitudes must be a non-empty 1-D sequence")
        _check_capacity(amps.size - 1)
        object.__setattr__(self, "amps", _frozen(amps))

    @property
    def cutoff(self) -> int:
        return self.amps.size - 1

    @property
    def norm(self) -> float:
        return math.sqrt(math.fsum(np.abs(self.amps) ** 2))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm ** 2 - 1.0) <= tol

    def normalized(self) -> "SingleModeState":
        nrm = self.norm
        if nrm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return SingleModeState(self.amps / nrm)

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        if not self.is_normalized(tol):
            raise ValidationError(f"single-mode state not normalized (norm^2 = {self.norm ** 2!r})")

    @cached_property
    def moments(self) -> SingleModeMoments:
        c = self.amps
        n = np.arange(c.size, dtype=float)
        p = np.abs(c) ** 2
        sq1 = np.sqrt(n[1:])
        a = np.vdot(c[:-1], sq1 * c[1:])
        aa = np.vdot(c[:-2], np.sqrt(n[1:-1] * n[2:]) * c[2:]) if c.size > 2 else 0j
        return SingleModeMoments(n=float(p @ n), n2=float(p @ (n * n)), a=complex(a), aa=complex(aa))


def number_state(k: int, cutoff: int | None = None) -> SingleModeState:
    cutoff = k if cutoff is None else cutoff
    if k < 0 or cutoff < k:
        raise ValueError("need 0 <= k <= cutoff")
    _check_capacity(cutoff)
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[k] = 1.0
    return SingleModeState(amps)


def coherent_cutoff(alpha: complex, leakage_tol: float = LEAKAGE_TOL) -> int:
    """Smallest cutoff K with P(n >= K) < leakage_tol for a coherent state.

    Bounding the mass at and beyond K keeps both the discarded tail and the
    last retained probability |c_K|^2 below the tolerance.
    """
    if leakage_tol <= 0:
        raise ValueError("leakage_tol must be positive")
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return 0
    k = max(1, int(lam))
    # poisson.sf(k - 1) == P(n >= k)
    while poisson.sf(k - 1, lam) >= leakage_tol:
        k += max(1, int(math.sqrt(lam)) // 4)
        if k > MAX_CUTOFF:
            raise CapacityError(f"coherent state |alpha|^2={lam:g} needs cutoff beyond {MAX_CUTOFF}")
    while k > 1 and poisson.sf(k - 2, lam) < leakage_tol:
        k -= 1
    return k


def coherent_state(alpha: complex, leakage_tol: float = LEAKAGE_TOL, cutoff: int | None = None) -> SingleModeState:
    """Truncated coherent state, renormalized after truncation."""
    alpha = complex(alpha)
    if cutoff is None:
        cutoff = coherent_cutoff(alpha, leakage_tol)
    _check_capacity(cutoff)
    n = np.arange(cutoff + 1)
    if alpha == 0:
        amps = np.zeros(cutoff + 1, dtype=complex)
        amps[0] = 1.0
        return SingleModeState(amps)
    r, phi = abs(alpha), np.angle(alpha)
    logmag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    amps = np.exp(logmag) * np.exp(1j * phi * n)
    return SingleModeState(amps).normalized()


# ---------------------------------------------------------------------------
# moments that are linear in the state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawMoments:
    """Expectation values linear in the density operator.

    ``nn`` is <N^2> for the total number, ``adb`` is <a^dag b>.  Mixtures are
    formed by weighted sums of these before any variance is taken.
    """

    na: float
    nb: float
    nn: float
    a: complex
    b: complex
    aa: complex
    bb: complex
    ab: complex
    adb: complex

    def scaled(self, w: float) -> "RawMoments":
        return RawMoments(*(w * getattr(self, f) for f in _RAW_FIELDS))

    def __add__(self, other: "RawMoments") -> "RawMoments":
        return RawMoments(*(getattr(self, f) + getattr(other, f) for f in _RAW_FIELDS))

    @classmethod
    def product(cls, ma: SingleModeMoments, mb: SingleModeMoments) -> "RawMoments":
        return cls(
            na=ma.n, nb=mb.n, nn=ma.n2 + mb.n2 + 2.0 * ma.n * mb.n,
            a=ma.a, b=mb.a, aa=ma.aa, bb=mb.aa,
            ab=ma.a * mb.a, adb=ma.a.conjugate() * mb.a,
        )

    def report(self) -> "MomentReport":
        mean_n = self.na + self.nb
        mean_diff = self.a - self.b
        counting = self.na + self.nb - 2.0 * self.adb.real
        # x_A + x_B = (c + c^dag)/sqrt2 with c = a + b; p_A - p_B = (d - d^dag)/(sqrt2 i), d = a - b
        c_mean = self.a + self.b
        c_sq = self.aa + self.bb + 2.0 * self.ab
        c_num = self.na + self.nb + 2.0 * self.adb.real
        d_sq = self.aa + self.bb - 2.0 * self.ab
        return MomentReport(
            mean_n=mean_n,
            var_n=self.nn - mean_n ** 2,
            mean_diff=mean_diff,
            var_diff=counting - abs(mean_diff) ** 2,
            counting_diff=counting,
            epr_x=c_sq.real + c_num + 1.0 - 2.0 * c_mean.real ** 2,
            epr_p=counting + 1.0 - d_sq.real - 2.0 * mean_diff.imag ** 2,
        )


_RAW_FIELDS = ("na", "nb", "nn", "a", "b", "aa", "bb", "ab", "adb")


@dataclass(frozen=True)
class MomentReport:
    """The measured quantities entering every criterion.

    var_diff is the non-Hermitian variance <(a-b)^dag (a-b)> - |<a-b>|^2 and
    counting_diff is <(a-b)^dag (a-b)>, twice the population of (a-b)/sqrt2.
    """

    mean_n: float
    var_n: float
    mean_diff: complex
    var_diff: float
    counting_diff: float
    epr_x: float
    epr_p: float


# ---------------------------------------------------------------------------
# two modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Dense amplitude grid ``c[n, m]`` over ``|n, m>`` (may be unnormalized)."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim != 2 or 0 in amps.shape:
            raise ValidationError("two-mode amplitudes must be a non-empty 2-D grid")
        _check_capacity(max(amps.shape) - 1)
        object.__setattr__(self, "amps", _frozen(amps))

    @property
    def cutoffs(self) -> tuple[int, int]:
        return self.amps.shape[0] - 1, self.amps.shape[1] - 1

    @property
    def norm(self) -> float:
        return math.sqrt(math.fsum(np.abs(self.amps).ravel() ** 2))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm ** 2 - 1.0) <= tol

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        if not self.is_normalized(tol):
            raise ValidationError(f"two-mode state not normalized (norm^2 = {self.norm ** 2!r})")

    def normalized(self) -> "TwoModeState":
        nrm = self.norm
        if nrm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return TwoModeState(self.amps / nrm)

    def padded(self, cutoff_a: int, cutoff_b: int) -> "TwoModeState":
        ca, cb = self.cutoffs
        if cutoff_a < ca or cutoff_b < cb:
            raise ValueError("padding cannot shrink the grid")
        out = np.zeros((cutoff_a + 1, cutoff_b + 1), dtype=complex)
        out[: ca + 1, : cb + 1] = self.amps
        return TwoModeState(out)

    @cached_property
    def raw_moments(self) -> RawMoments:
        c = self.amps
        na_, nb_ = c.shape
        n = np.arange(na_, dtype=float)[:, None]
        m = np.arange(nb_, dtype=float)[None, :]
        p = np.abs(c) ** 2
        sqa = np.sqrt(n[1:])
        sqb = np.sqrt(m[:, 1:])
        a = np.vdot(c[:-1, :], sqa * c[1:, :])
        b = np.vdot(c[:, :-1], sqb * c[:, 1:])
        aa = np.vdot(c[:-2, :], np.sqrt(n[1:-1] * n[2:]) * c[2:, :]) if na_ > 2 else 0j
        bb = np.vdot(c[:, :-2], np.sqrt(m[:, 1:-1] * m[:, 2:]) * c[:, 2:]) if nb_ > 2 else 0j
        ab = np.vdot(c[:-1, :-1], sqa * sqb * c[1:, 1:])
        # a^dag b |n, m+1> = sqrt(n+1) sqrt(m+1) |n+1, m>
        adb = np.vdot(c[1:, :-1], sqa * sqb * c[:-1, 1:])
        tot = n + m
        return RawMoments(
            na=float(np.sum(p * n)), nb=float(np.sum(p * m)), nn=float(np.sum(p * tot * tot)),
            a=complex(a), b=complex(b), aa=complex(aa), bb=complex(bb),
            ab=complex(ab), adb=complex(adb),
        )


def product_state(state_a: SingleModeState, state_b: SingleModeState) -> TwoModeState:
    return TwoModeState(np.outer(state_a.amps, state_b.amps))


def make_binomial_state(N: int) -> TwoModeState:
    """``2^{-N/2} sum_n sqrt(binom(N, n)) |n, N-n>`` (N particles through a 50/50 splitter)."""
    if N < 0 or int(N) != N:
        raise ValueError("N must be a non-negative integer")
    N = int(N)
    _check_capacity(N, "binomial N")
    n = np.arange(N + 1)
    # exact integer binomials; int / int division is correctly rounded, so no
    # overflow and no gammaln cancellation at large N
    scale = 2 ** N
    vals = np.sqrt(np.array([math.comb(N, k) / scale for k in range(N + 1)]))
    vals /= math.sqrt(math.fsum(vals ** 2))
    amps = np.zeros((N + 1, N + 1), dtype=complex)
    amps[n, N - n] = vals
    return TwoModeState(amps)


def make_fock_product(n: int, m: int) -> TwoModeState:
    if n < 0 or m < 0:
        raise ValueError("occupations must be non-negative")
    _check_capacity(max(n, m))
    amps = np.zeros((n + 1, m + 1), dtype=complex)
    amps[n, m] = 1.0
    return TwoModeState(amps)


def make_coherent_product(alpha: complex, c: complex, leakage_tol: float = LEAKAGE_TOL) -> TwoModeState:
    """Truncated ``|alpha> (x) |alpha + c>``."""
    if leakage_tol <= 0:
        raise ValueError("leakage_tol must be positive")
    return product_state(coherent_state(alpha, leakage_tol), coherent_state(complex(alpha) + complex(c), leakage_tol))


def make_cat_state(N: int) -> TwoModeState:
    """``(|N,0> + |0,N>)/sqrt2``."""
    if N < 1:
        raise ValueError("cat state needs N >= 1")
    _check_capacity(N)
    amps = np.zeros((N + 1, N + 1), dtype=complex)
    amps[N, 0] = amps[0, N] = 1.0 / math.sqrt(2.0)
    return TwoModeState(amps)


def apply_annihilation(state: TwoModeState, mode: str) -> TwoModeState:
    """Ladder action of ``a`` (mode "A") or ``b`` (mode "B"); the result is not renormalized."""
    c = state.amps
    out = np.zeros_like(c)
    mode = mode.upper()
    if mode == "A":
        k = np.sqrt(np.arange(1, c.shape[0], dtype=float))[:, None]
        out[:-1, :] = k * c[1:, :]
    elif mode == "B":
        k = np.sqrt(np.arange(1, c.shape[1], dtype=float))[None, :]
        out[:, :-1] = k * c[:, 1:]
    else:
        raise ValueError(f"mode must be 'A' or 'B', got {mode!r}")
    return TwoModeState(out)


def apply_difference(state: TwoModeState) -> TwoModeState:
    """``(a - b)|psi>``, unnormalized."""
    return TwoModeState(apply_annihilation(state, "A").amps - apply_annihilation(state, "B").amps)


def moments(state: TwoModeState) -> MomentReport:
    state.require_normalized()
    rep = state.raw_moments.report()
    # <N^2> - <N>^2 loses ~eps <N>^2; the centred sum does not
    p = np.abs(state.amps) ** 2
    tot = np.add.outer(np.arange(p.shape[0]), np.arange(p.shape[1])) - rep.mean_n
    return replace(rep, var_n=float(np.sum(p * tot * tot)))


# ---------------------------------------------------------------------------
# beam splitter
# ---------------------------------------------------------------------------

def _block_rotation(N: int) -> np.ndarray:
    """exp((pi/4) G) on span{|k, N-k>}, G = a^dag b - b^dag a."""
    k = np.arange(N, dtype=float)
    e = np.sqrt((k + 1.0) * (N - k))
    G = np.diag(e, -1) - np.diag(e, 1)
    return expm(0.25 * math.pi * G)


def beam_splitter(state: TwoModeState) -> TwoModeState:
    """Re-express the state in the modes a' = (a+b)/sqrt2, b' = (a-b)/sqrt2.

    Output amplitudes are indexed by the primed occupations (k, l).
    """
    c = state.amps
    ca, cb = state.cutoffs
    nmax = ca + cb
    present = [N for N in range(nmax + 1) if np.any(_block(c, N) != 0)]
    top = max(present, default=0)
    _check_capacity(top)
    out = np.zeros((top + 1, top + 1), dtype=complex)
    for N in present:
        vec = np.zeros(N + 1, dtype=complex)
        lo, hi = max(0, N - cb), min(N, ca)
        idx = np.arange(lo, hi + 1)
        vec[idx] = c[idx, N - idx]
        rotated = _block_rotation(N) @ vec
        k = np.arange(N + 1)
        sign = np.where((N - k) % 2 == 0, 1.0, -1.0)
        out[k, N - k] = sign * rotated
    return TwoModeState(out)


def _block(c: np.ndarray, N: int) -> np.ndarray:
    ca, cb = c.shape[0] - 1, c.shape[1] - 1
    lo, hi = max(0, N - cb), min(N, ca)
    if lo > hi:
        return np.zeros(0, dtype=complex)
    idx = np.arange(lo, hi + 1)
    return c[idx, N - idx]


# ---------------------------------------------------------------------------
# separable ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductComponent:
    """One term ``p_k rho_k^A (x) rho_k^B`` of a separable decomposition.

    Each factor is a pure single-mode state; a mixed factor is represented by
    splitting it into several components, which leaves the ensemble unchanged.
    """

    weight: float
    state_a: SingleModeState
    state_b: SingleModeState

    def __post_init__(self):
        if not self.weight >= 0.0:
            raise ValidationError(f"component weight must be non-negative, got {self.weight!r}")

    @property
    def raw_moments(self) -> RawMoments:
        return RawMoments.product(self.state_a.moments, self.state_b.moments)


@dataclass(frozen=True)
class SeparableEnsemble:
    components: tuple[ProductComponent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_products(cls, weights: Sequence[float], states_a: Sequence[SingleModeState],
                      states_b: Sequence[SingleModeState]) -> "SeparableEnsemble":
        return cls(tuple(ProductComponent(float(w), sa, sb) for w, sa, sb in zip(weights, states_a, states_b)))

    def validate(self, tol: float = NORM_TOL) -> None:
        if not self.components:
            raise ValidationError("ensemble has no components")
        total = math.fsum(comp.weight for comp in self.components)
        if abs(total - 1.0) > tol:
            raise ValidationError(f"ensemble weights sum to {total!r}, expected 1")
        for i, comp in enumerate(self.components):
            if not (comp.state_a.is_normalized(tol) and comp.state_b.is_normalized(tol)):
                raise ValidationError(f"component {i} is not normalized")

    @property
    def raw_moments(self) -> RawMoments:
        comps = self.components
        acc = comps[0].raw_moments.scaled(comps[0].weight)
        for comp in comps[1:]:
            acc = acc + comp.raw_moments.scaled(comp.weight)
        return acc


def ensemble_moments(ens: SeparableEnsemble) -> MomentReport:
    """Moments of the mixture; variances come from mixture first/second moments."""
    ens.validate()
    return ens.raw_moments.report()
