"""Analytic lower bounds for the number/annihilation uncertainty relations.

All functions take real (possibly non-integer) particle numbers, since they
are evaluated at expectation values, and broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SQRT3_HALF = np.sqrt(3.0) / 2.0


def _as_n(N):
    arr = np.asarray(N, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"particle number must be finite and >= 0, got {N!r}")
    return arr


def _as_w(w, closed_right=False):
    w = float(w)
    ok = 0.0 < w <= 1.0 if closed_right else 0.0 < w < 1.0
    if not ok:
        raise DomainError(f"weight w must lie in (0, 1), got {w!r}")
    return w


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class WeightedBoundParams:
    w: float

    def __post_init__(self):
        _as_w(self.w)

    @property
    def n_l(self) -> float:
        """Particle number where the weighted bound switches to its linear branch."""
        return (1.0 - self.w) / (4.0 * self.w)


def bound_L(N):
    """sqrt(N + 3/4) - 1; negative below N = 1/4."""
    return _out(np.sqrt(_as_n(N) + 0.75) - 1.0)


def bound_f(N):
    """Separable-state bound on var(N) + var(a-b): L(N) + L(0)."""
    return _out(np.sqrt(_as_n(N) + 0.75) + SQRT3_HALF - 2.0)


def bound_Lw(N, w):
    """Weighted single-mode bound, square-root branch above n_l, tangent line below."""
    n = _as_n(N)
    w = _as_w(w)
    n_l = (1.0 - w) / (4.0 * w)
    upper = np.sqrt(w * (1.0 - w) * (n + 0.25) + 0.25 * w) - 0.5
    lower = (n - n_l) * w * (1.0 - w)
    return _out(np.where(n >= n_l, upper, lower))


def bound_fw(N, w):
    return _out(np.asarray(bound_Lw(N, w)) + bound_Lw(0.0, w))


def bound_f_tilde(N, w):
    """Slightly weaker weighted bound whose lines are tangent to the hyperbola."""
    n = _as_n(N)
    w = _as_w(w)
    return _out(np.sqrt(w * (1.0 - w) * (n + 0.5)) - 1.0)


def hyperbola_rhs(mean_n):
    """Right-hand side <N>/4 + 1/8 of (var_n + 1)(var_diff + 1) >= ..."""
    return _out(_as_n(mean_n) / 4.0 + 0.125)


def tangent_point(mean_n: float, w: float) -> tuple[float, float]:
    """Point where w x + (1-w) y = f_tilde_w(<N>) touches (x+1)(y+1) = rhs."""
    C = hyperbola_rhs(mean_n)
    w = _as_w(w)
    u = np.sqrt((1.0 - w) * C / w)
    return float(u - 1.0), float(C / u - 1.0)


def envelope_gap(x, y, mean_n, ws):
    """min over ws of  w x + (1-w) y - f_tilde_w(<N>).

    Negative exactly when some tangent line of the hyperbola is violated; as
    the w grid is refined its sign agrees with (x+1)(y+1) - rhs.
    """
    ws = np.asarray(ws, dtype=float)
    if np.any((ws <= 0.0) | (ws >= 1.0)):
        raise DomainError("weights must lie in (0, 1)")
    ft = np.sqrt(ws * (1.0 - ws) * (float(_as_n(mean_n)) + 0.5)) - 1.0
    return float(np.min(ws * x + (1.0 - ws) * y - ft))


@dataclass(frozen=True)
class AppendixBounds:
    B1: float
    B2: float
    alpha_L: float
    min_alpha_B: float


def appendix_bounds(N: float, alpha: float, w: float | None = None) -> AppendixBounds:
    """The two elementary lower bounds on R and their optimized combination.

    ``alpha`` parametrizes |<a>|^2 = alpha <N_A>.  With ``w`` given, the
    weighted versions are returned and the threshold is n_l = (1-w)/(4w)
    instead of 1/4.  ``alpha_L`` is infinite at N = 0.
    """
    N = float(_as_n(N))
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    if w is None:
        B1 = (1.0 - alpha) * N
        B2 = np.sqrt(alpha * N) - 0.5
        sqrt_al = (np.sqrt(4.0 * N + 3.0) - 1.0) / (2.0 * np.sqrt(N)) if N > 0 else np.inf
        best = np.sqrt(N + 0.75) - 1.0 if N > 0.25 else 0.0
    else:
        w = _as_w(w)
        B1 = (1.0 - w) * (1.0 - alpha) * N
        B2 = np.sqrt(w * (1.0 - w) * alpha * N) - (1.0 - w) / 2.0
        s = 4.0 * N * (1.0 - w)
        sqrt_al = (np.sqrt(2.0 - w + s) - np.sqrt(w)) / np.sqrt(s) if s > 0 else np.inf
        n_l = (1.0 - w) / (4.0 * w)
        best = np.sqrt(w * (1.0 - w) * (N + 0.25) + w / 4.0) - 0.5 if N > n_l else 0.0
    alpha_L = float(sqrt_al ** 2) if sqrt_al < 1e150 else np.inf
    return AppendixBounds(B1=float(B1), B2=float(B2), alpha_L=alpha_L, min_alpha_B=float(best))
