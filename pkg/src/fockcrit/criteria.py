"""Entanglement criteria evaluated on moment reports and pure two-mode states.

Every verdict reports ``margin = rhs - lhs`` oriented so that a positive
margin means the separability inequality is violated.  A criterion only
counts as detecting entanglement when the margin exceeds ``tol``; boundary
cases are inconclusive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import bounds
from .errors import DomainError
from .fock import MomentReport, RawMoments, SeparableEnsemble, TwoModeState, ensemble_moments, moments

DETECTION_TOL = 1e-9
PSD_TOL = 1e-9

CRITERIA = ("epr_sum", "simple_sum", "weighted_sum", "hyperbola",
            "counting_simple", "counting_hyperbola", "covariance_ppt")


@dataclass(frozen=True)
class CriterionVerdict:
    criterion_id: str
    lhs: float
    rhs: float
    margin: float
    detected: bool
    w: float | None = None

    @property
    def label(self) -> str:
        return self.criterion_id if self.w is None else f"{self.criterion_id}(w={self.w:g})"


def _verdict(cid, lhs, rhs, tol, w=None):
    margin = rhs - lhs
    return CriterionVerdict(cid, float(lhs), float(rhs), float(margin), bool(margin > tol), w)


def crit_epr(m: MomentReport, tol: float = DETECTION_TOL) -> CriterionVerdict:
    """var(x_A + x_B) + var(p_A - p_B) < 2."""
    return _verdict("epr_sum", m.epr_x + m.epr_p, 2.0, tol)


def crit_simple(m: MomentReport, tol: float = DETECTION_TOL) -> CriterionVerdict:
    return _verdict("simple_sum", m.var_n + m.var_diff, bounds.bound_f(m.mean_n), tol)


def crit_weighted(m: MomentReport, w: float, tol: float = DETECTION_TOL) -> CriterionVerdict:
    if not 0.0 < w < 1.0:
        raise DomainError(f"weight w must lie in (0, 1), got {w!r}")
    lhs = w * m.var_n + (1.0 - w) * m.var_diff
    return _verdict("weighted_sum", lhs, bounds.bound_fw(m.mean_n, w), tol, w=float(w))


def crit_hyperbola(m: MomentReport, tol: float = DETECTION_TOL) -> CriterionVerdict:
    lhs = (m.var_n + 1.0) * (m.var_diff + 1.0)
    return _verdict("hyperbola", lhs, bounds.hyperbola_rhs(m.mean_n), tol)


def crit_counting(m: MomentReport, tol: float = DETECTION_TOL) -> tuple[CriterionVerdict, CriterionVerdict]:
    """Simple-sum and hyperbola tests with var(a-b) replaced by <(a-b)^dag (a-b)>.

    Since the counting term upper-bounds the variance, detection here implies
    detection by the corresponding variance-based test.
    """
    simple = _verdict("counting_simple", m.var_n + m.counting_diff, bounds.bound_f(m.mean_n), tol)
    hyper = _verdict("counting_hyperbola", (m.var_n + 1.0) * (m.counting_diff + 1.0),
                     bounds.hyperbola_rhs(m.mean_n), tol)
    return simple, hyper


# ---------------------------------------------------------------------------
# covariance matrix / partial transpose
# ---------------------------------------------------------------------------

# x = (a + a^dag)/sqrt2, p = (a - a^dag)/(sqrt2 i) acting on (a, a^dag, b, b^dag)
_QUAD = np.array([
    [1, 1, 0, 0],
    [-1j, 1j, 0, 0],
    [0, 0, 1, 1],
    [0, 0, -1j, 1j],
]) / math.sqrt(2.0)

# J_kl = i [R_k, R_l] with [x, p] = i
SYMPLECTIC_J = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])

_FLIP_PB = np.diag([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True, eq=False)
class CovarianceReport:
    """Correlation matrix in the ordering (x_A, p_A, x_B, p_B)."""

    gamma: np.ndarray
    gamma_pt: np.ndarray
    min_eig: float

    @property
    def test_matrix(self) -> np.ndarray:
        return self.gamma_pt - 1j * SYMPLECTIC_J


def correlation_matrix(raw: RawMoments) -> np.ndarray:
    """gamma_kl = <{R_k - <R_k>, R_l - <R_l>}> from linear moments."""
    a, b = raw.a, raw.b
    ac, bc = a.conjugate(), b.conjugate()
    # second moments <v_i v_j> for v = (a, a^dag, b, b^dag); modes commute
    S = np.array([
        [raw.aa, raw.na + 1.0, raw.ab, raw.adb.conjugate()],
        [raw.na, raw.aa.conjugate(), raw.adb, raw.ab.conjugate()],
        [raw.ab, raw.adb, raw.bb, raw.nb + 1.0],
        [raw.adb.conjugate(), raw.ab.conjugate(), raw.nb, raw.bb.conjugate()],
    ], dtype=complex)
    mean = np.array([a, ac, b, bc])
    C = S - np.outer(mean, mean)
    G = _QUAD @ C @ _QUAD.T
    return (G + G.T).real


def covariance_matrix(state: TwoModeState) -> CovarianceReport:
    state.require_normalized()
    gamma = correlation_matrix(state.raw_moments)
    gamma = 0.5 * (gamma + gamma.T)
    gamma_pt = _FLIP_PB @ gamma @ _FLIP_PB
    min_eig = float(np.linalg.eigvalsh(gamma_pt - 1j * SYMPLECTIC_J)[0])
    return CovarianceReport(gamma=gamma, gamma_pt=gamma_pt, min_eig=min_eig)


def crit_covariance_ppt(report: CovarianceReport, tol: float = PSD_TOL) -> CriterionVerdict:
    """Detected when gamma_pt - iJ has an eigenvalue below -tol."""
    return _verdict("covariance_ppt", report.min_eig, 0.0, tol)


# ---------------------------------------------------------------------------
# batch evaluation
# ---------------------------------------------------------------------------

DEFAULT_WS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def evaluate_moments(m: MomentReport, w_list: Iterable[float] = DEFAULT_WS,
                     tol: float = DETECTION_TOL) -> list[CriterionVerdict]:
    out = [crit_epr(m, tol), crit_simple(m, tol)]
    out.extend(crit_weighted(m, w, tol) for w in w_list)
    out.append(crit_hyperbola(m, tol))
    out.extend(crit_counting(m, tol))
    return out


def evaluate_all(obj: TwoModeState | SeparableEnsemble, w_list: Sequence[float] = DEFAULT_WS,
                 tol: float = DETECTION_TOL) -> list[CriterionVerdict]:
    """Run every criterion in a fixed order.

    The covariance partial-transpose test is only run for pure two-mode
    states; ensembles go through their mixture moments.
    """
    if isinstance(obj, SeparableEnsemble):
        return evaluate_moments(ensemble_moments(obj), w_list, tol)
    out = evaluate_moments(moments(obj), w_list, tol)
    out.append(crit_covariance_ppt(covariance_matrix(obj), tol))
    return out
