"""Numerical checks of the spectral claims behind SVD separation.

Kernels are discretized as ``F = A B^T dt``. Every check reduces to a
ratio or an inequality, so the continuous normalization constant does not
matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dynoct.errors import DegenerateInputError
from dynoct.sep import CasoratiMatrix

RANK_ONE_RTOL = 1e-8
BOUND_SLACK = 1e-10


def _arr(A) -> np.ndarray:
    return A.data if isinstance(A, CasoratiMatrix) else np.asarray(A, dtype=float)


@dataclass
class CorrelationKernel:
    F: np.ndarray
    label: str = "total"

    def eigenvalues(self) -> np.ndarray:
        """Descending eigenvalues (symmetric labels only)."""
        if self.label in ("cm", "mc"):
            raise ValueError("cross kernels are not symmetric; use singular values")
        return np.linalg.eigvalsh(0.5 * (self.F + self.F.T))[::-1]

    def trace(self) -> float:
        return float(np.trace(self.F))

    def leading_fraction(self) -> float:
        """``lambda_1 / tr``: 1 for an exactly rank-one kernel."""
        tr = self.trace()
        if tr <= 0:
            raise DegenerateInputError("kernel has zero trace")
        return float(self.eigenvalues()[0] / tr)


def correlation_kernel(A, B=None, dt: float = 1.0, label: str | None = None) -> CorrelationKernel:
    """``F[j, j'] = dt * sum_k A[j, k] B[j', k]`` (``B = A`` when omitted)."""
    a = _arr(A)
    b = a if B is None else _arr(B)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"time sample counts differ: {a.shape[1]} vs {b.shape[1]}")
    if label is None:
        label = "total" if B is None else "cross"
    return CorrelationKernel(dt * (a @ b.T), label)


def trace_dominance(Ac, Am) -> float:
    """``tr(F_cc) / tr(F_mm)``, i.e. the squared Frobenius ratio."""
    ac, am = _arr(Ac), _arr(Am)
    if ac.shape != am.shape:
        raise ValueError("collagen and metabolic matrices differ in shape")
    em = float(np.sum(am * am))
    if em == 0:
        raise DegenerateInputError("metabolic matrix has zero energy")
    return float(np.sum(ac * ac)) / em


@dataclass
class CrossBoundReport:
    cross_singular_values: np.ndarray
    bound: float
    max_ratio: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def cross_bound_check(Ac, Am, dt: float = 1.0) -> CrossBoundReport:
    """Compare ``sigma_i(F_cm)`` against ``sqrt(lambda_1(F_cc) lambda_1(F_mm))``."""
    ac, am = _arr(Ac), _arr(Am)
    if ac.shape[1] != am.shape[1]:
        raise ValueError("time sample counts differ")
    cross = np.linalg.svd(dt * (ac @ am.T), compute_uv=False)
    lam_c = max(float(np.linalg.eigvalsh(dt * (ac @ ac.T))[-1]), 0.0)
    lam_m = max(float(np.linalg.eigvalsh(dt * (am @ am.T))[-1]), 0.0)
    bound = float(np.sqrt(lam_c * lam_m))
    if bound == 0:
        top = float(cross[0]) if cross.size else 0.0
        return CrossBoundReport(cross, 0.0, 0.0, int(top > 0))
    ratio = cross / bound
    # absolute floor absorbs eigvalsh/svd round-off on the tight equality case
    slack = BOUND_SLACK + 64 * np.finfo(float).eps
    return CrossBoundReport(cross, bound, float(ratio.max()), int(np.sum(ratio > 1 + slack)))


@dataclass
class PerturbationReport:
    N: float
    sigma_rel_err: float
    vec_err: float
    bound_constant: float
    exact: bool = False

    @property
    def weyl_ok(self) -> bool:
        return self.exact or self.sigma_rel_err <= (1 + 1e-12) / self.N


def rank_one_ratio(A) -> float:
    s = np.linalg.svd(_arr(A), compute_uv=False)
    if s.size < 2:
        return 0.0
    if s[0] == 0:
        raise DegenerateInputError("matrix is zero")
    return float(s[1] / s[0])


def perturbation_report(A, Ac) -> PerturbationReport:
    """How far the leading singular pair of ``A`` is from that of rank-one ``Ac``."""
    a, ac = _arr(A), _arr(Ac)
    if a.shape != ac.shape:
        raise ValueError("A and Ac differ in shape")
    Uc, sc, _ = np.linalg.svd(ac, full_matrices=False)
    if sc[0] == 0 or (sc.size > 1 and sc[1] / sc[0] >= RANK_ONE_RTOL):
        raise ValueError("Ac is not numerically rank one")
    pert = np.linalg.norm(a - ac, 2)
    U, s, _ = np.linalg.svd(a, full_matrices=False)
    uc, u1 = Uc[:, 0], U[:, 0]
    if uc @ u1 < 0:
        u1 = -u1
    sig_err = abs(sc[0] - s[0]) / sc[0]
    vec_err = float(np.linalg.norm(uc - u1))
    if pert == 0:
        return PerturbationReport(np.inf, float(sig_err), vec_err, 0.0, exact=True)
    N = float(sc[0] / pert)
    return PerturbationReport(N, float(sig_err), vec_err, float(N * max(sig_err, vec_err)))


def weyl_check(A, Ac) -> tuple[float, float]:
    """``|sigma_1(A) - sigma_1(Ac)|`` and its Weyl bound ``||A - Ac||_op``."""
    a, ac = _arr(A), _arr(Ac)
    gap = abs(np.linalg.norm(a, 2) - np.linalg.norm(ac, 2))
    return float(gap), float(np.linalg.norm(a - ac, 2))


def _leading_left(M: np.ndarray) -> np.ndarray:
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0:
        raise DegenerateInputError("kernel is identically zero")
    return U[:, 0]


def nonorthogonality_check(Ac, Am, dt: float = 1.0) -> float:
    """``|cos|`` of the angle between the collagen factor and the metabolic factor.

    The collagen factor is the leading eigenvector of ``F_cc``; the metabolic
    one is the pixel-indexed factor of ``F_mc``, its leading left singular
    vector.
    """
    ac, am = _arr(Ac), _arr(Am)
    if ac.shape != am.shape:
        raise ValueError("collagen and metabolic matrices differ in shape")
    phi_c = _leading_left(dt * (ac @ ac.T))
    F_mc = dt * (am @ ac.T)
    if np.linalg.norm(F_mc) <= 1e-14 * np.linalg.norm(ac) * np.linalg.norm(am) * dt:
        raise DegenerateInputError("cross kernel vanishes")
    phi_m = _leading_left(F_mc)
    return float(abs(phi_c @ phi_m) / (np.linalg.norm(phi_c) * np.linalg.norm(phi_m)))
