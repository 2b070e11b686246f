"""Separation of the metabolic signal from the Casorati matrix.

Singular indices are 1-based throughout (``sigma_1`` is the largest), to
match how index sets are written down; arrays are of course 0-based
internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dynoct.errors import DegenerateFitError
from dynoct.medium import PixelGrid

MIN_TV_POINTS = 8


@dataclass
class CasoratiMatrix:
    """Space-by-time matrix: row ``j`` is pixel ``j`` (row-major), column ``k`` is ``t_k``."""

    data: np.ndarray
    grid: PixelGrid

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"Casorati data must be a non-empty 2-D array, got {data.shape}")
        if data.shape[0] != self.grid.n_pixels:
            raise ValueError(f"{data.shape[0]} rows but grid has {self.grid.n_pixels} pixels")
        if not np.all(np.isfinite(data)):
            raise ValueError("Casorati matrix has non-finite entries")
        self.data = data

    @property
    def n_x(self) -> int:
        return self.data.shape[0]

    @property
    def n_t(self) -> int:
        return self.data.shape[1]


def build_casorati(records, grid: PixelGrid, part: str = "total") -> CasoratiMatrix:
    """Stack per-pixel records into a Casorati matrix.

    ``part`` selects ``"total"``, ``"collagen"`` or ``"metabolic"`` samples.
    """
    attr = {"total": "samples", "collagen": "collagen", "metabolic": "metabolic"}[part]
    if len(records) != grid.n_pixels:
        raise ValueError(f"expected {grid.n_pixels} records, got {len(records)}")
    rows: list = [None] * grid.n_pixels
    for rec in records:
        if not 0 <= rec.pixel < grid.n_pixels or rows[rec.pixel] is not None:
            raise ValueError(f"pixel {rec.pixel} is out of range or repeated")
        vals = getattr(rec, attr)
        if vals is None:
            raise ValueError(f"record {rec.pixel} has no {part} samples")
        rows[rec.pixel] = np.asarray(vals, dtype=float)
    lengths = {r.shape for r in rows}
    if len(lengths) != 1 or len(next(iter(lengths))) != 1:
        raise ValueError("records have ragged sample lengths")
    return CasoratiMatrix(np.vstack(rows), grid)


@dataclass
class SvdResult:
    sigma: np.ndarray
    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    def numerical_rank(self, rtol: float | None = None) -> int:
        if self.sigma.size == 0 or self.sigma[0] == 0:
            return 0
        if rtol is None:
            rtol = max(self.U.shape[0], self.V.shape[0]) * np.finfo(float).eps
        return int(np.sum(self.sigma > rtol * self.sigma[0]))


def _as_array(A) -> np.ndarray:
    return A.data if isinstance(A, CasoratiMatrix) else np.asarray(A, dtype=float)


def compute_svd(A) -> SvdResult:
    """Thin SVD with a fixed sign: the largest-magnitude entry of each ``u_i`` is positive."""
    a = _as_array(A)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    U, s, Vt = np.linalg.svd(a, full_matrices=False)
    V = Vt.T
    pivot = U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])]
    flip = np.where(pivot < 0, -1.0, 1.0)
    return SvdResult(s, U * flip, V * flip)


def tv_seminorm(v) -> float:
    v = np.asarray(v, dtype=float)
    if v.size < 1:
        raise ValueError("tv_seminorm needs at least one entry")
    return float(np.sum(np.abs(np.diff(v))))


def tv_sequence(svd: SvdResult, count: int | None = None) -> np.ndarray:
    """TV seminorm of each singular time-vector ``v_i``."""
    V = svd.V if count is None else svd.V[:, :count]
    return np.sum(np.abs(np.diff(V, axis=0)), axis=0)


@dataclass(frozen=True)
class FitConfig:
    """Breakpoint search window for the two-piece quadratic (1-based, inclusive).

    ``hi_margin`` keeps the last breakpoint that many points from the end.
    """

    lo: int = 4
    hi_margin: int = 4


def _two_piece_design(n: int, b: int) -> np.ndarray:
    x = np.arange(1, n + 1, dtype=float) - b
    left = x <= 0
    X = np.zeros((n, 5))
    X[:, 0] = 1.0
    X[left, 1] = x[left]
    X[left, 2] = x[left] ** 2
    X[~left, 3] = x[~left]
    X[~left, 4] = x[~left] ** 2
    return X


def two_piece_fit(s, b: int) -> tuple[np.ndarray, float]:
    """Continuous two-piece quadratic through ``s`` with the knot at 1-based ``b``.

    Continuity is built in: both pieces share the value at the knot, so the
    constrained problem is an ordinary least squares in five unknowns.
    Returns the fitted curve and the residual sum of squares.
    """
    s = np.asarray(s, dtype=float)
    X = _two_piece_design(s.size, b)
    coef, *_ = np.linalg.lstsq(X, s, rcond=None)
    fit = X @ coef
    return fit, float(np.sum((s - fit) ** 2))


def breakpoint_scan(s, cfg: FitConfig = FitConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Normalized residual (RSS / sum s^2) for every candidate knot."""
    s = np.asarray(s, dtype=float)
    n = s.size
    if n < MIN_TV_POINTS:
        raise ValueError(f"need at least {MIN_TV_POINTS} points, got {n}")
    scale = float(np.sum(s * s))
    if scale == 0 or np.ptp(s) <= 1e-12 * np.max(np.abs(s)):
        raise DegenerateFitError("total-variation sequence is flat; no change point")
    lo = max(cfg.lo, 3)
    hi = n - cfg.hi_margin
    if hi < lo:
        raise ValueError(f"empty breakpoint window [{lo}, {hi}] for {n} points")
    cands = np.arange(lo, hi + 1)
    res = np.array([two_piece_fit(s, b)[1] for b in cands]) / scale
    return cands, res


def fit_breakpoint(s, cfg: FitConfig = FitConfig()) -> int:
    cands, res = breakpoint_scan(s, cfg)
    return int(cands[np.argmin(res)])


def select_cutoff(svd: SvdResult, cfg: FitConfig = FitConfig()) -> int:
    """Cut-off index ``l`` where the TV curve of the time-vectors changes regime.

    Only numerically nonzero singular components take part; their time
    vectors are otherwise an arbitrary null-space basis.
    """
    if svd.rank < MIN_TV_POINTS:
        raise ValueError(f"need at least {MIN_TV_POINTS} singular vectors, got {svd.rank}")
    r = svd.numerical_rank()
    if r < MIN_TV_POINTS:
        raise DegenerateFitError(
            f"numerical rank {r} leaves fewer than {MIN_TV_POINTS} informative time-vectors")
    return fit_breakpoint(tv_sequence(svd, r), cfg)


@dataclass(frozen=True)
class SingularIndexSet:
    cutoff: int
    length: int
    rank: int

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(range(self.cutoff, self.cutoff + self.length))

    @property
    def columns(self) -> np.ndarray:
        return np.arange(self.cutoff - 1, self.cutoff - 1 + self.length)

    def __len__(self) -> int:
        return self.length


def select_index_set(cutoff: int, length: int, r: int) -> SingularIndexSet:
    """Contiguous ``T = {cutoff, ..., cutoff + length - 1}``."""
    if cutoff < 1 or length < 0:
        raise ValueError(f"invalid interval: cutoff={cutoff}, length={length}")
    if cutoff + length > r + 1:
        raise ValueError(f"interval [{cutoff}, {cutoff + length - 1}] exceeds rank {r}")
    return SingularIndexSet(int(cutoff), int(length), int(r))


def _check(svd: SvdResult, T: SingularIndexSet):
    if T.length and T.cutoff + T.length - 1 > svd.rank:
        raise ValueError("index set does not fit this decomposition")


def filter_matrix(svd: SvdResult, T: SingularIndexSet) -> np.ndarray:
    """``A_T = sum_{i in T} sigma_i u_i v_i^T``."""
    _check(svd, T)
    cols = T.columns
    return (svd.U[:, cols] * svd.sigma[cols]) @ svd.V[:, cols].T


@dataclass
class IntensityMap:
    values: np.ndarray
    grid: PixelGrid

    def image(self) -> np.ndarray:
        return self.grid.to_image(self.values)


def reconstruct_intensity(svd: SvdResult, T: SingularIndexSet, grid: PixelGrid) -> IntensityMap:
    """``I(j) = sqrt(sum_{i in T} sigma_i^2 u_i(j)^2)``."""
    _check(svd, T)
    cols = T.columns
    energy = np.sum((svd.U[:, cols] * svd.sigma[cols]) ** 2, axis=1)
    return IntensityMap(np.sqrt(energy), grid)


def default_interval_length(n_x: int) -> int:
    return math.ceil(0.25 * n_x)


def oracle_cutoff(sigma_total, sigma1_metabolic: float) -> int:
    """First 1-based ``j`` with ``sigma_j(A) < sigma_1(A_m)``."""
    below = np.flatnonzero(np.asarray(sigma_total) < sigma1_metabolic)
    if below.size == 0:
        raise ValueError("no singular value of A falls below sigma_1(A_m)")
    return int(below[0]) + 1


def normalize_minmax(x) -> np.ndarray:
    """Affine map of ``[min, max]`` onto ``[0, 1]``; a constant map becomes all zeros."""
    x = np.asarray(x, dtype=float)
    lo, hi = np.min(x), np.max(x)
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def normalized_error(estimate, truth) -> float:
    """Relative l2 distance after min-max normalizing both maps."""
    e = normalize_minmax(estimate)
    t = normalize_minmax(truth)
    denom = np.linalg.norm(t)
    if denom == 0:
        raise ValueError("reference map is constant")
    return float(np.linalg.norm(e - t) / denom)
