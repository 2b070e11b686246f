"""Particle-density description of the imaged slice.

Two media share every pixel: a collagen field ``q_c(x, z)`` that translates
rigidly along z at speed ``v0`` and a metabolic white-noise field whose
standard deviation is the ground-truth intensity map.

Randomness is keyed so that any single value can be regenerated without
touching the others:

* collagen: one ``SeedSequence(seed, spawn_key=(0, pixel))`` per pixel;
* metabolic: a Philox counter-based stream keyed by ``(seed, pixel)`` with
  counter ``(t_index, z_index)``; lane 0 feeds the metabolic draw, lane 1
  the background draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox, SeedSequence, default_rng
from scipy.signal import fftconvolve
from scipy.special import ndtri

from dynoct.errors import OutOfSupportError

# Gaussian smoothing kernel is truncated at this many correlation lengths.
_KERNEL_REACH = 4.0
_U53 = 2.0**-53


@dataclass(frozen=True)
class PixelGrid:
    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @classmethod
    def square(cls, n: int) -> "PixelGrid":
        return cls(n, n)

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def flatten(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"pixel ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def unflatten(self, j: int) -> tuple[int, int]:
        if not 0 <= j < self.n_pixels:
            raise IndexError(f"pixel index {j} outside grid of {self.n_pixels}")
        return divmod(j, self.cols)

    def to_image(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.rows, self.cols)


@dataclass
class CollagenField:
    """Discretized ``q_c`` on a uniform z-grid, one row per pixel."""

    q: np.ndarray
    z0: float
    dz: float
    corr_len: float
    v0: float
    seed: int

    @property
    def n_pixels(self) -> int:
        return self.q.shape[0]

    @property
    def z_count(self) -> int:
        return self.q.shape[1]

    @property
    def z_samples(self) -> np.ndarray:
        return self.z0 + self.dz * np.arange(self.z_count)

    @property
    def z_max(self) -> float:
        return self.z0 + self.dz * (self.z_count - 1)


def padded_half_width(L: float, v0: float, t_total: float, corr_len: float) -> float:
    """Half-width of the z-support so the drifting slice never leaves the field."""
    return L + abs(v0) * t_total + 2.0 * corr_len


def _smoothing_kernel(corr_len_samples: float) -> np.ndarray:
    # g * g has autocovariance exp(-d^2 / (2 l^2)) when g(d) = exp(-d^2 / l^2).
    reach = int(np.ceil(_KERNEL_REACH * corr_len_samples))
    d = np.arange(-reach, reach + 1, dtype=float)
    g = np.exp(-(d / corr_len_samples) ** 2)
    return g / np.sqrt(np.sum(g * g))


def generate_collagen_field(grid: PixelGrid, z_count: int, corr_len: float, v0: float,
                            seed: int, half_width: float = 1.0,
                            mean: float = 0.0) -> CollagenField:
    """Draw one stationary Gaussian random medium per pixel.

    The field has unit variance, Gaussian autocovariance with length
    ``corr_len`` and is sampled on ``z_count`` points spanning
    ``[-half_width, half_width]``. ``corr_len == 0`` gives white noise.
    """
    if not isinstance(grid, PixelGrid):
        raise TypeError("grid must be a PixelGrid")
    if z_count < 2:
        raise ValueError(f"z_count must be >= 2, got {z_count}")
    if corr_len < 0:
        raise ValueError(f"corr_len must be >= 0, got {corr_len}")
    if half_width <= 0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    if seed < 0:
        raise ValueError("seed must be nonnegative")

    dz = 2.0 * half_width / (z_count - 1)
    kernel = _smoothing_kernel(corr_len / dz) if corr_len > 0 else None
    pad = 0 if kernel is None else len(kernel) - 1

    q = np.empty((grid.n_pixels, z_count))
    for j in range(grid.n_pixels):
        rng = default_rng(SeedSequence(seed, spawn_key=(0, j)))
        noise = rng.standard_normal(z_count + pad)
        q[j] = noise if kernel is None else fftconvolve(noise, kernel, mode="valid")
    if mean:
        q += mean
    return CollagenField(q=q, z0=-half_width, dz=dz, corr_len=float(corr_len),
                         v0=float(v0), seed=int(seed))


def collagen_density(field: CollagenField, pixel: int, z, t) -> np.ndarray | float:
    """``p_c(x, z, t) = q_c(x, z - v0 t)`` by linear interpolation.

    ``z`` and ``t`` broadcast against each other.
    """
    s = np.asarray(z, dtype=float) - field.v0 * np.asarray(t, dtype=float)
    tol = 1e-9 * field.dz
    if np.any(s < field.z0 - tol) or np.any(s > field.z_max + tol):
        raise OutOfSupportError(
            f"z - v0*t spans [{np.min(s):.6g}, {np.max(s):.6g}] but the field covers "
            f"[{field.z0:.6g}, {field.z_max:.6g}]; enlarge the padding")
    out = np.interp(s, field.z_samples, field.q[pixel])
    return out if out.ndim else float(out)


@dataclass
class MetabolicMap:
    """Ground-truth metabolic intensity, stored flattened row-major."""

    grid: PixelGrid
    m: np.ndarray
    background_noise: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(-1)
        if m.size != self.grid.n_pixels:
            raise ValueError(f"map has {m.size} entries, grid needs {self.grid.n_pixels}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("metabolic intensities must be finite and >= 0")
        if not np.isfinite(self.background_noise) or self.background_noise < 0:
            raise ValueError("background_noise must be finite and >= 0")
        self.m = m
        self.background_noise = float(self.background_noise)

    @classmethod
    def from_image(cls, image, background_noise: float = 0.0) -> "MetabolicMap":
        image = np.atleast_2d(np.asarray(image, dtype=float))
        return cls(PixelGrid(*image.shape), image.reshape(-1), background_noise)

    def image(self) -> np.ndarray:
        return self.grid.to_image(self.m)


def _stream_key(seed: int, pixel: int) -> np.ndarray:
    if seed < 0 or pixel < 0:
        raise ValueError("seed and pixel must be nonnegative")
    return np.array([seed, pixel], dtype=np.uint64)


def _normals(raw: np.ndarray) -> np.ndarray:
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return ndtri(u)


def metabolic_density(mmap: MetabolicMap, pixel: int, z_index: int, t_index: int,
                      seed: int) -> float:
    """One draw of ``p_m`` at (pixel, z-index, t-index); reproducible in isolation."""
    counter = np.array([t_index, z_index, 0, 0], dtype=np.uint64)
    raw = Philox(key=_stream_key(seed, pixel), counter=counter).random_raw(4)
    g = _normals(raw[:2])
    return float(mmap.m[pixel] * g[0] + mmap.background_noise * g[1])


def metabolic_block(mmap: MetabolicMap, pixel: int, z_count: int, t_count: int,
                    seed: int) -> np.ndarray:
    """All draws for one pixel as a ``(z_count, t_count)`` array.

    Identical, element for element, to calling :func:`metabolic_density`
    on every index pair.
    """
    amp, bg = mmap.m[pixel], mmap.background_noise
    out = np.zeros((z_count, t_count))
    if amp == 0.0 and bg == 0.0:
        return out
    key = _stream_key(seed, pixel)
    raw = np.empty((z_count, t_count, 4), dtype=np.uint64)
    for zi in range(z_count):
        counter = np.array([0, zi, 0, 0], dtype=np.uint64)
        raw[zi] = Philox(key=key, counter=counter).random_raw(4 * t_count).reshape(t_count, 4)
    g = _normals(raw[:, :, :2])
    out[:] = amp * g[:, :, 0] + bg * g[:, :, 1]
    return out


def default_phantom(grid: PixelGrid, background_noise: float = 0.05) -> MetabolicMap:
    """Three disjoint discs of constant activity (1.0, 0.75, 0.5) on a silent background."""
    rows, cols = np.mgrid[0:grid.rows, 0:grid.cols]
    n = min(grid.rows, grid.cols)
    radius = 0.16 * n
    blobs = [((0.28, 0.30), 1.0), ((0.32, 0.72), 0.75), ((0.72, 0.50), 0.5)]
    img = np.zeros(grid.shape)
    for (fr, fc), level in blobs:
        cr, cc = fr * (grid.rows - 1), fc * (grid.cols - 1)
        inside = (rows - cr) ** 2 + (cols - cc) ** 2 <= radius**2
        img[inside & (img == 0)] = level
    return MetabolicMap(grid, img.reshape(-1), background_noise)


@dataclass
class MediumState:
    collagen: CollagenField
    metabolic: MetabolicMap
    seed: int
    grid: PixelGrid = field(init=False)

    def __post_init__(self):
        self.grid = self.metabolic.grid
        if self.collagen.n_pixels != self.grid.n_pixels:
            raise ValueError("collagen field and metabolic map disagree on pixel count")


def build_medium(metabolic: MetabolicMap, *, L: float, corr_len: float, v0: float,
                 t_total: float, dz: float, seed: int, mean: float = 0.0) -> MediumState:
    """Collagen field padded for the whole acquisition plus the metabolic map."""
    half = padded_half_width(L, v0, t_total, corr_len)
    z_count = int(np.ceil(2.0 * half / dz)) + 1
    # keep dz exact by widening the support to a whole number of steps
    half = 0.5 * dz * (z_count - 1)
    col = generate_collagen_field(metabolic.grid, z_count, corr_len, v0, seed,
                                  half_width=half, mean=mean)
    return MediumState(col, metabolic, seed)
