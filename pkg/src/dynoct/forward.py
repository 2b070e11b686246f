"""Forward model: from particle densities to ODT time signals.

The broadband source is a finite set of spectral lines ``(omega_k, S0_k)``,
so the frequency integral is an exact sum. The depth integral over the
coherence window ``[-L, L]`` is a trapezoid rule. Signals are real: the
complex line sum is formed and its real part kept.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from dynoct.errors import DegenerateInputError
from dynoct.medium import MediumState, collagen_density, metabolic_block


@dataclass
class OpticsConfig:
    """Source spectrum, refractive index and reflectivities.

    ``kc1``/``km`` are per-pixel amplitudes (a scalar means uniform);
    ``kc2``/``km2`` are per-line spectral factors (``None`` means flat).
    Dimensionless units with ``c = 1`` are the default.
    """

    omegas: np.ndarray
    weights: np.ndarray
    n_bar: float = 1.4
    c: float = 1.0
    L: float = 1.0
    kc1: float | np.ndarray = 1.0
    kc2: np.ndarray | None = None
    km: float | np.ndarray = 1.0
    km2: np.ndarray | None = None

    def __post_init__(self):
        self.omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.omegas.size == 0:
            raise ValueError("at least one source line is required")
        if self.omegas.shape != self.weights.shape:
            raise ValueError("omegas and weights must have the same length")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("source weights must be finite and >= 0")
        if self.L <= 0 or self.c <= 0 or self.n_bar <= 0:
            raise ValueError("L, c and n_bar must be positive")
        for name in ("kc2", "km2"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                if val.shape != self.omegas.shape:
                    raise ValueError(f"{name} needs one factor per source line")
                setattr(self, name, val)

    @classmethod
    def gaussian_source(cls, center: float = 1.0, bandwidth: float = 0.1,
                        n_lines: int = 7, **kwargs) -> "OpticsConfig":
        """Lines spread uniformly over ``center +/- 2 bandwidth``, weighted by the Gaussian density."""
        if n_lines < 1:
            raise ValueError("n_lines must be >= 1")
        if n_lines == 1:
            omegas = np.array([center], dtype=float)
        else:
            omegas = np.linspace(center - 2 * bandwidth, center + 2 * bandwidth, n_lines)
        if bandwidth > 0:
            weights = np.exp(-0.5 * ((omegas - center) / bandwidth) ** 2)
            weights /= bandwidth * np.sqrt(2 * np.pi)
        else:
            weights = np.ones_like(omegas)
        return cls(omegas=omegas, weights=weights, **kwargs)

    @property
    def phase_scale(self) -> float:
        """Multiplier ``2 n_bar / c`` turning a path position into a delay."""
        return 2.0 * self.n_bar / self.c

    def per_pixel(self, name: str, n_pixels: int) -> np.ndarray:
        val = np.asarray(getattr(self, name), dtype=float)
        if val.ndim == 0:
            return np.full(n_pixels, float(val))
        if val.shape != (n_pixels,):
            raise ValueError(f"{name} has shape {val.shape}, expected ({n_pixels},)")
        return val

    def spectral_kernel(self, z, component: str = "c") -> np.ndarray:
        """Complex line sum ``sum_k S0_k K2_k exp(2 pi i omega_k (2 n/c) z)``."""
        factor = self.kc2 if component == "c" else self.km2
        w = self.weights if factor is None else self.weights * factor
        z = np.asarray(z, dtype=float)
        phase = 2j * np.pi * self.phase_scale * np.multiply.outer(z, self.omegas)
        return np.exp(phase) @ w


@dataclass
class SignalRecord:
    pixel: int
    samples: np.ndarray
    collagen: np.ndarray | None = None
    metabolic: np.ndarray | None = None

    @property
    def has_decomposition(self) -> bool:
        return self.collagen is not None and self.metabolic is not None


def single_particle_signal(optics: OpticsConfig, phi, times,
                           reflectivity=None) -> np.ndarray:
    """Signal of one particle whose path position is ``phi(t)``.

    ``phi`` is a callable or an array already sampled on ``times``.
    ``reflectivity`` gives ``K(omega_k)`` per line (default 1).
    """
    times = np.asarray(times, dtype=float)
    path = np.asarray(phi(times) if callable(phi) else phi, dtype=float)
    if path.shape != times.shape:
        raise ValueError("phi must be sampled on the time grid")
    k = np.ones_like(optics.omegas) if reflectivity is None else np.asarray(reflectivity, float)
    w = optics.weights * k
    phase = 2j * np.pi * optics.phase_scale * np.multiply.outer(path, optics.omegas)
    return (np.exp(phase) @ w).real


def doppler_frequency(optics: OpticsConfig, v: float, omega: float) -> float:
    return optics.phase_scale * v * omega


def quadrature_nodes(L: float, z_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes and weights on ``[-L, L]``."""
    if z_count < 2:
        raise ValueError("need at least two quadrature nodes")
    z = np.linspace(-L, L, z_count)
    w = np.full(z_count, z[1] - z[0])
    w[[0, -1]] *= 0.5
    return z, w


def default_threads() -> int:
    """Worker count from ``DYNOCT_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("DYNOCT_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("DYNOCT_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def simulate_signals(medium: MediumState, optics: OpticsConfig, times, *,
                     z_count: int | None = None, threads: int | None = None,
                     keep_decomposition: bool = True) -> list[SignalRecord]:
    """Evaluate collagen and metabolic signals for every pixel.

    ``z_count`` is the number of quadrature nodes on ``[-L, L]``; by default
    the spacing matches the collagen field grid. Pixels are independent so
    they are farmed out to a thread pool; the result does not depend on
    ``threads``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D grid")
    n = medium.grid.n_pixels
    if z_count is None:
        z_count = int(round(2 * optics.L / medium.collagen.dz)) + 1
    z, wq = quadrature_nodes(optics.L, z_count)
    hc = wq * optics.spectral_kernel(z, "c")
    hm = wq * optics.spectral_kernel(z, "m")
    kc1 = optics.per_pixel("kc1", n)
    km = optics.per_pixel("km", n)
    nt = times.size

    def one(j: int) -> SignalRecord:
        q = collagen_density(medium.collagen, j, z[:, None], times[None, :])
        gc = kc1[j] * (hc @ q).real
        p = metabolic_block(medium.metabolic, j, z_count, nt, medium.seed)
        gm = km[j] * (hm @ p).real
        total = gc + gm
        if keep_decomposition:
            return SignalRecord(j, total, gc, gm)
        return SignalRecord(j, total)

    workers = default_threads() if threads is None else max(1, int(threads))
    if workers == 1:
        return [one(j) for j in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n)))


def _rms(parts) -> float:
    return float(np.sqrt(np.mean(np.concatenate([np.ravel(p) ** 2 for p in parts]))))


def dominance_ratio(records: list[SignalRecord]) -> float:
    """RMS(collagen) / RMS(metabolic) over all pixels and times."""
    if not all(r.has_decomposition for r in records):
        raise ValueError("records carry no collagen/metabolic decomposition")
    rm = _rms([r.metabolic for r in records])
    if rm == 0:
        raise DegenerateInputError("metabolic signal is identically zero")
    return _rms([r.collagen for r in records]) / rm


def calibrate_dominance(records: list[SignalRecord], target_ratio: float = 100.0) -> float:
    """Factor for ``kc1`` that brings the collagen/metabolic RMS ratio to ``target_ratio``."""
    if target_ratio <= 0:
        raise ValueError("target_ratio must be positive")
    ratio = dominance_ratio(records)
    if ratio == 0:
        raise DegenerateInputError("collagen signal is identically zero")
    return target_ratio / ratio


def scale_collagen(records: list[SignalRecord], s: float) -> list[SignalRecord]:
    """Records as if ``kc1`` had been multiplied by ``s`` (the model is linear in it)."""
    out = []
    for r in records:
        if not r.has_decomposition:
            raise ValueError("records carry no collagen/metabolic decomposition")
        gc = s * r.collagen
        out.append(replace(r, samples=gc + r.metabolic, collagen=gc))
    return out
