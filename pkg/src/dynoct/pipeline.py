"""Seeded end-to-end runs: simulate -> separate -> verify.

Every stage writes into one run directory and records its files (with
SHA-256 digests) and summary metrics in ``manifest.json``. Only the
``metadata`` block of the manifest carries wall-clock information.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dynoct import fileio
from dynoct.config import RunConfig, as_dict, config_hash
from dynoct.errors import DegenerateInputError, ManifestError
from dynoct.forward import (
    calibrate_dominance,
    default_threads,
    dominance_ratio,
    scale_collagen,
    simulate_signals,
)
from dynoct.medium import CollagenField, build_medium
from dynoct.sep import (
    CasoratiMatrix,
    FitConfig,
    build_casorati,
    compute_svd,
    normalized_error,
    oracle_cutoff,
    reconstruct_intensity,
    select_cutoff,
    select_index_set,
    tv_sequence,
)
from dynoct import spectral

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
TOTAL, COLLAGEN, METABOLIC = "total.casorati", "collagen.casorati", "metabolic.casorati"
TRUTH_MAP = "metabolic_map.csv"
FIELD = "collagen_field.bin"

# pass bands reported in verification.csv
TRACE_RATIO_MIN = 1e3
LEAD_FRACTION_MIN = 0.99
COS_MIN = 1e-3
BEST_ERROR_MAX = 0.02
ACHIEVED_ERROR_MAX = 0.05
CUTOFF_OFFSET_MAX = 10
PERTURB_VEC_CONST = 3.0


# manifest -------------------------------------------------------------

def load_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def validate_manifest(out_dir) -> dict:
    """Raise :class:`ManifestError` if a listed artifact is missing or altered."""
    out_dir = Path(out_dir)
    man = load_manifest(out_dir)
    for name, digest in man.get("artifacts", {}).items():
        path = out_dir / name
        if not path.exists():
            raise ManifestError(f"{path} listed in manifest but missing")
        if fileio.sha256_file(path) != digest:
            raise ManifestError(f"{path} does not match its manifest hash")
    return man


def _record(out_dir: Path, cfg: RunConfig, stage: str, files: list[str], metrics: dict,
            threads: int | None = None) -> dict:
    man = load_manifest(out_dir)
    man.setdefault("config", as_dict(cfg))
    man["config_hash"] = config_hash(cfg)
    man["seed"] = cfg.seed
    arts = man.setdefault("artifacts", {})
    for name in files:
        arts[name] = fileio.sha256_file(out_dir / name)
    man["artifacts"] = dict(sorted(arts.items()))
    man.setdefault("metrics", {}).update(metrics)
    stages = man.setdefault("stages", [])
    if stage not in stages:
        stages.append(stage)
    meta = man.setdefault("metadata", {})
    meta[f"{stage}_finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if threads is not None:
        meta["threads"] = threads
    (out_dir / MANIFEST).write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return man


# simulate -------------------------------------------------------------

@dataclass
class Simulation:
    total: CasoratiMatrix
    collagen: CasoratiMatrix
    metabolic: CasoratiMatrix
    truth: np.ndarray
    metrics: dict
    field: CollagenField


def simulate(cfg: RunConfig, threads: int | None = None) -> Simulation:
    """Simulate one seeded acquisition, calibrated to the dominance target."""
    grid = cfg.pixel_grid
    mmap = cfg.make_metabolic_map()
    optics = cfg.make_optics()
    med = build_medium(mmap, L=optics.L, corr_len=cfg.medium.corr_len, v0=cfg.medium.v0,
                       t_total=cfg.t_total, dz=cfg.medium.dz, seed=cfg.seed,
                       mean=cfg.medium.collagen_mean)
    records = simulate_signals(med, optics, cfg.times, threads=threads)
    try:
        s = calibrate_dominance(records, cfg.medium.dominance_target)
    except DegenerateInputError as exc:
        log.warning("dominance calibration skipped: %s", exc)
        s = 1.0
    records = scale_collagen(records, s)
    A = build_casorati(records, grid)
    Ac = build_casorati(records, grid, "collagen")
    Am = build_casorati(records, grid, "metabolic")
    metrics = {"calibration_factor": s}
    try:
        metrics["dominance_ratio"] = dominance_ratio(records)
        metrics["trace_ratio"] = spectral.trace_dominance(Ac, Am)
    except DegenerateInputError:
        metrics["dominance_ratio"] = metrics["trace_ratio"] = float("inf")
    return Simulation(A, Ac, Am, mmap.image(), metrics, med.collagen)


def cmd_simulate(cfg: RunConfig, out_dir, threads: int | None = None) -> Simulation:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = simulate(cfg, threads)
    fileio.write_casorati(out_dir / TOTAL, sim.total)
    fileio.write_casorati(out_dir / COLLAGEN, sim.collagen)
    fileio.write_casorati(out_dir / METABOLIC, sim.metabolic)
    fileio.write_map_csv(out_dir / TRUTH_MAP, sim.truth)
    fileio.write_field(out_dir / FIELD, sim.field)
    _record(out_dir, cfg, "simulate", [TOTAL, COLLAGEN, METABOLIC, TRUTH_MAP, FIELD],
            sim.metrics, threads=default_threads() if threads is None else threads)
    return sim


# separate -------------------------------------------------------------

@dataclass
class Separation:
    cutoff: int
    indices: tuple[int, int]
    intensity: np.ndarray
    sigma: np.ndarray
    tv: np.ndarray


def separate(A: CasoratiMatrix, cfg: RunConfig, cutoff: int | None = None) -> Separation:
    """Cut-off by the TV spline (or the given ``cutoff``), then the intensity map."""
    svd = compute_svd(A)
    if cutoff is None:
        fit = FitConfig(cfg.separation.search_lo, cfg.separation.search_hi_margin)
        cutoff = select_cutoff(svd, fit)
    length = min(cfg.interval_length(), svd.rank - cutoff + 1)
    T = select_index_set(cutoff, length, svd.rank)
    imap = reconstruct_intensity(svd, T, A.grid)
    return Separation(cutoff, (T.cutoff, T.cutoff + T.length - 1), imap.image(),
                      svd.sigma, tv_sequence(svd))


def cmd_separate(cfg: RunConfig, input_path, out_dir) -> Separation:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    A = fileio.read_casorati(input_path)
    res = separate(A, cfg)
    fileio.write_map_csv(out_dir / "intensity.csv", res.intensity)
    fileio.write_pgm16(out_dir / "intensity.pgm", res.intensity)
    fileio.write_table(out_dir / "sigma.csv", ["index", "sigma"],
                       [(i + 1, float(s)) for i, s in enumerate(res.sigma)])
    fileio.write_table(out_dir / "tv.csv", ["index", "tv"],
                       [(i + 1, float(v)) for i, v in enumerate(res.tv)])
    (out_dir / "cutoff.txt").write_text(f"{res.cutoff}\n")
    files = ["intensity.csv", "intensity.pgm", "sigma.csv", "tv.csv", "cutoff.txt"]
    _record(out_dir, cfg, "separate", files,
            {"cutoff": res.cutoff, "interval_first": res.indices[0],
             "interval_last": res.indices[1]})
    return res


# verify ---------------------------------------------------------------

@dataclass
class Verification:
    rows: list[tuple]
    metrics: dict
    best_map: np.ndarray
    achieved_map: np.ndarray


def verify(A: CasoratiMatrix, Ac: CasoratiMatrix, Am: CasoratiMatrix, truth, cfg: RunConfig,
           separation: Separation | None = None) -> Verification:
    """Reconstruction errors plus every spectral check, as CSV-ready rows."""
    if not (A.data.shape == Ac.data.shape == Am.data.shape):
        raise ValueError("total, collagen and metabolic matrices differ in shape")
    truth = np.asarray(truth, dtype=float).reshape(-1)
    dt = cfg.time.dt
    seed = cfg.seed
    sep = separation if separation is not None else separate(A, cfg)
    length = sep.indices[1] - sep.indices[0] + 1

    svd_m = compute_svd(Am)
    best = reconstruct_intensity(svd_m, select_index_set(1, min(length, svd_m.rank), svd_m.rank),
                                 A.grid).values
    achieved = sep.intensity.reshape(-1)
    best_err = normalized_error(best, truth)
    ach_err = normalized_error(achieved, truth)
    oracle = oracle_cutoff(sep.sigma, svd_m.sigma[0])
    offset = abs(sep.cutoff - oracle)

    rows = []

    def row(check, value, bound, ok):
        rows.append((seed, check, float(value), float(bound), "pass" if ok else "fail"))

    row("best_error", best_err, BEST_ERROR_MAX, best_err <= BEST_ERROR_MAX)
    row("achieved_error", ach_err, ACHIEVED_ERROR_MAX, ach_err <= ACHIEVED_ERROR_MAX)
    row("cutoff_offset", offset, CUTOFF_OFFSET_MAX, offset <= CUTOFF_OFFSET_MAX)

    metrics = {"best_error": best_err, "achieved_error": ach_err, "oracle_cutoff": oracle,
               "cutoff": sep.cutoff}
    checks = 0
    passed = 0

    def bound_row(check, value, bound, ok):
        nonlocal checks, passed
        checks += 1
        passed += bool(ok)
        row(check, value, bound, ok)

    try:
        tr = spectral.trace_dominance(Ac, Am)
    except DegenerateInputError:
        tr = float("inf")
    bound_row("trace_ratio", tr, TRACE_RATIO_MIN, tr >= TRACE_RATIO_MIN)

    cross = spectral.cross_bound_check(Ac, Am, dt)
    bound_row("cross_bound_max_ratio", cross.max_ratio, 1.0, cross.passed)

    gap, weyl = spectral.weyl_check(A, Ac)
    bound_row("weyl_sigma1", gap, weyl, gap <= weyl * (1 + 1e-12) + 1e-300)

    F_cc = spectral.correlation_kernel(Ac, dt=dt, label="cc")
    lead = F_cc.leading_fraction()
    bound_row("collagen_lead_fraction", lead, LEAD_FRACTION_MIN, lead >= LEAD_FRACTION_MIN)

    F_mm = spectral.correlation_kernel(Am, dt=dt, label="mm")
    lam_min = F_mm.eigenvalues()[-1]
    floor = -1e-10 * np.linalg.norm(F_mm.F, 2)
    bound_row("metabolic_min_eigenvalue", lam_min, floor, lam_min >= floor)

    if spectral.rank_one_ratio(Ac) < spectral.RANK_ONE_RTOL:
        rep = spectral.perturbation_report(A, Ac)
        if not rep.exact:
            bound_row("perturbation_sigma", rep.sigma_rel_err, 1 / rep.N, rep.weyl_ok)
            vb = PERTURB_VEC_CONST / rep.N
            row("perturbation_vec", rep.vec_err, vb, rep.vec_err <= vb)

    try:
        cos = spectral.nonorthogonality_check(Ac, Am, dt)
        row("nonorthogonality_cos", cos, COS_MIN, cos > COS_MIN)
        metrics["nonorthogonality_cos"] = cos
    except DegenerateInputError:
        pass

    metrics.update({"trace_ratio": tr, "bound_checks": checks,
                    "bound_checks_passed": passed, "collagen_lead_fraction": lead})
    return Verification(rows, metrics, best, achieved)


def _truth_for(cfg: RunConfig, run_dir: Path) -> np.ndarray:
    path = run_dir / TRUTH_MAP
    if path.exists():
        return fileio.read_map_csv(path)
    return cfg.make_metabolic_map().image()


def cmd_verify(cfg: RunConfig, out_dir, total=None, collagen=None, metabolic=None) -> Verification:
    out_dir = Path(out_dir)
    validate_manifest(out_dir)
    A = fileio.read_casorati(total or out_dir / TOTAL)
    Ac = fileio.read_casorati(collagen or out_dir / COLLAGEN)
    Am = fileio.read_casorati(metabolic or out_dir / METABOLIC)
    res = verify(A, Ac, Am, _truth_for(cfg, out_dir), cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_table(out_dir / "verification.csv", ["seed", "check", "value", "bound", "pass"],
                       res.rows)
    fileio.write_map_csv(out_dir / "best_intensity.csv", A.grid.to_image(res.best_map))
    _record(out_dir, cfg, "verify", ["verification.csv", "best_intensity.csv"], res.metrics)
    return res


def cmd_pipeline(cfg: RunConfig, out_dir, threads: int | None = None) -> dict:
    out_dir = Path(out_dir)
    cmd_simulate(cfg, out_dir, threads)
    cmd_separate(cfg, out_dir / TOTAL, out_dir)
    cmd_verify(cfg, out_dir)
    return load_manifest(out_dir)
