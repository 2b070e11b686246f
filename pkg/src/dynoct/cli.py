"""Command-line front end: ``dynoct simulate|separate|verify|pipeline``.

Exit codes: 0 success, 2 configuration or invalid input, 3 degenerate
separation, 4 I/O error (including manifest mismatches).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from dynoct import config as cfgmod
from dynoct import pipeline
from dynoct.errors import DegenerateFitError, DegenerateInputError

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("dynoct")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynoct", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="INI run configuration (defaults if omitted)")
        if seed:
            sp.add_argument("--seed", type=int, help="override [run] seed")
        sp.add_argument("--out", help="run directory (default: [run] output)")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("simulate", help="simulate total/collagen/metabolic matrices"))
    sp = sub.add_parser("separate", help="SVD separation of a Casorati matrix")
    common(sp, seed=False)
    sp.add_argument("--input", help="Casorati file (default: <out>/total.casorati)")
    sp = sub.add_parser("verify", help="spectral checks and reconstruction errors")
    common(sp)
    sp.add_argument("--total")
    sp.add_argument("--collagen")
    sp.add_argument("--metabolic")
    common(sub.add_parser("pipeline", help="simulate + separate + verify"))
    return p


def _load(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    return cfgmod.with_overrides(cfg, seed=getattr(args, "seed", None), output=args.out)


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        out = Path(cfg.output)
        if args.command == "simulate":
            sim = pipeline.cmd_simulate(cfg, out)
            print(f"simulated {sim.total.n_x}x{sim.total.n_t} -> {out} "
                  f"(dominance {sim.metrics['dominance_ratio']:.4g})")
        elif args.command == "separate":
            res = pipeline.cmd_separate(cfg, args.input or out / pipeline.TOTAL, out)
            print(f"cutoff {res.cutoff}, interval {res.indices[0]}..{res.indices[1]} -> {out}")
        elif args.command == "verify":
            res = pipeline.cmd_verify(cfg, out, args.total, args.collagen, args.metabolic)
            _summary(res.rows)
        else:
            pipeline.cmd_pipeline(cfg, out)
            _summary(pipeline.fileio.read_table(out / "verification.csv")[1])
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateFitError, DegenerateInputError) as exc:
        print(f"degenerate separation: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _summary(rows) -> None:
    for r in rows:
        print(f"{r[1]:<26} {float(r[2]):>12.5g}  bound {float(r[3]):<10.4g} {r[4]}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
