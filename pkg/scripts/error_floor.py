"""Sampling-noise floor of the normalized reconstruction error.

Even a perfect separation only sees ``n_t`` samples of each pixel's
metabolic signal, so the per-pixel standard deviation is estimated with
relative error ~ 1/sqrt(2 n_t). This script measures the resulting
min-max / relative-l2 error of the *exact* row norms of white-noise rows
scaled by the default phantom, for several ``n_t``.

    python scripts/error_floor.py
"""

import argparse

import numpy as np

from dynoct.medium import PixelGrid, default_phantom
from dynoct.sep import normalized_error


def floor(n_t: int, trials: int, rows: int, background: float, seed: int = 0):
    mmap = default_phantom(PixelGrid(rows, rows), background)
    std = np.sqrt(mmap.m**2 + background**2)
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(trials):
        g = rng.standard_normal((std.size, n_t)) * std[:, None]
        errs.append(normalized_error(np.linalg.norm(g, axis=1), mmap.m))
    return np.array(errs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--rows", type=int, default=21)
    ap.add_argument("--background", type=float, default=0.05)
    args = ap.parse_args()
    print("n_t      median   p10      p90")
    for n_t in (500, 1000, 2000, 4000, 8000, 16000):
        e = floor(n_t, args.trials, args.rows, args.background)
        print(f"{n_t:<8d} {np.median(e):.4f}   {np.quantile(e, .1):.4f}   {np.quantile(e, .9):.4f}")


if __name__ == "__main__":
    main()
