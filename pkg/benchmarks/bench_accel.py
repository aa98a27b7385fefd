"""Compare the numba and numpy backends on the reconstruction hot loops.

    python3 benchmarks/bench_accel.py [--repeat N]

Each case is timed on both backends (after one warm-up call that also
triggers compilation) and the results are checked to agree to rounding.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cmrt import _accel, build_tables
from cmrt.inversion import SeriesConfig, reconstruct_point
from cmrt.phantoms import AnalyticField, Phantom, mean_derivatives, poly_bump, reference_phantom


def _cases():
    ref = reference_phantom()
    bump = Phantom((poly_bump(0.2, 1.1, 0.4, m=12),))
    radii = np.linspace(0.05, 1.3, 128)
    tables = build_tables(10)
    field = AnalyticField(ref)
    yield "gaussian d^0..20, 128 circles", lambda: mean_derivatives(ref, 0.3, radii, 20)
    yield "poly_bump d^0..10, 128 circles", lambda: mean_derivatives(bump, 0.3, radii, 10)
    yield "reconstruct_point n=10", lambda: reconstruct_point(tables, field, 0.3, 1.2, SeriesConfig()).values


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'case':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s} {'max rel diff':>13s}")
    for name, fn in _cases():
        _accel.set_backend("numpy")
        t_np, ref = _time(fn, args.repeat)
        _accel.set_backend("numba")
        t_nb, out = _time(fn, args.repeat)
        diff = np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-300)
        print(f"{name:34s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:9.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
