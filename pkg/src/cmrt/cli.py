"""Command-line interface: ``cmrt {coeffs,forward,reconstruct,convergence,verify}``.

Exit status is 0 on success, 1 when a verification suite fails and 2 for
bad arguments, malformed inputs or missing files.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from cmrt import exactcoeff
from cmrt.exactcoeff import build_tables
from cmrt.harness import (
    ConfigError,
    ExperimentConfig,
    GridSpec,
    convergence_study,
    grid_image,
    load_config,
    probe_points,
    run_grid,
    write_convergence_csv,
    write_pgm,
    write_reconstruction_csv,
)
from cmrt.inversion import SeriesConfig
from cmrt.phantoms import (
    DEFAULT_NODES,
    Phantom,
    SampledField,
    forward_sinogram,
    load_phantom,
    reference_phantom,
    write_sinogram_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmrt", description="Circular-mean Radon transform: tables, forward data, inversion.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", help="emit exact kernel coefficient tables")
    c.add_argument("--order", type=int, default=exactcoeff.DEFAULT_ORDER)
    c.add_argument("--out", default="-", help="output path (.json or .csv); '-' writes JSON to stdout")

    f = sub.add_parser("forward", help="sample Mf of a phantom on a (p, r) grid")
    f.add_argument("--phantom", help="phantom JSON (default: reference gaussian)")
    f.add_argument("--p-range", nargs=2, type=float, default=(-1.0, 1.6), metavar=("P0", "P1"))
    f.add_argument("--r-range", nargs=2, type=float, default=(0.0, 2.0), metavar=("R0", "R1"))
    f.add_argument("--np", type=int, default=131, dest="n_p")
    f.add_argument("--nr", type=int, default=101, dest="n_r")
    f.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    f.add_argument("--out", default="-")

    r = sub.add_parser("reconstruct", help="partial sums f_n on a grid")
    r.add_argument("--config", help="experiment JSON; flags override its fields")
    r.add_argument("--phantom", help="phantom JSON (analytic data, and ground truth)")
    r.add_argument("--sinogram", help="sampled Mf CSV (p,r,mf); switches to finite differences")
    r.add_argument("--grid", nargs=6, type=float, metavar=("X0", "X1", "NX", "Y0", "Y1", "NY"))
    r.add_argument("--n-max", type=int)
    r.add_argument("--formula", choices=("corrected", "literal"))
    r.add_argument("--fd-order", type=int, default=8, help="largest p-derivative taken from sampled data")
    r.add_argument("--smoothing", type=float, default=0.0, help="gaussian pre-smoothing width in grid cells")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", help="CSV x,y,f_n,f_true,abs_err (default stdout)")
    r.add_argument("--image", help="PGM (P2) image of f_n")

    v = sub.add_parser("convergence", help="per-order sup error at probe points")
    v.add_argument("--phantom")
    v.add_argument("--points", type=int, default=5, help="number of probe points")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n-max", type=int, default=10)
    v.add_argument("--out", default="-")

    s = sub.add_parser("verify", help="run the validation suites")
    s.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    s.add_argument("--seed", type=int, default=0)
    return ap


def _need_file(path: str | None) -> None:
    if path is not None and not Path(path).is_file():
        raise UsageError(f"no such file: {path}")


def _phantom(path: str | None) -> Phantom:
    _need_file(path)
    return load_phantom(path) if path else reference_phantom()


def _target(path: str):
    return sys.stdout if path == "-" else path


def _cmd_coeffs(args) -> int:
    if args.order < 1:
        raise UsageError("--order must be >= 1")
    tables = build_tables(args.order)
    if args.out == "-":
        json.dump(exactcoeff.tables_to_dict(tables), sys.stdout, indent=1)
        sys.stdout.write("\n")
    elif args.out.endswith(".csv"):
        exactcoeff.write_csv(tables, args.out)
    else:
        exactcoeff.write_json(tables, args.out)
    return EXIT_OK


def _cmd_forward(args) -> int:
    if args.n_p < 2 or args.n_r < 2 or args.nodes < 16:
        raise UsageError("--np and --nr must be >= 2 and --nodes >= 16")
    if args.r_range[0] < 0:
        raise UsageError("radii must be non-negative")
    ph = _phantom(args.phantom)
    p = np.linspace(*args.p_range, args.n_p)
    r = np.linspace(*args.r_range, args.n_r)
    values = forward_sinogram(ph, p, r, args.nodes)
    write_sinogram_csv(_target(args.out), p, r, values)
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    _need_file(args.config)
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.phantom:
        cfg = replace(cfg, phantom=_phantom(args.phantom))
    if args.grid:
        x0, x1, nx, y0, y1, ny = args.grid
        cfg = replace(cfg, grid=GridSpec((x0, x1, int(nx)), (y0, y1, int(ny))))
    series = cfg.series
    if args.n_max is not None:
        series = replace(series, n_max=args.n_max)
    if args.formula:
        series = replace(series, formula=args.formula)
    field_ = None
    with_truth = args.phantom is not None or (args.config is not None and args.sinogram is None)
    if args.sinogram:
        _need_file(args.sinogram)
        series = replace(series, derivative_mode="finite_difference")
        field_ = SampledField.from_csv(args.sinogram, max_order=args.fd_order, smoothing=args.smoothing)
    elif args.phantom is None and args.config is None:
        raise UsageError("reconstruct needs --phantom, --sinogram or --config")
    cfg = replace(cfg, series=series)
    points, partials, truth = run_grid(cfg, field_=field_, workers=args.workers, with_truth=with_truth)
    final = partials[:, -1]
    write_reconstruction_csv(_target(args.out or cfg.csv_out or "-"), points, final, truth)
    image = args.image or cfg.image_out
    if image:
        write_pgm(image, grid_image(cfg, final))
    return EXIT_OK


def _cmd_convergence(args) -> int:
    if args.points < 1 or args.n_max < 0:
        raise UsageError("--points must be >= 1 and --n-max >= 0")
    ph = _phantom(args.phantom)
    if args.phantom and ph.components:
        c = ph.components[0]
        centre, spread = (c.x0, c.y0), c.scale
    else:
        centre, spread = (0.3, 1.2), 0.15
    points = probe_points(args.seed, args.points, centre, spread)
    summary = convergence_study(build_tables(max(args.n_max, 1)), ph, points, SeriesConfig(n_max=args.n_max))
    write_convergence_csv(_target(args.out), summary)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from cmrt.verify import SUITES, run_all

    names = args.suite
    if names:
        unknown = [n for n in names if n not in SUITES]
        if unknown:
            raise UsageError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    results = run_all(names, args.seed)
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "coeffs": _cmd_coeffs,
    "forward": _cmd_forward,
    "reconstruct": _cmd_reconstruct,
    "convergence": _cmd_convergence,
    "verify": _cmd_verify,
}


def cli_main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"cmrt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
