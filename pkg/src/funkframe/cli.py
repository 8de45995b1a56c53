"""``funkframe`` command line.

Exit codes: 0 success, 1 invalid input (config, files, formats), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import selftest
from .experiment import (
    build_dual,
    ensure_dir,
    export_pgm,
    load_config,
    read_node_csv,
    residual_summary,
    run_experiment,
    run_reconstruction,
    table_hash,
    write_json,
    write_node_csv,
)
from .frame import NormBoundError, save_table
from .phantom import forward_data, sample
from .sphere import FormatError, InvalidInputError

log = logging.getLogger("funkframe")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

_OVERRIDES = [
    ("--N", "N", int),
    ("--l-max", "l_max", int),
    ("--n-theta", "n_theta", int),
    ("--n-lambda", "n_lambda", int),
    ("--design", "design", str),
    ("--m-circle", "m_circle", int),
    ("--phantom", "phantom", str),
    ("--noise", "noise_level", float),
    ("--seed", "seed", int),
    ("--filter", "filter", str),
    ("--alpha", "alpha", float),
    ("--alphas", "alphas", str),
    ("--pinv-threshold", "pinv_threshold", float),
    ("--out", "output_dir", str),
]


def _add_config_args(p):
    p.add_argument("--config", help="flat 'key = value' config file")
    for flag, dest, typ in _OVERRIDES:
        p.add_argument(flag, dest=dest, type=typ, default=None)


def _config(args):
    overrides = {dest: getattr(args, dest, None) for _, dest, _ in _OVERRIDES}
    return load_config(getattr(args, "config", None), overrides).resolved()


def _default_table_path(cfg):
    return os.path.join(cfg.output_dir, f"dual_N{cfg.N}_L{cfg.l_max}.frfd")


def cmd_precompute(args):
    cfg = _config(args)
    ensure_dir(cfg.output_dir)
    path = args.table or _default_table_path(cfg)
    t0 = time.perf_counter()
    dual = build_dual(cfg)
    crc = save_table(dual, path)
    res = residual_summary(dual)
    print(f"wrote {path}: N={dual.N} l_max={dual.l_max} members={len(dual.index_set)} "
          f"rank={dual.rank} crc32={crc:08x} ({time.perf_counter() - t0:.1f}s)")
    print(f"truncation residual max={res['max']:.3g} above {res['warn_level']}: {res['count_above_warn']}")
    return EXIT_OK


def cmd_forward(args):
    cfg = _config(args)
    ensure_dir(cfg.output_dir)
    grid = cfg.make_grid()
    p = cfg.make_phantom()
    data = forward_data(p, grid, cfg.m_circle)
    path = args.data or os.path.join(cfg.output_dir, "data.csv")
    write_node_csv(data, path, {"m_circle": cfg.m_circle})
    defect = data.evenness_defect()
    report = {
        "config": cfg.as_dict(),
        "data": path,
        "nodes": grid.size,
        "evenness_defect": defect,
        "evenness_ok": bool(defect <= 1e-12 * max(1.0, float(np.abs(data.samples).max()))),
    }
    write_json(report, os.path.join(cfg.output_dir, "forward_report.json"))
    print(f"wrote {path} ({grid.size} nodes, evenness defect {defect:.2e})")
    return EXIT_OK


def cmd_reconstruct(args):
    cfg = _config(args)
    ensure_dir(cfg.output_dir)
    data = read_node_csv(args.data)
    dual = build_dual(cfg, args.table)
    truth = None if args.no_truth else sample(cfg.make_phantom(), data.grid)
    f_rec, info = run_reconstruction(data, dual, cfg.filter_spec(), truth)
    path = args.output or os.path.join(cfg.output_dir, "reconstruction.csv")
    write_node_csv(f_rec, path)
    report = {"config": cfg.as_dict(), "table_crc32": table_hash(dual),
              "truncation_residuals": residual_summary(dual), **info}
    write_json(report, os.path.join(cfg.output_dir, "reconstruct_report.json"))
    msg = f"wrote {path}; ||R+g||/||Lg|| = {info['norm_ratio']:.4f}"
    if "relative_error" in info:
        msg += f"; relative error {info['relative_error']:.4g}"
    print(msg)
    return EXIT_OK


def cmd_experiment(args):
    cfg = _config(args)
    ensure_dir(cfg.output_dir)
    dual = build_dual(cfg, args.table) if args.table else None
    report, timings = run_experiment(cfg, dual)
    path = os.path.join(cfg.output_dir, "report.json")
    write_json(report, path)
    write_json(timings, os.path.join(cfg.output_dir, "timings.json"))
    for run in report["runs"]:
        label = run["filter"] if run["alpha"] is None else f"alpha={run['alpha']:g}"
        print(f"{label:>16}  error={run['relative_error']:.4f}  ratio={run['norm_ratio']:.3f}")
    best = report["best"]
    print(f"best: {best['alpha']} (error {best['relative_error']:.4f}); report {path}")
    return EXIT_OK


def cmd_selftest(args):
    passed, failed = selftest.run()
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_export(args):
    f = read_node_csv(args.data)
    l_max = args.l_max if args.l_max is not None else f.grid.exact_degree // 2
    lo, hi = export_pgm(f, args.output, args.width, args.height, l_max)
    print(f"wrote {args.output} ({args.width}x{args.height}, min {lo:.4g}, max {hi:.4g})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="funkframe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="assemble and store the dual-frame table")
    _add_config_args(p)
    p.add_argument("--table", help="output table path")
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("forward", help="simulate Funk-Radon data of the phantom")
    _add_config_args(p)
    p.add_argument("--data", help="output CSV path")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("reconstruct", help="invert data with a dual-frame table")
    _add_config_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--table", help="table file (assembled from the config if omitted)")
    p.add_argument("--output", help="reconstruction CSV path")
    p.add_argument("--no-truth", action="store_true", help="skip the error against the phantom")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("experiment", help="forward, noise and reconstruct over an alpha sweep")
    _add_config_args(p)
    p.add_argument("--table")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("selftest", help="run reduced-size invariant checks")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("export", help="render node data as a 16-bit PGM")
    p.add_argument("--data", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--width", type=int, default=360)
    p.add_argument("--height", type=int, default=180)
    p.add_argument("--l-max", dest="l_max", type=int, default=None)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NormBoundError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
