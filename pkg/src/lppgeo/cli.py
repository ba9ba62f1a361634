"""Command-line front end.

Subcommands: field dump, geodesic, coalesce, semi-infinite, boundary,
barrier trial, experiment run <name>, experiment fit.  Exit codes: 0 success,
2 usage error, 3 capacity error, 4 insufficient data.

Every experiment flag appears in the echoed effective configuration; flags
override values from --config (a JSON file mirroring the experiment config).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments as E
from . import geometry as G
from . import barrier as B
from .errors import CapacityError, InsufficientDataError, LppError
from .field import Rect, dump_block_binary, dump_block_csv, field as make_field
from .core import geodesic


def _parse_vertex(s: str):
    try:
        x, y = s.split(",")
        return int(x), int(y)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {s!r}") from e


def _parse_rect(s: str) -> Rect:
    try:
        a, b, c, d = (int(v) for v in s.split(","))
        return Rect(a, b, c, d)
    except (ValueError, LppError) as e:
        raise argparse.ArgumentTypeError(
            f"expected 'x_min,x_max,y_min,y_max', got {s!r}") from e


def _parse_rlist(s: str):
    try:
        return [float(v) if "." in v else int(v) for v in s.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad R list {s!r}") from e


def _emit(obj, out=None):
    line = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    if out:
        with open(out, "w") as fh:
            fh.write(line + "\n")
    else:
        print(line)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lppgeo",
                                 description="Exponential LPP simulation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p_field = sub.add_parser("field", help="weight-field utilities")
    fsub = p_field.add_subparsers(dest="subcommand", required=True)
    p_dump = fsub.add_parser("dump", help="dump a weight block")
    p_dump.add_argument("--seed", type=int, required=True)
    p_dump.add_argument("--replicate", type=int, default=0)
    p_dump.add_argument("--rect", type=_parse_rect, required=True,
                        metavar="X0,X1,Y0,Y1")
    p_dump.add_argument("--out", required=True)
    p_dump.add_argument("--format", choices=("bin", "csv"), default="bin")

    p_geo = sub.add_parser("geodesic", help="geodesic between two points")
    p_geo.add_argument("--from", dest="src", type=_parse_vertex, required=True,
                       metavar="X,Y")
    p_geo.add_argument("--to", dest="dst", type=_parse_vertex, required=True,
                       metavar="X,Y")
    p_geo.add_argument("--seed", type=int, required=True)
    p_geo.add_argument("--replicate", type=int, default=0)
    p_geo.add_argument("--checkpoint-block", type=int, default=1024)
    p_geo.add_argument("--format", choices=("jsonl", "steps"), default="jsonl")
    p_geo.add_argument("--out", default=None)

    p_coal = sub.add_parser("coalesce",
                            help="coalescence point of two finite geodesics")
    p_coal.add_argument("--k", type=int, required=True)
    p_coal.add_argument("--n", type=int, required=True)
    p_coal.add_argument("--seed", type=int, required=True)
    p_coal.add_argument("--replicate", type=int, default=0)
    p_coal.add_argument("--out", default=None)

    p_semi = sub.add_parser("semi-infinite",
                            help="semi-infinite geodesic prefix from a point")
    p_semi.add_argument("--v", type=_parse_vertex, required=True, metavar="X,Y")
    p_semi.add_argument("--horizon", type=int, required=True)
    p_semi.add_argument("--seed", type=int, required=True)
    p_semi.add_argument("--replicate", type=int, default=0)
    p_semi.add_argument("--out", default=None)

    p_bnd = sub.add_parser("boundary", help="k-boundary indicators on x+y=0")
    p_bnd.add_argument("--k", type=int, required=True)
    p_bnd.add_argument("--i-lo", type=int, default=None)
    p_bnd.add_argument("--i-hi", type=int, default=None)
    p_bnd.add_argument("--seed", type=int, required=True)
    p_bnd.add_argument("--replicate", type=int, default=0)
    p_bnd.add_argument("--out", default=None)

    p_bar = sub.add_parser("barrier", help="barrier-event utilities")
    bsub = p_bar.add_subparsers(dest="subcommand", required=True)
    p_trial = bsub.add_parser("trial", help="run one barrier trial")
    p_trial.add_argument("--z", type=int, required=True)
    p_trial.add_argument("--big-m", type=float, default=2.0)
    p_trial.add_argument("--big-s", type=float, default=32.0)
    p_trial.add_argument("--h-const", type=float, default=12.0)
    p_trial.add_argument("--seed", type=int, required=True)
    p_trial.add_argument("--replicate", type=int, default=0)
    p_trial.add_argument("--out", default=None)

    p_exp = sub.add_parser("experiment", help="Monte Carlo experiments")
    esub = p_exp.add_subparsers(dest="subcommand", required=True)
    p_run = esub.add_parser("run", help="run an experiment preset")
    p_run.add_argument("name", choices=E.EXPERIMENT_NAMES)
    p_run.add_argument("--config", default=None,
                       help="JSON file with config defaults (flags override)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--replicates", type=int, default=None)
    p_run.add_argument("--n", type=int, default=None)
    p_run.add_argument("--k", type=int, default=None)
    p_run.add_argument("--r", type=int, default=None)
    p_run.add_argument("--big-m", type=float, default=None)
    p_run.add_argument("--big-l", type=float, default=None)
    p_run.add_argument("--s", type=float, default=None)
    p_run.add_argument("--big-s", type=float, default=None)
    p_run.add_argument("--h-const", type=float, default=None)
    p_run.add_argument("--z", type=int, default=None)
    p_run.add_argument("--r-list", type=_parse_rlist, default=None,
                       metavar="R1,R2,...")
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--precision", choices=("single", "double"), default=None)
    p_run.add_argument("--checkpoint-block", type=int, default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_run.add_argument("--progress", action="store_true")

    p_fit = esub.add_parser("fit", help="fit a power law to tails.csv")
    p_fit.add_argument("--in", dest="in_dir", required=True)
    return ap


_FLAG_TO_CFG = {
    "seed": "seed", "replicates": "replicates", "n": "n", "k": "k", "r": "r",
    "big_m": "big_m", "big_l": "big_l", "s": "s", "big_s": "big_s",
    "h_const": "h_const", "z": "z", "r_list": "r_list", "threads": "threads",
    "precision": "precision", "checkpoint_block": "checkpoint_block",
}


def _cmd_experiment_run(args) -> int:
    cfg_dict = {"name": args.name}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        file_cfg.pop("name", None)
        cfg_dict.update(file_cfg)
    for flag, key in _FLAG_TO_CFG.items():
        val = getattr(args, flag)
        if val is not None:
            cfg_dict[key] = val
    cfg = E.ExperimentConfig.from_dict(cfg_dict)
    echo = dict(cfg.to_dict())
    echo["out"] = args.out
    echo["format"] = args.format
    print(json.dumps({"effective_config": echo}, sort_keys=True,
                     separators=(",", ":")))
    progress = None
    if args.progress:
        def progress(i, n):
            print(f"\r{i}/{n} replicates", end="", file=sys.stderr, flush=True)
    res = E.run_experiment(cfg, out_dir=args.out, progress=progress)
    if args.progress:
        print(file=sys.stderr)
    summary = {"out": args.out, "replicates": cfg.replicates}
    if res.fit is not None:
        summary["slope"] = res.fit.slope
    print(json.dumps(summary, sort_keys=True, separators=(",", ":")))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "field":
            f = make_field(args.seed, args.replicate)
            if args.format == "bin":
                dump_block_binary(args.out, f, args.rect)
            else:
                dump_block_csv(args.out, f, args.rect)
            return 0
        if args.command == "geodesic":
            f = make_field(args.seed, args.replicate)
            p = geodesic(f, args.src, args.dst,
                         checkpoint_block=max(args.checkpoint_block, 1))
            rec = p.to_record(replicate=args.replicate)
            if args.format == "steps":
                rec.pop("vertices")
                rec["steps"] = p.steps()
            _emit(rec, args.out)
            return 0
        if args.command == "coalesce":
            cfg = E.ExperimentConfig(name="finite-coalescence", seed=args.seed,
                                     replicates=1, n=args.n, k=args.k,
                                     r_list=[1])
            rec = E._rep_finite_coal(cfg, args.replicate)
            _emit(rec, args.out)
            return 0
        if args.command == "semi-infinite":
            f = make_field(args.seed, args.replicate)
            scheme = G.SemiInfiniteScheme(horizon=args.horizon)
            path, conv = G.semi_infinite_prefix(f, args.v, scheme)
            rec = path.to_record(replicate=args.replicate)
            rec["converged"] = conv
            _emit(rec, args.out)
            return 0
        if args.command == "boundary":
            f = make_field(args.seed, args.replicate)
            k23 = G.icbrt23(args.k)
            i_lo = -k23 if args.i_lo is None else args.i_lo
            i_hi = k23 if args.i_hi is None else args.i_hi
            scheme = G.SemiInfiniteScheme(horizon=args.k)
            bits, conv = G.boundary_indicators(f, args.k, (i_lo, i_hi), scheme)
            _emit({"replicate": args.replicate, "k": args.k, "i_lo": i_lo,
                   "i_hi": i_hi, "x_bits": [int(b) for b in bits],
                   "converged": conv}, args.out)
            return 0
        if args.command == "barrier":
            f = make_field(args.seed, args.replicate)
            spec = B.build_spec(args.z, args.big_m, args.big_s, args.h_const)
            tr = B.run_coalescence_trial(f, spec)
            _emit(tr.to_record(replicate=args.replicate, z=args.z), args.out)
            return 0
        if args.command == "experiment":
            if args.subcommand == "run":
                return _cmd_experiment_run(args)
            fit = E.fit_results_dir(args.in_dir)
            print(json.dumps(fit.to_dict(), sort_keys=True,
                             separators=(",", ":")))
            return 0
        raise AssertionError("unreachable")
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return 3
    except InsufficientDataError as e:
        print(f"insufficient data: {e}", file=sys.stderr)
        return 4
    except (LppError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
