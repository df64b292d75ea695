"""Command line: ``logcoreset {coreset,mu,bench,gen}``.

Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import bench as bench_mod
from .coreset import RecursionConfig, build_base, build_recursive, build_uniform, size_for_epsilon
from .data import DataFormatError, fold_labels, load_dataset, save_labeled, standardize, write_coreset_csv
from .instances import gen_appendix_d, gen_circle, gen_mixture
from .logreg import FitConfig, FitError
from .mu import LPError, mu_bruteforce, mu_lp
from .scores import SketchConfig, SketchError

RUNTIME_ERRORS = (DataFormatError, LPError, FitError, SketchError, OSError, ValueError)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be ≥ 1")
    return v


def _size(text):
    try:
        return _positive_int(text)
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError("size must be ≥ 1") from None


def _int_list(text):
    return [_size(t) for t in text.split(",") if t.strip()]


def _add_input(p):
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    p.add_argument("--label-column", type=int, default=None)
    p.add_argument("--intercept", action="store_true", help="append a constant column before folding")
    p.add_argument("--standardize", action="store_true", help="standardize feature columns")


def _load(args):
    data = load_dataset(args.input, args.format, args.label_column)
    if args.standardize:
        data = standardize(data)
    return fold_labels(data, add_intercept=args.intercept)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logcoreset", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coreset", help="build a coreset and write it as CSV")
    _add_input(p)
    p.add_argument("--method", choices=("uniform", "qr", "qr-sketch"), default="qr")
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--size", type=_size)
    size.add_argument("--epsilon", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--scale-const", type=float, default=0.5)
    p.add_argument("--recursive", action="store_true")
    p.add_argument("--levels", type=_positive_int)
    p.add_argument("--min-size", type=_positive_int, default=1000)
    p.add_argument("--sketch-rows", type=_positive_int)
    p.add_argument("--jl-dim", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("mu", help="estimate the mu complexity; prints JSON")
    _add_input(p)
    p.add_argument("--method", choices=("lp", "bruteforce"), default="lp")
    p.add_argument("--grid", type=_positive_int, help="number of grid directions (bruteforce)")

    p = sub.add_parser("bench", help="relative-error benchmark over coreset sizes")
    _add_input(p)
    p.add_argument("--methods", default="uniform,qr,qr_sketch")
    p.add_argument("--sizes", type=_int_list, help="comma separated sizes (default: 30 sizes in [2 sqrt n, n/16])")
    p.add_argument("--reps", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta-norm-cap", type=float, default=1e4)
    p.add_argument("--output", required=True, help="output prefix; writes PREFIX.json and PREFIX.csv")

    p = sub.add_parser("gen", help="write a synthetic or adversarial instance")
    p.add_argument("--kind", choices=("appendix_d", "circle", "gaussian_mixture"), required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, default=2)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--hole-index", type=int)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--omit-hole", action="store_true", help="drop p_i from the +1 set (separable case)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("libsvm", "csv"), default="csv")
    p.add_argument("--output", required=True)
    return parser


def cmd_coreset(args, parser) -> int:
    if args.epsilon is not None:
        if args.mu is None or args.delta is None:
            parser.error("--epsilon also needs --mu and --delta")
        if args.method == "uniform":
            parser.error("--epsilon is only defined for the qr methods")
    if args.recursive and (args.epsilon is None or args.method == "uniform"):
        parser.error("--recursive needs --epsilon with a qr method")

    ds = _load(args)
    score_method = "sketched" if args.method == "qr-sketch" else "exact_qr"
    sketch = None
    if score_method == "sketched":
        base = SketchConfig.default(ds.n, ds.d, args.seed)
        sketch = SketchConfig(args.sketch_rows or base.sketch_rows, args.jl_dim or base.jl_dim, args.seed)

    t0 = time.perf_counter()
    if args.recursive:
        cfg = RecursionConfig(args.epsilon, args.mu, args.levels, args.min_size, args.seed,
                              args.delta, args.scale_const)
        cs = build_recursive(ds, cfg, score_method, sketch)
    elif args.method == "uniform":
        cs = build_uniform(ds, args.size, args.seed)
    else:
        k = args.size or size_for_epsilon(ds, args.epsilon, args.delta, args.mu, score_method, sketch,
                                          args.scale_const)
        cs = build_base(ds, k, score_method, sketch, args.seed)
    wall_ms = 1e3 * (time.perf_counter() - t0)

    write_coreset_csv(args.output, cs.indices, cs.u, cs.points)
    meta = {
        "method": cs.meta.get("method"),
        "k": cs.k,
        "seed": args.seed,
        "epsilon": args.epsilon,
        "levels": cs.meta.get("levels"),
        "score_method": cs.meta.get("score_method"),
        "passes": cs.meta.get("passes"),
        "wall_ms": wall_ms,
    }
    with open(args.output + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return 0


def cmd_mu(args, parser) -> int:
    ds = _load(args)
    est = mu_lp(ds) if args.method == "lp" else mu_bruteforce(ds, args.grid)
    out = est.to_json()
    if args.method == "bruteforce":
        out["t"] = None
    print(json.dumps(out))
    return 0


def cmd_bench(args, parser) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = set(methods) - set(bench_mod.METHODS)
    if bad or not methods:
        parser.error(f"--methods must be a subset of {','.join(bench_mod.METHODS)}")
    ds = _load(args)
    if args.sizes and max(args.sizes) > ds.n:
        parser.error(f"sizes must not exceed n={ds.n}")
    cfg = bench_mod.BenchConfig(
        methods=methods,
        sizes=tuple(args.sizes) if args.sizes else None,
        reps=args.reps,
        seed=args.seed,
        fit=FitConfig(beta_norm_cap=args.beta_norm_cap),
    )
    report = bench_mod.run_bench(ds, cfg)
    report.write(args.output)
    return 0


def cmd_gen(args, parser) -> int:
    if args.kind == "appendix_d":
        data = gen_appendix_d(args.n)
    elif args.kind == "circle":
        data = gen_circle(args.n, args.hole_index, args.delta, hole_present=not args.omit_hole)
    else:
        data = gen_mixture(args.n, args.d, args.separation, args.seed)
    save_labeled(data, args.output, args.format)
    return 0


COMMANDS = {"coreset": cmd_coreset, "mu": cmd_mu, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except RUNTIME_ERRORS as exc:
        print(f"logcoreset {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
