"""Command line entry point (``vortex-pool`` / ``python -m vortex_pooling``)."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bench import BenchmarkMismatch, bench_pyramid
from .footprint import MODES, footprint
from .modules import (
    HEAD,
    IMAGE_LEVEL,
    load_config,
    module_forward,
    pipeline_forward,
    random_bank,
    with_impl,
)
from .suites import adjoint_suite, gradient_suite, module_equivalence, pyramid_equivalence
from .tensor import (
    FormatError,
    fmap_read,
    fmap_write,
    rng_fill,
    weight_bank_read,
    weight_bank_write,
)

EQ_TOL = 1e-9
ADJOINT_TOL = 1e-9


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _real(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}") from None


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected R,C, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer pair: {text!r}") from None


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_forward(args):
    cfg = load_config(args.config)
    if args.impl:
        cfg = with_impl(cfg, args.impl)
    bank = weight_bank_read(args.weights)
    x = fmap_read(args.input)
    if args.head:
        out_h, out_w = args.upsample or (x.shape[0], x.shape[1])
        y = pipeline_forward(x, cfg, bank, out_h, out_w)
    else:
        y = module_forward(x, cfg, bank)
    fmap_write(y, args.output)
    return 0


def cmd_eq_check(args):
    ok = True
    for suite, cases, tol in (
        ("pyramid", pyramid_equivalence(args.seed, args.cases, args.max_size), EQ_TOL),
        ("module_b", module_equivalence(args.seed, args.cases, 8,
                                        max(8, args.max_size)), EQ_TOL),
    ):
        worst = max(cases, key=lambda c: c.max_abs_diff)
        passed = worst.max_abs_diff <= tol
        ok &= passed
        _emit({"suite": suite, "cases": len(cases), "worst_case": worst.label,
               "max_abs_diff": worst.max_abs_diff, "tol": tol, "passed": passed})
    return 0 if ok else 1


def cmd_footprint(args):
    cfg = load_config(args.config)
    modes = MODES if args.mode == "both" else (args.mode,)
    for mode in modes:
        rep = footprint(cfg, args.h, args.w, args.pixel, mode)
        line = f"mode={rep.mode} u={rep.u} hw={rep.h * rep.w} r={rep.r:.6f}"
        if rep.pixel is not None:
            line += f" pixel={rep.pixel[0]},{rep.pixel[1]}"
        print(line)
    return 0


def cmd_gradcheck(args):
    ok = True
    for rep in gradient_suite(args.eps, args.tol):
        ok &= rep.passed
        _emit({"check": "finite_diff", "op": rep.op_name, "max_rel_err": rep.max_rel_err,
               "worst_index": rep.worst_index, "passed": rep.passed})
    for name, gap in adjoint_suite():
        passed = gap <= ADJOINT_TOL
        ok &= passed
        _emit({"check": "adjoint", "op": name, "rel_gap": gap, "passed": passed})
    return 0 if ok else 1


def cmd_bench(args):
    try:
        results = bench_pyramid(args.k, args.levels, args.h, args.w, args.c, args.dtype,
                                args.reps, threads=args.threads, seed=args.seed)
    except BenchmarkMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for r in results:
        _emit(r.to_json_dict())
    return 0


def cmd_gen(args):
    fmap_write(rng_fill(args.seed, args.h, args.w, args.c,
                       {"f32": np.float32, "f64": np.float64}[args.dtype]), args.out)
    return 0


def cmd_gen_weights(args):
    cfg = load_config(args.config)
    bank = random_bank(cfg, args.in_c, args.seed, n_classes=args.classes)
    weight_bank_write(bank, args.out)
    names = [n for n in bank if n not in (IMAGE_LEVEL, HEAD)]
    print(f"wrote {len(bank)} entries ({', '.join(names)}"
          f"{', ' + IMAGE_LEVEL if IMAGE_LEVEL in bank else ''}"
          f"{', ' + HEAD if HEAD in bank else ''}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortex-pool", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forward", help="run a context module on an FMAP file")
    s.add_argument("--config", required=True)
    s.add_argument("--weights", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--impl", choices=("naive", "cascaded"))
    s.add_argument("--head", action="store_true",
                   help="append image-level branch and head from the weight bank")
    s.add_argument("--upsample", type=_pair, metavar="H,W",
                   help="head output size (default: input size)")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("eq-check", help="naive vs cascaded equivalence suites")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--cases", type=_positive, default=200)
    s.add_argument("--max-size", type=_positive, default=64)
    s.set_defaults(func=cmd_eq_check)

    s = sub.add_parser("footprint", help="dependency footprint and utilization ratio")
    s.add_argument("--config", required=True)
    s.add_argument("--h", type=_positive, required=True)
    s.add_argument("--w", type=_positive, required=True)
    s.add_argument("--pixel", type=_pair, metavar="R,C")
    s.add_argument("--mode", choices=MODES + ("both",), default="both")
    s.set_defaults(func=cmd_footprint)

    s = sub.add_parser("gradcheck", help="finite-difference and adjoint suites")
    s.add_argument("--eps", type=_real, default=1e-5)
    s.add_argument("--tol", type=_real, default=1e-6)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("bench", help="time pooling pyramid implementations")
    s.add_argument("--k", type=_positive, default=3)
    s.add_argument("--levels", type=_positive, default=3)
    s.add_argument("--h", type=_positive, required=True)
    s.add_argument("--w", type=_positive, required=True)
    s.add_argument("--c", type=_positive, required=True)
    s.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    s.add_argument("--reps", type=_positive, default=5)
    s.add_argument("--threads", type=_positive, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("gen", help="write a seeded random FMAP file")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--h", type=_positive, required=True)
    s.add_argument("--w", type=_positive, required=True)
    s.add_argument("--c", type=_positive, required=True)
    s.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("gen-weights", help="write a seeded weight bank for a config")
    s.add_argument("--config", required=True)
    s.add_argument("--in-c", type=_positive, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--classes", type=_positive, help="also write head weights")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_weights)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, FormatError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
