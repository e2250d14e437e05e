"""Command-line interface.

Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench
from .design_core import CriterionKind, criterion_full
from .emulator import GpHyperParams, estimate_lengthscales, fit_shared_model, predict_batch
from .errors import NumericalError, ValidationError
from .io import (
    format_table,
    read_column,
    read_design,
    read_sidecar,
    sidecar_dict,
    spec_from_sidecar,
    write_design,
    write_sidecar,
    write_text,
)
from .lattice_designs import gaussian_reduce, lattice_criterion
from .optimizers import LlhdSearchConfig, SaConfig, korobov_search, llhd_optimize, random_lhd, sa_optimize_lhd
from .rlhd import PointIndex, RlhdSpec, rlhd_points, rlhd_size

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
GENERATE_METHODS = ("lhd", "olhd", "llhd", "plhd", "sliced-llhd", "rlhd")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _progress(stream):
    def emit(t, best):
        stream.write(f"{t},{best:.17g}\n")
        stream.flush()
    return emit


def _sidecar_path(args) -> Path | None:
    if args.sidecar:
        return Path(args.sidecar)
    if args.out and args.out != "-":
        return Path(args.out).with_suffix(".json")
    return None


def cmd_generate(args) -> int:
    method, n, d, seed = args.method, args.n, args.d, args.seed
    kind = CriterionKind.parse(args.criterion)
    progress = _progress(sys.stderr)
    if method != "rlhd" and (n is None or d is None):
        raise ValidationError("--n and --d are required")
    if method == "lhd":
        design = random_lhd(n, d, seed)
        meta = sidecar_dict(criterion=kind, value=criterion_full(design, kind) if n > 1 else None,
                            seed=seed, type="lhd", n=n, d=d)
    elif method == "olhd":
        design = sa_optimize_lhd(SaConfig(n, d, T=args.iters, kind=kind, seed=seed), progress, args.stride)
        meta = sidecar_dict(criterion=kind, value=design.provenance["value"], seed=seed, type="olhd", n=n, d=d)
    elif method in ("llhd", "sliced-llhd"):
        slices = args.slices if method == "sliced-llhd" else 1
        if method == "sliced-llhd" and slices < 2:
            raise ValidationError("sliced-llhd needs --slices >= 2")
        spec, design = llhd_optimize(LlhdSearchConfig(n, d, T=args.iters, kind=kind, seed=seed,
                                                      slices=slices), progress)
        meta = sidecar_dict(spec, kind, lattice_criterion(spec, kind), seed)
        if slices > 1:
            meta["slices"] = slices
    elif method == "plhd":
        delta = np.random.default_rng(seed).integers(0, n, size=d)
        spec, design = korobov_search(n, d, kind, delta=delta)
        meta = sidecar_dict(spec, kind, design.provenance["value"], seed, type="plhd", g=design.provenance["g"])
    else:
        if n is None or args.m is None:
            raise ValidationError("rlhd needs --n and --m")
        if args.v is None:
            if d is None:
                raise ValidationError("rlhd needs --v or --d")
            v = llhd_optimize(LlhdSearchConfig(args.m, d, T=args.iters, kind=kind, seed=seed), progress)[0].v
        else:
            v = args.v
        delta = args.delta if args.delta is not None else [0] * len(v)
        spec = RlhdSpec(n, args.m, v, delta)
        design, _ = rlhd_points(spec)
        meta = sidecar_dict(spec, None, None, seed)
    write_design(args.out, design)
    side = _sidecar_path(args)
    if side is not None:
        write_sidecar(side, meta)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pts = read_design(args.design)
    kinds = [CriterionKind.parse(k) for k in _names(args.criteria)]
    rows = []
    for k in kinds:
        if k is CriterionKind.WF2 and pts.shape[1] > 1:
            rows.append([k.value, criterion_full(pts, k, resolution=args.resolution)])
        else:
            rows.append([k.value, criterion_full(pts, k)])
    write_text(args.out, format_table(["criterion", "value"], rows))
    return EXIT_OK


def cmd_reduce(args) -> int:
    if len(args.v) != 2:
        raise ValidationError("reduce takes a 2-D generator, e.g. --v 1,7")
    basis = gaussian_reduce(args.n, args.v)
    rows = [["a", f"{basis.a[0]} {basis.a[1]}"], ["b", f"{basis.b[0]} {basis.b[1]}"],
            ["y", basis.y], ["z", basis.z], ["separation", basis.separation], ["fill", basis.fill]]
    write_text(args.out, format_table(["quantity", "value"], rows))
    return EXIT_OK


def cmd_corr_study(args) -> int:
    res = bench.correlation_study(args.n, args.d, args.num_designs, args.seed)
    write_text(args.out, res.to_csv())
    return EXIT_OK


def cmd_bench_integrate(args) -> int:
    res = bench.integration_benchmark(_names(args.functions), _names(args.methods), args.n_grid,
                                      args.replicates, args.seed, args.threads, args.iters)
    write_text(args.out, res.to_csv())
    return EXIT_OK


def cmd_bench_emulate(args) -> int:
    reports = []
    for r in range(args.repeats):
        rep = bench.emulation_benchmark(args.function, args.n_target, args.m, args.q_window, args.n_test,
                                        bench.cell_seed(args.seed, r), run_baseline=not args.no_baseline)
        sys.stderr.write(f"repeat {r}: rmse={rep.rmse:.6g} pd_rmse={rep.pd_rmse:.6g}\n")
        reports.append(rep)
    config = {"function": args.function, "n_target": args.n_target, "m": args.m,
              "q_window": args.q_window, "n_test": args.n_test, "repeats": args.repeats}
    write_text(args.out, bench.emulation_csv(reports, args.seed, config))
    return EXIT_OK


def _design_index(pts: np.ndarray, spec: RlhdSpec) -> PointIndex:
    """Index of a design file's rows by integer key, checked against the spec."""
    if pts.shape[1] != spec.d:
        raise ValidationError(f"design has {pts.shape[1]} columns, spec has d={spec.d}")
    scaled = pts * spec.n - 0.5
    keys = np.round(scaled).astype(np.int64)
    if np.any(np.abs(scaled - keys) > 1e-6):
        raise ValidationError("design points are not on the spec's 1/n grid")
    if len(keys) != rlhd_size(spec):
        raise ValidationError(f"design has {len(keys)} rows, the spec generates {rlhd_size(spec)}")
    ref_keys = rlhd_points(spec)[1].keys
    index = PointIndex(keys, spec.n)
    index.lookup(ref_keys)  # every generated point must be present
    return index


def cmd_emulate(args) -> int:
    spec = spec_from_sidecar(read_sidecar(args.sidecar))
    if not isinstance(spec, RlhdSpec):
        raise ValidationError("emulate needs an rlhd sidecar")
    pts = read_design(args.design)
    y = read_column(args.outputs)
    if len(y) != len(pts):
        raise ValidationError(f"{len(y)} outputs for {len(pts)} design points")
    index = _design_index(pts, spec)
    if args.theta == "auto":
        q = args.q_window or min(bench.window_width_for(50, spec.m, spec.d), spec.n)
        params = estimate_lengthscales(spec, y, q_window=q, seed=args.seed, index=index)
    else:
        params = GpHyperParams(tuple(float(t) for t in args.theta.split(",")))
    model = fit_shared_model(spec, y, params, index)
    X = read_design(args.test)
    mean, var = predict_batch(model, X)
    text = format_table(["mean", "variance"], ([float(a), float(b)] for a, b in zip(mean, var)))
    write_text(args.pred or args.out, text)
    sys.stderr.write("theta=" + ",".join(f"{t:.6g}" for t in params.theta) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file ('-' for stdout)")

    parser = argparse.ArgumentParser(prog="latticelhd", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default="-")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="build a design")
    p.add_argument("--method", choices=GENERATE_METHODS, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int, help="window size (rlhd)")
    p.add_argument("--v", type=_ints, help="generator, comma separated (rlhd)")
    p.add_argument("--delta", type=_ints, help="shift, comma separated (rlhd)")
    p.add_argument("--criterion", default="WD")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--slices", type=int, default=1)
    p.add_argument("--stride", type=int, default=100, help="progress line interval (olhd)")
    p.add_argument("--sidecar", help="JSON sidecar path (default: next to --out)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="criteria of a design file")
    p.add_argument("--design", required=True)
    p.add_argument("--criteria", default="WS,WA,WP,WD,WS2")
    p.add_argument("--resolution", type=int, default=256)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reduce", parents=[common], help="reduced basis of a 2-D lattice design")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--v", type=_ints, required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("corr-study", parents=[common], help="criterion correlations")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--num-designs", type=int, default=1000)
    p.set_defaults(func=cmd_corr_study)

    p = sub.add_parser("bench-integrate", parents=[common], help="integration error benchmark")
    p.add_argument("--functions", default="borehole")
    p.add_argument("--methods", default=",".join(bench.INTEGRATION_METHODS))
    p.add_argument("--n-grid", type=_ints, default=[256, 512, 1024])
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--iters", type=int, default=2000)
    p.set_defaults(func=cmd_bench_integrate)

    p = sub.add_parser("bench-emulate", parents=[common], help="emulation RMSE benchmark")
    p.add_argument("--function", default="ackley", choices=bench.EMULATION_FUNCTIONS)
    p.add_argument("--n-target", type=int, default=2000)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--q-window", type=int, default=None, help="estimation window width in grid cells")
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--no-baseline", action="store_true")
    p.set_defaults(func=cmd_bench_emulate)

    p = sub.add_parser("emulate", parents=[common], help="predict from outputs on an rlhd design")
    p.add_argument("--design", required=True)
    p.add_argument("--sidecar", required=True)
    p.add_argument("--outputs", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--pred")
    p.add_argument("--theta", default="auto")
    p.add_argument("--q-window", type=int, default=None)
    p.set_defaults(func=cmd_emulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValidationError, KeyError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
