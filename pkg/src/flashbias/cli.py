"""Command-line driver: verify, decompose, cost and bench subcommands.

Numpy-backed modules are imported lazily so ``--threads`` can cap BLAS
thread pools through the environment before numpy loads. Timing runs
default to a single thread for comparable numbers.

Exit codes: 0 success, 1 property/verification failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

TOOL_VERSION = "0.1.0"

_GEN_HELP = """generator spec grammar: name:arg,arg,...
  alibi:N,M[,slope]       linear positional bias slope*(i-j)
  spatial:N,M[,seed]      squared 3-D distance over seeded points in [0,1]^3
  gravity:N[,seed]        inverse squared 2-D distance, 0.01 on the diagonal
  spherical:N[,seed]      great-circle distance over seeded (lat, lon)
  randlowrank:N,M,R[,seed] seeded random bias of exact rank R
"""


def _set_thread_env(argv) -> None:
    threads = "1"
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            threads = argv[i + 1]
        elif a.startswith("--threads="):
            threads = a.split("=", 1)[1]
    import os
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, threads)


def _parse_int_list(text: str):
    vals = [int(v) for v in text.split(",") if v.strip() != ""]
    if not vals:
        raise argparse.ArgumentTypeError("sweep list must not be empty")
    return vals


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _report(config: dict, results: list) -> str:
    return json.dumps({"tool_version": TOOL_VERSION, "config": config,
                       "results": results}, indent=2)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="flashbias",
        description="attention-with-bias toolkit: verification, bias "
                    "decomposition, HBM cost tables and benchmarks",
        epilog=_GEN_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("--threads", type=int, default=1,
                    help="BLAS thread cap (default 1 for stable timings)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the oracle/property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20,
                   help="seeded instances per equivalence property")
    p.add_argument("--perturb-bias", type=float, default=0.0,
                   help="inject this much error into the factored path "
                        "(demonstrates the check fails)")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("decompose", help="factor a bias matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="in_path", help="DBM1 dense matrix file")
    src.add_argument("--gen", help="generator spec (see below)")
    p.add_argument("--method", choices=("exact", "svd", "neural"), required=True)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--energy", type=float, default=None)
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--out", required=True, help="FBF1 output path")

    p = sub.add_parser("cost", help="HBM access tables for each algorithm")
    p.add_argument("--n", type=_parse_int_list, required=True)
    p.add_argument("--m", type=_parse_int_list, default=None,
                   help="defaults to the n sweep")
    p.add_argument("--c", type=_parse_int_list, default=[64])
    p.add_argument("--r", type=_parse_int_list, default=[64])
    p.add_argument("--sram-bytes", type=int, default=100 * 1024)
    p.add_argument("--dtype", choices=("f32", "f64", "f16"), default="f16",
                   help="element size used for byte accounting")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="csv")

    p = sub.add_parser("bench", help="time the attention paths")
    p.add_argument("--n", type=_parse_int_list, required=True)
    p.add_argument("--c", type=int, default=64)
    p.add_argument("--r", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--sram-bytes", type=int, default=None,
                   help="derive tile sizes from this budget instead of the "
                        "128-row default")
    p.add_argument("--runs", type=int, default=11)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--max-bias-bytes", type=int, default=256 * 1024 * 1024)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def _cmd_verify(args) -> int:
    from .verify import run_verification
    if args.instances < 1:
        build_parser().error("--instances must be >= 1")
    results = run_verification(args.seed, args.instances, args.perturb_bias)
    config = {"seed": args.seed, "instances": args.instances,
              "perturb_bias": args.perturb_bias}
    if args.format == "csv":
        lines = ["name,passed,error,threshold"]
        lines += [f"{r.name},{r.passed},{r.error},{r.threshold}" for r in results]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_report(config, [r.as_dict() for r in results]), args.out)
    return 0 if all(r.passed for r in results) else 1


def _parse_gen(spec: str):
    import numpy as np
    from . import bias
    from .rng import Rng
    name, _, argtext = spec.partition(":")
    try:
        vals = [float(v) for v in argtext.split(",") if v.strip() != ""]
    except ValueError:
        raise ValueError(f"non-numeric argument in generator spec {spec!r}")

    def ints(k):
        return [int(v) for v in vals[:k]]

    if name == "alibi":
        n, m = ints(2)
        slope = vals[2] if len(vals) > 2 else 1.0
        coords_q = np.arange(1, n + 1, dtype=float).reshape(-1, 1)
        coords_k = np.arange(1, m + 1, dtype=float).reshape(-1, 1)
        return bias.AlibiBias(n, m, slope), coords_q, coords_k
    if name == "spatial":
        n, m = ints(2)
        seed = int(vals[2]) if len(vals) > 2 else 0
        rng = Rng(seed)
        pq, pk = rng.uniform(n, 3), rng.uniform(m, 3)
        return bias.SpatialDistanceBias(pq, pk), pq, pk
    if name == "gravity":
        n = ints(1)[0]
        seed = int(vals[1]) if len(vals) > 1 else 0
        pos = Rng(seed).uniform(n, 2)
        return bias.GravityBias(pos), pos, pos
    if name == "spherical":
        n = ints(1)[0]
        seed = int(vals[1]) if len(vals) > 1 else 0
        rng = Rng(seed)
        lat = rng.uniform(n) * np.pi - np.pi / 2
        lon = rng.uniform(n) * 2 * np.pi - np.pi
        ll = np.stack([lat, lon], axis=1)
        return bias.SphericalDistanceBias(ll), ll, ll
    if name == "randlowrank":
        n, m, r = ints(3)
        seed = int(vals[3]) if len(vals) > 3 else 0
        g = bias.RandomLowRankBias(n, m, r, seed)
        cq = (np.arange(n, dtype=float) / max(n, 1)).reshape(-1, 1)
        ck = (np.arange(m, dtype=float) / max(m, 1)).reshape(-1, 1)
        return g, cq, ck
    raise ValueError(f"unknown generator {name!r}")


def _cmd_decompose(args) -> int:
    import numpy as np
    from .bias import AlibiBias, SpatialDistanceBias, generate_bias
    from .decompose import decompose_alibi, decompose_spatial, reconstruction_report, svd_decompose
    from .fileio import read_dbm1, write_fbf1
    from .neural import neural_decompose

    gen = coords_q = coords_k = None
    if args.gen:
        gen, coords_q, coords_k = _parse_gen(args.gen)
        target = generate_bias(gen)
    else:
        target = np.asarray(read_dbm1(args.in_path), dtype=np.float64)
        # no source coordinates in a dense file: fall back to row/col index
        coords_q = (np.arange(target.shape[0], dtype=float) / target.shape[0]).reshape(-1, 1)
        coords_k = (np.arange(target.shape[1], dtype=float) / target.shape[1]).reshape(-1, 1)

    trace_path = None
    if args.method == "exact":
        if isinstance(gen, AlibiBias):
            fb = decompose_alibi(gen.n, gen.m, gen.slope)
        elif isinstance(gen, SpatialDistanceBias):
            fb = decompose_spatial(gen.pos_q, gen.pos_k, gen.row_weights)
        else:
            build_parser().error("exact decomposition applies only to "
                                 "alibi/spatial generator specs")
        report = reconstruction_report(fb, target)
    elif args.method == "svd":
        if (args.rank is None) == (args.energy is None):
            build_parser().error("svd needs exactly one of --rank/--energy")
        fb, report = svd_decompose(target, rank=args.rank, energy=args.energy)
    else:
        if args.rank is None:
            build_parser().error("neural decomposition needs --rank")
        fb, _, losses = neural_decompose(coords_q, coords_k, target,
                                         rank=args.rank, hidden=args.hidden,
                                         iters=args.iters, lr=args.lr,
                                         seed=args.seed)
        report = reconstruction_report(fb, target)
        trace_path = args.out + ".losses.json"
        with open(trace_path, "w") as f:
            json.dump({"losses": losses}, f)

    write_fbf1(args.out, fb, args.dtype)
    result = report.as_dict()
    result.update({"origin": fb.origin, "out": args.out})
    if trace_path:
        result["loss_trace"] = trace_path
        result["initial_loss"] = losses[0]
        result["final_loss"] = losses[-1]
    config = {k: getattr(args, k) for k in
              ("in_path", "gen", "method", "rank", "energy", "seed", "dtype")}
    _emit(_report(config, [result]), None)
    return 0


def _cmd_cost(args) -> int:
    from .costmodel import (CSV_HEADER, CostParams, asymptotic_flash_io,
                            asymptotic_flashbias_io, asymptotic_standard_io,
                            count_flash, count_flashbias, count_standard)
    dtype_bytes = {"f16": 2, "f32": 4, "f64": 8}[args.dtype]
    ms = args.m or args.n
    if len(ms) != len(args.n):
        build_parser().error("--m sweep must match --n in length")
    rows = []
    for n, m in zip(args.n, ms):
        for c in args.c:
            for r in args.r:
                p = CostParams(n=n, m=m, c=c, r=r,
                               sram_bytes=args.sram_bytes,
                               dtype_bytes=dtype_bytes)
                reports = [count_standard(p),
                           count_flash(p, dense_bias=False),
                           count_flash(p, dense_bias=True),
                           count_flashbias(p)]
                theta = {
                    "standard": asymptotic_standard_io(p),
                    "flash": asymptotic_flash_io(p, False),
                    "flash_dense_bias": asymptotic_flash_io(p, True),
                    "flashbias": asymptotic_flashbias_io(p),
                }
                baseline = next(x for x in reports
                                if x.algorithm == "flash_dense_bias")
                for rep in reports:
                    d = rep.as_dict()
                    d["ratio_vs_flash_dense_bias"] = baseline.total / rep.total
                    d["theta_total"] = theta[rep.algorithm]
                    d["theta_ratio_vs_flash_dense_bias"] = (
                        theta["flash_dense_bias"] / theta[rep.algorithm])
                    rows.append(d)

    if args.format == "csv":
        extra = ["ratio_vs_flash_dense_bias", "theta_total",
                 "theta_ratio_vs_flash_dense_bias"]
        header = CSV_HEADER + "," + ",".join(extra)
        lines = [header]
        for d in rows:
            lines.append(",".join(str(d[k]) for k in header.split(",")))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        config = {"n": args.n, "m": ms, "c": args.c, "r": args.r,
                  "sram_bytes": args.sram_bytes, "dtype": args.dtype}
        _emit(_report(config, rows), args.out)
    return 0


def _cmd_bench(args) -> int:
    from .attention import choose_tile_sizes
    from .bench import BenchConfig, bench_csv_rows, checksum_agreement, run_bench
    tiles = None
    if args.sram_bytes is not None:
        itemsize = 4 if args.dtype == "f32" else 8
        tiles = choose_tile_sizes(args.c, args.r, args.sram_bytes, itemsize)
    cfg = BenchConfig(ns=args.n, c=args.c, r=args.r, seed=args.seed,
                      dtype=args.dtype, tiles=tiles, runs=args.runs,
                      warmup=args.warmup, max_bias_bytes=args.max_bias_bytes)
    results = run_bench(cfg)
    if args.format == "csv":
        _emit(bench_csv_rows(results), args.out)
    else:
        config = {"n": args.n, "c": args.c, "r": args.r, "seed": args.seed,
                  "dtype": args.dtype, "runs": args.runs,
                  "max_bias_bytes": args.max_bias_bytes}
        _emit(_report(config, [r.as_dict() for r in results]), args.out)
    bad = checksum_agreement(results)
    if bad:
        sys.stderr.write("checksum disagreement:\n" + "\n".join(bad) + "\n")
        return 1
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _set_thread_env(argv)
    args = build_parser().parse_args(argv)
    from .errors import ConfigError, ValidationError
    handlers = {"verify": _cmd_verify, "decompose": _cmd_decompose,
                "cost": _cmd_cost, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
