"""Command-line interface: ``swsampling <command> [options]``.

Exit codes: 0 on success, 2 for configuration errors, 3 for data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import diagnostics, harness, io
from .control_variates import default_degree, shcv_estimate
from .errors import ConfigError, DataError
from .ot1d import sw2_estimate
from .samplers import sample
from .samplers.lds import halton, sobol
from .sphere import Kind, SamplerSpec, make_rng

EXIT_CONFIG = 2
EXIT_DATA = 3


def _spec(args) -> SamplerSpec:
    spec = SamplerSpec.parse(args.strategy)
    hp = dict(spec.hyperparams)
    if args.fibonacci_literal and spec.kind is Kind.FIBONACCI:
        hp["literal"] = True
    if args.riesz_backtrack and spec.kind is Kind.RIESZ:
        hp["backtrack"] = True
    if hp != spec.hyperparams:
        spec = SamplerSpec(spec.kind, spec.mapping, spec.randomization, hp)
    return spec


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_generate(args) -> int:
    spec = _spec(args)
    traces: list = []
    dirs = sample(spec, args.m, args.d, seed=args.seed, trace=traces)
    out = args.out or "directions.swd"
    io.save_directions(out, dirs)
    info = {"file": out, "strategy": spec.label, "M": dirs.m, "d": dirs.dim, "seed": args.seed, "degenerate": dirs.degenerate}
    if traces:
        tr = traces[0]
        info["optimizer"] = {
            "iterations": tr.iterations,
            "converged": tr.converged,
            "initial": tr.initial,
            "final": tr.objective_per_iter[-1] if tr.objective_per_iter else None,
        }
    _emit(info)
    return 0


def cmd_estimate(args) -> int:
    mu = io.read_point_cloud(args.mu)
    nu = io.read_point_cloud(args.nu)
    rng = make_rng(args.seed)
    payload = {}
    if args.strategy.split(";")[0] == "shcv":
        _, degree = harness.parse_strategy(args.strategy)
        n = args.degree if args.degree is not None else degree
        n = default_degree(args.m, mu.dim) if n is None else n
        res = shcv_estimate(mu, nu, args.m, n=n, rng=rng, threads=args.threads)
        payload["degree"] = n
    elif args.directions:
        dirs = io.load_directions(args.directions)
        res = sw2_estimate(mu, nu, dirs, threads=args.threads)
    elif args.replicates:
        spec = _spec(args)
        vals = [sw2_estimate(mu, nu, sample(spec, args.m, mu.dim, rng=rng), threads=args.threads).value for _ in range(args.replicates)]
        res = diagnostics.rqmc_aggregate(vals, m_used=args.m * args.replicates)
        payload["replicates"] = args.replicates
    else:
        dirs = sample(_spec(args), args.m, mu.dim, seed=args.seed)
        res = sw2_estimate(mu, nu, dirs, threads=args.threads)
    payload.update(res.to_json())
    if res.std_error is not None:
        ci = diagnostics.confidence_interval(res.value, res.std_error, 1, args.level)
        payload["interval"] = [ci.low, ci.high]
        payload["level"] = args.level
    _emit(payload)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def cmd_bench(args) -> int:
    if args.config:
        config = harness.ExperimentConfig.from_file(args.config)
    else:
        config = harness.ExperimentConfig(
            dims=args.dims,
            m_schedule=args.m_schedule,
            strategies=args.strategies,
            seeds=list(range(args.n_seeds)),
            reference=args.reference,
        )
    if args.out:
        config.out = args.out
    if args.relative:
        config.relative = True
    if args.threads != 1:
        config.threads = args.threads
    if config.out is None:
        config.out = "results"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", harness.SweepWarning)
        records = harness.convergence_sweep(config, cache_dir=args.reference_cache)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _emit({"records": len(records), "out": config.out})
    return 0


def cmd_discrepancy(args) -> int:
    if args.measure == "star":
        if args.strategy.split(":")[0] not in ("halton", "sobol"):
            raise ConfigError("star discrepancy needs a cube sequence: halton or sobol")
        cube = halton(args.m, args.d) if args.strategy.startswith("halton") else sobol(args.m, args.d)
        val = diagnostics.star_discrepancy(cube)
        _emit({"measure": "star", "value": float(val), "bound": val.bound})
        return 0
    if args.directions:
        dirs = io.load_directions(args.directions)
    else:
        dirs = sample(_spec(args), args.m, args.d, seed=args.seed)
    if args.measure == "cap_l2":
        _emit({"measure": "cap_l2_squared", "value": diagnostics.cap_l2_discrepancy(dirs)})
    else:
        val = diagnostics.cap_max_discrepancy_approx(dirs, args.n_caps, make_rng(args.seed))
        _emit({"measure": "cap_max", "value": float(val), "bound": val.bound})
    return 0


def cmd_distmat(args) -> int:
    if args.diagrams:
        clouds = [io.read_diagram(p) for p in args.clouds]
        dim = 2
    else:
        clouds = [io.read_point_cloud(p) for p in args.clouds]
        dim = clouds[0].dim
    if args.directions:
        dirs = io.load_directions(args.directions)
    else:
        dirs = sample(_spec(args), args.m, dim, seed=args.seed)
    mat = harness.distance_matrix(clouds, dirs, diagrams=args.diagrams, threads=args.threads)
    if args.out:
        io.write_matrix(args.out, mat)
    else:
        np.savetxt(sys.stdout, mat, delimiter=",", fmt="%.17g")
    return 0


def _int_list(text: str) -> list[int]:
    return harness._parse_list(text, int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for projections")
    common.add_argument("--out", help="output path (file or directory, per command)")
    common.add_argument("--sobol-table", help="Joe-Kuo direction-number file (default: bundled)")
    common.add_argument("--relative", action="store_true", help="report relative instead of absolute errors")
    common.add_argument("--fibonacci-literal", action="store_true", help="use the index-0-based Fibonacci heights")
    common.add_argument("--riesz-backtrack", action="store_true", help="halve Riesz steps that increase the energy")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="swsampling", description="Sampling strategies for sliced Wasserstein estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a direction set")
    g.add_argument("--strategy", "--kind", dest="strategy", required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--d", "--dim", dest="d", type=int, required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", parents=[common], help="estimate SW2^2 between two point clouds")
    e.add_argument("--mu", required=True)
    e.add_argument("--nu", required=True)
    e.add_argument("--strategy", default="uniform")
    e.add_argument("--m", type=int, default=1000)
    e.add_argument("--degree", type=int, help="SHCV harmonic degree n (basis up to 2n)")
    e.add_argument("--directions", help="reuse a saved direction set")
    e.add_argument("--replicates", type=int, default=0, help="K randomized replicates (RQMC)")
    e.add_argument("--level", type=float, default=0.95)
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bench", parents=[common], help="run a convergence sweep")
    b.add_argument("--config", help="key = value experiment file")
    b.add_argument("--dims", type=_int_list, default=[3])
    b.add_argument("--m-schedule", type=_int_list, default=[100, 300, 1000, 3000, 10000])
    b.add_argument("--strategies", type=lambda s: harness._parse_list(s), default=["uniform"])
    b.add_argument("--n-seeds", type=int, default=20)
    b.add_argument("--reference", default="big_uniform:10000000")
    b.add_argument("--reference-cache", help="directory for cached reference values")
    b.set_defaults(func=cmd_bench)

    dsc = sub.add_parser("discrepancy", parents=[common], help="discrepancy of a point set")
    dsc.add_argument("--measure", choices=["cap_l2", "cap_max", "star"], default="cap_l2")
    dsc.add_argument("--strategy", default="uniform")
    dsc.add_argument("--m", type=int, default=1000)
    dsc.add_argument("--d", type=int, default=3)
    dsc.add_argument("--directions")
    dsc.add_argument("--n-caps", type=int, default=10000)
    dsc.set_defaults(func=cmd_discrepancy)

    dm = sub.add_parser("distmat", parents=[common], help="pairwise SW2^2 matrix")
    dm.add_argument("clouds", nargs="+")
    dm.add_argument("--diagrams", action="store_true", help="inputs are persistence diagrams")
    dm.add_argument("--strategy", default="uniform")
    dm.add_argument("--m", type=int, default=1000)
    dm.add_argument("--directions")
    dm.set_defaults(func=cmd_distmat)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.sobol_table:
        os.environ["SW_SOBOL_TABLE"] = args.sobol_table
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
