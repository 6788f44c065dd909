"""Command line entry point: ``rmc {gen,solve,simulate,brute,verify,experiment}``.

Exit codes: 0 success, 1 failed check or invariant violation, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from .brute import MAX_BRUTE_STATES, brute_opt_sets, verify_minimizer
from .chain import ChainError
from .experiment import (
    POLICIES,
    ConfigError,
    ExperimentConfig,
    InvariantViolation,
    format_summary,
    load_scenario,
    rows_to_csv,
    run_experiment,
    seed_from_env,
)
from .game24 import gen_game24
from .generators import gen_dummy, gen_lb_tree, gen_random, gen_vgb, random_vgb_tables
from .solver import compute_opt
from .verify import FAULTS, run_battery


class UsageError(Exception):
    pass


def _fmt_value(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    kind = args.generator
    if kind == "dummy":
        chain = gen_dummy(args.n, args.p)
    elif kind == "lbtree":
        chain, obs = gen_lb_tree(args.delta, args.d, args.eps, args.seed, args.depth)
        obs_path = args.obs_out or str(Path(args.out).with_suffix("")) + ".obs.json"
        obs.save(obs_path)
    elif kind == "vgb":
        pi_ref, Vb = random_vgb_tables(args.alphabet, args.depth, np.random.default_rng(args.seed))
        chain = gen_vgb(args.alphabet, args.depth, pi_ref, Vb)
    elif kind == "random":
        chain = gen_random(args.n, args.avg_degree, args.seed, not args.allow_unreachable)
    elif kind == "game24":
        try:
            nums = [int(v) for v in args.nums.replace(" ", ",").split(",") if v]
        except ValueError as exc:
            raise UsageError(f"--nums must be comma-separated integers: {args.nums!r}") from exc
        chain, _ = gen_game24(nums, args.keep_history)
    else:
        raise UsageError(f"unknown generator {kind!r}")
    problems = chain_mod.validate(chain)
    if problems:
        print("generated chain failed validation: " + "; ".join(map(str, problems)), file=sys.stderr)
        return 1
    chain_mod.save(chain, args.out)
    print(f"wrote {args.out}: {chain.n} states, {chain.num_edges} edges", file=sys.stderr)
    return 0


def cmd_solve(args) -> int:
    chain = chain_mod.load(args.chain)
    table = compute_opt(chain, args.method)
    rank = table.settled_rank()
    lines = ["state,value,settled_rank"]
    for x in range(chain.n):
        lines.append(f"{x},{_fmt_value(table.values[x])},{rank[x]}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    p: dict = {"name": args.policy}
    for key, val in (
        ("eps", args.eps),
        ("lambda", args.lam),
        ("nbound", args.nbound),
        ("tau", args.tau),
        ("k", args.k),
        ("max_steps", args.max_steps),
        ("oracle", args.oracle),
    ):
        if val is not None:
            p[key] = val
    if args.policy == "stable" and args.no_reset:
        p["with_reset"] = False
    if args.fast_groups:
        p["group_sampler"] = "gamma"
    chain_spec = {"file": args.chain}
    if args.obs:
        chain_spec["observations"] = args.obs
    config = ExperimentConfig(
        scenario="simulate",
        chain=chain_spec,
        policies=[p],
        replications=args.reps,
        seed=seed_from_env(args.seed),
    )
    rows, summary = run_experiment(config, workers=args.workers)
    _write(rows_to_csv(rows), args.out)
    print(format_summary(summary), file=sys.stderr)
    return 0


def cmd_brute(args) -> int:
    chain = chain_mod.load(args.chain)
    if chain.n > MAX_BRUTE_STATES:
        raise UsageError(f"brute force is limited to {MAX_BRUTE_STATES} states, chain has {chain.n}")
    table = brute_opt_sets(chain)
    print("state,value")
    for x in range(chain.n):
        print(f"{x},{_fmt_value(table.singleton(x))}")
    print(f"minimizer_violation={verify_minimizer(chain, table):.3g}")
    return 0


def cmd_verify(args) -> int:
    results = run_battery(seed=args.seed, fault=args.fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def cmd_experiment(args) -> int:
    src = args.config
    config = ExperimentConfig.load(src) if Path(src).is_file() else load_scenario(src)
    if args.reps is not None:
        config.replications = args.reps
    config.seed = seed_from_env(config.seed)
    rows, summary = run_experiment(config, workers=args.workers)
    out = args.out or config.output
    csv_text = rows_to_csv(rows)
    if out:
        Path(out).write_text(csv_text, encoding="utf-8")
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        if not out:
            sys.stdout.write(csv_text)
        print(format_summary(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmc", description="Markov chains with rewinding")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a chain file")
    gsub = g.add_subparsers(dest="generator", required=True)
    gd = gsub.add_parser("dummy")
    gd.add_argument("--n", type=int, required=True)
    gd.add_argument("--p", type=float, default=0.5)
    gl = gsub.add_parser("lbtree")
    gl.add_argument("--delta", type=int, required=True)
    gl.add_argument("--d", type=int, default=1)
    gl.add_argument("--eps", type=float, required=True)
    gl.add_argument("--seed", type=int, default=0)
    gl.add_argument("--depth", type=int, default=None, help="override the depth 10*d")
    gl.add_argument("--obs-out", default=None, help="observations sidecar (default: OUT.obs.json)")
    gv = gsub.add_parser("vgb")
    gv.add_argument("--alphabet", type=int, default=2)
    gv.add_argument("--depth", type=int, default=3)
    gv.add_argument("--seed", type=int, default=0)
    gr = gsub.add_parser("random")
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--avg-degree", type=float, default=3.0)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--allow-unreachable", action="store_true")
    gg = gsub.add_parser("game24")
    gg.add_argument("--nums", required=True, help="e.g. 4,4,6,8")
    gg.add_argument("--keep-history", action="store_true")
    for sp in (gd, gl, gv, gr, gg):
        sp.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="print optimal hitting times as CSV")
    s.add_argument("--chain", required=True)
    s.add_argument("--method", choices=("heap", "dense"), default="heap")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="replicate one policy on a chain file")
    m.add_argument("--chain", required=True)
    m.add_argument("--policy", choices=POLICIES, required=True)
    m.add_argument("--reps", type=int, default=100)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--eps", type=float)
    m.add_argument("--lambda", dest="lam", type=float)
    m.add_argument("--nbound", type=float)
    m.add_argument("--tau", type=float)
    m.add_argument("--k", type=int)
    m.add_argument("--max-steps", type=int)
    m.add_argument("--oracle", choices=("exact", "laplace", "adversarial"))
    m.add_argument("--obs", default=None, help="lb-tree observations for --oracle adversarial")
    m.add_argument("--no-reset", action="store_true", help="stable: disable the 4N restart")
    m.add_argument("--fast-groups", action="store_true",
                   help="draw median-of-means batch sums directly (same distribution)")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("brute", help="subset brute force on a small chain")
    b.add_argument("--chain", required=True)
    b.set_defaults(func=cmd_brute)

    v = sub.add_parser("verify", help="run the invariant battery")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--fault", choices=FAULTS, default=None, help="inject a fault (self-test)")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a config file or bundled scenario")
    e.add_argument("config", help="config path or bundled scenario name")
    e.add_argument("--reps", type=int, default=None)
    e.add_argument("--out", default=None, help="per-replication CSV path")
    e.add_argument("--json", action="store_true", help="print the summary as JSON")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ConfigError, ChainError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
