"""Replicated policy runs: configs, seeding, CSV rows and summaries."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import chain as chain_mod
from .chain import MarkovChain
from .game24 import gen_game24
from .generators import LbTreeObservations, gen_dummy, gen_lb_tree, gen_random, gen_vgb, random_vgb_tables
from .oracles import AdversarialOracle, ExactOracle, LaplaceOracle
from .policies import (
    RunRecord,
    default_max_steps,
    estimate_n_bound,
    is_caterpillar,
    run_aux,
    run_cat,
    run_k_parallel,
    run_no_rewind,
    run_softmax_cat,
    run_stable,
)
from .solver import HittingTimeTable, compute_opt_heap

CSV_HEADER = ["run_id", "policy", "chain", "seed", "steps", "oracle_cost", "success", "caterpillar"]
POLICIES = ("cat", "aux", "stable", "softmax", "norewind", "kparallel")


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


def derive_seed(master_seed: int, index: int) -> int:
    """Replication seed from ``(master_seed, index)``; independent of run order."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class ExperimentConfig:
    scenario: str
    chain: dict
    policies: list[dict]
    replications: int = 100
    seed: int = 0
    output: str | None = None

    @classmethod
    def from_json_obj(cls, obj: Any, source: str = "<config>") -> ExperimentConfig:
        if not isinstance(obj, dict):
            raise ConfigError(f"{source}: top level must be an object")
        missing = [k for k in ("scenario", "chain", "policies") if k not in obj]
        if missing:
            raise ConfigError(f"{source}: missing field(s) {', '.join(missing)}")
        unknown = set(obj) - {"scenario", "chain", "policies", "replications", "seed", "output"}
        if unknown:
            raise ConfigError(f"{source}: unknown field(s) {', '.join(sorted(unknown))}")
        if not isinstance(obj["chain"], dict):
            raise ConfigError(f"{source}: 'chain' must be an object")
        pols = obj["policies"]
        if not isinstance(pols, list) or not pols or not all(isinstance(p, dict) for p in pols):
            raise ConfigError(f"{source}: 'policies' must be a nonempty list of objects")
        for i, p in enumerate(pols):
            if p.get("name") not in POLICIES:
                raise ConfigError(f"{source}: policies[{i}].name must be one of {', '.join(POLICIES)}")
        reps = obj.get("replications", 100)
        seed = obj.get("seed", 0)
        if not isinstance(reps, int) or reps < 1:
            raise ConfigError(f"{source}: 'replications' must be a positive integer")
        if not isinstance(seed, int):
            raise ConfigError(f"{source}: 'seed' must be an integer")
        return cls(
            scenario=str(obj["scenario"]),
            chain=dict(obj["chain"]),
            policies=[dict(p) for p in pols],
            replications=reps,
            seed=seed,
            output=obj.get("output"),
        )

    def to_json_obj(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_json_obj(obj, str(path))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=2) + "\n", encoding="utf-8")


def bundled_scenarios() -> list[str]:
    files = resources.files("rmc").joinpath("scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_scenario(name: str) -> ExperimentConfig:
    res = resources.files("rmc").joinpath("scenarios", f"{name}.json")
    if not res.is_file():
        raise ConfigError(f"no bundled scenario {name!r} (have: {', '.join(bundled_scenarios())})")
    return ExperimentConfig.from_json_obj(json.loads(res.read_text(encoding="utf-8")), name)


# -- chains ---------------------------------------------------------------------


@dataclass
class ChainBundle:
    chain: MarkovChain
    name: str
    table: HittingTimeTable
    observations: LbTreeObservations | None = None


def build_chain(spec: dict) -> ChainBundle:
    """Materialise a chain from ``{"file": path}`` or ``{"generator": ..., "params": {...}}``."""
    obs = None
    if "file" in spec:
        path = Path(spec["file"])
        chain = chain_mod.load(path)
        name = path.stem
        if "observations" in spec:
            obs = LbTreeObservations.load(spec["observations"])
    else:
        gen = spec.get("generator")
        params = dict(spec.get("params", {}))
        try:
            if gen == "dummy":
                chain = gen_dummy(int(params["n"]), float(params["p"]))
            elif gen == "lbtree":
                chain, obs = gen_lb_tree(
                    int(params["delta"]), int(params["d"]), float(params["eps"]),
                    params.get("seed"), params.get("depth"),
                )
            elif gen == "random":
                chain = gen_random(
                    int(params["n"]), float(params.get("avg_out_degree", 3.0)),
                    params.get("seed"), bool(params.get("ensure_reachable", True)),
                )
            elif gen == "game24":
                chain, _ = gen_game24(params["nums"], bool(params.get("keep_history", False)))
            elif gen == "vgb":
                a, h = int(params["alphabet"]), int(params["depth"])
                pi_ref, Vb = random_vgb_tables(a, h, np.random.default_rng(params.get("seed")))
                chain = gen_vgb(a, h, pi_ref, Vb)
            else:
                raise ConfigError(f"unknown generator {gen!r}")
        except KeyError as exc:
            raise ConfigError(f"generator {gen!r} missing parameter {exc.args[0]!r}") from exc
        shown = {
            k: " ".join(map(str, v)) if isinstance(v, list) else v for k, v in params.items()
        }
        name = f"{gen}(" + ";".join(f"{k}={shown[k]}" for k in sorted(shown)) + ")"
    return ChainBundle(chain, spec.get("name", name), compute_opt_heap(chain), obs)


# -- runs -----------------------------------------------------------------------


def policy_label(p: dict) -> str:
    if "label" in p:
        return str(p["label"])
    extras = [f"{k}={p[k]}" for k in sorted(p) if k not in ("name", "label", "group_sampler")]
    return p["name"] + (f"[{','.join(extras)}]" if extras else "")


def run_policy(bundle: ChainBundle, p: dict, seed: int) -> RunRecord:
    chain, table = bundle.chain, bundle.table
    rng = np.random.default_rng(seed)
    name = p["name"]
    opt_start = table[chain.start]
    max_steps = p.get("max_steps")
    if max_steps is None and name != "stable":
        max_steps = default_max_steps(opt_start)
    lam = float(p.get("lambda", 0.0))
    oracle_kind = p.get("oracle", "laplace" if lam > 0 else "exact")
    if oracle_kind == "exact":
        oracle = ExactOracle(table)
    elif oracle_kind == "laplace":
        oracle = LaplaceOracle(table, lam, rng, p.get("group_sampler", "raw"))
    elif oracle_kind == "adversarial":
        if bundle.observations is None:
            raise ConfigError("adversarial oracle needs lb-tree observations")
        oracle = AdversarialOracle(bundle.observations.values)
    else:
        raise ConfigError(f"unknown oracle {oracle_kind!r}")

    if name == "cat":
        rec = run_cat(chain, table, rng, max_steps)
    elif name == "aux":
        rec = run_aux(chain, table, float(p.get("eps", 1.0)), rng, max_steps)
    elif name == "stable":
        nb = p.get("nbound", "estimate")
        n_bound = estimate_n_bound(oracle, chain.start) if nb == "estimate" else float(nb)
        cost_before = oracle.cost
        rec = run_stable(chain, oracle, n_bound, rng, bool(p.get("with_reset", True)), max_steps)
        rec.oracle_cost += cost_before
    elif name == "softmax":
        rec = run_softmax_cat(
            chain, oracle, float(p.get("tau", 1.0)), rng, max_steps, bool(p.get("reevaluate", False))
        )
    elif name == "norewind":
        rec = run_no_rewind(chain, rng, max_steps)
    elif name == "kparallel":
        rec = run_k_parallel(chain, int(p.get("k", 1)), rng, max_steps)
    else:
        raise ConfigError(f"unknown policy {name!r}")
    rec.seed = seed
    return rec


def check_record(rec: RunRecord, chain: MarkovChain) -> bool:
    """Raise :class:`InvariantViolation` on a malformed record; return caterpillar flag."""
    tree = rec.tree
    if rec.success and tree.states[-1] != chain.target:
        raise InvariantViolation(f"{rec.policy_name}: success without reaching the target")
    if rec.policy_name in ("cat", "aux", "softmax", "norewind") and rec.steps != len(tree) - 1:
        raise InvariantViolation(f"{rec.policy_name}: steps {rec.steps} != tree size - 1")
    cat = is_caterpillar(tree)
    if rec.policy_name in ("cat", "aux", "stable") and not cat:
        raise InvariantViolation(f"{rec.policy_name}: observed tree is not a caterpillar")
    return cat


def _cell(args) -> list:
    bundle, p, label, rep, seed = args
    rec = run_policy(bundle, p, seed)
    cat = check_record(rec, bundle.chain)
    return [label, bundle.name, seed, rec.steps, rec.oracle_cost, int(rec.success), int(cat)]


def run_experiment(config: ExperimentConfig, workers: int = 1) -> tuple[list[list], dict]:
    """Run every (policy, replication) cell; returns CSV rows and the summary.

    Replication ``i`` uses ``derive_seed(seed, i)`` for every policy, so
    policies are compared on paired seeds.
    """
    bundle = build_chain(config.chain)
    jobs = []
    for p in config.policies:
        label = policy_label(p)
        for rep in range(config.replications):
            jobs.append((bundle, p, label, rep, derive_seed(config.seed, rep)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        cells = [_cell(j) for j in jobs]
    rows = [[i, *c] for i, c in enumerate(cells)]
    summary = summarize(rows, opt_start=bundle.table[bundle.chain.start])
    lams = [float(p.get("lambda", 0.0)) for p in config.policies]
    if len(set(lams)) == len(lams) >= 2 and min(lams) > 0:
        costs = [
            summary["policies"][policy_label(p)]["mean_total_cost"] for p in config.policies
        ]
        summary["loglog_slope_cost_vs_lambda"] = loglog_slope(lams, costs)
    return rows, summary


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def summarize(rows: list[list], opt_start: float | None = None) -> dict:
    by_policy: dict[str, list[list]] = {}
    for r in rows:
        by_policy.setdefault(r[1], []).append(r)
    out = {"opt_start": opt_start, "policies": {}}
    for label, rs in by_policy.items():
        steps = np.array([r[4] for r in rs], dtype=float)
        cost = np.array([r[5] for r in rs], dtype=float)
        succ = np.array([r[6] for r in rs], dtype=float)
        R = len(rs)
        out["policies"][label] = {
            "runs": R,
            "mean_steps": float(steps.mean()),
            "stderr_steps": float(steps.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
            "success_rate": float(succ.mean()),
            "mean_oracle_cost": float(cost.mean()),
            "mean_total_cost": float((cost + steps).mean()),
        }
    return out


def rows_to_csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def format_summary(summary: dict) -> str:
    head = ["policy", "runs", "mean_steps", "stderr", "success_rate", "mean_oracle_cost"]
    body = [
        [
            label,
            str(s["runs"]),
            f"{s['mean_steps']:.4f}",
            f"{s['stderr_steps']:.4f}",
            f"{s['success_rate']:.6g}",
            f"{s['mean_oracle_cost']:.6g}",
        ]
        for label, s in summary["policies"].items()
    ]
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head, *body]]
    if summary.get("opt_start") is not None:
        lines.append(f"OPT(start) = {summary['opt_start']:g}")
    if "loglog_slope_cost_vs_lambda" in summary:
        lines.append(f"log-log slope of mean total cost vs lambda = {summary['loglog_slope_cost_vs_lambda']:.4f}")
    return "\n".join(lines)


def seed_from_env(default: int) -> int:
    env = os.environ.get("RMC_SEED")
    if env is None or env == "":
        return default
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"RMC_SEED must be an integer, got {env!r}") from exc
