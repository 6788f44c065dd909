"""Chain families: separation path, adversarial tree, VGB prefix tree, random chains."""
from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .chain import MarkovChain

MAX_TREE_STATES = 10**7


def gen_dummy(n: int, p: float) -> MarkovChain:
    """Path ``x_0 -> ... -> x_n`` where every step may instead fall into an absorbing ``D``.

    States ``0..n`` are the path, state ``n + 1`` is ``D``. Start is ``x_0``,
    target is ``x_n``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    D = n + 1
    rows = [[(i + 1, p), (D, 1.0 - p)] for i in range(n)]
    rows.append([(D, 1.0)])
    rows.append([(D, 1.0)])
    labels = [f"x{i}" for i in range(n + 1)] + ["D"]
    return MarkovChain.from_rows(rows, start=0, target=n, labels=labels)


# -- adversarial lower-bound tree ------------------------------------------------


@dataclass
class LbTreeObservations:
    """Adversarial per-state observations for the lower-bound tree.

    ``values[s]`` is within a factor ``1 +- eps`` of the true optimal hitting
    time ``delta * dist(s, target)``. ``path`` runs from the root to the target.
    """

    eps: float
    delta: int
    values: list[float]
    depths: list[int]
    path: list[int]
    groups: list[int]

    def to_json_obj(self) -> dict:
        return {
            "eps": self.eps,
            "values": self.values,
            "depths": self.depths,
            "path": self.path,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LbTreeObservations:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        for key in ("eps", "values", "depths", "path"):
            if key not in obj:
                raise ValueError(f"{path}: missing field {key!r}")
        return cls(
            eps=float(obj["eps"]),
            delta=int(obj.get("delta", 0)),
            values=[float(v) for v in obj["values"]],
            depths=[int(v) for v in obj["depths"]],
            path=[int(v) for v in obj["path"]],
            groups=[int(v) for v in obj.get("groups", [])],
        )


def lb_tree_size(delta: int, depth: int) -> int:
    """Number of nodes in the tree whose root has ``delta`` children and
    every other internal node ``delta - 1``."""
    total = 1
    level = delta
    for _ in range(depth):
        total += level
        level *= delta - 1
    return total


def gen_lb_tree(
    delta: int, d: int, eps: float, target_leaf_seed=None, depth: int | None = None
) -> tuple[MarkovChain, LbTreeObservations]:
    """Build the adversarial tree and its ``(1 +- eps)`` observations.

    ``depth`` defaults to ``10 * d``; passing a smaller value builds the
    size-reduced variant with the same transition rule. Non-leaf states move
    to a uniform tree neighbour; leaves return to their parent w.p.
    ``1/delta`` and stay put otherwise.

    Observation groups, with ``m = floor(eps * d)`` and ``x_m`` the path node at depth ``m``:

    1. depth <= m, outside the subtree of ``x_m``: ``delta * (depth_max - d_s)``
    2. inside the subtree of ``x_m``: exact, ``delta * dist(s, z)``
    3. everything else: ``delta * (depth_max - 2m + d_s)``

    At the full depth ``10 d`` every observation is within ``1 +- eps`` of the
    true value. A shortened tree keeps that guarantee only while
    ``eps * depth >= 2m``.
    """
    if delta < 2:
        raise ValueError("delta must be at least 2")
    if d < 1:
        raise ValueError("d must be positive")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    depth_max = 10 * d if depth is None else int(depth)
    if depth_max < 1:
        raise ValueError("depth must be positive")
    size = lb_tree_size(delta, depth_max)
    if size > MAX_TREE_STATES:
        raise ValueError(
            f"tree with delta={delta}, depth={depth_max} has {size} states "
            f"(limit {MAX_TREE_STATES})"
        )

    parent = [-1]
    depths = [0]
    first_child = [0] * size
    frontier = deque([0])
    while frontier:
        v = frontier.popleft()
        if depths[v] == depth_max:
            continue
        first_child[v] = len(parent)
        k = delta if v == 0 else delta - 1
        for _ in range(k):
            parent.append(v)
            depths.append(depths[v] + 1)
            frontier.append(len(parent) - 1)
    assert len(parent) == size

    inv = 1.0 / delta
    rows: list[list[tuple[int, float]]] = []
    for v in range(size):
        if depths[v] == depth_max:
            rows.append([(parent[v], inv), (v, 1.0 - inv)])
            continue
        k = delta if v == 0 else delta - 1
        fc = first_child[v]
        row = [(c, inv) for c in range(fc, fc + k)]
        if v != 0:
            row.append((parent[v], inv))
        rows.append(row)

    first_leaf = lb_tree_size(delta, depth_max - 1)
    rng = np.random.default_rng(target_leaf_seed)
    target = int(rng.integers(first_leaf, size))

    path = [target]
    while parent[path[-1]] != -1:
        path.append(parent[path[-1]])
    path.reverse()

    m = min(int(math.floor(eps * d)), depth_max)
    special = path[m]
    on_path = [False] * size
    for v in path:
        on_path[v] = True
    # lca_depth: depth where s leaves the root-target path; in_sub: s below x_m
    lca_depth = [0] * size
    in_sub = [False] * size
    in_sub[0] = special == 0
    for v in range(1, size):
        u = parent[v]
        lca_depth[v] = depths[v] if on_path[v] else lca_depth[u]
        in_sub[v] = v == special or in_sub[u]

    values: list[float] = []
    groups: list[int] = []
    for v in range(size):
        ds = depths[v]
        if in_sub[v]:
            values.append(float(delta * (ds + depth_max - 2 * lca_depth[v])))
            groups.append(2)
        elif ds <= m:
            values.append(float(delta * (depth_max - ds)))
            groups.append(1)
        else:
            values.append(float(delta * (depth_max - 2 * m + ds)))
            groups.append(3)

    chain = MarkovChain.from_rows(rows, start=0, target=target)
    obs = LbTreeObservations(
        eps=eps, delta=delta, values=values, depths=depths, path=path, groups=groups
    )
    return chain, obs


def tree_distances(chain: MarkovChain, source: int) -> list[int]:
    """Hop distance from ``source`` in the undirected graph underlying ``chain``."""
    adj: list[set[int]] = [set() for _ in range(chain.n)]
    for x, y, _ in chain.edges():
        if x != y:
            adj[x].add(y)
            adj[y].add(x)
    dist = [-1] * chain.n
    dist[source] = 0
    q = deque([source])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


# -- verifier-guided backtracking prefix tree -----------------------------------


def vgb_prefixes(alphabet_size: int, depth: int) -> list[tuple[int, ...]]:
    """All prefixes of length ``0..depth``, shortest first, lexicographic within a length."""
    out: list[tuple[int, ...]] = []
    for h in range(depth + 1):
        out.extend(itertools.product(range(alphabet_size), repeat=h))
    return out


def gen_vgb(
    alphabet_size: int,
    depth: int,
    pi_ref: Mapping[tuple[int, ...], Sequence[float]],
    Vb: Mapping[tuple[int, ...], float],
    target: tuple[int, ...] | None = None,
) -> MarkovChain:
    """Random walk on the token prefix tree as a chain.

    From node ``y`` the walk moves to its parent with weight ``Vb[y]`` (no
    parent at the root) and to child ``y + (a,)`` with weight
    ``pi_ref[y][a] * Vb[y + (a,)]``; rows are the normalised weights. The
    walk starts at the root. ``target`` defaults to the all-zeros leaf.
    """
    if alphabet_size < 1 or depth < 0:
        raise ValueError("alphabet_size must be positive and depth nonnegative")
    prefixes = vgb_prefixes(alphabet_size, depth)
    index = {y: i for i, y in enumerate(prefixes)}
    for y in prefixes:
        if y not in Vb:
            raise ValueError(f"Vb missing prefix {y}")
        if Vb[y] < 0:
            raise ValueError(f"Vb[{y}] = {Vb[y]} is negative")
        if len(y) < depth:
            if y not in pi_ref or len(pi_ref[y]) != alphabet_size:
                raise ValueError(f"pi_ref missing or wrong length at prefix {y}")
    rows = []
    for y in prefixes:
        weights: list[tuple[int, float]] = []
        if y:
            weights.append((index[y[:-1]], float(Vb[y])))
        if len(y) < depth:
            for a in range(alphabet_size):
                child = y + (a,)
                weights.append((index[child], float(pi_ref[y][a]) * float(Vb[child])))
        total = math.fsum(w for _, w in weights)
        if not total > 0.0:
            raise ValueError(f"all transition weights are zero at prefix {y}")
        rows.append([(u, w / total) for u, w in weights if w > 0.0])
    if target is None:
        target = (0,) * depth
    if target not in index:
        raise ValueError(f"target {target} is not a prefix of length <= {depth}")
    labels = ["".join(map(str, y)) or "root" for y in prefixes]
    return MarkovChain.from_rows(rows, start=0, target=index[tuple(target)], labels=labels)


def random_vgb_tables(
    alphabet_size: int, depth: int, rng: np.random.Generator
) -> tuple[dict, dict]:
    """Random reference-policy and value tables covering every prefix."""
    pi_ref = {}
    Vb = {}
    for y in vgb_prefixes(alphabet_size, depth):
        Vb[y] = float(rng.uniform(0.05, 1.0))
        if len(y) < depth:
            pi_ref[y] = list(rng.dirichlet(np.ones(alphabet_size)))
    return pi_ref, Vb


# -- random chains for fuzzing ------------------------------------------------------


def gen_random(
    n: int, avg_out_degree: float = 3.0, seed=None, ensure_reachable: bool = True
) -> MarkovChain:
    """Random sparse chain with start 0 and a random target.

    With ``ensure_reachable`` a random simple path from start to target is
    threaded through the chain, so the start has finite optimal value.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    target = int(rng.integers(1, n))
    weights: list[dict[int, float]] = []
    for _ in range(n):
        k = int(min(n, 1 + rng.poisson(max(avg_out_degree - 1.0, 0.0))))
        succ = rng.choice(n, size=k, replace=False)
        w = rng.exponential(size=k) + 1e-3
        weights.append({int(y): float(v) for y, v in zip(succ, w)})
    if ensure_reachable:
        others = [v for v in range(1, n) if v != target]
        hops = int(rng.integers(0, len(others) + 1))
        mids = [int(v) for v in rng.permutation(others)[:hops]]
        walk = [0, *mids, target]
        for a, b in zip(walk, walk[1:]):
            if b not in weights[a]:
                weights[a][b] = float(rng.exponential()) + 1e-3
    rows = []
    for w in weights:
        total = math.fsum(w.values())
        rows.append([(y, v / total) for y, v in w.items()])
    return MarkovChain.from_rows(rows, start=0, target=target)
