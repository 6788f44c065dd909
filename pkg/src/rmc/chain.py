"""Finite Markov chains with a designated start and target state.

A chain is stored row-wise: ``rows[x]`` is a tuple of ``(successor, probability)``
pairs sorted by successor index. Zero-probability edges are never stored.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ROW_SUM_TOL = 1e-9
INF = math.inf


class ChainError(ValueError):
    """Raised when a chain is malformed or fails validation."""


class ChainParseError(ChainError):
    """Raised when a chain file cannot be parsed; the message carries the location."""


@dataclass(frozen=True)
class Violation:
    state: int | None
    message: str

    def __str__(self) -> str:
        where = "chain" if self.state is None else f"state {self.state}"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class MarkovChain:
    """Sparse finite Markov chain.

    Immutable after construction. Derived lookup structures (cumulative rows,
    reverse adjacency) are built lazily and cached on the instance.
    """

    n: int
    rows: tuple[tuple[tuple[int, float], ...], ...]
    start: int
    target: int
    labels: tuple[str, ...] | None = None

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Iterable[tuple[int, float]]],
        start: int,
        target: int,
        labels: Sequence[str] | None = None,
    ) -> MarkovChain:
        """Build a chain from per-state ``(successor, prob)`` iterables.

        Entries are sorted by successor. Duplicates and zero entries are kept
        as given so that :func:`validate` can report them.
        """
        frozen = tuple(
            tuple(sorted(((int(y), float(p)) for y, p in row), key=lambda e: e[0]))
            for row in rows
        )
        return cls(
            n=len(frozen),
            rows=frozen,
            start=int(start),
            target=int(target),
            labels=tuple(labels) if labels is not None else None,
        )

    @classmethod
    def from_edges(
        cls, n: int, edges: Iterable[tuple[int, int, float]], start: int, target: int
    ) -> MarkovChain:
        rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for x, y, p in edges:
            if not 0 <= x < n:
                raise ChainError(f"edge source {x} out of range [0, {n})")
            rows[x].append((y, p))
        return cls.from_rows(rows, start, target)

    @property
    def num_edges(self) -> int:
        return sum(len(r) for r in self.rows)

    def edges(self) -> Iterable[tuple[int, int, float]]:
        for x, row in enumerate(self.rows):
            for y, p in row:
                yield x, y, p

    def successors(self, x: int) -> tuple[int, ...]:
        return tuple(y for y, _ in self.rows[x])

    def prob(self, x: int, y: int) -> float:
        for succ, p in self.rows[x]:
            if succ == y:
                return p
        return 0.0

    @cached_property
    def _sampling_tables(self) -> tuple[list[tuple[int, ...]], list[list[float]]]:
        succ = []
        cum = []
        for row in self.rows:
            succ.append(tuple(y for y, _ in row))
            acc = 0.0
            c = []
            for _, p in row:
                acc += p
                c.append(acc)
            cum.append(c)
        return succ, cum

    @cached_property
    def predecessors(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Reverse adjacency: ``predecessors[y]`` lists ``(x, P(x, y))``."""
        rev: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for x, y, p in self.edges():
            rev[y].append((x, p))
        return tuple(tuple(r) for r in rev)

    @cached_property
    def absorbing(self) -> frozenset[int]:
        """States whose only transition is a probability-1 self-loop."""
        return frozenset(
            x for x, row in enumerate(self.rows) if len(row) == 1 and row[0][0] == x
        )

    def dense_matrix(self) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        for x, y, p in self.edges():
            P[x, y] += p
        return P


def validate(chain: MarkovChain) -> list[Violation]:
    """Return every invariant violation; an empty list means the chain is valid."""
    out: list[Violation] = []
    n = chain.n
    if n < 1:
        out.append(Violation(None, "chain has no states"))
        return out
    if len(chain.rows) != n:
        out.append(Violation(None, f"expected {n} rows, found {len(chain.rows)}"))
    if not 0 <= chain.start < n:
        out.append(Violation(None, f"start {chain.start} out of range [0, {n})"))
    if not 0 <= chain.target < n:
        out.append(Violation(None, f"target {chain.target} out of range [0, {n})"))
    if chain.labels is not None and len(chain.labels) != n:
        out.append(Violation(None, f"expected {n} labels, found {len(chain.labels)}"))
    for x, row in enumerate(chain.rows):
        seen = set()
        total = 0.0
        for y, p in row:
            if not 0 <= y < n:
                out.append(Violation(x, f"successor {y} out of range [0, {n})"))
            if y in seen:
                out.append(Violation(x, f"duplicate successor {y}"))
            seen.add(y)
            if not (p > 0.0 and p <= 1.0) or math.isnan(p):
                out.append(Violation(x, f"probability {p!r} to {y} not in (0, 1]"))
            total += p
        if not abs(total - 1.0) <= ROW_SUM_TOL:
            out.append(Violation(x, f"outgoing probabilities sum to {total!r}, not 1"))
    return out


def check(chain: MarkovChain) -> MarkovChain:
    """Raise :class:`ChainError` listing the violations if the chain is invalid."""
    problems = validate(chain)
    if problems:
        shown = "; ".join(str(v) for v in problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        raise ChainError(f"invalid chain: {shown}{more}")
    return chain


def sample_successor(chain: MarkovChain, x: int, rng: np.random.Generator) -> int:
    succ, cum = chain._sampling_tables
    row_cum = cum[x]
    i = bisect_right(row_cum, rng.random() * row_cum[-1])
    # guards u * total == total through rounding
    if i == len(row_cum):
        i -= 1
    return succ[x][i]


def transition_mass(chain: MarkovChain, x: int, states) -> float:
    """Total probability of moving from ``x`` into ``states`` in one step."""
    return math.fsum(p for y, p in chain.rows[x] if y in states)


# -- file I/O -----------------------------------------------------------------


def to_json_obj(chain: MarkovChain) -> dict:
    obj = {
        "n": chain.n,
        "start": chain.start,
        "target": chain.target,
        "edges": [[x, y, p] for x, y, p in sorted(chain.edges())],
    }
    if chain.labels is not None:
        obj["labels"] = list(chain.labels)
    return obj


def save(chain: MarkovChain, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    text = json.dumps(to_json_obj(chain), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def _expect_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ChainParseError(f"{where}: expected integer, got {value!r}")
    return value


def from_json_obj(obj, source: str = "<chain>") -> MarkovChain:
    if not isinstance(obj, dict):
        raise ChainParseError(f"{source}: top level must be an object")
    for key in ("n", "start", "target", "edges"):
        if key not in obj:
            raise ChainParseError(f"{source}: missing field {key!r}")
    n = _expect_int(obj["n"], f"{source}: field 'n'")
    if n < 1:
        raise ChainParseError(f"{source}: field 'n' must be positive, got {n}")
    start = _expect_int(obj["start"], f"{source}: field 'start'")
    target = _expect_int(obj["target"], f"{source}: field 'target'")
    edges = obj["edges"]
    if not isinstance(edges, list):
        raise ChainParseError(f"{source}: field 'edges' must be a list")
    rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, e in enumerate(edges):
        where = f"{source}: edges[{i}]"
        if not isinstance(e, list) or len(e) != 3:
            raise ChainParseError(f"{where}: expected [from, to, prob]")
        x = _expect_int(e[0], f"{where}[0]")
        y = _expect_int(e[1], f"{where}[1]")
        p = e[2]
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ChainParseError(f"{where}[2]: expected number, got {p!r}")
        if not 0 <= x < n:
            raise ChainParseError(f"{where}[0]: source {x} out of range [0, {n})")
        rows[x].append((y, float(p)))
    labels = obj.get("labels")
    if labels is not None and (
        not isinstance(labels, list) or not all(isinstance(s, str) for s in labels)
    ):
        raise ChainParseError(f"{source}: field 'labels' must be a list of strings")
    return MarkovChain.from_rows(rows, start, target, labels)


def load(path: str | Path) -> MarkovChain:
    """Read and validate a chain file."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ChainParseError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    chain = from_json_obj(obj, str(path))
    problems = validate(chain)
    if problems:
        raise ChainError(f"{path}: " + "; ".join(str(v) for v in problems))
    return chain
