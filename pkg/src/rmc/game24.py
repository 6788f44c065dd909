"""Game of 24 as a Markov chain over partial solutions.

A state holds the multiset of remaining values. One step picks, uniformly
among the distinct legal applications, two remaining values and an operator,
and replaces the two values by the result. Arithmetic is exact.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .chain import MarkovChain

GOAL = Fraction(24)

# (left operand, operator, right operand, result)
Step = tuple[Fraction, str, Fraction, Fraction]


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class Game24State:
    remaining: tuple[Fraction, ...]
    history: tuple[Step, ...] = ()

    @property
    def is_goal(self) -> bool:
        return self.remaining == (GOAL,)

    def label(self) -> str:
        left = " ".join(_fmt(v) for v in self.remaining)
        if not self.history:
            return left
        steps = ", ".join(
            f"{_fmt(a)} {op} {_fmt(b)} = {_fmt(r)}" for a, op, b, r in self.history
        )
        return f"{steps} (left: {left})"


def applications(remaining: tuple[Fraction, ...]) -> list[Step]:
    """Distinct legal ``(a, op, b, result)`` moves on a sorted multiset.

    ``+`` and ``*`` are taken in one order only; ``-`` and ``/`` in both.
    Division by zero is skipped.
    """
    seen: set[tuple[Fraction, str, Fraction]] = set()
    out: list[Step] = []

    def add(a: Fraction, op: str, b: Fraction, r: Fraction) -> None:
        key = (a, op, b)
        if key not in seen:
            seen.add(key)
            out.append((a, op, b, r))

    k = len(remaining)
    for i in range(k):
        for j in range(i + 1, k):
            a, b = remaining[i], remaining[j]
            add(a, "+", b, a + b)
            add(a, "*", b, a * b)
            add(a, "-", b, a - b)
            add(b, "-", a, b - a)
            if b != 0:
                add(a, "/", b, a / b)
            if a != 0:
                add(b, "/", a, b / a)
    return out


def apply_step(remaining: tuple[Fraction, ...], step: Step) -> tuple[Fraction, ...]:
    a, _, b, r = step
    rest = list(remaining)
    rest.remove(a)
    rest.remove(b)
    rest.append(r)
    return tuple(sorted(rest))


def gen_game24(
    nums: Iterable[int], keep_history: bool = False
) -> tuple[MarkovChain, list[Game24State]]:
    """Build the induced chain for a Game-of-24 instance.

    States are identified by their remaining multiset unless ``keep_history``
    is set, in which case the operation history is part of the state and the
    chain is a tree. All states whose only remaining value is 24 collapse into
    one absorbing target. A single non-24 value is a dead end with a self-loop.

    Returns the chain and the list of states (index-aligned with the chain).
    """
    start_rem = tuple(sorted(Fraction(int(v)) for v in nums))
    if not start_rem:
        raise ValueError("need at least one number")
    start = Game24State(start_rem)

    states: list[Game24State] = []
    index: dict = {}
    rows: list[list[tuple[int, float]]] = []

    def key_of(s: Game24State):
        if s.is_goal:
            return "goal"
        return (s.remaining, s.history) if keep_history else s.remaining

    def intern(s: Game24State) -> int:
        k = key_of(s)
        if k not in index:
            index[k] = len(states)
            states.append(s if not s.is_goal else Game24State((GOAL,)))
            rows.append([])
            queue.append(index[k])
        return index[k]

    queue: deque[int] = deque()
    intern(start)
    while queue:
        v = queue.popleft()
        s = states[v]
        if s.is_goal or len(s.remaining) == 1:
            rows[v] = [(v, 1.0)]
            continue
        moves = applications(s.remaining)
        counts: dict[int, int] = {}
        for step in moves:
            nxt = Game24State(apply_step(s.remaining, step), s.history + (step,))
            u = intern(nxt)
            counts[u] = counts.get(u, 0) + 1
        total = len(moves)
        rows[v] = [(u, c / total) for u, c in counts.items()]

    if "goal" not in index:
        # unsolvable instance: the target exists but is unreachable
        index["goal"] = len(states)
        states.append(Game24State((GOAL,)))
        rows.append([(len(rows), 1.0)])
    target = index["goal"]
    labels = [s.label() for s in states]
    chain = MarkovChain.from_rows(rows, start=0, target=target, labels=labels)
    return chain, states


def find_state(states: list[Game24State], remaining: Iterable) -> int:
    """Index of the (history-free) state with the given remaining multiset."""
    want = tuple(sorted(Fraction(v) for v in remaining))
    for i, s in enumerate(states):
        if s.remaining == want:
            return i
    raise KeyError(want)
