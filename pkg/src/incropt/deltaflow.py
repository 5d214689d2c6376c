"""Minimal incremental dataflow substrate: counted state, delta tuples,
min-aggregation with next-best recovery, and an order-independent fixpoint
driver.

State discipline: stateful relations keep a signed count per tuple; a tuple
is visible iff its count is positive.  Counts may dip below zero while a
deletion overtakes its insertion in the queue; at quiescence every count is
non-negative.  Min groups retain every value they have ever been handed,
including ones above the minimum, so the next-best is recoverable when the
minimum is deleted or raised.

The engine instance is single-owner: hand it between threads whole, never
share it for concurrent mutation.  The drain-order independence of the
fixpoint is the extension point for any future parallel drain.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .errors import NonTermination, ValidationError

INSERT = "+"
DELETE = "-"
UPDATE = "#"


@dataclass(frozen=True)
class Delta:
    """A change flowing through the engine.

    ``payload`` identifies the tuple (insert/delete) or the tuple key
    (update); updates carry the old and new values explicitly so that
    min-maintenance can handle them atomically.
    """

    relation: str
    op: str
    payload: Any = None
    old: Any = None
    new: Any = None

    def __post_init__(self):
        if self.op == UPDATE and self.old == self.new:
            raise ValidationError("update delta with old == new must not be emitted")


class CountedState:
    """Tuple -> signed count map with visibility-edge output deltas."""

    def __init__(self, relation: str, trace: Callable[[str], None] | None = None):
        self.relation = relation
        self.counts: dict[Any, int] = {}
        self.trace = trace

    def count(self, tup: Any) -> int:
        return self.counts.get(tup, 0)

    def visible(self, tup: Any) -> bool:
        return self.count(tup) > 0

    def visible_tuples(self) -> list[Any]:
        return [t for t, c in self.counts.items() if c > 0]

    def _bump(self, tup: Any, by: int) -> tuple[int, int]:
        before = self.counts.get(tup, 0)
        after = before + by
        if after == 0:
            self.counts.pop(tup, None)
        else:
            self.counts[tup] = after
        if self.trace is not None:
            op = INSERT if by > 0 else DELETE
            self.trace(f"{self.relation} {op} {tup!r} {before} {after}")
        return before, after

    def apply(self, d: Delta) -> list[Delta]:
        """Adjust counts; emit deltas only on visibility transitions."""
        if d.op == INSERT:
            before, after = self._bump(d.payload, +1)
            if before <= 0 < after:
                return [Delta(self.relation, INSERT, d.payload)]
            return []
        if d.op == DELETE:
            before, after = self._bump(d.payload, -1)
            if before > 0 >= after:
                return [Delta(self.relation, DELETE, d.payload)]
            return []
        if d.op == UPDATE:
            ob, oa = self._bump(d.old, -1)
            nb, na = self._bump(d.new, +1)
            old_gone = ob > 0 >= oa
            new_here = nb <= 0 < na
            if old_gone and new_here:
                return [Delta(self.relation, UPDATE, None, old=d.old, new=d.new)]
            if old_gone:
                return [Delta(self.relation, DELETE, d.old)]
            if new_here:
                return [Delta(self.relation, INSERT, d.new)]
            return []
        raise ValidationError(f"unknown delta op {d.op!r}")


class MinGroupState:
    """Per-group multiset of (member -> cost) with recoverable next-best.

    Members carry a visibility flag mirroring their row's counted state;
    the *retained* minimum ranges over every member (pruned ones included)
    while the *visible* minimum ranges over visible members only.  Ordering
    is lexicographic on (cost, member key) so ties resolve deterministically.
    """

    def __init__(self, relation: str = "bestcost"):
        self.relation = relation
        self._costs: dict[Any, dict[Any, float]] = {}
        self._visible: dict[Any, set[Any]] = {}

    def members(self, group: Any) -> dict[Any, float]:
        return dict(self._costs.get(group, {}))

    def min_of(self, group: Any) -> tuple[float, Any] | None:
        entries = self._costs.get(group)
        if not entries:
            return None
        best_key = min(entries, key=lambda k: (entries[k], k))
        return entries[best_key], best_key

    def visible_min(self, group: Any) -> tuple[float, Any] | None:
        entries = self._costs.get(group)
        vis = self._visible.get(group)
        if not entries or not vis:
            return None
        alive = [k for k in vis if k in entries]
        if not alive:
            return None
        best_key = min(alive, key=lambda k: (entries[k], k))
        return entries[best_key], best_key

    def set_visible(self, group: Any, member: Any, visible: bool) -> None:
        vis = self._visible.setdefault(group, set())
        if visible:
            vis.add(member)
        else:
            vis.discard(member)

    def update(self, group: Any, d: Delta) -> Delta | None:
        """Apply a member-level delta; report the change to the group minimum.

        Implements the four incremental cases: an insertion may lower the
        min; deleting the min promotes the next-best; an update raising the
        min promotes min(new, next-best); an update lowering a value either
        replaces the min or competes with it.
        """
        before = self.min_of(group)
        entries = self._costs.setdefault(group, {})
        if d.op == INSERT:
            member, cost = d.payload
            entries[member] = cost
        elif d.op == DELETE:
            # visibility markers are owned by the row-visibility edges, so a
            # value deletion leaves them alone (the row may stay visible)
            member = d.payload[0] if isinstance(d.payload, tuple) else d.payload
            entries.pop(member, None)
            if not entries:
                self._costs.pop(group, None)
        elif d.op == UPDATE:
            member, cost = d.new
            entries[member] = cost
        else:
            raise ValidationError(f"unknown delta op {d.op!r}")
        after = self.min_of(group)
        if before == after:
            return None
        if before is None:
            return Delta(self.relation, INSERT, (group, after))
        if after is None:
            return Delta(self.relation, DELETE, (group, before))
        return Delta(self.relation, UPDATE, group, old=before, new=after)


DEFAULT_DELTA_CEILING = 10 ** 8


class FixpointEngine:
    """Drains a delta queue through a fixed rule set until quiescence.

    ``handlers`` maps a relation name to a callable producing follow-up
    deltas.  The drain order is configurable (FIFO by default, seeded random
    for order-independence checks); the quiescent visible state must not
    depend on it.  A processing ceiling guards against wiring bugs.
    """

    def __init__(self, handlers: dict[str, Callable[[Delta], Iterable[Delta]]],
                 *, max_deltas: int = DEFAULT_DELTA_CEILING,
                 order: str = "fifo", seed: int | None = None,
                 observer: Callable[[Delta], None] | None = None):
        if order not in ("fifo", "random"):
            raise ValidationError(f"unknown drain order {order!r}")
        self.handlers = handlers
        self.max_deltas = max_deltas
        self.order = order
        self._rng = random.Random(seed)
        self.observer = observer
        self._queue: deque[Delta] = deque()
        self.processed = 0

    def push(self, deltas: Iterable[Delta] | Delta) -> None:
        if isinstance(deltas, Delta):
            self._queue.append(deltas)
        else:
            self._queue.extend(deltas)

    @property
    def pending(self) -> int:
        return len(self._queue)

    def _pop(self) -> Delta:
        if self.order == "random":
            i = self._rng.randrange(len(self._queue))
            self._queue[i], self._queue[-1] = self._queue[-1], self._queue[i]
            return self._queue.pop()
        return self._queue.popleft()

    def run(self) -> int:
        """Drain to quiescence; returns the number of deltas processed."""
        drained = 0
        while self._queue:
            d = self._pop()
            self.processed += 1
            drained += 1
            if self.processed > self.max_deltas:
                raise NonTermination(
                    f"delta count exceeded ceiling {self.max_deltas}; wiring bug?")
            if self.observer is not None:
                self.observer(d)
            handler = self.handlers.get(d.relation)
            if handler is None:
                continue
            out = handler(d)
            if out:
                self._queue.extend(out)
        return drained
