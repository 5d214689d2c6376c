"""Reference optimizers sharing the same algebra and cost model.

All three enumerate the identical (expr, prop) universe through the shared
split function and cost every alternative through the shared arithmetic
path, so any cost difference against the declarative engine is a search
bug, never a modelling artifact.

* ``brute_force_optimize`` -- exhaustive ground-truth oracle, no pruning.
* ``systemr_optimize``     -- bottom-up dynamic programming in strictly
  increasing subset-size passes, best per group retained, no pruning.
* ``volcano_optimize``     -- top-down recursion with memoization and
  branch-and-bound cost limits passed into child exploration.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .algebra import AltKey, GroupKey, Query, SearchUniverse
from .catalog import Catalog
from .costmodel import CostConfig, CostContext, alternative_cost, lexmin, sum_cost
from .errors import InfeasibleQuery, TooLarge
from .plan import PlanNode, build_plan

BRUTE_FORCE_MAX_RELATIONS = 8


@dataclass
class BaselineMetrics:
    visited_and: int = 0
    visited_or: int = 0
    pruned_and: int = 0
    pruned_or: int = 0
    wall_time_ms: float = 0.0
    visit_log: list[GroupKey] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"visited_and": self.visited_and, "visited_or": self.visited_or,
                "pruned_and": self.pruned_and, "pruned_or": self.pruned_or,
                "wall_time_ms": self.wall_time_ms}


def _setup(query: Query, cat: Catalog, config: CostConfig | None):
    ctx = CostContext(cat, query, config)
    universe = SearchUniverse(cat, query)
    if not universe.feasible:
        raise InfeasibleQuery(f"no plan exists for {query.sig}")
    return ctx, universe


def _group_sort_key(g: GroupKey):
    return (len(g[0]), g[0].rels, str(g[1]))


def brute_force_optimize(query: Query, cat: Catalog, *,
                         config: CostConfig | None = None
                         ) -> tuple[PlanNode, BaselineMetrics]:
    """Exhaustive oracle: every alternative of every reachable group costed,
    nothing pruned, minimum under the shared (cost, index, phy_op) tie-break.
    """
    if len(query.relations) > BRUTE_FORCE_MAX_RELATIONS:
        raise TooLarge(
            f"{len(query.relations)} relations exceeds the exhaustive "
            f"budget of {BRUTE_FORCE_MAX_RELATIONS}")
    start = time.perf_counter()
    ctx, universe = _setup(query, cat, config)
    metrics = BaselineMetrics()
    best: dict[GroupKey, tuple[float, AltKey]] = {}

    def resolve(g: GroupKey) -> tuple[float, AltKey]:
        got = best.get(g)
        if got is None:
            metrics.visit_log.append(g)
            candidates = []
            for alt in universe.alternatives(g):
                candidates.append((alternative_cost(ctx, g, alt, resolve), alt.key))
                metrics.visited_and += 1
            got = lexmin(candidates)
            best[g] = got
        return got

    resolve(universe.root)
    metrics.visited_or = len(best)
    plan = build_plan(universe, ctx, resolve, universe.root)
    metrics.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return plan, metrics


def systemr_optimize(query: Query, cat: Catalog, *,
                     config: CostConfig | None = None
                     ) -> tuple[PlanNode, BaselineMetrics]:
    """Bottom-up dynamic programming: size-1 groups first, then strictly
    larger subsets; each group visited exactly once, no branch-and-bound."""
    start = time.perf_counter()
    ctx, universe = _setup(query, cat, config)
    metrics = BaselineMetrics()
    best: dict[GroupKey, tuple[float, AltKey]] = {}

    for g in sorted(universe.groups(), key=_group_sort_key):
        metrics.visit_log.append(g)
        candidates = []
        for alt in universe.alternatives(g):
            candidates.append(
                (alternative_cost(ctx, g, alt, best.__getitem__), alt.key))
            metrics.visited_and += 1
        best[g] = lexmin(candidates)

    metrics.visited_or = len(best)
    plan = build_plan(universe, ctx, best.__getitem__, universe.root)
    metrics.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return plan, metrics


class _VolcanoMemo:
    """Memo entry: exact best, or a failure bound ('best cost exceeds limit')."""

    __slots__ = ("exact", "fail_limit")

    def __init__(self):
        self.exact: tuple[float, AltKey] | None = None
        self.fail_limit: float = -math.inf


def volcano_optimize(query: Query, cat: Catalog, *,
                     config: CostConfig | None = None,
                     use_bounds: bool = True
                     ) -> tuple[PlanNode, BaselineMetrics]:
    """Top-down exploration with memoization; the cost limit handed to each
    child is the remaining budget after the local operator and any sibling
    already resolved.  Initial upper bound is infinity, so pruning is
    conservative and the returned cost equals the oracle's exactly."""
    start = time.perf_counter()
    ctx, universe = _setup(query, cat, config)
    metrics = BaselineMetrics()
    memo: dict[GroupKey, _VolcanoMemo] = {}
    completed: set[tuple[GroupKey, AltKey]] = set()
    pruned_alts: set[tuple[GroupKey, AltKey]] = set()

    def explore(g: GroupKey, limit: float) -> tuple[float, AltKey] | None:
        entry = memo.get(g)
        if entry is None:
            entry = memo[g] = _VolcanoMemo()
            metrics.visit_log.append(g)
        if entry.exact is not None:
            return entry.exact if entry.exact[0] <= limit or not use_bounds else None
        if use_bounds and limit <= entry.fail_limit:
            return None

        best: tuple[float, AltKey] | None = None
        any_pruned = False
        e, p = g
        for alt in universe.alternatives(g):
            bound = limit
            if best is not None:
                bound = min(bound, best[0])
            local = ctx.local_cost(e, p, alt)
            if alt.is_scan:
                cost = sum_cost(None, None, local)
            else:
                if use_bounds and local > bound:
                    any_pruned = True
                    pruned_alts.add((g, alt.key))
                    continue
                left = explore((alt.l_expr, alt.l_prop),
                               bound - local if use_bounds else math.inf)
                if left is None:
                    any_pruned = True
                    pruned_alts.add((g, alt.key))
                    continue
                right = explore((alt.r_expr, alt.r_prop),
                                bound - local - left[0] if use_bounds else math.inf)
                if right is None:
                    any_pruned = True
                    pruned_alts.add((g, alt.key))
                    continue
                cost = sum_cost(left[0], right[0], local)
            completed.add((g, alt.key))
            cand = (cost, alt.key)
            if best is None or cand < best:
                best = cand

        if best is not None and (not use_bounds or best[0] <= limit):
            entry.exact = best
            return best
        entry.fail_limit = max(entry.fail_limit, limit)
        if best is not None and not any_pruned:
            # every alternative completed; the minimum is exact even though
            # it exceeds the caller's limit
            entry.exact = best
        return None

    result = explore(universe.root, math.inf)
    assert result is not None  # root limit is infinite
    metrics.visited_or = len(memo)
    metrics.visited_and = len(completed)
    metrics.pruned_and = len(pruned_alts - completed)
    metrics.pruned_or = sum(1 for m in memo.values() if m.exact is None)

    def resolved(g: GroupKey) -> tuple[float, AltKey]:
        entry = memo.get(g)
        if entry is not None and entry.exact is not None:
            return entry.exact
        # resolve children of the winning plan that were memoized only under
        # a limit: re-explore without pressure (pure, deterministic)
        got = explore(g, math.inf)
        assert got is not None
        return got

    plan = build_plan(universe, ctx, resolved, universe.root)
    metrics.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return plan, metrics
