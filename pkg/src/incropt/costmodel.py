"""The concrete cost model: summaries and the five costing functions.

Cost formulas (dimensionless work units):

* seq scan:    base_cardinality * scan_cost_factor
* index scan:  base_cardinality * scan_cost_factor * index_scan_surcharge
* hash join:   left_rows + right_rows + output_rows          (local only)
* merge join:  same as hash join; inputs arrive pre-sorted by contract
* index NL:    outer_rows * (1 + log_b(1 + inner_rows)) + output_rows,
               inner = the indexed (left) child
* plan cost:   left_cost + right_cost + local_cost

Summaries (estimated output cardinalities) are a logical property of an
expression: every partition of the same expression gets the identical
value because the context memoizes one canonical computation per
expression signature.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .algebra import Alternative, ExprSig, GroupKey, INDEX_SCAN, INDEX_NL_JOIN, Query
from .catalog import Catalog
from .errors import ParseError

INFINITE_COST = math.inf


@dataclass(frozen=True)
class Summary:
    """Estimated output rows of a subexpression; identical for all its plans."""

    cardinality: float


@dataclass(frozen=True)
class CostConfig:
    index_scan_surcharge: float = 1.2
    inlj_log_base: float = 2.0

    def to_dict(self) -> dict:
        return {"index_scan_surcharge": self.index_scan_surcharge,
                "inlj_log_base": self.inlj_log_base}

    @classmethod
    def from_dict(cls, data: dict) -> "CostConfig":
        extra = set(data) - {"index_scan_surcharge", "inlj_log_base"}
        if extra:
            raise ParseError(f"unknown keys {sorted(extra)} in cost config")
        return cls(
            index_scan_surcharge=float(data.get("index_scan_surcharge", 1.2)),
            inlj_log_base=float(data.get("inlj_log_base", 2.0)),
        )

    @classmethod
    def load(cls, path: str) -> "CostConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise ParseError(f"cannot read cost config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"cost config {path} is not valid JSON: {exc}") from exc


def scan_summary(e: ExprSig, cat: Catalog, query: Query) -> Summary:
    rel = cat.relation(e.sole)
    card = rel.cardinality
    for s in query.filter_selectivities(rel.name):
        card = card * s
    return Summary(card)


def nonscan_summary(e: ExprSig, l_expr: ExprSig, l_sum: Summary,
                    r_expr: ExprSig, r_sum: Summary, cat: Catalog) -> Summary:
    """Join output summary: child product times all crossing selectivities."""
    card = l_sum.cardinality * r_sum.cardinality
    for pred in cat.crossing_predicates(l_expr.rels, r_expr.rels):
        card = card * pred.selectivity
    return Summary(card)


def scan_cost(e: ExprSig, p, phy_op: str, s: Summary, cat: Catalog,
              cfg: CostConfig = CostConfig()) -> float:
    rel = cat.relation(e.sole)
    cost = rel.cardinality * rel.scan_cost_factor
    if phy_op == INDEX_SCAN:
        cost = cost * cfg.index_scan_surcharge
    return cost


def nonscan_cost(alt: Alternative, s: Summary, l_sum: Summary, r_sum: Summary,
                 cfg: CostConfig = CostConfig()) -> float:
    """Local (root operator) cost of a join alternative; children excluded."""
    if alt.phy_op == INDEX_NL_JOIN:
        # left child is the indexed inner by convention
        probe = 1.0 + math.log(1.0 + l_sum.cardinality, cfg.inlj_log_base)
        return r_sum.cardinality * probe + s.cardinality
    return l_sum.cardinality + r_sum.cardinality + s.cardinality


def sum_cost(l_cost: float | None, r_cost: float | None, local_cost: float) -> float:
    """Plan cost = left + right + local; absent children contribute zero."""
    total = local_cost
    if l_cost is not None:
        total = l_cost + total if r_cost is None else (l_cost + r_cost) + local_cost
    return total


class CostContext:
    """Catalog + query + config bundle with the canonical summary memo.

    All engines costing the same (catalog, query) share the identical
    arithmetic path through this class, so their costs agree exactly.
    """

    def __init__(self, cat: Catalog, query: Query, config: CostConfig | None = None):
        self.catalog = cat
        self.query = query
        self.config = config or CostConfig()
        self._summaries: dict[ExprSig, Summary] = {}

    def summary(self, e: ExprSig) -> Summary:
        got = self._summaries.get(e)
        if got is None:
            if e.is_leaf:
                got = scan_summary(e, self.catalog, self.query)
            else:
                # canonical decomposition: first relation vs the rest, so the
                # value never depends on which partition asked first
                head = ExprSig.of((e.rels[0],))
                rest = ExprSig.of(e.rels[1:])
                got = nonscan_summary(e, head, self.summary(head),
                                      rest, self.summary(rest), self.catalog)
            self._summaries[e] = got
        return got

    def local_cost(self, e: ExprSig, p, alt: Alternative) -> float:
        if alt.is_scan:
            return scan_cost(e, p, alt.phy_op, self.summary(e), self.catalog, self.config)
        return nonscan_cost(alt, self.summary(e), self.summary(alt.l_expr),
                            self.summary(alt.r_expr), self.config)

    def rebased(self, cat: Catalog, affected: frozenset[str]) -> "CostContext":
        """New context for an updated catalog, keeping summaries whose
        expression contains none of the affected relations."""
        ctx = CostContext(cat, self.query, self.config)
        for e, s in self._summaries.items():
            if not (set(e.rels) & affected):
                ctx._summaries[e] = s
        return ctx


BestMap = dict[GroupKey, tuple[float, tuple[int, str]]]


def alternative_cost(ctx: CostContext, group: GroupKey, alt: Alternative,
                     child_best) -> float:
    """Full plan cost of one alternative given a child-best resolver.

    ``child_best(group) -> (cost, alt_key)``.  Shared by every engine so the
    arithmetic is identical everywhere.
    """
    e, p = group
    local = ctx.local_cost(e, p, alt)
    if alt.is_scan:
        return sum_cost(None, None, local)
    l_cost = child_best((alt.l_expr, alt.l_prop))[0]
    r_cost = child_best((alt.r_expr, alt.r_prop))[0]
    return sum_cost(l_cost, r_cost, local)


def lexmin(candidates) -> tuple[float, tuple[int, str]] | None:
    """Deterministic group minimum: smallest (cost, index, phy_op)."""
    best = None
    for cost, key in candidates:
        if best is None or (cost, key) < best:
            best = (cost, key)
    return best
