"""Physical plan trees and their JSON form."""
from __future__ import annotations

from dataclasses import dataclass

from .algebra import ExprSig, GroupKey, PropertySpec
from .costmodel import CostContext


@dataclass(frozen=True)
class PlanNode:
    """One operator of a resolved plan; ``cost`` is the subtree total."""

    expr: ExprSig
    prop: PropertySpec
    log_op: str
    phy_op: str
    cost: float
    summary_card: float
    children: tuple["PlanNode", ...] = ()

    def to_dict(self) -> dict:
        return {
            "op": self.log_op,
            "phy_op": self.phy_op,
            "expr": list(self.expr.rels),
            "prop": str(self.prop),
            "cost": self.cost,
            "summary_card": self.summary_card,
            "children": [c.to_dict() for c in self.children],
        }

    def total_cost(self) -> float:
        return self.cost

    def structure(self) -> tuple:
        """Operator tree shape without cost annotations; two plans with the
        same structure execute identically."""
        return (self.phy_op, self.expr.rels,
                tuple(c.structure() for c in self.children))


def build_plan(universe, ctx: CostContext, best, group: GroupKey) -> PlanNode:
    """Resolve the operator tree rooted at ``group`` from a best-cost map.

    ``best(group) -> (cost, alt_key)``; alternatives come from the shared
    universe so every engine materializes identical trees for identical
    best maps.
    """
    cost, key = best(group)
    alt = next(a for a in universe.alternatives(group) if a.key == key)
    children = tuple(build_plan(universe, ctx, best, c) for c in alt.children())
    e, p = group
    return PlanNode(
        expr=e, prop=p, log_op=alt.log_op, phy_op=alt.phy_op,
        cost=cost, summary_card=ctx.summary(e).cardinality, children=children,
    )
