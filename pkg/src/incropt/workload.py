"""Seeded workload generation: chain/star/clique catalogs and update batches."""
from __future__ import annotations

import random

from .algebra import Query
from .catalog import (
    Catalog, JOIN_SELECTIVITY, JoinPredicate, RelationMeta, SCAN_COST, StatUpdate,
    validate_catalog,
)

SHAPES = ("chain", "star", "clique")
UPDATE_FACTORS = (0.125, 0.25, 0.5, 2.0, 4.0, 8.0)


def _edges(shape: str, n: int) -> list[tuple[int, int]]:
    if shape == "chain":
        return [(i, i + 1) for i in range(n - 1)]
    if shape == "star":
        return [(0, i) for i in range(1, n)]
    if shape == "clique":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    raise ValueError(f"unknown shape {shape!r}")


def make_workload(shape: str, n: int, seed: int) -> tuple[Catalog, Query]:
    """Deterministic (catalog, query) pair for a join-graph shape and size."""
    rng = random.Random(f"{shape}:{n}:{seed}")
    names = [f"R{i}" for i in range(n)]
    # one attribute per incident edge plus one filler
    edges = _edges(shape, n)
    attrs: dict[int, list[str]] = {i: [f"a{k}" for k in range(len(edges) + 1)]
                                   for i in range(n)}
    relations = []
    for i, name in enumerate(names):
        card = float(int(10 ** rng.uniform(1.5, 5.0)))
        indexed = [a for a in attrs[i] if rng.random() < 0.5]
        sorted_on = rng.choice(attrs[i]) if rng.random() < 0.3 else None
        relations.append(RelationMeta(
            name=name, cardinality=max(card, 1.0),
            attributes=tuple(attrs[i]), indexed_on=tuple(indexed),
            sorted_on=sorted_on, scan_cost_factor=1.0,
        ))
    predicates = []
    for k, (i, j) in enumerate(edges):
        sel = 10 ** rng.uniform(-4.0, -0.5)
        predicates.append(JoinPredicate(
            left=f"{names[i]}.a{k}", right=f"{names[j]}.a{k}",
            selectivity=sel,
        ))
    cat = Catalog(relations=tuple(relations), predicates=tuple(predicates))
    validate_catalog(cat)
    filters = tuple(
        (name, round(rng.uniform(0.05, 0.9), 4))
        for name in names if rng.random() < 0.4
    )
    return cat, Query(relations=tuple(names), filters=filters)


def make_update_batch(cat: Catalog, k: int, seed: int) -> list[StatUpdate]:
    """k random multiplicative updates with factors from the 1/8..8 grid."""
    rng = random.Random(f"updates:{seed}")
    out = []
    for _ in range(k):
        factor = rng.choice(UPDATE_FACTORS)
        if cat.predicates and rng.random() < 0.5:
            pred = rng.choice(cat.predicates)
            out.append(StatUpdate(JOIN_SELECTIVITY, pred.name, factor))
        else:
            rel = rng.choice(cat.relations)
            out.append(StatUpdate(SCAN_COST, rel.name, factor))
    return out
