"""TPC-H-shaped fixture catalogs and queries.

Cardinalities follow the SF1 row counts scaled down by 100 for desk-sized
runs; join graphs mirror the simplified 3-, 6-, and 8-way join queries.
These are fixtures, not measurements.
"""
from __future__ import annotations

import json
import os

from .algebra import Query
from .catalog import Catalog, JoinPredicate, RelationMeta, validate_catalog


def _rel(name, card, attrs, indexed=(), sorted_on=None):
    return RelationMeta(name=name, cardinality=float(card), attributes=tuple(attrs),
                        indexed_on=tuple(indexed), sorted_on=sorted_on)


def q3s() -> tuple[Catalog, Query]:
    """3-way join: customer -- orders -- lineitem."""
    cat = Catalog(
        relations=(
            _rel("customer", 1500, ("c_custkey", "c_mktsegment"), indexed=("c_custkey",)),
            _rel("orders", 15000, ("o_orderkey", "o_custkey", "o_orderdate"),
                 indexed=("o_orderkey", "o_custkey")),
            _rel("lineitem", 60000, ("l_orderkey", "l_shipdate"),
                 indexed=("l_orderkey",), sorted_on="l_orderkey"),
        ),
        predicates=(
            JoinPredicate("customer.c_custkey", "orders.o_custkey", 1.0 / 1500),
            JoinPredicate("orders.o_orderkey", "lineitem.l_orderkey", 1.0 / 15000),
        ),
    )
    validate_catalog(cat)
    query = Query(
        relations=("customer", "orders", "lineitem"),
        filters=(("customer", 0.2), ("orders", 0.5), ("lineitem", 0.5)),
    )
    return cat, query


def q5s() -> tuple[Catalog, Query]:
    """6-way join over the customer/orders/lineitem/supplier/nation/region graph."""
    cat = Catalog(
        relations=(
            _rel("customer", 1500, ("c_custkey", "c_nationkey"), indexed=("c_custkey",)),
            _rel("orders", 15000, ("o_orderkey", "o_custkey", "o_orderdate"),
                 indexed=("o_orderkey", "o_custkey")),
            _rel("lineitem", 60000, ("l_orderkey", "l_suppkey"),
                 indexed=("l_orderkey",), sorted_on="l_orderkey"),
            _rel("supplier", 100, ("s_suppkey", "s_nationkey"), indexed=("s_suppkey",)),
            _rel("nation", 25, ("n_nationkey", "n_regionkey"), indexed=("n_nationkey",)),
            _rel("region", 5, ("r_regionkey", "r_name")),
        ),
        predicates=(
            JoinPredicate("customer.c_custkey", "orders.o_custkey", 1.0 / 1500),
            JoinPredicate("orders.o_orderkey", "lineitem.l_orderkey", 1.0 / 15000),
            JoinPredicate("lineitem.l_suppkey", "supplier.s_suppkey", 1.0 / 100),
            JoinPredicate("customer.c_nationkey", "supplier.s_nationkey", 1.0 / 25),
            JoinPredicate("supplier.s_nationkey", "nation.n_nationkey", 1.0 / 25),
            JoinPredicate("nation.n_regionkey", "region.r_regionkey", 1.0 / 5),
        ),
    )
    validate_catalog(cat)
    query = Query(
        relations=("customer", "orders", "lineitem", "supplier", "nation", "region"),
        filters=(("region", 0.2), ("orders", 0.4), ("lineitem", 0.05)),
    )
    return cat, query


def q8joins() -> tuple[Catalog, Query]:
    """8-way join over orders/lineitem/customer/part/partsupp/supplier/nation/region."""
    cat = Catalog(
        relations=(
            _rel("orders", 15000, ("o_orderkey", "o_custkey"),
                 indexed=("o_orderkey",)),
            _rel("lineitem", 60000, ("l_orderkey", "l_partkey", "l_suppkey"),
                 indexed=("l_orderkey", "l_partkey"), sorted_on="l_orderkey"),
            _rel("customer", 1500, ("c_custkey",), indexed=("c_custkey",)),
            _rel("part", 2000, ("p_partkey", "p_name"), indexed=("p_partkey",)),
            _rel("partsupp", 8000, ("ps_partkey", "ps_suppkey"),
                 indexed=("ps_partkey", "ps_suppkey")),
            _rel("supplier", 100, ("s_suppkey", "s_nationkey"), indexed=("s_suppkey",)),
            _rel("nation", 25, ("n_nationkey", "n_regionkey"), indexed=("n_nationkey",)),
            _rel("region", 5, ("r_regionkey",)),
        ),
        predicates=(
            JoinPredicate("orders.o_orderkey", "lineitem.l_orderkey", 1.0 / 15000),
            JoinPredicate("customer.c_custkey", "orders.o_custkey", 1.0 / 1500),
            JoinPredicate("part.p_partkey", "lineitem.l_partkey", 1.0 / 2000),
            JoinPredicate("partsupp.ps_partkey", "part.p_partkey", 1.0 / 2000),
            JoinPredicate("supplier.s_suppkey", "partsupp.ps_suppkey", 1.0 / 100),
            JoinPredicate("region.r_regionkey", "nation.n_regionkey", 1.0 / 5),
            JoinPredicate("supplier.s_nationkey", "nation.n_nationkey", 1.0 / 25),
        ),
    )
    validate_catalog(cat)
    query = Query(
        relations=("orders", "lineitem", "customer", "part", "partsupp",
                   "supplier", "nation", "region"),
        filters=(("lineitem", 0.25), ("orders", 0.5)),
    )
    return cat, query


FIXTURES = {"q3s": q3s, "q5s": q5s, "q8joins": q8joins}


def write_fixture_files(outdir: str) -> list[str]:
    """Write <name>.catalog.json and <name>.query.json for every fixture."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    for name, fn in FIXTURES.items():
        cat, query = fn()
        cpath = os.path.join(outdir, f"{name}.catalog.json")
        qpath = os.path.join(outdir, f"{name}.query.json")
        with open(cpath, "w", encoding="utf-8") as fh:
            json.dump(cat.to_dict(), fh, indent=2)
        with open(qpath, "w", encoding="utf-8") as fh:
            json.dump({"relations": list(query.relations),
                       "filters": [{"relation": r, "selectivity": s}
                                   for r, s in query.filters]}, fh, indent=2)
        written.extend([cpath, qpath])
    return written
