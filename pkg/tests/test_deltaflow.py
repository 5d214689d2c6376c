from __future__ import annotations

import random

import pytest

from incropt.deltaflow import (
    CountedState, DELETE, Delta, FixpointEngine, INSERT, MinGroupState, UPDATE,
)
from incropt.errors import NonTermination, ValidationError


def test_update_delta_with_identical_sides_rejected():
    with pytest.raises(ValidationError):
        Delta("r", UPDATE, None, old=1, new=1)


class TestCountedState:
    def test_insert_on_zero_emits(self):
        st = CountedState("r")
        out = st.apply(Delta("r", INSERT, "x"))
        assert [(d.op, d.payload) for d in out] == [(INSERT, "x")]

    def test_insert_on_visible_is_silent(self):
        st = CountedState("r")
        st.apply(Delta("r", INSERT, "x"))
        assert st.apply(Delta("r", INSERT, "x")) == []
        assert st.count("x") == 2

    def test_delete_to_zero_emits(self):
        st = CountedState("r")
        st.apply(Delta("r", INSERT, "x"))
        out = st.apply(Delta("r", DELETE, "x"))
        assert [(d.op, d.payload) for d in out] == [(DELETE, "x")]

    def test_out_of_order_delete_goes_negative_then_recovers(self):
        st = CountedState("r")
        out = st.apply(Delta("r", DELETE, "x"))
        assert out == [] and st.count("x") == -1
        out = st.apply(Delta("r", INSERT, "x"))
        assert out == [] and st.count("x") == 0
        assert not st.visible("x")

    def test_update_pairs_into_one_delta(self):
        st = CountedState("r")
        st.apply(Delta("r", INSERT, "x"))
        out = st.apply(Delta("r", UPDATE, None, old="x", new="y"))
        assert len(out) == 1 and out[0].op == UPDATE
        assert out[0].old == "x" and out[0].new == "y"
        assert st.visible("y") and not st.visible("x")

    def test_conservation_over_history(self):
        rng = random.Random(3)
        st = CountedState("r")
        ledger = {}
        for _ in range(500):
            key = rng.choice("abcd")
            op = rng.choice((INSERT, DELETE))
            ledger[key] = ledger.get(key, 0) + (1 if op == INSERT else -1)
            st.apply(Delta("r", op, key))
        for key in "abcd":
            assert st.count(key) == ledger.get(key, 0)

    def test_trace_format(self):
        lines = []
        st = CountedState("searchspace", trace=lines.append)
        st.apply(Delta("searchspace", INSERT, ("g", 1)))
        st.apply(Delta("searchspace", DELETE, ("g", 1)))
        assert lines == ["searchspace + ('g', 1) 0 1", "searchspace - ('g', 1) 1 0"]


class TestMinGroupState:
    def test_insertion_lowers_min(self):
        m = MinGroupState()
        assert m.update("g", Delta("pc", INSERT, ("a", 0.30))).op == INSERT
        evt = m.update("g", Delta("pc", INSERT, ("b", 0.25)))
        assert evt.op == UPDATE and evt.old == (0.30, "a") and evt.new == (0.25, "b")

    def test_insertion_above_min_is_silent(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 0.25)))
        assert m.update("g", Delta("pc", INSERT, ("b", 0.30))) is None
        assert m.min_of("g") == (0.25, "a")

    def test_deleting_min_promotes_next_best(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 0.25)))
        m.update("g", Delta("pc", INSERT, ("b", 0.30)))
        evt = m.update("g", Delta("pc", DELETE, ("a",)))
        assert evt.op == UPDATE and evt.new == (0.30, "b")

    def test_raising_min_promotes_min_of_new_and_next_best(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 0.25)))
        m.update("g", Delta("pc", INSERT, ("b", 0.30)))
        evt = m.update("g", Delta("pc", UPDATE, None, old=("a", 0.25), new=("a", 0.40)))
        assert evt.op == UPDATE and evt.new == (0.30, "b")

    def test_lowering_nonmin_competes(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 0.30)))
        m.update("g", Delta("pc", INSERT, ("b", 0.50)))
        evt = m.update("g", Delta("pc", UPDATE, None, old=("b", 0.50), new=("b", 0.20)))
        assert evt.new == (0.20, "b")

    def test_retains_all_members(self):
        m = MinGroupState()
        for i, c in enumerate((5.0, 3.0, 4.0)):
            m.update("g", Delta("pc", INSERT, (f"m{i}", c)))
        assert len(m.members("g")) == 3

    def test_last_delete_emits_group_delete(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 1.0)))
        evt = m.update("g", Delta("pc", DELETE, ("a",)))
        assert evt.op == DELETE and m.min_of("g") is None

    def test_visible_min_tracks_visibility(self):
        m = MinGroupState()
        m.update("g", Delta("pc", INSERT, ("a", 1.0)))
        m.update("g", Delta("pc", INSERT, ("b", 2.0)))
        m.set_visible("g", "a", True)
        m.set_visible("g", "b", True)
        assert m.visible_min("g") == (1.0, "a")
        m.set_visible("g", "a", False)
        assert m.visible_min("g") == (2.0, "b")
        assert m.min_of("g") == (1.0, "a")


class TestFixpointEngine:
    def test_empty_queue_is_noop(self):
        eng = FixpointEngine({})
        assert eng.run() == 0

    def test_ceiling_guards_nontermination(self):
        eng = FixpointEngine({"loop": lambda d: [Delta("loop", INSERT, "x")]},
                             max_deltas=100)
        eng.push(Delta("loop", INSERT, "x"))
        with pytest.raises(NonTermination):
            eng.run()

    def test_shuffled_drain_matches_fifo(self):
        # toy counting network: edges propagate increments to reachable nodes
        edges = {"a": ["b", "c"], "b": ["d"], "c": ["d"], "d": []}

        def run(order, seed=None):
            counts = {k: 0 for k in edges}

            def bump(d):
                node = d.payload
                counts[node] += 1
                return [Delta("bump", INSERT, nxt) for nxt in edges[node]]

            eng = FixpointEngine({"bump": bump}, order=order, seed=seed)
            eng.push([Delta("bump", INSERT, "a"), Delta("bump", INSERT, "b")])
            eng.run()
            return counts

        fifo = run("fifo")
        for seed in range(10):
            assert run("random", seed) == fifo
