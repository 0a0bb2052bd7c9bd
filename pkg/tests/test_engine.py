import threading
import time

import pytest

from agent_scripts import agent_reply, depth_replies, iteration_replies, tiny_retriever
from rqflow import model
from rqflow.engine import (
    AlreadyGenerating,
    SessionEngine,
    canonical_json,
    replay_flows,
    replay_session,
)
from rqflow.ids import IdSource, TickingClock
from rqflow.llm import ScriptedProvider
from rqflow.model import Mode, Rating, SchemaVersionUnsupported, UnknownNode
from rqflow.store import SessionStore, StoreError


def make_engine(mode=Mode.BREADTH_FIRST, replies=None, store=None, chat_delay=0.0, seed=5):
    stub = ScriptedProvider(replies=replies or [], chat_delay=chat_delay)
    return SessionEngine.create(
        "crowdsourcing and AI",
        mode,
        stub,
        tiny_retriever(),
        ids=IdSource(seed=seed),
        clock=TickingClock(epoch=1_700_000_000.0),
        store=store,
    )


class TestEventLog:
    def test_session_created_first(self):
        engine = make_engine()
        assert [e.kind for e in engine.session.event_log] == ["SessionCreated"]
        assert engine.session.event_log[0].seq == 1

    def test_seq_strictly_increasing(self):
        engine = make_engine()
        root = engine.add_initial_node("idea")
        engine.set_feedback(root, "some feedback")
        seqs = [e.seq for e in engine.session.event_log]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_events_after(self):
        engine = make_engine()
        engine.add_initial_node("idea")
        assert [e.kind for e in engine.events_after(1)] == ["NodeAdded"]
        assert engine.events_after(99) == []

    def test_wait_events_unblocks_on_append(self):
        engine = make_engine()
        got = []

        def waiter():
            got.extend(engine.wait_events(1, timeout=5.0))

        t = threading.Thread(target=waiter)
        t.start()
        time.sleep(0.05)
        engine.add_initial_node("idea")
        t.join(timeout=5.0)
        assert [e.kind for e in got] == ["NodeAdded"]


class TestMutations:
    def test_rating_and_feedback_events(self):
        engine = make_engine(replies=iteration_replies())
        root = engine.add_initial_node("idea")
        result = engine.run_generation(root)
        nid = result.new_nodes[0][0]
        engine.set_rating(nid, Rating(3, 4, 3, 5))
        engine.set_feedback(nid, "sharpen this")
        kinds = [e.kind for e in engine.session.event_log]
        assert "RatingSet" in kinds and "FeedbackSet" in kinds

    def test_unknown_node(self):
        engine = make_engine()
        with pytest.raises(UnknownNode):
            engine.set_feedback("ghost", "x")


class TestGenerationEvents:
    def test_breadth_event_shape(self):
        engine = make_engine(replies=iteration_replies())
        root = engine.add_initial_node("crowdsourcing and AI")
        result = engine.run_generation(root)
        assert result.error is None
        kinds = [e.kind for e in engine.session.event_log]
        assert kinds.count("GenerationStarted") == 1
        assert kinds.count("ActionChosen") == 1
        assert kinds.count("ActionResult") == 1
        assert kinds.count("RQCommitted") == 3
        assert kinds.count("GenerationFinished") == 1

    def test_depth_event_interleaving(self):
        engine = make_engine(mode=Mode.DEPTH_FIRST, replies=depth_replies())
        root = engine.add_initial_node("idea")
        engine.run_generation(root)
        tail = [e.kind for e in engine.session.event_log if e.kind.startswith(("Action", "RQ"))]
        assert tail == ["ActionChosen", "ActionResult", "RQCommitted"] * 3

    def test_failed_generation_emits_failed_event(self):
        engine = make_engine(replies=["garbage", "more garbage"])
        root = engine.add_initial_node("idea")
        result = engine.run_generation(root)
        assert result.error is not None
        assert engine.session.event_log[-1].kind == "GenerationFailed"

    def test_same_node_concurrent_trigger_rejected(self):
        engine = make_engine(replies=iteration_replies(), chat_delay=0.3)
        root = engine.add_initial_node("idea")
        handle = engine.start_generation(root)
        assert handle.status == "Running"
        with pytest.raises(AlreadyGenerating):
            engine.start_generation(root)
        engine.wait_generations()
        assert handle.status == "Done"

    def test_generations_on_distinct_nodes_run_concurrently(self):
        reply = agent_reply(action="narrow_down_rqs", args={"context": "c"})
        engine = make_engine(replies=[reply] * 6, chat_delay=0.2)
        a = engine.add_initial_node("idea one")
        b = engine.add_initial_node("idea two")
        start = time.monotonic()
        engine.start_generation(a)
        engine.start_generation(b)
        engine.wait_generations()
        elapsed = time.monotonic() - start
        # 6 chat calls of 0.2 s each: serial would be ~1.2 s
        assert elapsed < 1.1
        flow = engine.session.default_flow
        assert len(flow.nodes) == 8

    def test_reads_do_not_block_during_generation(self):
        engine = make_engine(replies=iteration_replies(), chat_delay=0.3)
        root = engine.add_initial_node("idea")
        engine.start_generation(root)
        t0 = time.monotonic()
        engine.export_doc()
        engine.events_after(0)
        assert time.monotonic() - t0 < 0.2
        engine.wait_generations()


class TestReplay:
    def test_replay_equals_materialized_after_operations(self):
        engine = make_engine(mode=Mode.DEPTH_FIRST, replies=depth_replies())
        root = engine.add_initial_node("idea")
        engine.set_feedback(root, "make it specific")
        engine.run_generation(root)
        nid = engine.session.default_flow.edges[0].target
        engine.set_rating(nid, Rating(4, 5, 4, 5))
        flows = replay_flows(engine.session.event_log)
        materialized = engine.session.default_flow
        assert model.flows_equal(flows[materialized.id], materialized)

    def test_replay_session_restores_thoughts(self):
        engine = make_engine(replies=iteration_replies())
        root = engine.add_initial_node("idea")
        engine.run_generation(root)
        rebuilt = replay_session(engine.session.event_log)
        assert rebuilt.thoughts.keys() == engine.session.thoughts.keys()
        for tid, thought in engine.session.thoughts.items():
            assert rebuilt.thoughts[tid] == thought

    def test_replay_rejects_future_schema(self):
        engine = make_engine()
        engine.session.event_log[0].payload["schema_version"] = 99
        with pytest.raises(SchemaVersionUnsupported):
            replay_session(engine.session.event_log)


class TestStore:
    def test_crash_after_event_reload(self, tmp_path):
        store = SessionStore(tmp_path)
        engine = make_engine(replies=iteration_replies(), store=store)
        root = engine.add_initial_node("idea")
        engine.run_generation(root)
        # simulate crash: no explicit close; load from disk
        loaded = store.load(engine.session.id)
        assert len(loaded.event_log) == len(engine.session.event_log)
        assert model.flows_equal(loaded.default_flow, engine.session.default_flow)
        assert loaded.thoughts.keys() == engine.session.thoughts.keys()

    def test_log_only_reload(self, tmp_path):
        store = SessionStore(tmp_path)
        engine = make_engine(store=store)
        engine.add_initial_node("idea")
        snapshot = store._snapshot_path(engine.session.id)
        if snapshot.exists():
            snapshot.unlink()
        loaded = store.load(engine.session.id)
        assert model.flows_equal(loaded.default_flow, engine.session.default_flow)

    def test_missing_session(self, tmp_path):
        with pytest.raises(StoreError):
            SessionStore(tmp_path).load("nope")

    def test_layout_survives_snapshot(self, tmp_path):
        store = SessionStore(tmp_path)
        engine = make_engine(store=store)
        root = engine.add_initial_node("idea")
        engine.set_layout({root: {"x": 12, "y": 30}})
        loaded = store.load(engine.session.id)
        assert loaded.layout == {root: {"x": 12, "y": 30}}


class TestCanonicalJson:
    def test_stable_bytes(self):
        engine_a = make_engine(replies=iteration_replies(), seed=5)
        engine_b = make_engine(replies=iteration_replies(), seed=5)
        for engine in (engine_a, engine_b):
            root = engine.add_initial_node("idea")
            engine.run_generation(root)
        assert engine_a.export_json() == engine_b.export_json()

    def test_different_seed_differs(self):
        engine_a = make_engine(seed=5)
        engine_b = make_engine(seed=6)
        assert engine_a.export_json() != engine_b.export_json()

    def test_canonical_json_sorted_and_newline_terminated(self):
        out = canonical_json({"b": 1, "a": 2})
        assert out.index('"a"') < out.index('"b"')
        assert out.endswith("\n")
