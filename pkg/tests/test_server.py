import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from agent_scripts import agent_reply, depth_replies, iteration_replies, tiny_retriever
from rqflow.engine import replay_flows
from rqflow.ids import IdSource, TickingClock
from rqflow.llm import ScriptedProvider
from rqflow.model import SessionEvent
from rqflow.server import SessionRegistry, create_app
from rqflow.store import SessionStore


def make_client(replies=None, chat_delay=0.0, store=None, keyed=None):
    stub = ScriptedProvider(replies=replies or [], keyed=keyed or {}, chat_delay=chat_delay)
    registry = SessionRegistry(
        stub, tiny_retriever(), store=store,
        ids=IdSource(seed=31), clock=TickingClock(epoch=1_700_000_000.0),
    )
    return TestClient(create_app(registry)), registry


def create_session(client, mode="BreadthFirst", topic="crowdsourcing and AI"):
    resp = client.post("/sessions", json={"topic": topic, "mode": mode})
    assert resp.status_code == 201
    return resp.json()["session_id"]


def add_node(client, sid, idea="crowdsourcing and AI"):
    resp = client.post(f"/sessions/{sid}/nodes", json={"idea_text": idea})
    assert resp.status_code == 201
    return resp.json()["node"]["id"]


def wait_done(client, sid, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        events = client.get(f"/sessions/{sid}/events", params={"after": 0}).json()["events"]
        if any(e["kind"] in ("GenerationFinished", "GenerationFailed") for e in events):
            return events
        time.sleep(0.02)
    raise AssertionError("generation did not finish in time")


class TestSessionLifecycle:
    def test_create_and_fetch(self):
        client, _ = make_client()
        sid = create_session(client)
        doc = client.get(f"/sessions/{sid}").json()
        assert doc["topic"] == "crowdsourcing and AI"
        assert doc["mode"] == "BreadthFirst"
        assert doc["schema_version"] == 1

    def test_bad_mode_422(self):
        client, _ = make_client()
        resp = client.post("/sessions", json={"topic": "t", "mode": "Sideways"})
        assert resp.status_code == 422

    def test_unknown_session_404(self):
        client, _ = make_client()
        assert client.get("/sessions/nope").status_code == 404

    def test_empty_idea_422(self):
        client, _ = make_client()
        sid = create_session(client)
        resp = client.post(f"/sessions/{sid}/nodes", json={"idea_text": "  "})
        assert resp.status_code == 422


class TestRatingsAndFeedback:
    def test_rating_round_trip_and_rerating(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        doc = client.get(f"/sessions/{sid}").json()
        generated = [n for n in doc["flows"][0]["nodes"] if n["kind"] == "Generated"]
        nid = generated[0]["id"]
        resp = client.put(
            f"/sessions/{sid}/nodes/{nid}/rating",
            json={"novelty": 3, "value": 4, "surprise": 3, "relevance": 5},
        )
        assert resp.status_code == 200
        assert resp.json()["node"]["rating"] == {"novelty": 3, "value": 4, "surprise": 3, "relevance": 5}
        resp = client.put(
            f"/sessions/{sid}/nodes/{nid}/rating",
            json={"novelty": 4, "value": 5, "surprise": 4, "relevance": 5},
        )
        assert resp.json()["node"]["rating"]["novelty"] == 4

    def test_rating_out_of_range_422(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        doc = client.get(f"/sessions/{sid}").json()
        nid = [n for n in doc["flows"][0]["nodes"] if n["kind"] == "Generated"][0]["id"]
        resp = client.put(
            f"/sessions/{sid}/nodes/{nid}/rating",
            json={"novelty": 0, "value": 3, "surprise": 3, "relevance": 3},
        )
        assert resp.status_code == 422

    def test_initial_node_rating_422(self):
        client, _ = make_client()
        sid = create_session(client)
        root = add_node(client, sid)
        resp = client.put(
            f"/sessions/{sid}/nodes/{root}/rating",
            json={"novelty": 3, "value": 3, "surprise": 3, "relevance": 3},
        )
        assert resp.status_code == 422

    def test_feedback_set_and_cleared(self):
        client, _ = make_client()
        sid = create_session(client)
        root = add_node(client, sid)
        resp = client.put(f"/sessions/{sid}/nodes/{root}/feedback", json={"text": "in an educational setting"})
        assert resp.json()["node"]["user_feedback"] == "in an educational setting"
        resp = client.put(f"/sessions/{sid}/nodes/{root}/feedback", json={"text": ""})
        assert resp.json()["node"]["user_feedback"] is None

    def test_unknown_node_404(self):
        client, _ = make_client()
        sid = create_session(client)
        resp = client.put(f"/sessions/{sid}/nodes/ghost/feedback", json={"text": "x"})
        assert resp.status_code == 404


class TestGenerationRoutes:
    def test_breadth_generation_event_sequence(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        resp = client.post(f"/sessions/{sid}/nodes/{root}/generate")
        assert resp.status_code == 202
        handle = resp.json()
        assert handle["mode"] == "BreadthFirst"
        events = wait_done(client, sid)
        kinds = [e["kind"] for e in events]
        assert kinds.count("GenerationStarted") == 1
        assert kinds.count("ActionChosen") == 1
        assert kinds.count("RQCommitted") == 3
        assert kinds.count("GenerationFinished") == 1

    def test_depth_generation_interleaved_events(self):
        client, _ = make_client(replies=depth_replies())
        sid = create_session(client, mode="DepthFirst")
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        events = wait_done(client, sid)
        tail = [e["kind"] for e in events if e["kind"].startswith(("Action", "RQ"))]
        assert tail == ["ActionChosen", "ActionResult", "RQCommitted"] * 3

    def test_provider_failure_becomes_generation_failed(self):
        client, _ = make_client(replies=[])  # stub exhausted immediately
        sid = create_session(client)
        root = add_node(client, sid)
        resp = client.post(f"/sessions/{sid}/nodes/{root}/generate")
        assert resp.status_code == 202
        events = wait_done(client, sid)
        assert any(e["kind"] == "GenerationFailed" for e in events)

    def test_same_node_twice_409_and_liveness(self):
        reply = agent_reply(action="narrow_down_rqs", args={"context": "c"})
        client, registry = make_client(replies=[reply] * 6, chat_delay=0.25)
        sid = create_session(client)
        a = add_node(client, sid, "idea one")
        b = add_node(client, sid, "idea two")
        assert client.post(f"/sessions/{sid}/nodes/{a}/generate").status_code == 202
        t0 = time.monotonic()
        doc = client.get(f"/sessions/{sid}")
        assert doc.status_code == 200
        assert time.monotonic() - t0 < 0.2  # read did not block on the generation
        assert client.post(f"/sessions/{sid}/nodes/{b}/generate").status_code == 202
        assert client.post(f"/sessions/{sid}/nodes/{a}/generate").status_code == 409
        wait_done(client, sid)
        registry.engines[sid].wait_generations()


class TestEventTransports:
    def test_long_poll_waits_for_new_events(self):
        client, registry = make_client()
        sid = create_session(client)
        engine = registry.engines[sid]

        def add_soon():
            time.sleep(0.1)
            engine.add_initial_node("late idea")

        t = threading.Thread(target=add_soon)
        t.start()
        resp = client.get(f"/sessions/{sid}/events", params={"after": 1, "wait": 5})
        t.join()
        events = resp.json()["events"]
        assert [e["kind"] for e in events] == ["NodeAdded"]

    def test_stream_matches_long_poll(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        polled = client.get(f"/sessions/{sid}/events", params={"after": 0}).json()["events"]

        received = []
        with client.stream("GET", f"/sessions/{sid}/stream", params={"after": 0, "limit": len(polled)}) as resp:
            assert resp.headers["content-type"].startswith("text/event-stream")
            for line in resp.iter_lines():
                if line.startswith("data: "):
                    received.append(json.loads(line[len("data: "):]))
        assert [e["seq"] for e in received] == [e["seq"] for e in polled]
        assert [e["kind"] for e in received] == [e["kind"] for e in polled]
        assert received == polled


class TestPapersAndThoughts:
    def test_papers_route_shape(self):
        client, registry = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        resp = client.get(f"/sessions/{sid}/nodes/{root}/papers")
        assert resp.status_code == 200
        body = resp.json()
        k = registry.retriever.config.k
        assert len(body["papers"]) == min(k, len(registry.retriever.index.vectors))
        ids = {p["paper_id"] for p in body["papers"]}
        assert set(body["subgraph"]["papers"]) == ids
        for u, v in body["subgraph"]["edges"]:
            assert u in ids and v in ids
        for pid, sets in body["neighbors"].items():
            assert set(sets) == {"cited_by", "cites"}

    def test_papers_unknown_node_404(self):
        client, _ = make_client()
        sid = create_session(client)
        assert client.get(f"/sessions/{sid}/nodes/ghost/papers").status_code == 404

    def test_papers_provider_failure_502(self):
        client, registry = make_client()
        sid = create_session(client)
        root = add_node(client, sid)

        def broken_embed(texts):
            from rqflow.llm import TransportError

            raise TransportError("embedding backend down")

        registry.retriever.embed_fn = broken_embed
        assert client.get(f"/sessions/{sid}/nodes/{root}/papers").status_code == 502

    def test_thought_route(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        doc = client.get(f"/sessions/{sid}").json()
        edge = doc["flows"][0]["edges"][0]
        thought = client.get(f"/sessions/{sid}/thoughts/{edge['thought_id']}").json()
        assert thought["command_name"] == "search_and_summarize_papers"
        assert thought["action_result"].startswith("Here is a summary")
        assert client.get(f"/sessions/{sid}/thoughts/ghost").status_code == 404


class TestExportAndPersistence:
    def test_export_replay_consistency(self):
        client, _ = make_client(replies=iteration_replies())
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        doc = json.loads(client.get(f"/sessions/{sid}/export").text)
        events = [SessionEvent.from_dict(e) for e in doc["events"]]
        flows = replay_flows(events)
        exported_flow = doc["flows"][0]
        replayed = flows[exported_flow["id"]]
        assert {n["id"] for n in exported_flow["nodes"]} == set(replayed.nodes)
        assert len(exported_flow["edges"]) == len(replayed.edges)

    def test_store_backed_restart(self, tmp_path):
        store = SessionStore(tmp_path)
        client, _ = make_client(replies=iteration_replies(), store=store)
        sid = create_session(client)
        root = add_node(client, sid)
        client.post(f"/sessions/{sid}/nodes/{root}/generate")
        wait_done(client, sid)
        before = client.get(f"/sessions/{sid}/export").text

        client2, _ = make_client(store=store)  # fresh registry, same store
        after = client2.get(f"/sessions/{sid}/export").text
        assert json.loads(after)["flows"] == json.loads(before)["flows"]
        assert json.loads(after)["thoughts"] == json.loads(before)["thoughts"]

    def test_layout_route(self):
        client, _ = make_client()
        sid = create_session(client)
        root = add_node(client, sid)
        resp = client.put(f"/sessions/{sid}/layout", json={root: {"x": 3, "y": 4}})
        assert resp.status_code == 200
        doc = client.get(f"/sessions/{sid}").json()
        assert doc["layout"] == {root: {"x": 3, "y": 4}}
