import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqflow import model
from rqflow.actions import ACTION_NAMES
from rqflow.ids import IdSource, TickingClock
from rqflow.model import (
    AgentThought,
    EmptyIdea,
    FlowEdge,
    InitialNodeNotRatable,
    LeafOnlyDeletion,
    MalformedAnnotation,
    Mode,
    NodeKind,
    OutOfRange,
    Rating,
    RQFlow,
    Session,
    SchemaVersionUnsupported,
    UnknownNode,
    UnknownParent,
)


def make_flow():
    return RQFlow("flow-1"), IdSource(seed=7), TickingClock(epoch=1700000000.0)


def make_thought(tid="t-1", action="search_and_summarize_papers"):
    return AgentThought(
        id=tid,
        text="think",
        reasoning="because",
        plan="- plan",
        criticism="none",
        speak="hi",
        command_name=action,
        command_args={"query": "q"},
        action_result="Here is a summary of some existing works: 1. x",
    )


class TestAddInitialNode:
    def test_initial_node_has_kind_and_depth(self):
        flow, ids, clock = make_flow()
        nid = model.add_initial_node(flow, "crowdsourcing and AI", ids=ids, clock=clock)
        node = flow.nodes[nid]
        assert node.kind is NodeKind.INITIAL
        assert node.depth == 0
        assert node.text == "crowdsourcing and AI"
        assert not flow.incoming(nid)

    def test_blank_idea_rejected(self):
        flow, ids, clock = make_flow()
        with pytest.raises(EmptyIdea):
            model.add_initial_node(flow, "", ids=ids, clock=clock)
        with pytest.raises(EmptyIdea):
            model.add_initial_node(flow, "   \t", ids=ids, clock=clock)

    def test_insertion_leaves_existing_content_alone(self):
        flow, ids, clock = make_flow()
        root = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        for i in range(4):
            model.attach_generated_node(
                flow, root, f"rq {i}", "Breadth: narrow_down_rqs", "t-1", ids=ids, clock=clock
            )
        edges_before = list(flow.edges)
        model.add_initial_node(flow, "x", ids=ids, clock=clock)
        assert len(flow.nodes) == 6
        assert flow.edges == edges_before


class TestAttachGeneratedNode:
    def test_depth_is_parent_plus_one(self):
        flow, ids, clock = make_flow()
        root = model.add_initial_node(flow, "crowdsourcing and AI", ids=ids, clock=clock)
        child = model.attach_generated_node(
            flow,
            root,
            "How can AI be used to improve the efficiency and quality of crowdsourcing?",
            "Breadth: search_and_summarize_papers",
            "t-1",
            ids=ids,
            clock=clock,
        )
        assert flow.nodes[child].depth == 1
        assert len(flow.incoming(child)) == 1

    def test_depth_recurrence_deeper(self):
        flow, ids, clock = make_flow()
        nid = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        for expected_depth in (1, 2, 3):
            nid = model.attach_generated_node(
                flow, nid, "deeper question", "Depth: hypothesize_use_cases", "t-1", ids=ids, clock=clock
            )
            assert flow.nodes[nid].depth == expected_depth

    def test_unknown_parent(self):
        flow, ids, clock = make_flow()
        with pytest.raises(UnknownParent):
            model.attach_generated_node(
                flow, "nope", "text", "Breadth: narrow_down_rqs", "t-1", ids=ids, clock=clock
            )

    @pytest.mark.parametrize(
        "annotation",
        ["no-colon", "Sideways: narrow_down_rqs", "Breadth: do_the_thing", "Breadth:narrow_down_rqs"],
    )
    def test_malformed_annotation(self, annotation):
        flow, ids, clock = make_flow()
        root = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        with pytest.raises(MalformedAnnotation):
            model.attach_generated_node(flow, root, "text", annotation, "t-1", ids=ids, clock=clock)


class TestFeedbackAndRating:
    def test_feedback_stored_verbatim(self):
        flow, ids, clock = make_flow()
        nid = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        node = model.set_feedback(flow, nid, "in an educational setting")
        assert node.user_feedback == "in an educational setting"

    def test_empty_feedback_clears(self):
        flow, ids, clock = make_flow()
        nid = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        model.set_feedback(flow, nid, "something")
        node = model.set_feedback(flow, nid, "")
        assert node.user_feedback is None

    def test_feedback_unknown_node(self):
        flow, ids, clock = make_flow()
        with pytest.raises(UnknownNode):
            model.set_feedback(flow, "ghost", "x")

    def test_rating_stored_and_overwritten(self):
        flow, ids, clock = make_flow()
        root = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        nid = model.attach_generated_node(
            flow, root, "rq", "Depth: search_and_summarize_papers", "t-1", ids=ids, clock=clock
        )
        node = model.set_rating(flow, nid, Rating(3, 4, 3, 5))
        assert node.rating == Rating(novelty=3, value=4, surprise=3, relevance=5)
        node = model.set_rating(flow, nid, Rating(4, 5, 4, 5))
        assert node.rating == Rating(4, 5, 4, 5)

    def test_rating_out_of_range(self):
        with pytest.raises(OutOfRange):
            Rating(0, 3, 3, 3)
        with pytest.raises(OutOfRange):
            Rating(1, 3, 6, 3)
        with pytest.raises(OutOfRange):
            Rating(1, 3, 3, "3")  # type: ignore[arg-type]

    def test_initial_node_not_ratable(self):
        flow, ids, clock = make_flow()
        nid = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        with pytest.raises(InitialNodeNotRatable):
            model.set_rating(flow, nid, Rating(3, 3, 3, 3))


class TestNodeDepthAndDeletion:
    def test_node_depth_matches_path_length(self):
        flow, ids, clock = make_flow()
        a = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        b = model.attach_generated_node(flow, a, "b", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        c = model.attach_generated_node(flow, b, "c", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        assert model.node_depth(flow, a) == 0
        assert model.node_depth(flow, c) == 2
        path = [n.id for n in model.iter_path_to_root(flow, c)]
        assert path == [a, b, c]

    def test_depth_after_triple_generation_from_depth_one(self):
        flow, ids, clock = make_flow()
        a = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        nid = model.attach_generated_node(flow, a, "d1", "Breadth: narrow_down_rqs", "t", ids=ids, clock=clock)
        for _ in range(3):
            nid = model.attach_generated_node(
                flow, nid, "deep", "Depth: hypothesize_use_cases", "t", ids=ids, clock=clock
            )
        assert model.node_depth(flow, nid) == 4

    def test_leaf_deletion_only(self):
        flow, ids, clock = make_flow()
        a = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        b = model.attach_generated_node(flow, a, "b", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        c = model.attach_generated_node(flow, b, "c", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        with pytest.raises(LeafOnlyDeletion):
            model.delete_leaf_node(flow, b)
        model.delete_leaf_node(flow, c)
        assert c not in flow.nodes
        assert not [e for e in flow.edges if e.target == c]
        assert model.validate_flow(flow) == []


class TestValidateFlow:
    def test_well_formed_chain_ok(self):
        flow, ids, clock = make_flow()
        a = model.add_initial_node(flow, "seed", ids=ids, clock=clock)
        b = model.attach_generated_node(flow, a, "b", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        model.attach_generated_node(flow, b, "c", "Depth: narrow_down_rqs", "t", ids=ids, clock=clock)
        assert model.validate_flow(flow) == []

    def test_injected_cycle_detected(self):
        flow = RQFlow("f")
        flow.nodes["A"] = model.RQNode("A", "a", NodeKind.GENERATED, 1, 0.0)
        flow.nodes["B"] = model.RQNode("B", "b", NodeKind.GENERATED, 1, 0.0)
        flow.edges = [
            FlowEdge("A", "B", "Depth: narrow_down_rqs", "t"),
            FlowEdge("B", "A", "Depth: narrow_down_rqs", "t"),
        ]
        violations = model.validate_flow(flow)
        assert any("cycle" in v and "A" in v and "B" in v for v in violations)

    def test_double_parent_detected(self):
        flow, ids, clock = make_flow()
        a = model.add_initial_node(flow, "a", ids=ids, clock=clock)
        b = model.add_initial_node(flow, "b", ids=ids, clock=clock)
        c = model.attach_generated_node(flow, a, "c", "Breadth: narrow_down_rqs", "t", ids=ids, clock=clock)
        flow.edges.append(FlowEdge(b, c, "Breadth: narrow_down_rqs", "t"))
        violations = model.validate_flow(flow)
        assert any("in-degree 2" in v for v in violations)

    def test_dangling_edge_and_bad_annotation_detected(self):
        flow = RQFlow("f")
        flow.nodes["A"] = model.RQNode("A", "a", NodeKind.INITIAL, 0, 0.0)
        flow.edges = [FlowEdge("A", "MISSING", "Breadth: narrow_down_rqs", "t"),
                      FlowEdge("A", "A", "so wrong", "t")]
        violations = model.validate_flow(flow)
        assert any("target MISSING" in v for v in violations)
        assert any("self-edge" in v for v in violations)
        assert any("malformed annotation" in v for v in violations)


# -- property tests ---------------------------------------------------------

@st.composite
def mutation_programs(draw):
    """A random valid sequence of add-initial / attach / feedback / rating ops."""
    n_ops = draw(st.integers(min_value=1, max_value=25))
    ops = []
    node_count = 0
    for _ in range(n_ops):
        if node_count == 0:
            kind = "initial"
        else:
            kind = draw(st.sampled_from(["initial", "attach", "attach", "feedback", "rating"]))
        if kind == "initial":
            ops.append(("initial", draw(st.text(min_size=1).filter(lambda s: s.strip()))))
            node_count += 1
        elif kind == "attach":
            ops.append(
                (
                    "attach",
                    draw(st.integers(min_value=0, max_value=node_count - 1)),
                    draw(st.sampled_from(["Breadth", "Depth"])),
                    draw(st.sampled_from(ACTION_NAMES)),
                    draw(st.text(min_size=1).filter(lambda s: s.strip())),
                )
            )
            node_count += 1
        elif kind == "feedback":
            ops.append(("feedback", draw(st.integers(min_value=0, max_value=node_count - 1)), draw(st.text())))
        else:
            ops.append(
                ("rating", draw(st.integers(min_value=0, max_value=node_count - 1)),
                 tuple(draw(st.integers(min_value=1, max_value=5)) for _ in range(4)))
            )
    return ops


def run_program(ops):
    flow, ids, clock = make_flow()
    node_ids = []
    for op in ops:
        if op[0] == "initial":
            node_ids.append(model.add_initial_node(flow, op[1], ids=ids, clock=clock))
        elif op[0] == "attach":
            _, parent_idx, prefix, action, text = op
            node_ids.append(
                model.attach_generated_node(
                    flow, node_ids[parent_idx], text, f"{prefix}: {action}", "t", ids=ids, clock=clock
                )
            )
        elif op[0] == "feedback":
            model.set_feedback(flow, node_ids[op[1]], op[2])
        elif op[0] == "rating":
            target = flow.nodes[node_ids[op[1]]]
            if target.kind is NodeKind.GENERATED:
                model.set_rating(flow, node_ids[op[1]], Rating(*op[2]))
    return flow


@given(mutation_programs())
@settings(max_examples=200, deadline=None)
def test_mutation_sequences_always_validate(ops):
    flow = run_program(ops)
    assert model.validate_flow(flow) == []


@given(mutation_programs())
@settings(max_examples=100, deadline=None)
def test_depth_recurrence_holds(ops):
    flow = run_program(ops)
    for e in flow.edges:
        assert flow.nodes[e.target].depth == flow.nodes[e.source].depth + 1
    for node in flow.nodes.values():
        if node.kind is NodeKind.INITIAL:
            assert node.depth == 0


@given(mutation_programs())
@settings(max_examples=100, deadline=None)
def test_flow_serialization_round_trip(ops):
    flow = run_program(ops)
    doc = json.loads(json.dumps(flow.to_dict()))
    back = RQFlow.from_dict(doc)
    assert model.flows_equal(flow, back)


class TestSessionSerialization:
    def test_session_round_trip(self):
        ids, clock = IdSource(seed=3), TickingClock(epoch=100.0)
        session = Session("s-1", "crowdsourcing and AI", Mode.BREADTH_FIRST, clock.now())
        session.flows.append(RQFlow("f-1"))
        root = model.add_initial_node(session.default_flow, "crowdsourcing and AI", ids=ids, clock=clock)
        thought = make_thought()
        session.thoughts[thought.id] = thought
        model.attach_generated_node(
            session.default_flow, root, "rq", "Breadth: search_and_summarize_papers", thought.id,
            ids=ids, clock=clock,
        )
        session.event_log.append(model.SessionEvent(1, clock.now(), "SessionCreated", {"id": "s-1"}))
        session.layout = {root: {"x": 10, "y": 20}}
        doc = json.loads(json.dumps(session.to_dict()))
        back = Session.from_dict(doc)
        assert back.to_dict() == session.to_dict()
        assert model.validate_session(back) == []

    def test_future_schema_rejected(self):
        ids, clock = IdSource(seed=3), TickingClock()
        session = Session("s-1", "t", Mode.DEPTH_FIRST, clock.now())
        doc = session.to_dict()
        doc["schema_version"] = 99
        with pytest.raises(SchemaVersionUnsupported):
            Session.from_dict(doc)

    def test_unresolved_thought_reference_flagged(self):
        ids, clock = IdSource(seed=3), TickingClock()
        session = Session("s-1", "t", Mode.DEPTH_FIRST, clock.now())
        session.flows.append(RQFlow("f-1"))
        root = model.add_initial_node(session.default_flow, "seed", ids=ids, clock=clock)
        model.attach_generated_node(
            session.default_flow, root, "rq", "Depth: narrow_down_rqs", "missing-thought",
            ids=ids, clock=clock,
        )
        assert any("unknown thought" in v for v in model.validate_session(session))
