"""Think-Act-Observe generation over a flow.

One iteration is: a decide turn choosing an action, execution of that
action (retrieval plus summarization, or a single focused chat), then a
final turn that folds the action result back into context and yields
three research questions.  Breadth mode runs one iteration and attaches
all three questions as siblings sharing a single thought; depth mode
runs three iterations, committing the first question of each as soon as
it exists so readers see the chain grow, and keeping the other two on
the thought as discarded alternates.

Each triggered generation owns a hard chat-call budget so a
misbehaving provider cannot loop the engine.
"""

from __future__ import annotations

import threading
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import model
from .actions import UNPARSED
from .ids import IdSource
from .llm import LlmError, Provider, chat_complete
from .model import AgentThought, Mode, RQFlow, Session
from .parsing import (
    AgentAction,
    AgentResponse,
    ResponseParseError,
    parse_agent_response,
)
from .prompts import (
    GenerationContext,
    assemble_action_prompt,
    assemble_decide_prompt,
    assemble_repair_prompt,
    serialize_context,
)
from .retrieval import PaperRecord, Retriever

BREADTH_CHAT_CAP = 5
DEPTH_CHAT_CAP = 13

EmitFn = Callable[[str, dict], None]


class AgentError(Exception):
    pass


class UnrecoverableResponse(AgentError):
    """Both the original reply and its single repair failed to parse."""

    def __init__(self, first_raw: str, second_raw: str) -> None:
        super().__init__("response unparseable after one repair round")
        self.first_raw = first_raw
        self.second_raw = second_raw


class UnknownAction(AgentError):
    """Decide turn named no registered action; kept parsed for audit."""

    def __init__(self, raw_name: str, response: AgentResponse) -> None:
        super().__init__(f"response chose unknown action {raw_name!r}")
        self.raw_name = raw_name
        self.response = response


class ActionExecutionError(AgentError):
    def __init__(self, action_name: str, cause: Exception) -> None:
        super().__init__(f"action {action_name} failed: {cause}")
        self.action_name = action_name
        self.cause = cause


class BudgetExceeded(AgentError):
    pass


class ChatBudget:
    """Counts chat calls for one triggered generation."""

    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    def consume(self) -> None:
        with self._lock:
            if self.used >= self.limit:
                raise BudgetExceeded(f"chat budget of {self.limit} calls exhausted")
            self.used += 1


@dataclass
class GenerationResult:
    new_nodes: list[tuple[str, str]] = field(default_factory=list)
    thoughts: list[AgentThought] = field(default_factory=list)
    mode: Mode = Mode.BREADTH_FIRST
    error: str | None = None


@dataclass
class _Iteration:
    action: AgentAction
    narrative: str
    rqs: tuple[str, str, str]
    decide: AgentResponse


def _chat(llm: Provider, messages, budget: ChatBudget | None) -> str:
    if budget is not None:
        budget.consume()
    return chat_complete(messages, llm)


def repair_and_retry(raw: str, llm: Provider, *, budget: ChatBudget | None = None) -> AgentResponse:
    """One repair round for an unparseable reply; must not be called otherwise."""
    try:
        parse_agent_response(raw)
    except ResponseParseError as err:
        second = _chat(llm, assemble_repair_prompt(str(err), raw), budget)
        try:
            return parse_agent_response(second)
        except ResponseParseError as err2:
            raise UnrecoverableResponse(raw, second) from err2
    raise ValueError("repair_and_retry called with a parseable response")


def _parse_or_repair(raw: str, llm: Provider, budget: ChatBudget | None) -> AgentResponse:
    try:
        return parse_agent_response(raw)
    except ResponseParseError:
        return repair_and_retry(raw, llm, budget=budget)


def render_literature(records: Sequence[PaperRecord]) -> str:
    blocks = [f"Title: {r.title}\nAbstract: {r.abstract}" for r in records]
    return "\n\n".join(blocks)


def resolve_action_args(action: AgentAction, context: GenerationContext, decide: AgentResponse) -> AgentAction:
    """Fill blank or missing args so no action runs on empty input.

    The search query falls back to the source RQ text; context-style args
    fall back to the serialized context; the compare action falls back to
    the latest action result and the decide turn's own RQs.
    """
    args = dict(action.args)
    if action.name == "search_and_summarize_papers":
        if not args.get("query", "").strip():
            args["query"] = context.source_rq
    elif action.name in ("hypothesize_use_cases", "narrow_down_rqs"):
        if not args.get("context", "").strip():
            args["context"] = serialize_context(context)
    elif action.name == "compare_rq_with_papers":
        if not args.get("past_research_summary", "").strip():
            args["past_research_summary"] = (
                context.prior_action_results[-1] if context.prior_action_results else context.source_rq
            )
        if not args.get("rqs", "").strip():
            args["rqs"] = "\n".join(decide.rqs)
    return AgentAction(action.name, args)


def execute_action(
    action: AgentAction,
    retriever: Retriever | None,
    llm: Provider,
    *,
    budget: ChatBudget | None = None,
) -> str:
    """Run one action and return its narrative verbatim."""
    try:
        if action.name == "search_and_summarize_papers":
            if retriever is None:
                raise ValueError("search action requires a retriever")
            records = retriever.retrieve(action.args["query"])
            messages = assemble_action_prompt(action.name, render_literature(records))
        elif action.name == "compare_rq_with_papers":
            body = (
                "Past research summary:\n"
                f"{action.args['past_research_summary']}\n\n"
                "RQs:\n"
                f"{action.args['rqs']}"
            )
            messages = assemble_action_prompt(action.name, body)
        else:
            messages = assemble_action_prompt(action.name, action.args["context"])
        return _chat(llm, messages, budget)
    except (BudgetExceeded, ActionExecutionError):
        raise
    except Exception as exc:
        raise ActionExecutionError(action.name, exc) from exc


def build_context(session: Session, flow: RQFlow, node_id: str) -> GenerationContext:
    path = tuple(n.text for n in model.iter_path_to_root(flow, node_id))
    node = flow.node(node_id)
    return GenerationContext(
        topic=session.topic,
        path_rqs=path,
        feedback=node.user_feedback,
        history_rqs=tuple(n.text for n in flow.nodes.values()),
    )


def _run_iteration(
    context: GenerationContext,
    llm: Provider,
    retriever: Retriever | None,
    budget: ChatBudget,
    emit: EmitFn | None,
    iteration: int,
) -> _Iteration:
    decide_raw = _chat(llm, assemble_decide_prompt(context), budget)
    decide = _parse_or_repair(decide_raw, llm, budget)
    if decide.command.name == UNPARSED:
        raise UnknownAction(decide.command.args.get("raw_name", "?"), decide)
    action = resolve_action_args(decide.command, context, decide)
    if emit:
        emit("ActionChosen", {"iteration": iteration, "action": action.name, "args": action.args})

    narrative = execute_action(action, retriever, llm, budget=budget)
    if emit:
        emit("ActionResult", {"iteration": iteration, "action": action.name, "narrative": narrative})

    observed = context.with_result(narrative)
    final_raw = _chat(llm, assemble_decide_prompt(observed), budget)
    final = _parse_or_repair(final_raw, llm, budget)
    return _Iteration(action=action, narrative=narrative, rqs=final.rqs, decide=decide)


def _make_thought(
    iteration: _Iteration, ids: IdSource, discarded: tuple[str, ...] = ()
) -> AgentThought:
    decide = iteration.decide
    return AgentThought(
        id=ids.new_id(),
        text=decide.thoughts.text,
        reasoning=decide.thoughts.reasoning,
        plan=decide.thoughts.plan,
        criticism=decide.thoughts.criticism,
        speak=decide.thoughts.speak,
        command_name=iteration.action.name,
        command_args=dict(iteration.action.args),
        action_result=iteration.narrative,
        discarded_rqs=discarded,
    )


def _commit_payload(flow: RQFlow, node_id: str, edge: model.FlowEdge, thought: AgentThought, iteration: int) -> dict:
    return {
        "iteration": iteration,
        "flow_id": flow.id,
        "node": flow.nodes[node_id].to_dict(),
        "edge": edge.to_dict(),
        "thought": thought.to_dict(),
    }


def generate_breadth(
    session: Session,
    flow: RQFlow,
    source_node_id: str,
    llm: Provider,
    retriever: Retriever | None,
    *,
    ids: IdSource,
    clock,
    lock=None,
    emit: EmitFn | None = None,
) -> GenerationResult:
    """One iteration, three sibling questions, one shared thought.

    Atomic: all LLM work happens before any flow mutation, so a failure
    anywhere leaves the flow untouched.
    """
    if session.mode is not Mode.BREADTH_FIRST:
        raise ValueError("generate_breadth requires a breadth-first session")
    flow.node(source_node_id)  # raises UnknownNode
    lock = lock if lock is not None else nullcontext()
    context = build_context(session, flow, source_node_id)
    budget = ChatBudget(BREADTH_CHAT_CAP)

    iteration = _run_iteration(context, llm, retriever, budget, emit, iteration=1)
    thought = _make_thought(iteration, ids)
    annotation = f"{Mode.BREADTH_FIRST.annotation_prefix}: {iteration.action.name}"

    new_nodes: list[tuple[str, str]] = []
    with lock:
        session.thoughts[thought.id] = thought
        for rq_text in iteration.rqs:
            node_id = model.attach_generated_node(
                flow, source_node_id, rq_text, annotation, thought.id, ids=ids, clock=clock
            )
            new_nodes.append((node_id, rq_text))
            if emit:
                edge = flow.incoming(node_id)[0]
                emit("RQCommitted", _commit_payload(flow, node_id, edge, thought, 1))
    return GenerationResult(new_nodes=new_nodes, thoughts=[thought], mode=Mode.BREADTH_FIRST)


def generate_depth(
    session: Session,
    flow: RQFlow,
    source_node_id: str,
    llm: Provider,
    retriever: Retriever | None,
    *,
    ids: IdSource,
    clock,
    lock=None,
    emit: EmitFn | None = None,
) -> GenerationResult:
    """Three chained iterations with progressive commit.

    Each iteration's first question is attached as soon as it exists;
    a failure in a later iteration keeps the committed prefix and is
    reported on the result instead of raised.
    """
    if session.mode is not Mode.DEPTH_FIRST:
        raise ValueError("generate_depth requires a depth-first session")
    flow.node(source_node_id)
    lock = lock if lock is not None else nullcontext()
    budget = ChatBudget(DEPTH_CHAT_CAP)

    result = GenerationResult(mode=Mode.DEPTH_FIRST)
    parent_id = source_node_id
    prior_results: tuple[str, ...] = ()
    for i in (1, 2, 3):
        context = build_context(session, flow, parent_id)
        context = GenerationContext(
            topic=context.topic,
            path_rqs=context.path_rqs,
            feedback=context.feedback,
            prior_action_results=prior_results,
            history_rqs=context.history_rqs,
        )
        try:
            iteration = _run_iteration(context, llm, retriever, budget, emit, iteration=i)
        except (AgentError, LlmError) as exc:
            result.error = str(exc)
            return result
        thought = _make_thought(iteration, ids, discarded=iteration.rqs[1:])
        annotation = f"{Mode.DEPTH_FIRST.annotation_prefix}: {iteration.action.name}"
        with lock:
            session.thoughts[thought.id] = thought
            node_id = model.attach_generated_node(
                flow, parent_id, iteration.rqs[0], annotation, thought.id, ids=ids, clock=clock
            )
            result.new_nodes.append((node_id, iteration.rqs[0]))
            result.thoughts.append(thought)
            if emit:
                edge = flow.incoming(node_id)[0]
                emit("RQCommitted", _commit_payload(flow, node_id, edge, thought, i))
        parent_id = node_id
        prior_results = (*prior_results, iteration.narrative)
    return result
