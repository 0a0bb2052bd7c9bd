"""Builders for canned stub replies shaped like real agent output."""

from __future__ import annotations

import json

from rqflow.llm import ScriptedProvider, embed_texts
from rqflow.retrieval import (
    CitationGraph,
    EmbeddingIndex,
    PaperRecord,
    RetrievalConfig,
    Retriever,
)

NARRATIVES = {
    "search_and_summarize_papers": (
        "Here is a summary of some existing works:\n"
        "    1. Crowd workers benefit from structured task decomposition.\n"
        "    2. Model assistance changes how requesters write instructions.\n"
        "    3. Quality control pipelines mix human and automatic review.\n"
        "    4. Worker feedback loops improve long-run accuracy.\n"
        "    5. Hybrid crowds outperform either humans or models alone."
    ),
    "hypothesize_use_cases": (
        "Here are some potential use cases based on the current RQ:\n"
        "    Use case 1: Students co-write literature reviews with an agent.\n"
        "    Use case 2: Labs triage related work before weekly meetings.\n"
        "    Use case 3: Instructors scaffold research methods courses."
    ),
    "narrow_down_rqs": (
        "To narrow down the RQ, we should consider the following:\n"
        "    - Restrict the user population to novice researchers.\n"
        "    - Fix the task domain to literature-grounded ideation.\n"
        "    - Pick outcome measures that are observable in one session."
    ),
    "compare_rq_with_papers": (
        "Here are some findings from comparing the RQs with existing papers:\n"
        "    - The proposed RQ extends prior work to mixed-initiative settings.\n"
        "    - No existing paper measures both trust and perceived control.\n"
        "    - Closest prior systems do not preserve provenance of ideas."
    ),
}


def agent_reply(
    action: str = "search_and_summarize_papers",
    args: dict | None = None,
    rqs: tuple[str, str, str] = (
        "How can AI support crowdsourcing quality?",
        "What are the ethical risks of AI-run crowd work?",
        "How do workers perceive AI task decomposition?",
    ),
    speak: str = "Here are three follow-up research questions.",
) -> str:
    if args is None:
        args = {"query": "crowdsourcing and AI"} if action == "search_and_summarize_papers" else {"context": "ctx"}
    return json.dumps(
        {
            "thoughts": {
                "text": "I should ground the questions in related work.",
                "reasoning": "Literature grounding improves specificity.",
                "plan": "- search\n- summarize\n- propose RQs",
                "criticism": "I may over-focus on one subtopic.",
                "speak": speak,
            },
            "command": {"name": action, "args": args},
            "RQs": {"rq1": rqs[0], "rq2": rqs[1], "rq3": rqs[2]},
        }
    )


def iteration_replies(action: str = "search_and_summarize_papers", rqs=None, final_rqs=None) -> list[str]:
    """decide reply, action narrative, final RQ reply: one full iteration."""
    kwargs = {} if rqs is None else {"rqs": rqs}
    final_kwargs = {} if final_rqs is None else {"rqs": final_rqs}
    return [
        agent_reply(action=action, **kwargs),
        NARRATIVES[action],
        agent_reply(action=action, **final_kwargs),
    ]


def depth_replies(actions=("search_and_summarize_papers", "hypothesize_use_cases", "compare_rq_with_papers")) -> list[str]:
    replies: list[str] = []
    for i, action in enumerate(actions):
        rqs = (
            f"Depth question {i + 1}a?",
            f"Depth question {i + 1}b?",
            f"Depth question {i + 1}c?",
        )
        replies += iteration_replies(action=action, rqs=rqs, final_rqs=rqs)
    return replies


def tiny_retriever(n: int = 6, k: int = 3) -> Retriever:
    provider = ScriptedProvider(dim=16)
    records = [
        PaperRecord(
            paper_id=f"p{i:02d}",
            title=f"Paper {i} on human-AI ideation",
            abstract=f"Abstract {i}: studies tool-assisted research workflows.",
        )
        for i in range(n)
    ]
    index = EmbeddingIndex()
    for r, v in zip(records, embed_texts([r.embedding_text() for r in records], provider)):
        index.add(r.paper_id, v)
    graph = CitationGraph.build(records, [(f"p{i:02d}", f"p{i + 1:02d}") for i in range(n - 1)])
    return Retriever(
        index=index,
        graph=graph,
        config=RetrievalConfig(k=k, candidate_pool=max(k, n)),
        embed_fn=lambda texts: embed_texts(texts, provider),
    )
