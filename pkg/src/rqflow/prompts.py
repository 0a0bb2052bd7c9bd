"""Prompt assets and prompt assembly.

The six prompt texts ship as files under ``rqflow/prompts/`` and are
sent verbatim; nothing in here rewrites them.  ``asset_checksums`` lets
tests pin the exact bytes.  Assembly composes three message shapes:

* decide turn: system prompt, serialized generation context, trigger
* action subtask: action-specific prompt, action input
* repair turn: response-format block, parse error + offending reply
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files

from .llm import ChatMessage, system, user

SYSTEM_PROMPT = "system.txt"
TRIGGER_PROMPT = "trigger.txt"

ACTION_PROMPT_FILES = {
    "search_and_summarize_papers": "action_search.txt",
    "hypothesize_use_cases": "action_hypothesize.txt",
    "narrow_down_rqs": "action_narrow.txt",
    "compare_rq_with_papers": "action_compare.txt",
}

ALL_PROMPT_FILES = (SYSTEM_PROMPT, TRIGGER_PROMPT, *ACTION_PROMPT_FILES.values())

# Oldest narratives are dropped beyond this to respect model context limits.
MAX_PRIOR_RESULTS = 4


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return (files("rqflow") / "prompts" / name).read_text(encoding="utf-8")


def asset_checksums() -> dict[str, str]:
    return {
        name: hashlib.sha256(load_prompt(name).encode("utf-8")).hexdigest()
        for name in ALL_PROMPT_FILES
    }


@dataclass(frozen=True)
class GenerationContext:
    """Everything the decide turn gets to see for one iteration."""

    topic: str
    path_rqs: tuple[str, ...]
    feedback: str | None = None
    prior_action_results: tuple[str, ...] = ()
    history_rqs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.path_rqs:
            raise ValueError("path_rqs must hold at least the initial idea")

    @property
    def source_rq(self) -> str:
        return self.path_rqs[-1]

    def with_result(self, narrative: str) -> "GenerationContext":
        results = (*self.prior_action_results, narrative)[-MAX_PRIOR_RESULTS:]
        return GenerationContext(
            topic=self.topic,
            path_rqs=self.path_rqs,
            feedback=self.feedback,
            prior_action_results=results,
            history_rqs=self.history_rqs,
        )


def serialize_context(context: GenerationContext) -> str:
    parts = [f"Research topic: {context.topic}", ""]
    parts.append("RQ path from the initial idea to the current RQ:")
    for i, rq in enumerate(context.path_rqs, start=1):
        parts.append(f"{i}. {rq}")
    if context.feedback:
        parts += ["", f"User feedback on the current RQ: {context.feedback}"]
    if context.prior_action_results:
        parts += ["", "Results of previous actions:"]
        for narrative in context.prior_action_results[-MAX_PRIOR_RESULTS:]:
            parts += [narrative, ""]
    if context.history_rqs:
        parts += ["", "RQs already in history:"]
        parts += [f"- {rq}" for rq in context.history_rqs]
    return "\n".join(parts).strip()


def assemble_decide_prompt(context: GenerationContext) -> list[ChatMessage]:
    """System prompt, context block, then the trigger appended last."""
    return [
        system(load_prompt(SYSTEM_PROMPT)),
        user(serialize_context(context)),
        user(load_prompt(TRIGGER_PROMPT)),
    ]


def assemble_action_prompt(action_name: str, input_text: str) -> list[ChatMessage]:
    if action_name not in ACTION_PROMPT_FILES:
        raise ValueError(f"no prompt asset for action {action_name!r}")
    if not input_text.strip():
        raise ValueError("action input must be non-empty")
    return [system(load_prompt(ACTION_PROMPT_FILES[action_name])), user(input_text)]


def response_format_block() -> str:
    """The response-format portion of the system prompt, for repair turns."""
    text = load_prompt(SYSTEM_PROMPT)
    marker = "You should only respond in JSON format"
    idx = text.find(marker)
    return text[idx:] if idx >= 0 else text


def assemble_repair_prompt(parse_error: str, raw_reply: str) -> list[ChatMessage]:
    return [
        system(response_format_block()),
        user(
            "Your previous reply could not be parsed.\n"
            f"Parse error: {parse_error}\n\n"
            "Previous reply:\n"
            f"{raw_reply}\n\n"
            "Respond again, following the response format exactly."
        ),
    ]
