"""Names of the four executable agent actions.

These are wire-level identifiers: they appear in LLM responses, in edge
annotations, and in persisted thoughts, so they live in one place that
both the domain model and the agent can import.
"""

from __future__ import annotations

SEARCH_AND_SUMMARIZE = "search_and_summarize_papers"
HYPOTHESIZE_USE_CASES = "hypothesize_use_cases"
NARROW_DOWN_RQS = "narrow_down_rqs"
COMPARE_RQ_WITH_PAPERS = "compare_rq_with_papers"

ACTION_NAMES: tuple[str, ...] = (
    SEARCH_AND_SUMMARIZE,
    HYPOTHESIZE_USE_CASES,
    NARROW_DOWN_RQS,
    COMPARE_RQ_WITH_PAPERS,
)

# Sentinel command name kept on thoughts whose response named no known
# action; the raw name is preserved in command_args for audit.
UNPARSED = "Unparsed"
