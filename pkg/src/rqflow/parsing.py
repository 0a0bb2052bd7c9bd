"""Strict parsing of agent replies into typed responses.

The documented reply shape is a JSON object with ``thoughts`` (five
string fields), ``command`` (name + string args), and ``RQs`` (exactly
rq1..rq3, non-empty, mutually distinct).  Anything else raises a typed
parse error; nothing here ever lets an exception other than these
escape, which is what the fuzz suite leans on.  Unknown command names do
NOT error: they map to the Unparsed sentinel with the raw name retained
for audit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .actions import ACTION_NAMES, UNPARSED

RQ_KEYS = ("rq1", "rq2", "rq3")


class ResponseParseError(Exception):
    pass


class NotJson(ResponseParseError):
    pass


class MissingField(ResponseParseError):
    def __init__(self, name: str) -> None:
        super().__init__(f"missing field {name!r}")
        self.name = name


class MalformedField(ResponseParseError):
    def __init__(self, name: str, detail: str) -> None:
        super().__init__(f"field {name!r} {detail}")
        self.name = name


class WrongRQCount(ResponseParseError):
    def __init__(self, count: int) -> None:
        super().__init__(f"expected exactly 3 RQs, found {count}")
        self.count = count


class EmptyRQ(ResponseParseError):
    def __init__(self, index: int) -> None:
        super().__init__(f"rq{index} is empty")
        self.index = index


class DuplicateRQ(ResponseParseError):
    def __init__(self, index: int) -> None:
        super().__init__(f"rq{index} duplicates an earlier RQ")
        self.index = index


@dataclass(frozen=True)
class ThoughtBlock:
    text: str
    reasoning: str
    plan: str
    criticism: str
    speak: str


@dataclass(frozen=True)
class AgentAction:
    """A chosen command; ``name`` is a wire name or the Unparsed sentinel."""

    name: str
    args: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class AgentResponse:
    thoughts: ThoughtBlock
    command: AgentAction
    rqs: tuple[str, str, str]


_FENCE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def _strip_fence(text: str) -> str:
    m = _FENCE.match(text.strip())
    return m.group(1) if m else text


def _require(obj: dict, name: str, path: str = ""):
    full = f"{path}.{name}" if path else name
    if not isinstance(obj, dict) or name not in obj:
        raise MissingField(full)
    return obj[name]


def _require_str(obj: dict, name: str, path: str = "") -> str:
    value = _require(obj, name, path)
    full = f"{path}.{name}" if path else name
    if not isinstance(value, str):
        raise MalformedField(full, f"must be a string, got {type(value).__name__}")
    return value


def normalize_rq(text: str) -> str:
    return " ".join(text.split())


def parse_agent_response(raw: str) -> AgentResponse:
    """Parse one raw reply; raises a ResponseParseError subclass on any defect."""
    if not isinstance(raw, str) or not raw.strip():
        raise NotJson("empty reply")
    try:
        doc = json.loads(_strip_fence(raw))
    except (json.JSONDecodeError, RecursionError) as exc:
        raise NotJson(f"reply is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise NotJson(f"expected a JSON object, got {type(doc).__name__}")

    thoughts_obj = _require(doc, "thoughts")
    if not isinstance(thoughts_obj, dict):
        raise MalformedField("thoughts", "must be an object")
    thoughts = ThoughtBlock(
        text=_require_str(thoughts_obj, "text", "thoughts"),
        reasoning=_require_str(thoughts_obj, "reasoning", "thoughts"),
        plan=_require_str(thoughts_obj, "plan", "thoughts"),
        criticism=_require_str(thoughts_obj, "criticism", "thoughts"),
        speak=_require_str(thoughts_obj, "speak", "thoughts"),
    )

    command_obj = _require(doc, "command")
    if not isinstance(command_obj, dict):
        raise MalformedField("command", "must be an object")
    raw_name = _require_str(command_obj, "name", "command")
    raw_args = command_obj.get("args", {})
    if not isinstance(raw_args, dict):
        raise MalformedField("command.args", "must be an object")
    args: dict[str, str] = {}
    for key, value in raw_args.items():
        if isinstance(value, (dict, list)):
            raise MalformedField(f"command.args.{key}", "must be a scalar")
        args[str(key)] = value if isinstance(value, str) else json.dumps(value)
    if raw_name in ACTION_NAMES:
        command = AgentAction(raw_name, args)
    else:
        command = AgentAction(UNPARSED, {"raw_name": raw_name, **args})

    rqs_obj = _require(doc, "RQs")
    if not isinstance(rqs_obj, dict):
        raise MalformedField("RQs", "must be an object")
    for key in RQ_KEYS:
        if key not in rqs_obj:
            raise MissingField(f"RQs.{key}")
    rq_keys = [k for k in rqs_obj if re.fullmatch(r"rq\d+", str(k))]
    if len(rq_keys) != len(RQ_KEYS):
        raise WrongRQCount(len(rq_keys))
    rqs: list[str] = []
    for i, key in enumerate(RQ_KEYS, start=1):
        value = rqs_obj[key]
        if not isinstance(value, str):
            raise MalformedField(f"RQs.{key}", f"must be a string, got {type(value).__name__}")
        if not value.strip():
            raise EmptyRQ(i)
        rqs.append(value)
    seen: set[str] = set()
    for i, rq in enumerate(rqs, start=1):
        norm = normalize_rq(rq)
        if norm in seen:
            raise DuplicateRQ(i)
        seen.add(norm)

    return AgentResponse(thoughts=thoughts, command=command, rqs=(rqs[0], rqs[1], rqs[2]))
