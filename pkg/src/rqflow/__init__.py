"""rqflow: a research-question co-creation engine.

A Think-Act-Observe agent generates research questions over a literature
corpus; users steer it through feedback and ratings on DAGs of question
nodes whose edges carry the agent's full rationale.
"""

from .model import (  # noqa: F401
    AgentThought,
    FlowEdge,
    Mode,
    NodeKind,
    Rating,
    RQFlow,
    RQNode,
    Session,
    SessionEvent,
)

__version__ = "0.1.0"
