"""Headless operation: corpus building, retrieval probes, scripted runs.

Everything here embeds the engine in-process, so the acceptance suite
needs no network and no server.  ``--seed`` and ``--epoch`` pin id
generation and the clock, which makes scripted stub runs byte-identical
across invocations and machines.

Exit codes: 0 ok, 1 run failure (a generation failed), 2 usage/IO.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from .actions import ACTION_NAMES
from .corpus_store import CorpusSpec, load_corpus
from .engine import SessionEngine
from .ids import IdSource, TickingClock
from .ingestion import FixtureApi, HttpScholarlyApi, IngestionError, build_corpus
from .llm import HttpProvider, ProviderConfig, ScriptedProvider, embed_texts, hashed_unit_vector
from .model import Mode
from .prompts import ACTION_PROMPT_FILES, SYSTEM_PROMPT, load_prompt
from .retrieval import RetrievalConfig, Retriever
from .store import SessionStore


class DemoProvider:
    """Deterministic offline provider for demos and UI development.

    Synthesizes a well-formed decide reply for decide-shaped prompts and
    a format-faithful narrative for action prompts, varying content by a
    hash of the conversation so distinct nodes get distinct questions.
    """

    def __init__(self, dim: int = 32) -> None:
        self.dim = dim
        self._action_prompts = {
            name: load_prompt(fname) for name, fname in ACTION_PROMPT_FILES.items()
        }
        self._system = load_prompt(SYSTEM_PROMPT)

    def chat(self, messages) -> str:
        head = messages[0].content
        digest = hashlib.sha256("\x1e".join(m.content for m in messages).encode()).hexdigest()
        tag = digest[:6]
        for name, prompt in self._action_prompts.items():
            if head == prompt:
                return self._narrative(name, tag)
        action = ACTION_NAMES[int(digest[:8], 16) % len(ACTION_NAMES)]
        args = {"query": f"related work {tag}"} if action == "search_and_summarize_papers" else {"context": f"context {tag}"}
        return json.dumps(
            {
                "thoughts": {
                    "text": f"Considering direction {tag}.",
                    "reasoning": "Grounding the next questions in the current path.",
                    "plan": "- inspect context\n- act\n- propose RQs",
                    "criticism": "May overlook adjacent framings.",
                    "speak": f"I explored direction {tag} and drafted three questions.",
                },
                "command": {"name": action, "args": args},
                "RQs": {
                    "rq1": f"How does factor {tag}-1 shape the phenomenon under study?",
                    "rq2": f"What mechanisms explain effect {tag}-2 in this setting?",
                    "rq3": f"Which interventions moderate outcome {tag}-3?",
                },
            }
        )

    def _narrative(self, action: str, tag: str) -> str:
        if action == "search_and_summarize_papers":
            lines = [f"    {i}. Finding {tag}-{i} from the retrieved literature." for i in range(1, 6)]
            return "Here is a summary of some existing works:\n" + "\n".join(lines)
        if action == "hypothesize_use_cases":
            lines = [f"    Use case {i}: Scenario {tag}-{i}." for i in range(1, 4)]
            return "Here are some potential use cases based on the current RQ:\n" + "\n".join(lines)
        if action == "narrow_down_rqs":
            lines = [f"    - Constrain aspect {tag}-{i}." for i in range(1, 4)]
            return "To narrow down the RQ, we should consider the following:\n" + "\n".join(lines)
        lines = [f"    - Contrast {tag}-{i} with prior work." for i in range(1, 4)]
        return "Here are some findings from comparing the RQs with existing papers:\n" + "\n".join(lines)

    def embed(self, texts):
        return [hashed_unit_vector(t, self.dim) for t in texts]


def _fail(message: str, code: int = 2) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_retriever(corpus_dir: str, k: int | None = None, lambda_param: float | None = None,
                    provider=None) -> Retriever:
    records, graph, index, manifest = load_corpus(corpus_dir)
    config = RetrievalConfig(
        k=k if k is not None else min(RetrievalConfig.k, manifest.paper_count),
        candidate_pool=max(min(50, manifest.paper_count), k or 1),
        lambda_param=lambda_param if lambda_param is not None else RetrievalConfig.lambda_param,
    )
    if provider is None:
        dim = manifest.embedding_dim
        embed_fn = lambda texts: [hashed_unit_vector(t, dim) for t in texts]
    else:
        embed_fn = lambda texts: embed_texts(texts, provider)
    return Retriever(index=index, graph=graph, config=config, embed_fn=embed_fn)


def _stub_from_script(path: Path) -> ScriptedProvider:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return ScriptedProvider(
        replies=list(doc.get("replies", [])),
        keyed=dict(doc.get("keyed", {})),
        vectors={k: tuple(v) for k, v in doc.get("embeddings", {}).items()},
        dim=doc.get("dim", 32),
        chat_delay=doc.get("chat_delay", 0.0),
    )


@click.group()
def main() -> None:
    """Research-question co-creation engine."""


@main.command("corpus-build")
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--live", "use_live", is_flag=True, help="Fetch from the live scholarly API.")
@click.option("--fixture-dir", type=click.Path(file_okay=False), default=None,
              help="Directory of recorded API bodies (required unless --live).")
@click.option("--dim", default=32, show_default=True, help="Stub embedding dimensionality.")
@click.option("--epoch", type=float, default=0.0, help="Manifest created_at timestamp.")
def cmd_corpus_build(spec_file: str, out_dir: str, use_live: bool, fixture_dir: str | None,
                     dim: int, epoch: float) -> None:
    """Build corpus artifacts (records, edges, embeddings, manifest)."""
    try:
        raw = json.loads(Path(spec_file).read_text(encoding="utf-8"))
        spec = CorpusSpec.from_dict(raw)
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read corpus spec: {exc}")
    if use_live:
        api = HttpScholarlyApi(rate_limit=spec.rate_limit)
        provider = HttpProvider(ProviderConfig())
        embed_fn = lambda texts: embed_texts(texts, provider)
    else:
        if not fixture_dir:
            _fail("no --fixture-dir given and --live not set")
        if not Path(fixture_dir).is_dir():
            _fail(f"fixture directory {fixture_dir} not found (pass --live to fetch)")
        api = FixtureApi(fixture_dir)
        embed_fn = lambda texts: [hashed_unit_vector(t, dim) for t in texts]
    try:
        manifest = build_corpus(spec, api, embed_fn, out_dir, created_at=epoch)
    except (IngestionError, OSError) as exc:
        _fail(str(exc))
    edge_count = sum(1 for _ in open(Path(out_dir) / "edges.csv")) - 1
    click.echo(f"papers={manifest.paper_count} edges={edge_count} dim={manifest.embedding_dim}")


@main.command("retrieve")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("query")
@click.option("--k", default=10, show_default=True)
@click.option("--lambda", "lambda_param", default=0.7, show_default=True)
def cmd_retrieve(corpus_dir: str, query: str, k: int, lambda_param: float) -> None:
    """Rank corpus papers for a query and print them."""
    try:
        retriever = _load_retriever(corpus_dir, k=k, lambda_param=lambda_param)
        records = retriever.retrieve(query)
        query_vec = retriever.embed_fn([query])[0]
    except Exception as exc:
        _fail(str(exc))
    from .retrieval import cosine_similarity

    for rank, record in enumerate(records, start=1):
        sim = cosine_similarity(query_vec, retriever.index.vectors[record.paper_id])
        click.echo(f"{rank:2d}  {record.paper_id}  {sim:+.6f}  {record.title}")


@main.command("run")
@click.argument("script_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Id-generation seed.")
@click.option("--epoch", type=float, default=0.0, show_default=True, help="Clock start.")
def cmd_run(script_file: str, corpus_dir: str | None, out_file: str, seed: int, epoch: float) -> None:
    """Execute a scripted co-creation run and write the session export."""
    try:
        script = json.loads(Path(script_file).read_text(encoding="utf-8"))
        topic = script["topic"]
        mode = Mode(script["mode"])
        steps = script["steps"]
        if not steps:
            raise ValueError("steps must be non-empty")
        provider_spec = script.get("provider", {"type": "demo"})
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"bad run script: {exc}")

    ptype = provider_spec.get("type", "demo")
    if ptype == "stub":
        if "script" not in provider_spec:
            _fail("stub provider requires a 'script' file path")
        stub_path = Path(script_file).parent / provider_spec["script"]
        if not stub_path.exists():
            _fail(f"stub script {stub_path} not found")
        provider = _stub_from_script(stub_path)
    elif ptype == "demo":
        provider = DemoProvider()
    elif ptype == "live":
        provider = HttpProvider(ProviderConfig(**provider_spec.get("config", {})))
    else:
        _fail(f"unknown provider type {ptype!r}")

    retriever = None
    if corpus_dir:
        try:
            retriever = _load_retriever(corpus_dir, provider=provider if ptype != "stub" else None)
            if ptype == "stub":
                retriever.embed_fn = lambda texts: embed_texts(texts, provider)
        except Exception as exc:
            _fail(f"cannot load corpus: {exc}")

    engine = SessionEngine.create(
        topic, mode, provider, retriever,
        ids=IdSource(seed=seed), clock=TickingClock(epoch=epoch),
    )
    root = engine.add_initial_node(topic)

    def resolve(selector) -> str:
        flow = engine.session.default_flow
        ordered = list(flow.nodes)
        if selector in (None, "initial"):
            return root
        if selector == "last":
            return ordered[-1]
        if isinstance(selector, int):
            if not 0 <= selector < len(ordered):
                raise ValueError(f"node index {selector} out of range")
            return ordered[selector]
        if selector in flow.nodes:
            return selector
        raise ValueError(f"unknown node selector {selector!r}")

    failed = False
    for step in steps:
        try:
            node_id = resolve(step.get("select"))
        except ValueError as exc:
            _fail(str(exc))
        feedback = step.get("feedback")
        if feedback is not None:
            engine.set_feedback(node_id, feedback)
        if step.get("generate"):
            result = engine.run_generation(node_id)
            if result.error is not None:
                failed = True

    try:
        Path(out_file).write_text(engine.export_json(), encoding="utf-8")
    except OSError as exc:
        _fail(str(exc))
    click.echo(f"session {engine.session.id}: nodes={len(engine.session.default_flow.nodes)} "
               f"events={len(engine.session.event_log)}")
    if failed:
        sys.exit(1)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _truncate(text: str, limit: int = 48) -> str:
    return text if len(text) <= limit else text[: limit - 1] + "…"


@main.command("export-dot")
@click.argument("session_file", type=click.Path(exists=True, dir_okay=False))
def cmd_export_dot(session_file: str) -> None:
    """Render a session export as a graph-description (DOT) document."""
    try:
        doc = json.loads(Path(session_file).read_text(encoding="utf-8"))
        flows = doc["flows"]
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot parse session file: {exc}")
    lines = ["digraph rqflow {", "  rankdir=LR;"]
    for flow in flows:
        for node in flow["nodes"]:
            lines.append(f'  "{node["id"]}" [label="{_dot_escape(_truncate(node["text"]))}\\nd={node["depth"]}"];')
        for edge in flow["edges"]:
            lines.append(
                f'  "{edge["source"]}" -> "{edge["target"]}" [label="{_dot_escape(edge["annotation"])}"];'
            )
    lines.append("}")
    click.echo("\n".join(lines))


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_dir", type=click.Path(file_okay=False), default=None)
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None)
@click.option("--bind", default=None, help="host:port (default 127.0.0.1:8040)")
@click.option("--provider", "provider_type", type=click.Choice(["demo", "live"]), default="demo",
              show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Serve a built frontend from this directory at /ui.")
def cmd_serve(config_path, corpus_dir, store_dir, bind, provider_type, ui_dir) -> None:
    """Run the HTTP + SSE service."""
    import uvicorn

    from .server import SessionRegistry, configure_stderr_logging, create_app, load_server_config

    configure_stderr_logging()
    config = load_server_config(config_path)
    corpus_dir = corpus_dir or config.get("corpus_dir")
    store_dir = store_dir or config.get("store_dir")
    bind = bind or config.get("bind", "127.0.0.1:8040")

    if provider_type == "live":
        provider = HttpProvider(ProviderConfig(**config.get("provider", {})))
    else:
        provider = DemoProvider()
    retriever = None
    if corpus_dir:
        try:
            retriever = _load_retriever(
                corpus_dir,
                provider=provider if provider_type == "live" else None,
                **{k: v for k, v in config.get("retrieval", {}).items() if k in ("k", "lambda_param")},
            )
        except Exception as exc:
            _fail(f"cannot load corpus: {exc}")
    store = SessionStore(store_dir) if store_dir else None
    registry = SessionRegistry(provider, retriever, store=store)
    host, _, port = bind.partition(":")
    app = create_app(registry, ui_dir=ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8040), log_level="info")


if __name__ == "__main__":
    main()
