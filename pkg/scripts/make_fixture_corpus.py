#!/usr/bin/env python3
"""Regenerate the canned scholarly-API bodies under tests/fixtures/scholarly/.

Deterministic (seeded), so reruns are byte-identical.  The fixture set is
deliberately small but exercises the awkward cases: papers without
abstracts, one paper listed by two venues, mutual citations, and
references that point outside the corpus.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

TOPICS = [
    "crowdsourcing quality control",
    "mixed-initiative ideation tools",
    "literature recommendation interfaces",
    "reflective writing support",
    "human-AI co-creation of research ideas",
    "sensemaking over citation networks",
    "question decomposition workflows",
    "novice researcher onboarding",
    "interactive summarization of papers",
    "provenance in creativity support tools",
]

METHODS = [
    "a controlled lab study",
    "a field deployment",
    "a diary study",
    "log analysis at scale",
    "an interview study",
    "a technology probe",
]


def make_paper(rng: random.Random, idx: int, venue: str, with_abstract: bool = True) -> dict:
    topic = TOPICS[idx % len(TOPICS)]
    method = METHODS[idx % len(METHODS)]
    pid = f"P{idx:04d}"
    title = f"Understanding {topic} through {method} (study {idx})"
    abstract = (
        f"We investigate {topic} with {method}. "
        f"Across {rng.randint(12, 96)} participants we observe effect {rng.randint(1, 9)} "
        f"and contribute design implications for {TOPICS[(idx * 3 + 1) % len(TOPICS)]}."
    )
    return {
        "paperId": pid,
        "title": title,
        "abstract": abstract if with_abstract else None,
        "authors": [{"name": f"Author {chr(65 + idx % 26)}. {idx}"}, {"name": f"Coauthor {idx}"}],
        "tldr": {"text": f"One-line summary of study {idx} on {topic}."} if with_abstract else None,
        "url": f"https://scholarly.test/paper/{pid}",
        "year": 2015 + idx % 9,
        "venue": venue,
    }


def main(out_dir: str) -> None:
    rng = random.Random(42)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    chi = [make_paper(rng, i, "CHI", with_abstract=(i != 7)) for i in range(16)]
    cscw = [make_paper(rng, 16 + i, "CSCW", with_abstract=(i not in (3, 8))) for i in range(12)]
    cscw.append(dict(chi[2], venue="CSCW"))  # duplicate id across venues

    for venue, papers in [("CHI", chi), ("CSCW", cscw)]:
        body = {"total": len(papers), "offset": 0, "data": papers}
        (out / f"search_{venue}_0.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    all_ids = sorted({p["paperId"] for p in chi + cscw})
    for pid in all_ids:
        cited = rng.sample([x for x in all_ids if x != pid], k=rng.randint(0, 4))
        cited += [f"X{rng.randint(1000, 9999)}"]  # outside the corpus
        body = {"data": [{"citedPaper": {"paperId": c}} for c in cited]}
        (out / f"references_{pid}.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    # mutual citation pair (preprint-style), overriding the random lists
    for a, b in [("P0003", "P0006"), ("P0006", "P0003")]:
        path = out / f"references_{a}.json"
        body = json.loads(path.read_text())
        if not any(row["citedPaper"]["paperId"] == b for row in body["data"]):
            body["data"].append({"citedPaper": {"paperId": b}})
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    print(f"wrote fixtures for {len(all_ids)} papers to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/scholarly")
