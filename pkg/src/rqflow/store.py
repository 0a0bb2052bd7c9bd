"""Single-directory file store: append-only event log plus snapshots.

Per session: ``<id>.log`` gets one JSON line per event, flushed and
fsynced as it is appended (write-after-every-event durability), and
``<id>.json`` holds the latest full snapshot, written atomically.  Load
prefers the snapshot and replays any log tail past it; with no snapshot
the whole log replays from SessionCreated.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .engine import canonical_json, replay_session
from .model import Session, SessionEvent


class StoreError(Exception):
    pass


class SessionStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _log_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.log"

    def _snapshot_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def append_event(self, session_id: str, event: SessionEvent) -> None:
        line = json.dumps(event.to_dict(), sort_keys=True, ensure_ascii=False)
        with open(self._log_path(session_id), "a", encoding="utf-8") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    def save_snapshot(self, session: Session) -> None:
        path = self._snapshot_path(session.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(session.to_dict()), encoding="utf-8")
        os.replace(tmp, path)

    def read_events(self, session_id: str) -> list[SessionEvent]:
        path = self._log_path(session_id)
        if not path.exists():
            return []
        events = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    events.append(SessionEvent.from_dict(json.loads(line)))
        return events

    def load(self, session_id: str) -> Session:
        """Snapshot plus replay of any events committed after it."""
        events = self.read_events(session_id)
        snapshot_path = self._snapshot_path(session_id)
        if snapshot_path.exists():
            session = Session.from_dict(json.loads(snapshot_path.read_text(encoding="utf-8")))
            last_seq = session.event_log[-1].seq if session.event_log else 0
            tail = [e for e in events if e.seq > last_seq]
            if tail:
                # replay the full log: simpler than patching a snapshot, and
                # logs are short at desk scale; layout has no events, so it
                # carries over from the snapshot
                layout = session.layout
                session = replay_session(events)
                session.layout = layout
            return session
        if not events:
            raise StoreError(f"no session {session_id} in store")
        return replay_session(events)

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.log"))
