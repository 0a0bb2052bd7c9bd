"""Injectable id generation and clocks.

Node/thought/session ids are opaque UUID-style strings minted here, and
every timestamp in the engine comes from a ``Clock``.  Both are injected
so scripted runs can pin them, which is what makes session exports
byte-identical across runs.
"""

from __future__ import annotations

import random
import time
import uuid


class IdSource:
    """Mints opaque UUID-format ids, optionally from a seeded RNG."""

    def __init__(self, seed: int | None = None) -> None:
        self._rng = random.Random(seed) if seed is not None else None

    def new_id(self) -> str:
        if self._rng is None:
            return str(uuid.uuid4())
        return str(uuid.UUID(int=self._rng.getrandbits(128), version=4))


class SystemClock:
    """Wall-clock time in unix seconds."""

    def now(self) -> float:
        return time.time()


class TickingClock:
    """Deterministic clock: starts at ``epoch`` and advances ``step`` per call.

    Strictly monotonic so event timestamps stay distinct under a pinned run.
    """

    def __init__(self, epoch: float = 0.0, step: float = 1.0) -> None:
        self._next = float(epoch)
        self._step = float(step)

    def now(self) -> float:
        t = self._next
        self._next += self._step
        return t
