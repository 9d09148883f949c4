"""Wall-clock stage accounting with monotonic clocks."""
from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager


class StageTimer:
    """Accumulates elapsed seconds per named stage."""

    def __init__(self):
        self.totals: dict[str, float] = defaultdict(float)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - t0


class NullTimer:
    @contextmanager
    def stage(self, name: str):
        yield


NULL_TIMER = NullTimer()
