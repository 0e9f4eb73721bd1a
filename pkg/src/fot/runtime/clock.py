"""Run clocks. The virtual clock advances only when the controller processes a
completion event, which makes timing assertions exact and CI-fast."""

from __future__ import annotations

import time


class VirtualClock:
    def __init__(self):
        self._now_ms = 0.0

    def now_ms(self) -> float:
        return self._now_ms

    def advance_to(self, t_ms: float) -> None:
        if t_ms < self._now_ms:
            raise ValueError("virtual time cannot move backwards")
        self._now_ms = t_ms

    @property
    def virtual(self) -> bool:
        return True


class RealClock:
    def __init__(self):
        self._start = time.perf_counter()

    def now_ms(self) -> float:
        return (time.perf_counter() - self._start) * 1000.0

    def advance_to(self, t_ms: float) -> None:
        pass

    @property
    def virtual(self) -> bool:
        return False
