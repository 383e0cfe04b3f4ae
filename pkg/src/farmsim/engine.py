"""Deterministic discrete-event engine: virtual clock, event queue, seeded streams."""

import hashlib
import heapq
from dataclasses import dataclass

import numpy as np


class EventEngine:
    """Single-threaded event loop over virtual time in seconds.

    Events fire in (fire_time, sequence_no) order; sequence numbers are
    assigned at schedule time, so two events scheduled for the same instant
    fire in scheduling order. Handlers are zero-argument callables.
    """

    def __init__(self):
        self.now = 0.0
        self._queue = []  # (fire_time, seq, handler)
        self._seq = 0
        self.events_fired = 0

    def schedule(self, fire_time, handler):
        """Schedule handler at fire_time; returns an opaque handle (the seq no)."""
        if fire_time < self.now:
            raise ValueError(
                f"cannot schedule at t={fire_time} before current clock t={self.now}"
            )
        handle = self._seq
        heapq.heappush(self._queue, (fire_time, handle, handler))
        self._seq += 1
        return handle

    def schedule_after(self, delay, handler):
        return self.schedule(self.now + delay, handler)

    def run_until(self, t_end):
        """Fire all events with fire_time <= t_end.

        Returns (events_fired, final_clock). If the queue drains early the
        clock stops at the last fired event (never advancing past t_end);
        otherwise it lands exactly on t_end.
        """
        fired_before = self.events_fired
        while self._queue and self._queue[0][0] <= t_end:
            fire_time, _, handler = heapq.heappop(self._queue)
            self.now = fire_time
            self.events_fired += 1
            handler()
        if self._queue:
            self.now = t_end
        return self.events_fired - fired_before, self.now


@dataclass(frozen=True)
class StreamFactory:
    """Derives independent, reproducible random streams from (root_seed, label).

    Each label hashes into its own generator state, so adding a new consumer
    never perturbs the draws seen by existing ones.
    """

    root_seed: int

    def stream(self, label):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        label_key = int.from_bytes(digest, "little")
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=(label_key,))
        return np.random.default_rng(seq)
