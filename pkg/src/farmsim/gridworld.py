"""Simulated Grid fabric: Computing Elements, worker agents, failure events.

A Computing Element is a batch farm with a fixed number of slots, a bounded
FIFO queue, a wall-time limit that kills jobs exactly at the limit, and a
per-job probability of landing on an incompatible node (the worker then
never uploads anything). Availability windows model sites that only accept
jobs part of the time.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class ComputingElement:
    ce_id: str
    slot_count: int
    queue_limit: int
    wall_time_limit: float
    speed_factor: float = 1.0
    invalid_rate: float = 0.0
    availability_windows: Optional[List[Tuple[float, float]]] = None

    def __post_init__(self):
        if self.slot_count < 1:
            raise ValueError(f"{self.ce_id}: slot_count must be positive")
        if self.queue_limit < 0:
            raise ValueError(f"{self.ce_id}: queue_limit must be non-negative")
        if self.wall_time_limit <= 0:
            raise ValueError(f"{self.ce_id}: wall_time_limit must be positive")
        if self.speed_factor <= 0:
            raise ValueError(f"{self.ce_id}: speed_factor must be positive")
        if not 0.0 <= self.invalid_rate <= 1.0:
            raise ValueError(f"{self.ce_id}: invalid_rate must be in [0, 1]")

    def available_at(self, t):
        if self.availability_windows is None:
            return True
        return any(lo <= t < hi for lo, hi in self.availability_windows)


@dataclass
class CERuntime:
    """Mutable per-CE state owned by the simulation loop."""

    ce: ComputingElement
    queue: list = field(default_factory=list)  # FIFO of worker ids
    running: int = 0
    capacity_fraction: float = 1.0

    @property
    def effective_slots(self):
        return int(self.ce.slot_count * self.capacity_fraction)

    @property
    def free_slots(self):
        return self.effective_slots - self.running


# Worker lifecycle: submitted -> queued -> {running, invalid} -> {cancelled, exited}
WORKER_STATES = ("submitted", "queued", "running", "invalid", "cancelled", "exited")

_ALLOWED_TRANSITIONS = {
    ("submitted", "queued"),
    ("queued", "running"),
    ("queued", "invalid"),
    ("running", "cancelled"),
    ("running", "exited"),
    ("invalid", "cancelled"),
    ("invalid", "exited"),
}


@dataclass
class WorkerAgent:
    worker_id: int
    ce_id: str
    state: str = "submitted"
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    cached_snapshot: Optional[int] = None
    results_uploaded: int = 0
    kill_time: Optional[float] = None
    current_task: Optional[object] = None

    def transition(self, new_state):
        if (self.state, new_state) not in _ALLOWED_TRANSITIONS:
            raise ValueError(
                f"worker {self.worker_id}: illegal transition "
                f"{self.state} -> {new_state}"
            )
        self.state = new_state

    @property
    def terminal(self):
        return self.state in ("cancelled", "exited")


@dataclass(frozen=True)
class ScenarioEvent:
    """Failure/regime injection: credential_expiry, master_outage, low_regime."""

    kind: str
    start: float
    duration: float
    capacity_fraction: float = 1.0

    def __post_init__(self):
        if self.kind not in ("credential_expiry", "master_outage", "low_regime"):
            raise ValueError(f"unknown scenario event kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError("scenario event duration must be non-negative")
        if self.kind == "low_regime" and not 0.0 <= self.capacity_fraction <= 1.0:
            raise ValueError("capacity_fraction must be in [0, 1]")

    @property
    def end(self):
        return self.start + self.duration


def merge_outage_windows(events):
    """Merge overlapping master_outage windows into disjoint intervals."""
    windows = sorted(
        (ev.start, ev.end) for ev in events if ev.kind == "master_outage"
    )
    merged = []
    for lo, hi in windows:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged
