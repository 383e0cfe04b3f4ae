"""Append-only production journal and the metrics derived from it.

The journal is the sole input to all system-performance analysis: hourly
activity series, active/invalid worker classification, f_scale, useful
iterations, maturity histograms and duration percentiles.

Line format (tab-separated, one event per line, append-only):
    time  kind  worker_id  ce_id  snapshot_id  beta  maturity_after  duration  note
Times are integer seconds, betas fixed 6-decimal, durations fixed 3-decimal,
absent optionals are "-". The format is greppable and diff-stable so
determinism checks can compare raw bytes.
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

EVENT_KINDS = (
    "WORKER_SUBMITTED",
    "WORKER_QUEUED",
    "WORKER_STARTED",
    "WORKER_INVALID",
    "WORKER_CANCELLED",
    "WORKER_EXITED",
    "TASK_ASSIGNED",
    "TASK_UPLOADED",
    "STALE_UPLOAD",
    "SUBMIT_FAILED",
    "SCENARIO_EVENT",
)

HOUR = 3600.0


@dataclass(frozen=True)
class JournalEvent:
    time: int
    kind: str
    worker_id: Optional[int] = None
    ce_id: Optional[str] = None
    snapshot_id: Optional[int] = None
    beta: Optional[float] = None
    maturity_after: Optional[int] = None
    duration: Optional[float] = None
    note: Optional[str] = None


def _fmt(value, spec=None):
    if value is None:
        return "-"
    if spec:
        return format(value, spec)
    return str(value)


def serialize_event(ev):
    return "\t".join(
        (
            str(ev.time),
            ev.kind,
            _fmt(ev.worker_id),
            _fmt(ev.ce_id),
            _fmt(ev.snapshot_id),
            _fmt(ev.beta, ".6f"),
            _fmt(ev.maturity_after),
            _fmt(ev.duration, ".3f"),
            _fmt(ev.note),
        )
    )


class JournalWriter:
    """Appends events to a stream, enforcing monotone time."""

    def __init__(self, fh):
        self.fh = fh
        self.last_time = None
        self.count = 0

    def append(self, ev):
        if ev.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        if self.last_time is not None and ev.time < self.last_time:
            raise ValueError(
                f"journal time regression: {ev.time} after {self.last_time}"
            )
        if ev.kind == "TASK_UPLOADED" and None in (
            ev.snapshot_id,
            ev.beta,
            ev.maturity_after,
            ev.duration,
        ):
            raise ValueError("TASK_UPLOADED requires snapshot, beta, maturity, duration")
        self.fh.write(serialize_event(ev) + "\n")
        self.last_time = ev.time
        self.count += 1


def _parse_opt(text, conv):
    return None if text == "-" else conv(text)


def parse_journal(fh):
    """Parse a journal stream; raises ValueError with the offending line number."""
    events = []
    last_time = None
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 9:
            raise ValueError(f"journal line {lineno}: expected 9 fields, got {len(parts)}")
        try:
            ev = JournalEvent(
                time=int(parts[0]),
                kind=parts[1],
                worker_id=_parse_opt(parts[2], int),
                ce_id=_parse_opt(parts[3], str),
                snapshot_id=_parse_opt(parts[4], int),
                beta=_parse_opt(parts[5], float),
                maturity_after=_parse_opt(parts[6], int),
                duration=_parse_opt(parts[7], float),
                note=_parse_opt(parts[8], str),
            )
        except ValueError as exc:
            raise ValueError(f"journal line {lineno}: {exc}") from exc
        if ev.kind not in EVENT_KINDS:
            raise ValueError(f"journal line {lineno}: unknown kind {ev.kind!r}")
        if last_time is not None and ev.time < last_time:
            raise ValueError(f"journal line {lineno}: time regression")
        last_time = ev.time
        events.append(ev)
    return events


@dataclass
class HourlyPoint:
    hour_index: int
    active_workers: int
    invalid_workers: int
    added_workers: int
    iterations_done: int
    cumulative_iterations: int


def _hours_overlapped(start, end):
    """Hour indices [floor(start/h) .. floor(end/h)] the interval touches."""
    if end < start:
        return range(0)
    return range(int(start // HOUR), int(end // HOUR) + 1)


@dataclass
class WorkerRecord:
    started: bool = False
    start_time: Optional[int] = None
    end_time: Optional[int] = None
    uploads: int = 0
    active_hours: set = None

    def __post_init__(self):
        if self.active_hours is None:
            self.active_hours = set()

    @property
    def invalid(self):
        return self.started and self.uploads == 0


def classify_workers(events):
    """Active/invalid classification per worker.

    A worker is active in hour h iff it was executing a task during h and
    that task later produced a TASK_UPLOADED. A started worker with zero
    uploads over its whole lifetime is invalid. Hours spent on a task that
    was never uploaded (e.g. killed at the wall-time limit) do not count.
    """
    workers = defaultdict(WorkerRecord)
    open_task = {}  # worker_id -> assign time
    for ev in events:
        if ev.worker_id is None:
            continue
        rec = workers[ev.worker_id]
        if ev.kind in ("WORKER_STARTED", "WORKER_INVALID"):
            rec.started = True
            rec.start_time = ev.time
        elif ev.kind == "TASK_ASSIGNED":
            open_task[ev.worker_id] = ev.time
        elif ev.kind == "TASK_UPLOADED":
            assign_time = open_task.pop(ev.worker_id, ev.time)
            rec.uploads += 1
            rec.active_hours.update(_hours_overlapped(assign_time, ev.time))
        elif ev.kind in ("WORKER_CANCELLED", "WORKER_EXITED"):
            open_task.pop(ev.worker_id, None)
            rec.end_time = ev.time
    return dict(workers)


def hourly_series(events, granularity=3):
    """Per-hour activity: active, invalid, added workers and iterations."""
    if not events:
        return []
    workers = classify_workers(events)
    n_hours = int(events[-1].time // HOUR) + 1
    active = [0] * n_hours
    invalid = [0] * n_hours
    added = [0] * n_hours
    uploads = [0] * n_hours

    for rec in workers.values():
        for h in rec.active_hours:
            if h < n_hours:
                active[h] += 1
        if rec.invalid and rec.start_time is not None:
            end = rec.end_time if rec.end_time is not None else events[-1].time
            for h in _hours_overlapped(rec.start_time, end):
                if h < n_hours:
                    invalid[h] += 1

    for ev in events:
        h = int(ev.time // HOUR)
        if ev.kind == "WORKER_STARTED":
            added[h] += 1
        elif ev.kind == "TASK_UPLOADED":
            uploads[h] += 1

    series = []
    cumulative = 0
    for h in range(n_hours):
        iterations = granularity * uploads[h]
        cumulative += iterations
        series.append(
            HourlyPoint(
                hour_index=h,
                active_workers=active[h],
                invalid_workers=invalid[h],
                added_workers=added[h],
                iterations_done=iterations,
                cumulative_iterations=cumulative,
            )
        )
    return series


def f_scale(series, window=None, granularity=3):
    """Mean active workers over mean uploads per hour; None if no uploads.

    At steady state this is numerically the mean task duration in hours.
    """
    if window is not None:
        lo, hi = window
        points = [p for p in series if lo <= p.hour_index < hi]
    else:
        points = list(series)
    if not points:
        return None
    uploads = sum(p.iterations_done for p in points) / granularity
    if uploads == 0:
        return None
    mean_active = sum(p.active_workers for p in points) / len(points)
    return mean_active / (uploads / len(points))


def useful_iterations(registry_rows, k_rand):
    """Split total maturity into (useful, wasted) around the randomization
    threshold: per replica, the first k_rand iterations only decorrelate the
    thread and are wasted."""
    if k_rand < 0:
        raise ValueError("k_rand must be non-negative")
    useful = wasted = 0
    for _sid, _beta, _seed, maturity in registry_rows:
        wasted += min(maturity, k_rand)
        useful += max(0, maturity - k_rand)
    return useful, wasted


def maturity_histogram(registry_rows, region=None):
    """Total iterations per beta; returns {beta: (total, in_region)}."""
    totals = defaultdict(int)
    for _sid, beta, _seed, maturity in registry_rows:
        totals[beta] += maturity
    out = {}
    for beta in sorted(totals):
        in_region = region is not None and region[0] <= beta <= region[1]
        out[beta] = (totals[beta], in_region)
    return out


def nearest_rank(sorted_values, pct):
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def duration_percentiles(events, min_samples=4):
    """Per-beta (p25, p50, p75) of uploaded task durations.

    Betas with fewer than min_samples uploads are reported in the second
    return value instead of the percentile map.
    """
    by_beta = defaultdict(list)
    for ev in events:
        if ev.kind == "TASK_UPLOADED":
            by_beta[ev.beta].append(ev.duration)
    percentiles, skipped = {}, []
    for beta in sorted(by_beta):
        durations = sorted(by_beta[beta])
        if len(durations) < min_samples:
            skipped.append(beta)
            continue
        percentiles[beta] = (
            nearest_rank(durations, 25),
            nearest_rank(durations, 50),
            nearest_rank(durations, 75),
        )
    return percentiles, skipped
