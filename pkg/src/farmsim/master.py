"""Master-side state: snapshot registry, scheduling policies, lease bookkeeping.

A snapshot replica is the schedulable unit: one (beta, seed) Monte Carlo
thread with a maturity counter. The master hands out lease-protected tasks;
a lease that outlives its timeout is reclaimed so batch-killed workers do
not pin replicas forever. Stale uploads (after the lease was reclaimed or
reassigned) are discarded so a replica's Markov chain never forks.
"""

import heapq
from dataclasses import dataclass, field
from typing import Optional

A_FIRST = -1
EQUAL = 0
B_FIRST = 1


@dataclass
class SnapshotReplica:
    snapshot_id: int
    beta: float
    seed: int
    maturity: int = 0
    lease_worker: Optional[int] = None
    lease_expiry: float = 0.0

    @property
    def leased(self):
        return self.lease_worker is not None


@dataclass(frozen=True)
class SchedulingPolicy:
    """Either pure maturity ordering or sensitive-region-first ordering.

    kind "maturity": least-mature replica first.
    kind "sensitive_region": replicas inside [beta_lo, beta_hi] take absolute
    priority, ordered by ascending beta within the region; outside the region
    maturity ordering applies. Remaining ties break by (seed, snapshot_id).
    """

    kind: str
    beta_lo: float = 0.0
    beta_hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("maturity", "sensitive_region"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "sensitive_region" and self.beta_lo > self.beta_hi:
            raise ValueError("sensitive region requires beta_lo <= beta_hi")

    def in_region(self, beta):
        return self.kind == "sensitive_region" and self.beta_lo <= beta <= self.beta_hi

    def sort_key(self, replica):
        if self.in_region(replica.beta):
            return (0, replica.beta, 0, replica.seed, replica.snapshot_id)
        return (1, 0.0, replica.maturity, replica.seed, replica.snapshot_id)


def compare_priority(a, b, policy):
    """-1 if a schedules first, 1 if b does, 0 only for identical keys."""
    ka, kb = policy.sort_key(a), policy.sort_key(b)
    if ka < kb:
        return A_FIRST
    if ka > kb:
        return B_FIRST
    return EQUAL


@dataclass
class Task:
    task_id: int
    snapshot_id: int
    beta: float
    maturity_at_assign: int
    iterations: int
    assigned_worker: int
    assign_time: float


class SnapshotRegistry:
    """Registry of replicas with a lazy-deletion priority pool.

    Unleased replicas sit in a heap keyed by the policy sort key; entries go
    stale when a replica is leased or its maturity changes, and are skipped
    on pop. Pushes happen at registration, lease release and maturity change,
    so every assignable replica always has a live entry.
    """

    def __init__(self, policy, granularity=3, lease_timeout_fn=None):
        self.policy = policy
        self.granularity = granularity
        # Fallback: caller-supplied expected-duration hook; 2x expected task
        # duration bounds how long a dead worker can pin a replica.
        self.lease_timeout_fn = lease_timeout_fn or (lambda beta: 86400.0)
        self.replicas = {}
        self._pool = []  # (sort_key, snapshot_id)
        self._next_task_id = 0
        self.uploads = 0
        self.stale_uploads = 0

    @property
    def total_maturity(self):
        return sum(r.maturity for r in self.replicas.values())

    def register_snapshots(self, betas, replicas_per_beta, seed_base):
        if len(set(betas)) != len(betas):
            raise ValueError("duplicate beta values")
        snapshot_id = len(self.replicas)
        for beta in betas:
            count = replicas_per_beta[beta]
            if count < 1:
                raise ValueError(f"replica count for beta={beta} must be >= 1")
            for _ in range(count):
                replica = SnapshotReplica(
                    snapshot_id=snapshot_id,
                    beta=beta,
                    seed=seed_base + snapshot_id,
                    maturity=0,
                )
                self.replicas[snapshot_id] = replica
                self._push(replica)
                snapshot_id += 1
        return self

    def _push(self, replica):
        heapq.heappush(self._pool, (self.policy.sort_key(replica), replica.snapshot_id))

    def _pop_best_unleased(self):
        while self._pool:
            key, snapshot_id = self._pool[0]
            replica = self.replicas[snapshot_id]
            if replica.leased or key != self.policy.sort_key(replica):
                heapq.heappop(self._pool)  # stale entry
                continue
            heapq.heappop(self._pool)
            return replica
        return None

    def _lease(self, replica, worker_id, now):
        replica.lease_worker = worker_id
        replica.lease_expiry = now + self.lease_timeout_fn(replica.beta)

    def assign_task(self, worker_id, cached_snapshot, now):
        """Pick a replica for an idle worker; returns a Task or None.

        Cache affinity wins over policy order: if the worker's cached
        snapshot is unleased it is reassigned, avoiding a re-download.
        """
        replica = None
        if cached_snapshot is not None:
            cached = self.replicas.get(cached_snapshot)
            if cached is not None and not cached.leased:
                replica = cached
        if replica is None:
            replica = self._pop_best_unleased()
        if replica is None:
            return None
        self._lease(replica, worker_id, now)
        task = Task(
            task_id=self._next_task_id,
            snapshot_id=replica.snapshot_id,
            beta=replica.beta,
            maturity_at_assign=replica.maturity,
            iterations=self.granularity,
            assigned_worker=worker_id,
            assign_time=now,
        )
        self._next_task_id += 1
        return task

    def complete_task(self, task, now):
        """Apply an upload. Returns the replica on success, None if stale."""
        replica = self.replicas[task.snapshot_id]
        if (
            replica.lease_worker != task.assigned_worker
            or replica.lease_expiry < now
        ):
            self.stale_uploads += 1
            return None
        replica.maturity += task.iterations
        replica.lease_worker = None
        self._push(replica)
        self.uploads += 1
        return replica

    def release_lease(self, snapshot_id, worker_id):
        """Drop a lease without an upload (worker died mid-task)."""
        replica = self.replicas[snapshot_id]
        if replica.lease_worker == worker_id:
            replica.lease_worker = None
            self._push(replica)

    def reclaim_expired_leases(self, now):
        reclaimed = 0
        for replica in self.replicas.values():
            if replica.leased and replica.lease_expiry < now:
                replica.lease_worker = None
                self._push(replica)
                reclaimed += 1
        return reclaimed

    def dump(self, fh):
        """Tab-separated registry dump, sorted by snapshot_id."""
        for snapshot_id in sorted(self.replicas):
            r = self.replicas[snapshot_id]
            fh.write(f"{r.snapshot_id}\t{r.beta:.6f}\t{r.seed}\t{r.maturity}\n")


def parse_registry_dump(fh):
    """Parse a registry dump into a list of (snapshot_id, beta, seed, maturity)."""
    rows = []
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"registry line {lineno}: expected 4 fields, got {len(parts)}")
        rows.append((int(parts[0]), float(parts[1]), int(parts[2]), int(parts[3])))
    return rows
