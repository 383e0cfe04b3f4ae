"""Wires engine, grid fabric, master, factory and journal into one run.

All randomness flows through labelled streams derived from the scenario's
root seed, so a (scenario, seed) pair always produces byte-identical
outputs. The event loop owns every piece of mutable state.
"""

from dataclasses import dataclass

from .durations import MEAN_STRETCH, DurationModel, sample_task_duration
from .engine import EventEngine, StreamFactory
from .factory import AgentFactory
from .gridworld import CERuntime, ComputingElement, WorkerAgent, merge_outage_windows
from .journal import JournalEvent, JournalWriter
from .master import SnapshotRegistry

YEAR_SECONDS = 365.25 * 86400.0


@dataclass
class SummaryStats:
    total_iterations: int
    uploads: int
    stale_uploads: int
    total_workers: int
    peak_running: int
    cpu_seconds: float
    transfer_bytes: int
    downloads: int
    events_fired: int
    final_clock: float

    @property
    def cpu_years(self):
        return self.cpu_seconds / YEAR_SECONDS

    @property
    def transfer_tb(self):
        return self.transfer_bytes / 1e12


class Simulation:
    def __init__(self, scenario, journal_fh):
        self.scenario = scenario
        self.engine = EventEngine()
        self.journal = JournalWriter(journal_fh)
        streams = StreamFactory(scenario.root_seed)
        self.rng_durations = streams.stream("durations")
        self.rng_factory = streams.stream("factory")
        self.rng_failures = streams.stream("failures")
        self.rng_manual = streams.stream("manual")
        rng_speeds = streams.stream("speeds")

        # CE speeds not pinned in the scenario are drawn once per run from
        # the configured log-normal, in catalog order.
        mu, sigma = scenario.speed_lognormal
        self.catalog = []
        self.runtimes = {}
        for spec in scenario.ces:
            speed = spec.speed_factor
            if speed is None:
                speed = float(rng_speeds.lognormal(mu, sigma))
            ce = ComputingElement(
                ce_id=spec.ce_id,
                slot_count=spec.slot_count,
                queue_limit=spec.queue_limit,
                wall_time_limit=spec.wall_time_limit,
                speed_factor=speed,
                invalid_rate=spec.invalid_rate,
                availability_windows=spec.availability_windows,
            )
            self.catalog.append(ce)
            self.runtimes[ce.ce_id] = CERuntime(ce=ce)

        self.duration_model = DurationModel(scenario.t0_by_beta)
        max_speed = max(ce.speed_factor for ce in self.catalog)
        lease_factor = scenario.lease_factor

        def lease_timeout(beta):
            return lease_factor * MEAN_STRETCH * scenario.t0_by_beta[beta] * max_speed

        self.registry = SnapshotRegistry(
            policy=scenario.policy,
            granularity=scenario.granularity,
            lease_timeout_fn=lease_timeout,
        ).register_snapshots(
            scenario.betas, scenario.replicas_per_beta, scenario.seed_base
        )

        self.factory = None
        if scenario.factory is not None:
            self.factory = AgentFactory(
                scenario.factory, [ce.ce_id for ce in self.catalog]
            )

        self.workers = {}
        self._next_worker_id = 0
        self.n_queued = 0
        self.n_running_valid = 0
        self.n_running_invalid = 0
        self.peak_running = 0
        self.cpu_seconds = 0.0
        self.transfer_bytes = 0
        self.downloads = 0
        self._cred_active = 0
        self._outage_windows = merge_outage_windows(scenario.events)

    # -- journal helpers --------------------------------------------------

    def _emit(self, kind, **fields):
        self.journal.append(JournalEvent(time=int(self.engine.now), kind=kind, **fields))

    # -- outage / failure windows -----------------------------------------

    def _outage_end(self, now):
        for lo, hi in self._outage_windows:
            if lo <= now < hi:
                return hi
        return None

    # -- submission and CE queueing ----------------------------------------

    def submit_worker(self, ce_id):
        """Submit one worker as a grid job; returns the WorkerAgent or None."""
        runtime = self.runtimes[ce_id]  # unknown CE is a programming error
        now = self.engine.now
        self._emit("WORKER_SUBMITTED", ce_id=ce_id)
        blocked = self._cred_active > 0 or not runtime.ce.available_at(now)
        queue_full = (
            runtime.free_slots <= 0 and len(runtime.queue) >= runtime.ce.queue_limit
        )
        if blocked or queue_full:
            note = "credential_or_unavailable" if blocked else "queue_full"
            self._emit("SUBMIT_FAILED", ce_id=ce_id, note=note)
            if self.factory is not None:
                self.factory.record_outcome(ce_id, "submit_fail", now)
            return None
        worker = WorkerAgent(worker_id=self._next_worker_id, ce_id=ce_id)
        self._next_worker_id += 1
        self.workers[worker.worker_id] = worker
        worker.transition("queued")
        runtime.queue.append(worker.worker_id)
        self.n_queued += 1
        self._emit("WORKER_QUEUED", worker_id=worker.worker_id, ce_id=ce_id)
        if self.factory is not None:
            self.factory.record_outcome(ce_id, "queued", now)
        self._promote(runtime)
        return worker

    def _promote(self, runtime):
        now = self.engine.now
        if self._cred_active > 0 or not runtime.ce.available_at(now):
            return
        while runtime.free_slots > 0 and runtime.queue:
            worker = self.workers[runtime.queue.pop(0)]
            self._start_worker(worker, runtime)

    def _promote_all(self):
        for runtime in self.runtimes.values():
            self._promote(runtime)

    def _start_worker(self, worker, runtime):
        now = self.engine.now
        self.n_queued -= 1
        runtime.running += 1
        worker.start_time = now
        worker.kill_time = now + runtime.ce.wall_time_limit
        if self.factory is not None:
            self.factory.record_outcome(worker.ce_id, "started", now)
        if self.rng_failures.random() < runtime.ce.invalid_rate:
            worker.transition("invalid")
            self.n_running_invalid += 1
            self._emit("WORKER_INVALID", worker_id=worker.worker_id, ce_id=worker.ce_id)
            exit_at = min(worker.kill_time, now + self.scenario.invalid_lifetime)
            self.engine.schedule(exit_at, lambda w=worker: self._end_worker(w, "exited"))
            return
        worker.transition("running")
        self.n_running_valid += 1
        self.peak_running = max(self.peak_running, self.n_running_valid)
        self._emit("WORKER_STARTED", worker_id=worker.worker_id, ce_id=worker.ce_id)
        self.engine.schedule(
            worker.kill_time, lambda w=worker: self._wall_kill(w)
        )
        self._request_task(worker)

    # -- task flow ---------------------------------------------------------

    def _request_task(self, worker):
        if worker.terminal:
            return
        now = self.engine.now
        outage_end = self._outage_end(now)
        if outage_end is not None:
            if outage_end < worker.kill_time:
                self.engine.schedule(
                    outage_end, lambda w=worker: self._request_task(w)
                )
            return
        task = self.registry.assign_task(worker.worker_id, worker.cached_snapshot, now)
        if task is None:
            retry_at = now + self.scenario.idle_retry
            if retry_at < worker.kill_time:
                self.engine.schedule(retry_at, lambda w=worker: self._request_task(w))
            return
        self._emit(
            "TASK_ASSIGNED",
            worker_id=worker.worker_id,
            ce_id=worker.ce_id,
            snapshot_id=task.snapshot_id,
            beta=task.beta,
        )
        if task.snapshot_id != worker.cached_snapshot:
            self.downloads += 1
            self.transfer_bytes += self.scenario.snapshot_size_bytes
        worker.current_task = task
        runtime = self.runtimes[worker.ce_id]
        duration = float(
            sample_task_duration(
                self.duration_model.t0(task.beta),
                runtime.ce.speed_factor,
                self.rng_durations,
            )
        )
        finish_at = now + duration
        if finish_at <= worker.kill_time:
            self.engine.schedule(
                finish_at, lambda w=worker, t=task: self._complete_task(w, t)
            )
        # else: the wall-time kill fires first and the task is lost.

    def _complete_task(self, worker, task):
        if worker.terminal or worker.current_task is not task:
            return
        now = self.engine.now
        outage_end = self._outage_end(now)
        if outage_end is not None:
            # Uploads are suspended; retry when the master is back.
            self.engine.schedule(
                outage_end, lambda w=worker, t=task: self._complete_task(w, t)
            )
            return
        replica = self.registry.complete_task(task, now)
        observed = now - task.assign_time
        if replica is None:
            self._emit(
                "STALE_UPLOAD",
                worker_id=worker.worker_id,
                ce_id=worker.ce_id,
                snapshot_id=task.snapshot_id,
                beta=task.beta,
                duration=observed,
            )
        else:
            worker.results_uploaded += 1
            self.transfer_bytes += self.scenario.snapshot_size_bytes
            self._emit(
                "TASK_UPLOADED",
                worker_id=worker.worker_id,
                ce_id=worker.ce_id,
                snapshot_id=task.snapshot_id,
                beta=task.beta,
                maturity_after=replica.maturity,
                duration=observed,
            )
        worker.cached_snapshot = task.snapshot_id
        worker.current_task = None
        self._request_task(worker)

    # -- worker termination ------------------------------------------------

    def _wall_kill(self, worker):
        if worker.terminal:
            return
        mode = "cancelled" if worker.current_task is not None else "exited"
        self._end_worker(worker, mode)

    def _end_worker(self, worker, mode):
        """Terminal transition: release resources and settle accounting."""
        now = self.engine.now
        was_invalid = worker.state == "invalid"
        if worker.current_task is not None:
            self.registry.release_lease(
                worker.current_task.snapshot_id, worker.worker_id
            )
            worker.current_task = None
        worker.transition(mode)
        worker.end_time = now
        kind = "WORKER_CANCELLED" if mode == "cancelled" else "WORKER_EXITED"
        self._emit(kind, worker_id=worker.worker_id, ce_id=worker.ce_id)
        runtime = self.runtimes[worker.ce_id]
        runtime.running -= 1
        if was_invalid:
            self.n_running_invalid -= 1
        else:
            self.n_running_valid -= 1
        self.cpu_seconds += now - worker.start_time
        if self.factory is not None:
            if worker.results_uploaded > 0:
                outcome = "clean_finish"
            else:
                outcome = "invalid" if was_invalid else "cancelled"
            self.factory.record_outcome(worker.ce_id, outcome, now)
        self._promote(runtime)

    # -- scenario events ---------------------------------------------------

    def _inject(self, ev):
        self.engine.schedule(ev.start, lambda: self._scenario_start(ev))
        self.engine.schedule(ev.end, lambda: self._scenario_end(ev))

    def _scenario_start(self, ev):
        self._emit("SCENARIO_EVENT", note=f"{ev.kind}_start")
        if ev.kind == "credential_expiry":
            self._cred_active += 1
            for worker in list(self.workers.values()):
                if worker.state in ("running", "invalid"):
                    self._end_worker(worker, "cancelled")
        elif ev.kind == "low_regime":
            for runtime in self.runtimes.values():
                runtime.capacity_fraction = ev.capacity_fraction

    def _scenario_end(self, ev):
        self._emit("SCENARIO_EVENT", note=f"{ev.kind}_end")
        if ev.kind == "credential_expiry":
            self._cred_active -= 1
        elif ev.kind == "low_regime":
            for runtime in self.runtimes.values():
                runtime.capacity_fraction = 1.0
        self._promote_all()

    # -- periodic drivers ---------------------------------------------------

    def _housekeeping(self):
        self.registry.reclaim_expired_leases(self.engine.now)
        nxt = self.engine.now + self.scenario.housekeeping_interval
        if nxt <= self.scenario.horizon:
            self.engine.schedule(nxt, self._housekeeping)

    def _factory_tick(self):
        now = self.engine.now
        observation = self.n_queued + self.n_running_valid
        for ce_id in self.factory.maintain_pool(observation, self.rng_factory, now):
            self.submit_worker(ce_id)
        nxt = now + self.scenario.factory.tick_interval
        if nxt <= self.scenario.horizon:
            self.engine.schedule(nxt, self._factory_tick)

    def _manual_batch(self, count, ce_id):
        for _ in range(count):
            chosen = ce_id
            if chosen is None:
                chosen = self.catalog[
                    self.rng_manual.integers(len(self.catalog))
                ].ce_id
            self.submit_worker(chosen)

    # -- top level -----------------------------------------------------------

    def run(self):
        sc = self.scenario
        for ev in sc.events:
            self._inject(ev)
        for time, count, ce_id in sc.manual_submissions:
            self.engine.schedule(time, lambda c=count, ce=ce_id: self._manual_batch(c, ce))
        if self.factory is not None:
            self.engine.schedule(sc.factory_enable_time, self._factory_tick)
            for time, target in sc.factory_targets:

                def retarget(t=target):
                    self.factory.target_pool = t
                    self._emit("SCENARIO_EVENT", note=f"factory_target_{t}")

                self.engine.schedule(time, retarget)
        self.engine.schedule(sc.housekeeping_interval, self._housekeeping)
        # Re-run queue promotion whenever an availability window opens.
        for ce in self.catalog:
            for lo, _hi in ce.availability_windows or []:
                if lo <= sc.horizon:
                    self.engine.schedule(
                        lo, lambda c=ce.ce_id: self._promote(self.runtimes[c])
                    )
        self.engine.run_until(sc.horizon)

        # Workers still alive at the horizon contribute CPU time up to it.
        for worker in self.workers.values():
            if not worker.terminal and worker.start_time is not None:
                self.cpu_seconds += sc.horizon - worker.start_time

        return SummaryStats(
            total_iterations=self.registry.total_maturity,
            uploads=self.registry.uploads,
            stale_uploads=self.registry.stale_uploads,
            total_workers=self._next_worker_id,
            peak_running=self.peak_running,
            cpu_seconds=self.cpu_seconds,
            transfer_bytes=self.transfer_bytes,
            downloads=self.downloads,
            events_fired=self.engine.events_fired,
            final_clock=self.engine.now,
        )
