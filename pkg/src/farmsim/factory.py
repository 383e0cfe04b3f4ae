"""Agent Factory: fitness-proportional resource selection and pool upkeep.

Each Computing Element is scored fitness = (r + c) / n, where r counts jobs
currently running, c cleanly completed jobs and n everything ever sent there.
Terminal jobs decay with a configurable half-life so the ranking tracks
recent behaviour and eventually forgets old data; live (queued or running)
jobs always weigh 1. Selection is proportional to fitness with one extra
generic slot of weight 1 that routes to a uniformly random catalog CE, which
is how unknown resources get discovered.
"""

from dataclasses import dataclass


@dataclass
class CEStats:
    ce_id: str
    queued: int = 0
    running: int = 0
    terminal_n: float = 0.0  # decayed count of all terminal jobs
    clean_c: float = 0.0  # decayed count of clean finishes
    last_update: float = 0.0

    def _decay_to(self, now, half_life):
        age = now - self.last_update
        if age > 0:
            factor = 2.0 ** (-age / half_life)
            self.terminal_n *= factor
            self.clean_c *= factor
        self.last_update = now

    def fitness(self, now, half_life):
        self._decay_to(now, half_life)
        n = self.queued + self.running + self.terminal_n
        if n <= 0:
            return 0.0
        return (self.running + self.clean_c) / n


@dataclass(frozen=True)
class FactoryConfig:
    target_pool: int
    tick_interval: float = 600.0
    half_life: float = 86400.0
    max_submissions_per_tick: int = 50
    queued_cap_per_ce: int = 2


GENERIC = "__generic__"


class AgentFactory:
    """Tracks per-CE statistics and decides where the next workers go."""

    def __init__(self, config, catalog_ids):
        if not catalog_ids:
            raise ValueError("CE catalog must not be empty")
        self.config = config
        self.catalog_ids = list(catalog_ids)
        self.stats = {}
        self.target_pool = config.target_pool

    def _stats_for(self, ce_id, now):
        if ce_id not in self.stats:
            self.stats[ce_id] = CEStats(ce_id=ce_id, last_update=now)
        return self.stats[ce_id]

    def fitness(self, ce_id, now):
        if ce_id not in self.stats:
            return 0.0
        return self.stats[ce_id].fitness(now, self.config.half_life)

    def selection_probabilities(self, now):
        """Per-CE selection probability plus the generic-slot probability.

        P(CE_i) = f_i / (1 + sum f); P(generic) = 1 / (1 + sum f). The
        probabilities sum to exactly 1 by construction.
        """
        known = sorted(self.stats)
        fits = {ce: self.stats[ce].fitness(now, self.config.half_life) for ce in known}
        denom = 1.0 + sum(fits.values())
        probs = {ce: f / denom for ce, f in fits.items()}
        return probs, 1.0 / denom

    def choose_ce(self, rng, now):
        """Draw one CE. The generic slot resolves to a uniform catalog pick."""
        probs, _ = self.selection_probabilities(now)
        x = rng.random()
        acc = 0.0
        for ce_id in sorted(probs):
            acc += probs[ce_id]
            if x < acc:
                return ce_id
        # Generic slot: uniform over the full catalog, unknown CEs included.
        return self.catalog_ids[rng.integers(len(self.catalog_ids))]

    def maintain_pool(self, pool_observation, rng, now):
        """Return the list of CE ids to submit to this tick.

        Submits min(cap, deficit) workers where deficit counts queued workers
        too; per-CE outstanding queued jobs are capped so a stalled queue does
        not soak up the whole tick.
        """
        deficit = self.target_pool - pool_observation
        n_submit = min(self.config.max_submissions_per_tick, deficit)
        submissions = []
        for _ in range(max(0, n_submit)):
            ce_id = None
            for _attempt in range(10):
                candidate = self.choose_ce(rng, now)
                stats = self.stats.get(candidate)
                if stats is None or stats.queued < self.config.queued_cap_per_ce:
                    ce_id = candidate
                    break
            if ce_id is None:
                break  # every reachable CE is saturated with queued jobs
            submissions.append(ce_id)
        return submissions

    def record_outcome(self, ce_id, outcome, now):
        """Fold a job-lifecycle outcome into the CE's decayed counters."""
        stats = self._stats_for(ce_id, now)
        stats._decay_to(now, self.config.half_life)
        if outcome == "queued":
            stats.queued += 1
        elif outcome == "started":
            stats.queued = max(0, stats.queued - 1)
            stats.running += 1
        elif outcome == "clean_finish":
            stats.running = max(0, stats.running - 1)
            stats.terminal_n += 1.0
            stats.clean_c += 1.0
        elif outcome in ("cancelled", "invalid"):
            stats.running = max(0, stats.running - 1)
            stats.terminal_n += 1.0
        elif outcome == "dropped_queued":
            # Queued job removed without ever starting (e.g. CE went away).
            stats.queued = max(0, stats.queued - 1)
            stats.terminal_n += 1.0
        elif outcome == "submit_fail":
            stats.terminal_n += 1.0
        else:
            raise ValueError(f"unknown outcome {outcome!r}")
        return stats

    def dump(self, fh, now):
        """Per-CE state: ce_id, decayed n, decayed c, r, fitness."""
        for ce_id in sorted(self.stats):
            s = self.stats[ce_id]
            f = s.fitness(now, self.config.half_life)
            n = s.queued + s.running + s.terminal_n
            fh.write(f"{ce_id}\t{n:.6f}\t{s.clean_c:.6f}\t{s.running}\t{f:.6f}\n")
