"""Scenario configuration: file format, parsing and validation.

The format is plain UTF-8 text with `[section]` headers and `key = value`
pairs. `[ce]`, `[beta]`, `[submit]`, `[event]` and `[factory_target]`
sections repeat, one per catalog entry / temperature / manual batch /
injection / factory retarget. `#` starts a comment. Shipped presets live in
the scenarios/ directory.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .gridworld import ComputingElement, ScenarioEvent
from .factory import FactoryConfig
from .master import SchedulingPolicy


class ConfigError(ValueError):
    """Invalid scenario file; message names the offending section/field."""


@dataclass(frozen=True)
class CESpec:
    """Catalog entry; speed None means: draw once from the scenario log-normal."""

    ce_id: str
    slot_count: int
    queue_limit: int
    wall_time_limit: float
    speed_factor: Optional[float]
    invalid_rate: float
    availability_windows: Optional[List[Tuple[float, float]]]


@dataclass
class Scenario:
    horizon: float
    root_seed: int
    betas: List[float]
    replicas_per_beta: dict
    t0_by_beta: dict
    policy: SchedulingPolicy
    ces: List[CESpec]
    granularity: int = 3
    k_rand: int = 400
    snapshot_size_bytes: int = 10_000_000
    seed_base: int = 1000
    lease_factor: float = 2.0
    idle_retry: float = 300.0
    invalid_lifetime: float = 600.0
    housekeeping_interval: float = 600.0
    speed_lognormal: Tuple[float, float] = (0.0, 0.25)
    factory: Optional[FactoryConfig] = None
    factory_enable_time: float = 0.0
    factory_targets: List[Tuple[float, int]] = field(default_factory=list)
    manual_submissions: List[Tuple[float, int, Optional[str]]] = field(
        default_factory=list
    )
    events: List[ScenarioEvent] = field(default_factory=list)

    def validate(self):
        if self.horizon < 0:
            raise ConfigError("scenario.horizon: must be non-negative")
        if self.granularity < 1:
            raise ConfigError("scenario.granularity: must be >= 1")
        if self.k_rand < 0:
            raise ConfigError("scenario.k_rand: must be non-negative")
        if not self.betas:
            raise ConfigError("beta: at least one [beta] section required")
        if len(set(self.betas)) != len(self.betas):
            raise ConfigError("beta.value: duplicate beta values")
        for beta in self.betas:
            if beta not in self.t0_by_beta:
                raise ConfigError(f"beta.t0: missing t0 for beta={beta}")
            if self.t0_by_beta[beta] <= 0:
                raise ConfigError(f"beta.t0: t0 for beta={beta} must be positive")
            if self.replicas_per_beta.get(beta, 0) < 1:
                raise ConfigError(f"beta.replicas: count for beta={beta} must be >= 1")
        ordered = sorted(self.betas)
        t0s = [self.t0_by_beta[b] for b in ordered]
        for lo, hi in zip(t0s, t0s[1:]):
            if hi > lo:
                raise ConfigError("beta.t0: t0 must be monotone non-increasing in beta")
        if not self.ces:
            raise ConfigError("ce: at least one [ce] section required")
        seen = set()
        for ce in self.ces:
            if ce.ce_id in seen:
                raise ConfigError(f"ce.id: duplicate CE id {ce.ce_id!r}")
            seen.add(ce.ce_id)
        total_replicas = sum(self.replicas_per_beta[b] for b in self.betas)
        if self.factory is not None and self.factory.target_pool > total_replicas:
            raise ConfigError(
                "factory.target: target_pool must not exceed the total replica count"
            )
        for t, target in self.factory_targets:
            if self.factory is None:
                raise ConfigError("factory_target: requires a [factory] section")
            if target > total_replicas:
                raise ConfigError(
                    f"factory_target.target: {target} exceeds total replica count"
                )
        for ev in self.events:
            if ev.start < 0 or ev.end > self.horizon:
                raise ConfigError(
                    f"event: {ev.kind} window [{ev.start}, {ev.end}] "
                    "outside simulation horizon"
                )
        return self


def _parse_sections(text):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), {}, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current[1]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[1][key] = value
    return sections


class _Section:
    def __init__(self, name, data):
        self.name = name
        self.data = dict(data)

    def take(self, key, conv=str, default=None, required=False):
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.name}.{key}: required field missing")
            return default
        raw = self.data.pop(key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.name}.{key}: {exc}") from exc

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(f"{self.name}: unknown keys: {extra}")


def _pair(conv):
    def parse(raw):
        parts = raw.split()
        if len(parts) != 2:
            raise ValueError(f"expected two values, got {raw!r}")
        return (conv(parts[0]), conv(parts[1]))

    return parse


def parse_scenario(text):
    """Parse and validate a scenario file; raises ConfigError on any defect."""
    sections = _parse_sections(text)
    head = None
    betas, replicas, t0s = [], {}, {}
    ces, events, submits, targets = [], [], [], []
    factory_sec = None

    for name, data, lineno in sections:
        sec = _Section(name, data)
        if name == "scenario":
            if head is not None:
                raise ConfigError(f"line {lineno}: duplicate [scenario] section")
            head = sec
        elif name == "beta":
            value = sec.take("value", float, required=True)
            betas.append(value)
            replicas[value] = sec.take("replicas", int, required=True)
            t0s[value] = sec.take("t0", float, required=True)
            sec.finish()
        elif name == "ce":
            windows_raw = sec.take("available", str)
            windows = None
            if windows_raw is not None:
                try:
                    nums = [float(x) for x in windows_raw.split()]
                    if len(nums) % 2:
                        raise ValueError("odd number of window endpoints")
                    windows = list(zip(nums[0::2], nums[1::2]))
                except ValueError as exc:
                    raise ConfigError(f"ce.available: {exc}") from exc
            ces.append(
                CESpec(
                    ce_id=sec.take("id", str, required=True),
                    slot_count=sec.take("slots", int, required=True),
                    queue_limit=sec.take("queue_limit", int, default=0),
                    wall_time_limit=sec.take("wall_time", float, required=True),
                    speed_factor=sec.take("speed", float),
                    invalid_rate=sec.take("invalid_rate", float, default=0.0),
                    availability_windows=windows,
                )
            )
            sec.finish()
        elif name == "factory":
            factory_sec = sec
        elif name == "factory_target":
            targets.append(
                (
                    sec.take("time", float, required=True),
                    sec.take("target", int, required=True),
                )
            )
            sec.finish()
        elif name == "submit":
            submits.append(
                (
                    sec.take("time", float, required=True),
                    sec.take("count", int, required=True),
                    sec.take("ce", str),
                )
            )
            sec.finish()
        elif name == "event":
            kind = sec.take("kind", str, required=True)
            try:
                events.append(
                    ScenarioEvent(
                        kind=kind,
                        start=sec.take("start", float, required=True),
                        duration=sec.take("duration", float, required=True),
                        capacity_fraction=sec.take(
                            "capacity_fraction", float, default=1.0
                        ),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"event: {exc}") from exc
            sec.finish()
        else:
            raise ConfigError(f"line {lineno}: unknown section [{name}]")

    if head is None:
        raise ConfigError("missing [scenario] section")

    policy_kind = head.take("policy", str, default="maturity")
    region = head.take("sensitive_region", _pair(float))
    try:
        if policy_kind == "sensitive_region":
            if region is None:
                raise ConfigError(
                    "scenario.sensitive_region: required for sensitive_region policy"
                )
            policy = SchedulingPolicy("sensitive_region", region[0], region[1])
        else:
            policy = SchedulingPolicy(policy_kind)
    except ValueError as exc:
        raise ConfigError(f"scenario.policy: {exc}") from exc

    factory = None
    enable_time = 0.0
    if factory_sec is not None:
        factory = FactoryConfig(
            target_pool=factory_sec.take("target", int, required=True),
            tick_interval=factory_sec.take("tick_interval", float, default=600.0),
            half_life=factory_sec.take("half_life", float, default=86400.0),
            max_submissions_per_tick=factory_sec.take("max_per_tick", int, default=50),
            queued_cap_per_ce=factory_sec.take("queued_cap", int, default=2),
        )
        enable_time = factory_sec.take("enable_time", float, default=0.0)
        factory_sec.finish()

    scenario = Scenario(
        horizon=head.take("horizon", float, required=True),
        root_seed=head.take("root_seed", int, required=True),
        betas=betas,
        replicas_per_beta=replicas,
        t0_by_beta=t0s,
        policy=policy,
        ces=ces,
        granularity=head.take("granularity", int, default=3),
        k_rand=head.take("k_rand", int, default=400),
        snapshot_size_bytes=head.take("snapshot_size_bytes", int, default=10_000_000),
        seed_base=head.take("seed_base", int, default=1000),
        lease_factor=head.take("lease_factor", float, default=2.0),
        idle_retry=head.take("idle_retry", float, default=300.0),
        invalid_lifetime=head.take("invalid_lifetime", float, default=600.0),
        housekeeping_interval=head.take("housekeeping_interval", float, default=600.0),
        speed_lognormal=head.take("speed_lognormal", _pair(float), default=(0.0, 0.25)),
        factory=factory,
        factory_enable_time=enable_time,
        factory_targets=sorted(targets),
        manual_submissions=sorted(submits, key=lambda s: (s[0], s[2] or "")),
        events=events,
    )
    head.finish()
    return scenario.validate()


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
