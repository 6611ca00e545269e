"""Behavioral anomaly configuration.

An anomaly spec names a behavior kind (hunger / social / work), an
intensity level (red / orange / yellow, firing with probability
1.0 / 0.5 / 0.2 per decision point), an assignment mechanism, and a day
window. Specs live in their own file so a checkpointed baseline can be
branched under different anomaly scenarios.

Spec file grammar, one spec per line:

    anomaly <kind> <level> random <fraction> <start_day> <end_day>
    anomaly <kind> <level> infectious <initial_count> <transmit_prob> <start_day> <end_day>
    anomaly <kind> <level> location <poi_id> <start_day> <end_day>
    anomaly <kind> <level> global <day[,day...]> <start_day> <end_day>

Runtime application lives in the engine tick loop; this module only
parses, validates, and carries the configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = ("hunger", "social", "work")
LEVEL_PROBS = {"red": 1.0, "orange": 0.5, "yellow": 0.2}

ASSIGN_RANDOM = "random"
ASSIGN_INFECTIOUS = "infectious"
ASSIGN_LOCATION = "location"
ASSIGN_GLOBAL = "global"


class AnomalyError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalySpec:
    kind: str
    level: str
    assignment: str
    start_day: int
    end_day: int
    fraction: float = 0.0          # random
    initial_count: int = 0         # infectious
    transmit_prob: float = 0.0     # infectious
    trigger_poi: int = -1          # location
    days: tuple = ()               # global

    @property
    def prob(self) -> float:
        return LEVEL_PROBS[self.level]

    def validate(self, num_days=None, world_map=None):
        errors = []
        if self.kind not in KINDS:
            errors.append(f"unknown anomaly kind {self.kind!r}")
        if self.level not in LEVEL_PROBS:
            errors.append(f"unknown level {self.level!r}")
        if self.start_day > self.end_day:
            errors.append("start_day > end_day")
        if self.start_day < 0:
            errors.append("negative start_day")
        if num_days is not None and self.end_day >= num_days:
            errors.append(f"end_day {self.end_day} beyond run horizon {num_days}")
        if self.assignment == ASSIGN_RANDOM:
            if not (0.0 <= self.fraction <= 1.0):
                errors.append(f"fraction {self.fraction} outside [0, 1]")
        elif self.assignment == ASSIGN_INFECTIOUS:
            if self.initial_count < 1:
                errors.append("infectious initial_count must be >= 1")
            if not (0.0 <= self.transmit_prob <= 1.0):
                errors.append(f"transmit_prob {self.transmit_prob} outside [0, 1]")
        elif self.assignment == ASSIGN_LOCATION:
            if world_map is not None and not (
                    0 <= self.trigger_poi < len(world_map.pois)):
                errors.append(f"trigger poi {self.trigger_poi} not in map")
        elif self.assignment == ASSIGN_GLOBAL:
            if not self.days:
                errors.append("global anomaly needs a day list")
            for d in self.days:
                if not (self.start_day <= d <= self.end_day):
                    errors.append(f"global day {d} outside [{self.start_day}, {self.end_day}]")
        else:
            errors.append(f"unknown assignment {self.assignment!r}")
        return errors


def parse_spec_line(line: str) -> AnomalySpec:
    parts = line.split()
    if len(parts) < 6 or parts[0] != "anomaly":
        raise AnomalyError(f"malformed anomaly line: {line!r}")
    kind, level, assignment = parts[1], parts[2], parts[3]
    try:
        start_day, end_day = int(parts[-2]), int(parts[-1])
        args = parts[4:-2]
        if assignment == ASSIGN_RANDOM:
            spec = AnomalySpec(kind, level, assignment, start_day, end_day,
                               fraction=float(args[0]))
        elif assignment == ASSIGN_INFECTIOUS:
            spec = AnomalySpec(kind, level, assignment, start_day, end_day,
                               initial_count=int(args[0]),
                               transmit_prob=float(args[1]))
        elif assignment == ASSIGN_LOCATION:
            spec = AnomalySpec(kind, level, assignment, start_day, end_day,
                               trigger_poi=int(args[0]))
        elif assignment == ASSIGN_GLOBAL:
            spec = AnomalySpec(kind, level, assignment, start_day, end_day,
                               days=tuple(int(d) for d in args[0].split(",")))
        else:
            raise AnomalyError(f"unknown assignment {assignment!r}")
    except (IndexError, ValueError) as e:
        raise AnomalyError(f"malformed anomaly line {line!r}: {e}") from None
    errors = spec.validate()
    if errors:
        raise AnomalyError("; ".join(errors))
    return spec


def load_anomaly_specs(path):
    specs = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if line:
                specs.append(parse_spec_line(line))
    return specs


def format_spec(spec: AnomalySpec) -> str:
    if spec.assignment == ASSIGN_RANDOM:
        mid = f"random {spec.fraction!r}"
    elif spec.assignment == ASSIGN_INFECTIOUS:
        mid = f"infectious {spec.initial_count} {spec.transmit_prob!r}"
    elif spec.assignment == ASSIGN_LOCATION:
        mid = f"location {spec.trigger_poi}"
    else:
        mid = "global " + ",".join(str(d) for d in spec.days)
    return f"anomaly {spec.kind} {spec.level} {mid} {spec.start_day} {spec.end_day}"


@dataclass
class ActiveAnomaly:
    """Anomaly episode attached to one agent."""
    spec_idx: int
    kind: str
    prob: float
    onset_tick: int
    end_tick: int  # exclusive

    def active_at(self, tick: int) -> bool:
        return self.onset_tick <= tick < self.end_tick


@dataclass(frozen=True)
class GroundTruthLabel:
    agent_id: int
    kind: str
    level: str
    start_tick: int
    end_tick: int
