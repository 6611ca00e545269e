"""Simulation parameter schema, validation, and config-file I/O.

The schema is a fixed, ordered list of parameter definitions. Order is
load-bearing: calibration mixers combine parameter vectors positionally,
so entries must never be reordered between schema versions.

Config files are flat UTF-8 ``name = value`` lines with ``#`` comments.
Unknown keys are a hard error (typo protection). Besides the schema
entries, the reserved keys ``seed``, ``num_agents``, ``num_days`` and
``map_path`` are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .hashing import digest64

SCHEMA_VERSION = 1

REAL = "real"
INTEGER = "integer"
BOOLEAN = "boolean"


class ParamError(ValueError):
    """Malformed config file or out-of-range parameter values."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ParamDef:
    name: str
    kind: str
    min: float
    max: float
    default: float
    unit: str = ""

    def __post_init__(self):
        if self.kind == BOOLEAN and (self.min, self.max) != (0, 1):
            raise ValueError(f"boolean parameter {self.name} must span [0, 1]")
        if self.kind in (INTEGER, BOOLEAN):
            for v in (self.min, self.max, self.default):
                if v != int(v):
                    raise ValueError(f"{self.name}: non-integral bound/default {v}")
        if not (self.min <= self.default <= self.max):
            raise ValueError(f"{self.name}: default {self.default} outside range")


@dataclass(frozen=True)
class ParamSchema:
    entries: tuple

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in schema")

    def index(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)

    def names(self):
        return [e.name for e in self.entries]

    def defaults(self):
        return [float(e.default) for e in self.entries]


DEFAULT_SCHEMA = ParamSchema(entries=(
    ParamDef("joviality", REAL, 0.0, 1.0, 0.5),
    ParamDef("num_interests", INTEGER, 1, 10, 3, "count"),
    ParamDef("walk_speed_mps", REAL, 0.5, 3.0, 1.4, "m/s"),
    ParamDef("hunger_growth_per_tick", REAL, 1e-4, 1e-2, 2e-3, "level/tick"),
    ParamDef("hunger_threshold", REAL, 0.3, 0.95, 0.8, "level"),
    ParamDef("meal_duration_ticks", INTEGER, 10, 120, 30, "ticks"),
    ParamDef("energy_growth_per_tick", REAL, 1e-4, 5e-3, 1e-3, "level/tick"),
    ParamDef("sleep_start_hour", REAL, 20.0, 24.0, 22.0, "hour"),
    ParamDef("sleep_duration_hours", REAL, 5.0, 10.0, 8.0, "hours"),
    ParamDef("work_start_hour", REAL, 6.0, 11.0, 9.0, "hour"),
    ParamDef("work_duration_hours", REAL, 4.0, 12.0, 8.0, "hours"),
    ParamDef("income_per_work_tick", REAL, 0.05, 2.0, 0.5, "currency/tick"),
    ParamDef("rent_per_day", REAL, 5.0, 200.0, 30.0, "currency/day"),
    ParamDef("rent_cost_ratio", REAL, 0.1, 0.9, 0.3),
    ParamDef("social_growth_per_tick", REAL, 1e-4, 1e-2, 2e-3, "level/tick"),
    ParamDef("social_threshold", REAL, 0.3, 0.95, 0.8, "level"),
    ParamDef("exit_balance_threshold", REAL, -500.0, 0.0, -100.0, "currency"),
    ParamDef("exit_enabled", BOOLEAN, 0, 1, 0),
))

RESERVED_KEYS = ("seed", "num_agents", "num_days", "map_path")


@dataclass
class SimParams:
    values: list = field(default_factory=DEFAULT_SCHEMA.defaults)
    seed: int = 0
    num_agents: int = 100
    num_days: int = 1
    map_path: str = ""
    schema_version: int = SCHEMA_VERSION

    def get(self, name: str, schema: ParamSchema = DEFAULT_SCHEMA) -> float:
        return self.values[schema.index(name)]

    def with_value(self, name, value, schema: ParamSchema = DEFAULT_SCHEMA):
        values = list(self.values)
        values[schema.index(name)] = float(value)
        return replace(self, values=values)

    def copy(self) -> "SimParams":
        return replace(self, values=list(self.values))


def validate_params(p: SimParams, schema: ParamSchema = DEFAULT_SCHEMA):
    """Return the full list of violated constraints (empty when valid)."""
    if len(p.values) != len(schema.entries):
        return [
            f"value vector length {len(p.values)} != schema length {len(schema.entries)}"
        ]
    errors = []
    for v, e in zip(p.values, schema.entries):
        if not (e.min <= v <= e.max):
            errors.append(f"{e.name}={v!r} outside [{e.min}, {e.max}]")
        elif e.kind in (INTEGER, BOOLEAN) and v != int(v):
            errors.append(f"{e.name}={v!r} must be integral")
    if p.num_agents < 1:
        errors.append(f"num_agents={p.num_agents} must be positive")
    if p.num_days < 1:
        errors.append(f"num_days={p.num_days} must be positive")
    if not (0 <= p.seed <= 0xFFFFFFFFFFFFFFFF):
        errors.append("seed must fit in 64 bits")
    return errors


def _parse_number(name: str, text: str) -> float:
    text = text.strip()
    if text.lower() == "true":
        return 1.0
    if text.lower() == "false":
        return 0.0
    try:
        return float(text)
    except ValueError:
        raise ParamError(f"{name}: cannot parse value {text!r}") from None


def parse_config(text: str, schema: ParamSchema = DEFAULT_SCHEMA) -> SimParams:
    values = schema.defaults()
    reserved = {"seed": 0, "num_agents": 100, "num_days": 1, "map_path": ""}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError(f"line {lineno}: expected 'name = value', got {raw!r}")
        name, _, val = line.partition("=")
        name = name.strip()
        val = val.strip()
        if name == "map_path":
            reserved["map_path"] = val
        elif name in ("seed", "num_agents", "num_days"):
            reserved[name] = int(_parse_number(name, val))
        else:
            try:
                idx = schema.index(name)
            except KeyError:
                unknown.append(name)
                continue
            values[idx] = _parse_number(name, val)
    if unknown:
        raise ParamError([f"unknown parameter: {n}" for n in unknown])
    p = SimParams(values=values, seed=reserved["seed"],
                  num_agents=reserved["num_agents"], num_days=reserved["num_days"],
                  map_path=reserved["map_path"])
    errors = validate_params(p, schema)
    if errors:
        raise ParamError(errors)
    return p


def load_params(path, schema: ParamSchema = DEFAULT_SCHEMA) -> SimParams:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read(), schema)


def format_config(p: SimParams, schema: ParamSchema = DEFAULT_SCHEMA) -> str:
    lines = [
        f"seed = {p.seed}",
        f"num_agents = {p.num_agents}",
        f"num_days = {p.num_days}",
    ]
    if p.map_path:
        lines.append(f"map_path = {p.map_path}")
    for v, e in zip(p.values, schema.entries):
        if e.kind == BOOLEAN:
            lines.append(f"{e.name} = {'true' if v else 'false'}")
        elif e.kind == INTEGER:
            lines.append(f"{e.name} = {int(v)}")
        else:
            lines.append(f"{e.name} = {v!r}")
    return "\n".join(lines) + "\n"


def save_params(p: SimParams, path, schema: ParamSchema = DEFAULT_SCHEMA) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_config(p, schema))


def canonical_form(p: SimParams, schema: ParamSchema = DEFAULT_SCHEMA) -> str:
    """Schema-ordered name=value lines; numbers at 17 significant digits."""
    lines = [
        f"schema_version={p.schema_version}",
        f"seed={p.seed}",
        f"num_agents={p.num_agents}",
        f"num_days={p.num_days}",
    ]
    for v, e in zip(p.values, schema.entries):
        lines.append(f"{e.name}={v:.17g}")
    return "\n".join(lines)


def params_hash(p: SimParams, schema: ParamSchema = DEFAULT_SCHEMA) -> int:
    return digest64(canonical_form(p, schema).encode("utf-8"))
