"""Needs-driven tick-loop simulation core.

One tick is one simulated minute (1440 ticks/day). Every mutation of a
SimWorld happens inside step() in a fixed order — agents in ascending
id, then the global social/contagion/exit phases — so two runs with the
same (params, map) produce byte-identical logs.

Activity arbitration, highest priority first:
  sleep window > hunger over threshold > work schedule (weekdays)
  > social need over threshold > return/stay home.

State-affecting arithmetic sticks to IEEE-exact operations (+ - * /,
sqrt) so logs are reproducible across platforms; no libm transcendental
enters the tick loop.
"""

from __future__ import annotations

import datetime
import time
from dataclasses import dataclass, field

from . import anomaly as anomaly_mod
from .anomaly import ActiveAnomaly, AnomalySpec
from .hashing import digest64
from .params import DEFAULT_SCHEMA, SimParams, params_hash, validate_params
from .rng import Rng
from .worldmap import WorldMap

TICKS_PER_DAY = 1440
TICK_SECONDS = 60
START_DATETIME = datetime.datetime(2024, 1, 1, 0, 0, 0)

# Activity codes (serialized into checkpoints; order is frozen).
AT_HOME, SLEEPING, WORKING, EATING, RECREATING, TRAVELING, EXITED = range(7)
ACTIVITY_NAMES = ("at_home", "sleeping", "working", "eating", "recreating",
                  "traveling", "exited")

# Travel intents: what to do on arrival.
INTENT_HOME, INTENT_SLEEP, INTENT_WORK, INTENT_EAT, INTENT_RECREATE = range(5)

MEAL_COST_RESTAURANT = 5.0
MEAL_COST_HOME = 1.0
SOCIAL_DECAY_PER_TICK = 0.01
FRIENDSHIP_TICKS = 30
EXIT_GRACE_DAYS = 3
HUNGER_ANOMALY_FACTOR = 4.0
LAST_POSITIONS_CAP = 12


class EngineError(Exception):
    pass


class Agent:
    __slots__ = (
        "id", "x", "y", "home_id", "work_id", "activity", "target_id",
        "intent", "hunger", "energy", "social", "balance", "friends",
        "interests", "meal_ticks_left", "sleep_rate", "exit_low_days",
        "work_skip_today", "anomaly", "poi", "last_positions",
    )

    def __init__(self, agent_id: int):
        self.id = agent_id
        self.x = 0.0
        self.y = 0.0
        self.home_id = -1
        self.work_id = -1
        self.activity = AT_HOME
        self.target_id = -1
        self.intent = INTENT_HOME
        self.hunger = 0.0
        self.energy = 0.0
        self.social = 0.0
        self.balance = 0.0
        self.friends = set()
        self.interests = []
        self.meal_ticks_left = 0
        self.sleep_rate = 0.0
        self.exit_low_days = 0
        self.work_skip_today = False
        self.anomaly = None
        self.poi = -1
        self.last_positions = []


@dataclass
class RunSummary:
    run_id: str = ""
    status: str = "ok"
    ticks_executed: int = 0
    agents_exited: int = 0
    record_counts: dict = field(default_factory=dict)
    init_seconds: float = 0.0
    sim_seconds: float = 0.0
    out_dir: str = ""
    error: str = ""


def check_exit(agent: Agent, threshold: float, at_end_of_day: bool) -> bool:
    """Exit after EXIT_GRACE_DAYS consecutive end-of-days below threshold."""
    if not at_end_of_day:
        return False
    if agent.balance < threshold:
        agent.exit_low_days += 1
    else:
        agent.exit_low_days = 0
    return agent.exit_low_days >= EXIT_GRACE_DAYS


class SimWorld:
    """Complete mutable simulation state; single-threaded by contract."""

    def __init__(self, params: SimParams, world_map: WorldMap, schema=DEFAULT_SCHEMA):
        errors = validate_params(params, schema)
        if errors:
            raise EngineError("invalid params: " + "; ".join(errors))
        self.params = params
        self.schema = schema
        self.map = world_map
        self.tick = 0
        self.rng = Rng(params.seed)
        self.agents = []
        self.pair_counters = {}
        self.anomaly_specs = []
        self.sample_interval = 5
        self.branch = ""
        self.writer = None
        self.mid_step = False

        # Cached parameter values (hot path).
        g = params.get
        self.p_walk_step = g("walk_speed_mps", schema) * TICK_SECONDS
        self.p_hunger_growth = g("hunger_growth_per_tick", schema)
        self.p_hunger_threshold = g("hunger_threshold", schema)
        self.p_meal_ticks = int(g("meal_duration_ticks", schema))
        self.p_energy_growth = g("energy_growth_per_tick", schema)
        self.p_sleep_start = g("sleep_start_hour", schema) * 60.0
        self.p_sleep_ticks = g("sleep_duration_hours", schema) * 60.0
        self.p_work_start = g("work_start_hour", schema) * 60.0
        self.p_work_ticks = g("work_duration_hours", schema) * 60.0
        self.p_income = g("income_per_work_tick", schema)
        self.p_rent = g("rent_per_day", schema)
        self.p_social_growth = g("social_growth_per_tick", schema)
        self.p_social_threshold = g("social_threshold", schema)
        self.p_exit_threshold = g("exit_balance_threshold", schema)
        self.p_exit_enabled = bool(g("exit_enabled", schema))

        self._recreation = world_map.by_kind("recreation")
        self._poi_by_id = world_map.pois
        self._ts_cache = (-1, "")

        self._init_agents()

    # -- initialization -------------------------------------------------

    def _init_agents(self):
        params, world_map, rng = self.params, self.map, self.rng
        if params.num_agents < 1:
            raise EngineError("num_agents must be >= 1")
        homes = world_map.by_kind("home")
        works = world_map.by_kind("workplace")
        rng.shuffle(homes)
        rng.shuffle(works)
        n_interests = int(params.get("num_interests", self.schema))
        n_interests = min(n_interests, len(self._recreation))
        init_balance = params.get("rent_per_day", self.schema) / params.get(
            "rent_cost_ratio", self.schema)
        for i in range(params.num_agents):
            a = Agent(i)
            home = homes[i % len(homes)]
            work = works[i % len(works)]
            a.home_id = home.id
            a.work_id = work.id
            a.x, a.y = home.x, home.y
            a.poi = home.id
            a.interests = [p.id for p in rng.sample(self._recreation, n_interests)]
            a.hunger = rng.uniform(0.0, 0.3)
            a.energy = rng.uniform(0.0, 0.3)
            a.social = rng.uniform(0.0, 0.3)
            a.balance = init_balance
            self.agents.append(a)

    def configure_anomalies(self, specs):
        for s in specs:
            errors = s.validate(num_days=self.params.num_days, world_map=self.map)
            if errors:
                raise EngineError("invalid anomaly spec: " + "; ".join(errors))
        self.anomaly_specs = list(specs)

    # -- clock helpers --------------------------------------------------

    def timestamp(self, tick: int) -> str:
        cached_tick, cached = self._ts_cache
        if cached_tick == tick:
            return cached
        ts = (START_DATETIME + datetime.timedelta(minutes=tick)).isoformat()
        self._ts_cache = (tick, ts)
        return ts

    def _in_sleep_window(self, tod: float) -> bool:
        return (tod - self.p_sleep_start) % TICKS_PER_DAY < self.p_sleep_ticks

    def _in_work_window(self, tod: float) -> bool:
        return self.p_work_start <= tod < self.p_work_start + self.p_work_ticks

    def _is_workday(self, day: int) -> bool:
        return day % 7 < 5

    # -- anomaly machinery ---------------------------------------------

    def _emit_label(self, agent, spec_idx, onset_tick, end_tick):
        spec = self.anomaly_specs[spec_idx]
        agent.anomaly = ActiveAnomaly(spec_idx, spec.kind, spec.prob,
                                      onset_tick, end_tick)
        if self.writer is not None:
            t = self.tick
            self.writer.write("ground_truth", (
                str(t), self.timestamp(t), str(agent.id), spec.kind,
                spec.level, str(onset_tick), str(end_tick)))
        if spec.kind == "work":
            agent.work_skip_today = self.rng.random() < spec.prob

    def _assign_anomalies_day_start(self, day: int):
        t = self.tick
        for idx, spec in enumerate(self.anomaly_specs):
            window_end = (spec.end_day + 1) * TICKS_PER_DAY
            if spec.assignment == anomaly_mod.ASSIGN_RANDOM and day == spec.start_day:
                for a in self.agents:
                    if a.activity != EXITED and a.anomaly is None \
                            and self.rng.random() < spec.fraction:
                        self._emit_label(a, idx, t, window_end)
            elif spec.assignment == anomaly_mod.ASSIGN_INFECTIOUS and day == spec.start_day:
                live = [a for a in self.agents if a.activity != EXITED
                        and a.anomaly is None]
                count = min(spec.initial_count, len(live))
                for a in self.rng.sample(live, count):
                    self._emit_label(a, idx, t, window_end)
            elif spec.assignment == anomaly_mod.ASSIGN_GLOBAL and day in spec.days:
                day_end = (day + 1) * TICKS_PER_DAY
                for a in self.agents:
                    if a.activity != EXITED and a.anomaly is None:
                        self._emit_label(a, idx, t, day_end)

    def _on_arrival_anomaly_hook(self, agent, poi_id: int, day: int):
        if agent.anomaly is not None:
            return
        for idx, spec in enumerate(self.anomaly_specs):
            if spec.assignment == anomaly_mod.ASSIGN_LOCATION \
                    and spec.trigger_poi == poi_id \
                    and spec.start_day <= day <= spec.end_day:
                self._emit_label(agent, idx, self.tick,
                                 (spec.end_day + 1) * TICKS_PER_DAY)
                return

    def _infectious_spread(self):
        t = self.tick
        day = t // TICKS_PER_DAY
        active_specs = [
            (idx, s) for idx, s in enumerate(self.anomaly_specs)
            if s.assignment == anomaly_mod.ASSIGN_INFECTIOUS
            and s.start_day <= day <= s.end_day
        ]
        if not active_specs:
            return
        occupancy = {}
        for a in self.agents:
            if a.activity != EXITED and a.poi >= 0:
                occupancy.setdefault(a.poi, []).append(a)
        newly = []
        for idx, spec in active_specs:
            window_end = (spec.end_day + 1) * TICKS_PER_DAY
            for poi_id in sorted(occupancy):
                group = occupancy[poi_id]
                flagged = [a for a in group if a.anomaly is not None
                           and a.anomaly.spec_idx == idx
                           and a.anomaly.active_at(t)]
                if not flagged:
                    continue
                for a in group:
                    if a.anomaly is not None:
                        continue
                    for _ in flagged:
                        if self.rng.random() < spec.transmit_prob:
                            newly.append((a, idx, window_end))
                            break
        for a, idx, window_end in newly:
            if a.anomaly is None:
                self._emit_label(a, idx, self.tick, window_end)

    # -- decision helpers ----------------------------------------------

    def _start_travel(self, agent, target_poi, intent):
        if agent.poi == target_poi.id:
            self._arrive(agent, target_poi, intent, emit_checkin=(intent == INTENT_EAT))
            return
        agent.activity = TRAVELING
        agent.target_id = target_poi.id
        agent.intent = intent
        agent.poi = -1

    def _arrive(self, agent, poi, intent, emit_checkin=True):
        t = self.tick
        agent.x, agent.y = poi.x, poi.y
        agent.poi = poi.id
        agent.target_id = -1
        if emit_checkin and self.writer is not None:
            self.writer.write("checkin", (
                str(t), self.timestamp(t), str(agent.id), str(poi.id), poi.kind))
        self._on_arrival_anomaly_hook(agent, poi.id, t // TICKS_PER_DAY)
        tod = t % TICKS_PER_DAY
        if intent == INTENT_EAT:
            cost = MEAL_COST_RESTAURANT if poi.kind == "restaurant" else MEAL_COST_HOME
            agent.balance -= cost
            agent.meal_ticks_left = self.p_meal_ticks
            agent.activity = EATING
        elif intent == INTENT_SLEEP:
            if self._in_sleep_window(tod):
                self._begin_sleep(agent, tod)
            else:
                agent.activity = AT_HOME
        elif intent == INTENT_WORK:
            if self._in_work_window(tod) and self._is_workday(t // TICKS_PER_DAY):
                agent.activity = WORKING
            else:
                agent.activity = AT_HOME
        elif intent == INTENT_RECREATE:
            occupants = sum(1 for b in self.agents
                            if b.activity == RECREATING and b.poi == poi.id)
            if occupants >= poi.capacity:
                home = self._poi_by_id[agent.home_id]
                self._start_travel(agent, home, INTENT_HOME)
            else:
                agent.activity = RECREATING
        else:
            agent.activity = AT_HOME

    def _begin_sleep(self, agent, tod):
        remaining = self.p_sleep_ticks - ((tod - self.p_sleep_start) % TICKS_PER_DAY)
        agent.sleep_rate = agent.energy / remaining if remaining >= 1.0 else agent.energy
        agent.activity = SLEEPING

    def _start_meal(self, agent):
        if agent.poi == agent.work_id:
            restaurant = self.map.grid.nearest(agent.x, agent.y, "restaurant")
            if restaurant is not None:
                self._start_travel(agent, restaurant, INTENT_EAT)
                return
        home = self._poi_by_id[agent.home_id]
        self._start_travel(agent, home, INTENT_EAT)

    def _choose_recreation(self, agent):
        t = self.tick
        an = agent.anomaly
        if an is not None and an.kind == "social" and an.active_at(t) \
                and self.rng.random() < an.prob:
            return self.rng.choice(self._recreation)
        return self._poi_by_id[self.rng.choice(agent.interests)]

    def _decide(self, agent, tod, day):
        if self._in_sleep_window(tod):
            if agent.poi == agent.home_id:
                self._begin_sleep(agent, tod)
            else:
                self._start_travel(agent, self._poi_by_id[agent.home_id], INTENT_SLEEP)
        elif agent.hunger >= self.p_hunger_threshold:
            self._start_meal(agent)
        elif self._is_workday(day) and self._in_work_window(tod) \
                and not agent.work_skip_today:
            if agent.poi == agent.work_id:
                agent.activity = WORKING
            else:
                self._start_travel(agent, self._poi_by_id[agent.work_id], INTENT_WORK)
        elif agent.social >= self.p_social_threshold or (
                agent.activity == RECREATING and agent.social > 0.0):
            if agent.activity == RECREATING:
                pass  # stay put until the need drains
            else:
                self._start_travel(agent, self._choose_recreation(agent),
                                   INTENT_RECREATE)
        else:
            if agent.poi == agent.home_id:
                agent.activity = AT_HOME
            else:
                self._start_travel(agent, self._poi_by_id[agent.home_id], INTENT_HOME)

    def _move(self, agent):
        target = self._poi_by_id[agent.target_id]
        dx = target.x - agent.x
        dy = target.y - agent.y
        dist = (dx * dx + dy * dy) ** 0.5
        if dist <= self.p_walk_step:
            self._arrive(agent, target, agent.intent)
        else:
            f = self.p_walk_step / dist
            agent.x += dx * f
            agent.y += dy * f

    # -- the tick -------------------------------------------------------

    def step(self):
        """Advance one tick; emits records through the attached writer."""
        t = self.tick
        self.mid_step = True
        tod = t % TICKS_PER_DAY
        day = t // TICKS_PER_DAY
        rng = self.rng

        if tod == 0:
            for a in self.agents:
                if a.activity != EXITED:
                    a.balance -= self.p_rent
                    a.work_skip_today = False
                    if a.anomaly is not None and not a.anomaly.active_at(t):
                        a.anomaly = None
            self._assign_anomalies_day_start(day)
            # Daily work-skip decision for already-flagged work anomalies.
            for a in self.agents:
                if a.activity != EXITED and a.anomaly is not None \
                        and a.anomaly.kind == "work" and a.anomaly.active_at(t) \
                        and a.anomaly.onset_tick < t:
                    a.work_skip_today = rng.random() < a.anomaly.prob

        for a in self.agents:
            act = a.activity
            if act == EXITED:
                continue

            # (1) needs accrue
            growth = self.p_hunger_growth
            an = a.anomaly
            if an is not None and an.kind == "hunger" and an.active_at(t) \
                    and rng.random() < an.prob:
                growth *= HUNGER_ANOMALY_FACTOR
            a.hunger = min(1.0, a.hunger + growth)
            if act != SLEEPING:
                a.energy = min(1.0, a.energy + self.p_energy_growth)
            a.social = min(1.0, a.social + self.p_social_growth)

            # (2)+(3) activity progression, decisions, movement
            if act == SLEEPING:
                if self._in_sleep_window(tod):
                    a.energy = max(0.0, a.energy - a.sleep_rate)
                else:
                    a.activity = AT_HOME
                    self._decide(a, tod, day)
            elif act == EATING:
                a.meal_ticks_left -= 1
                if a.meal_ticks_left <= 0:
                    a.hunger = 0.0
                    a.activity = AT_HOME
                    self._decide(a, tod, day)
            elif act == TRAVELING:
                self._move(a)
            else:
                self._decide(a, tod, day)
                if a.activity == TRAVELING:
                    self._move(a)

            # (4) income
            if a.activity == WORKING:
                a.balance += self.p_income

        # (5) social mechanics at recreation sites
        groups = {}
        for a in self.agents:
            if a.activity == RECREATING:
                a.social = max(0.0, a.social - SOCIAL_DECAY_PER_TICK)
                groups.setdefault(a.poi, []).append(a)
        for poi_id in sorted(groups):
            group = groups[poi_id]
            if len(group) < 2:
                continue
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    a, b = group[i], group[j]
                    if b.id in a.friends:
                        continue
                    key = (a.id, b.id)
                    n = self.pair_counters.get(key, 0) + 1
                    self.pair_counters[key] = n
                    if n >= FRIENDSHIP_TICKS:
                        a.friends.add(b.id)
                        b.friends.add(a.id)
                        del self.pair_counters[key]
                        if self.writer is not None:
                            self.writer.write("social_link", (
                                str(t), self.timestamp(t), str(a.id),
                                str(b.id), "create"))

        self._infectious_spread()

        # trajectory sampling
        if t % self.sample_interval == 0:
            w = self.writer
            ts = self.timestamp(t)
            for a in self.agents:
                if a.activity == EXITED:
                    continue
                if w is not None:
                    w.write("agent_state", (
                        str(t), ts, str(a.id), f"{a.x:.6f}", f"{a.y:.6f}",
                        ACTIVITY_NAMES[a.activity], f"{a.hunger:.6f}",
                        f"{a.energy:.6f}", f"{a.social:.6f}", f"{a.balance:.6f}"))
                a.last_positions.append((a.x, a.y))
                if len(a.last_positions) > LAST_POSITIONS_CAP:
                    del a.last_positions[0]

        # (6) exit evaluation at end of day
        if tod == TICKS_PER_DAY - 1 and self.p_exit_enabled:
            for a in self.agents:
                if a.activity != EXITED and check_exit(a, self.p_exit_threshold, True):
                    a.activity = EXITED

        self.tick = t + 1
        self.mid_step = False

    # -- digests --------------------------------------------------------

    def state_digest(self) -> int:
        from .checkpoint import serialize_world
        return digest64(serialize_world(self))


def init_world(params: SimParams, world_map: WorldMap, schema=DEFAULT_SCHEMA) -> SimWorld:
    return SimWorld(params, world_map, schema)


def run(params: SimParams, world_map: WorldMap, writer, until_tick=None,
        anomaly_specs=(), sample_interval=5, world=None) -> RunSummary:
    """Run to num_days * 1440 ticks (or until_tick) and summarize.

    Pass `world` to continue a resumed simulation instead of a fresh one.
    """
    summary = RunSummary()
    t0 = time.perf_counter()
    if world is None:
        world = SimWorld(params, world_map)
        world.sample_interval = sample_interval
        if anomaly_specs:
            world.configure_anomalies(anomaly_specs)
    world.writer = writer
    summary.init_seconds = time.perf_counter() - t0

    end_tick = params.num_days * TICKS_PER_DAY if until_tick is None else until_tick
    t1 = time.perf_counter()
    start = world.tick
    try:
        while world.tick < end_tick:
            world.step()
    except OSError as e:
        raise EngineError(f"log sink failure at tick {world.tick}: {e}") from e
    summary.sim_seconds = time.perf_counter() - t1
    summary.ticks_executed = world.tick - start
    summary.agents_exited = sum(1 for a in world.agents if a.activity == EXITED)
    summary.record_counts = writer.record_counts() if writer is not None else {}
    return summary
