"""Closed-loop episode engine and the goal-conditioned reactive agent policy.

The engine couples a planner under test (which owns the ego agent) with one
policy per simulated agent. All agents update synchronously: every policy
and the planner read the joint state at step t and write states for t+1, so
iteration order never matters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Tuple

from .geom import Point2, OrientedBox, boxes_overlap, normalize_angle
from .scenario import Scenario

WHEELBASE = 2.8
STEER_LIMIT = 0.5
ACCEL_MIN = -6.0
ACCEL_MAX = 3.0
COMFORT_DECEL = 2.0


class SimulationError(RuntimeError):
    """Raised when a planner or policy fails mid-episode."""


@dataclass(frozen=True)
class AgentState:
    position: Point2
    heading: float
    speed: float

    def __post_init__(self):
        if not math.isfinite(self.heading) or not math.isfinite(self.speed):
            raise ValueError("non-finite agent state")
        if self.speed < 0:
            raise ValueError("agent speed must be >= 0")


@dataclass(frozen=True)
class JointState:
    timestep: int
    states: Dict[str, AgentState]


@dataclass
class Episode:
    scenario_id: str
    prompts_world: Dict[str, Point2]
    trace: List[JointState]
    collision: Optional[Tuple[int, Tuple[str, str]]] = None
    failed: bool = False
    failure_reason: str = ""


class PlannerHandle(Protocol):
    def plan(self, world: JointState, scenario: Scenario) -> List[AgentState]:
        """Ego states for the next replan_every steps. Must be deterministic."""


class PolicyHandle(Protocol):
    def step(self, world: JointState) -> AgentState:
        """Next state of the owned agent. Must be deterministic given world."""


def bicycle_step(
    state: AgentState, accel: float, steer: float, dt: float, v_max: float
) -> AgentState:
    """One kinematic-bicycle integration step with speed clamped to [0, v_max]."""
    steer = min(STEER_LIMIT, max(-STEER_LIMIT, steer))
    accel = min(ACCEL_MAX, max(ACCEL_MIN, accel))
    v = state.speed
    x = state.position.x + v * math.cos(state.heading) * dt
    y = state.position.y + v * math.sin(state.heading) * dt
    heading = normalize_angle(state.heading + v / WHEELBASE * math.tan(steer) * dt)
    speed = min(max(v + accel * dt, 0.0), v_max)
    return AgentState(Point2(x, y), heading, speed)


def pure_pursuit_steer(state: AgentState, target: Point2) -> float:
    """Steering angle toward a target point, clamped to the wheel limit."""
    dx = target.x - state.position.x
    dy = target.y - state.position.y
    dist = math.hypot(dx, dy)
    if dist < 1.0:
        return 0.0
    alpha = normalize_angle(math.atan2(dy, dx) - state.heading)
    lookahead = max(5.0, 1.0 * state.speed)
    steer = math.atan2(2.0 * WHEELBASE * math.sin(alpha), lookahead)
    return min(STEER_LIMIT, max(-STEER_LIMIT, steer))


@dataclass(frozen=True)
class IdmParams:
    accel_max: float = 2.0
    decel_comfort: float = 3.0
    gap_min: float = 2.0
    headway: float = 1.5
    ahead_range: float = 60.0
    corridor_half_width: float = 2.0


class ReactivePolicy:
    """Goal-seeking driver: pure pursuit laterally, stopping + car-following
    longitudinally. The goal point plays the role of a behavior prompt; it is
    fixed at construction for the whole episode.
    """

    def __init__(
        self,
        scenario: Scenario,
        agent_id: str,
        goal: Point2,
        idm: IdmParams = IdmParams(),
    ):
        self.scenario = scenario
        self.agent_id = agent_id
        self.goal = goal
        self.idm = idm
        cfg = next(a for a in scenario.agents if a.id == agent_id)
        self.v_desired = min(cfg.v_desired, scenario.sim.v_max)
        self.length = cfg.length
        self._lengths = {a.id: a.length for a in scenario.agents}

    def _leader_gap(self, me: AgentState, world: JointState):
        """Nearest agent ahead inside the forward corridor; returns (gap, speed)."""
        c, s = math.cos(me.heading), math.sin(me.heading)
        best = None
        for aid, other in world.states.items():
            if aid == self.agent_id:
                continue
            rx = other.position.x - me.position.x
            ry = other.position.y - me.position.y
            lon = rx * c + ry * s
            lat = -rx * s + ry * c
            if lon <= 0.0 or lon > self.idm.ahead_range:
                continue
            if abs(lat) > self.idm.corridor_half_width:
                continue
            if best is None or lon < best[0]:
                gap = lon - 0.5 * (self.length + self._lengths[aid])
                best = (lon, gap, other.speed)
        if best is None:
            return None
        return best[1], best[2]

    def _follow_accel(self, me: AgentState, world: JointState) -> float:
        found = self._leader_gap(me, world)
        if found is None:
            return ACCEL_MAX
        gap, v_lead = found
        gap = max(gap, 0.1)
        p = self.idm
        v = me.speed
        v0 = max(self.v_desired, 0.1)
        s_star = p.gap_min + v * p.headway + v * (v - v_lead) / (
            2.0 * math.sqrt(p.accel_max * p.decel_comfort)
        )
        return p.accel_max * (1.0 - (v / v0) ** 4 - (max(s_star, 0.0) / gap) ** 2)

    def step(self, world: JointState) -> AgentState:
        me = world.states[self.agent_id]
        dt = self.scenario.sim.dt
        gx = self.goal.x - me.position.x
        gy = self.goal.y - me.position.y
        dist_goal = math.hypot(gx, gy)
        behind = gx * math.cos(me.heading) + gy * math.sin(me.heading) < 0.0
        if behind:
            v_target = 0.0
        else:
            v_target = min(self.v_desired, math.sqrt(2.0 * COMFORT_DECEL * dist_goal))
        a_goal = (v_target - me.speed) / dt
        a_follow = self._follow_accel(me, world)
        accel = min(a_goal, a_follow)
        accel = min(ACCEL_MAX, max(ACCEL_MIN, accel))
        steer = pure_pursuit_steer(me, self.goal)
        return bicycle_step(me, accel, steer, dt, self.scenario.sim.v_max)


class ScriptedPolicy:
    """Replays a fixed list of states; used for stubs and premise checks."""

    def __init__(self, agent_id: str, states: List[AgentState]):
        self.agent_id = agent_id
        self.states = states

    def step(self, world: JointState) -> AgentState:
        idx = min(world.timestep, len(self.states) - 1)
        return self.states[idx]


def footprint_box(state: AgentState, length: float, width: float) -> OrientedBox:
    return OrientedBox(state.position, state.heading, length, width)


def _find_collision(
    world: JointState, scenario: Scenario
) -> Optional[Tuple[str, str]]:
    agents = scenario.agents
    for i in range(len(agents)):
        for j in range(i + 1, len(agents)):
            a, b = agents[i], agents[j]
            box_a = footprint_box(world.states[a.id], a.length, a.width)
            box_b = footprint_box(world.states[b.id], b.length, b.width)
            if boxes_overlap(box_a, box_b):
                return (a.id, b.id)
    return None


def initial_joint_state(scenario: Scenario) -> JointState:
    states = {
        a.id: AgentState(
            Point2(a.initial_state.x, a.initial_state.y),
            a.initial_state.heading,
            a.initial_state.speed,
        )
        for a in scenario.agents
    }
    return JointState(0, states)


def simulate_episode(
    scenario: Scenario,
    goals: Dict[str, Point2],
    planner: PlannerHandle,
    policies: Dict[str, PolicyHandle],
) -> Episode:
    """Roll out one closed-loop episode.

    The planner is consulted every replan_every steps and its plan overwrites
    the ego states until the next replan; simulated agents step their
    policies on the same joint state. The episode ends at the horizon, at
    the first collision, or at a planner/policy failure.
    """
    ego_id = scenario.ego.id
    replan = scenario.sim.replan_every
    T = scenario.sim.horizon_steps
    episode = Episode(
        scenario_id=scenario.scenario_id,
        prompts_world=dict(goals),
        trace=[initial_joint_state(scenario)],
    )

    pair = _find_collision(episode.trace[0], scenario)
    if pair is not None:
        episode.collision = (0, pair)
        return episode

    plan: List[AgentState] = []
    for t in range(T):
        world = episode.trace[-1]
        if t % replan == 0:
            try:
                plan = planner.plan(world, scenario)
            except Exception as exc:
                episode.failed = True
                episode.failure_reason = f"planner failed at step {t}: {exc}"
                return episode
            if len(plan) != replan:
                episode.failed = True
                episode.failure_reason = (
                    f"planner returned {len(plan)} states, expected {replan}"
                )
                return episode
        next_states = {ego_id: plan[t % replan]}
        for aid, policy in sorted(policies.items()):
            try:
                next_states[aid] = policy.step(world)
            except Exception as exc:
                episode.failed = True
                episode.failure_reason = f"policy '{aid}' failed at step {t}: {exc}"
                return episode
        new_world = JointState(t + 1, next_states)
        episode.trace.append(new_world)
        pair = _find_collision(new_world, scenario)
        if pair is not None:
            episode.collision = (t + 1, pair)
            return episode
    return episode
