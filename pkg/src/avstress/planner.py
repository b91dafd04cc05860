"""Reference planner under test.

A receding-horizon lattice planner: it predicts every other agent as
tracking its current lane center at constant speed, enumerates target-lane x
constant-acceleration candidates, discards candidates that come closer than
a safety margin to any predicted waypoint, and picks the cheapest survivor
(terminal distance to the ego goal plus a small comfort penalty). The
constant-velocity assumption is exactly the weakness a goal-prompt search
is meant to exploit.
"""
from __future__ import annotations

import json
import math
import subprocess
import sys
from dataclasses import dataclass
from typing import List, Optional

from .geom import Point2, point_at_arclength, project_to_polyline
from .scenario import Lane, MapModel, Scenario
from .sim import AgentState, JointState, bicycle_step, pure_pursuit_steer

LANE_SNAP_RANGE = 10.0
LATERAL_DECAY_TAU = 1.0


@dataclass(frozen=True)
class Prediction:
    agent_id: str
    waypoints: List[Point2]  # one per future step, length = horizon


@dataclass(frozen=True)
class PlanCandidate:
    target_lane: str
    accel: float
    states: List[AgentState]
    cost: float
    min_clearance: float


@dataclass(frozen=True)
class PlannerParams:
    d_safe: float = 3.0
    horizon_steps: int = 30
    accel_grid: tuple = (-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    comfort_weight: float = 0.1


def predict_constant_velocity(
    agent: AgentState, map_model: MapModel, horizon: int, dt: float
) -> Prediction:
    """Lane-center tracking at constant speed.

    The agent is snapped to the nearest centerline; its lateral offset decays
    exponentially toward the center while arc-length advances at the current
    speed. Agents far from every lane fall back to a straight line.
    """
    lane, s0, l0, dist = map_model.nearest_lane(agent.position)
    waypoints = []
    if dist > LANE_SNAP_RANGE:
        c, s = math.cos(agent.heading), math.sin(agent.heading)
        for k in range(1, horizon + 1):
            waypoints.append(
                Point2(
                    agent.position.x + k * agent.speed * dt * c,
                    agent.position.y + k * agent.speed * dt * s,
                )
            )
    else:
        total = lane.centerline.total_length
        for k in range(1, horizon + 1):
            sk = min(s0 + k * agent.speed * dt, total)
            lk = l0 * math.exp(-k * dt / LATERAL_DECAY_TAU)
            waypoints.append(point_at_arclength(lane.centerline, sk, lk).position)
    return Prediction(agent_id="", waypoints=waypoints)


def _rollout(
    state: AgentState, lane: Lane, accel: float, horizon: int, dt: float, v_max: float
) -> List[AgentState]:
    """Constant-acceleration pure-pursuit rollout onto a lane centerline."""
    states = []
    cur = state
    for _ in range(horizon):
        s, _, _ = project_to_polyline(cur.position, lane.centerline)
        lookahead = max(5.0, 1.0 * cur.speed)
        s_target = min(s + lookahead, lane.centerline.total_length)
        target = point_at_arclength(lane.centerline, s_target).position
        steer = pure_pursuit_steer(cur, target)
        cur = bicycle_step(cur, accel, steer, dt, v_max)
        states.append(cur)
    return states


class LatticePlanner:
    """Deterministic candidate-enumeration planner (the system under test)."""

    def __init__(self, params: PlannerParams = PlannerParams()):
        self.params = params

    def _candidate_lanes(self, ego: AgentState, scenario: Scenario) -> List[Lane]:
        current, _, _, _ = scenario.map.nearest_lane(ego.position)
        lanes = [current]
        for ref in (current.left_neighbor, current.right_neighbor):
            if ref is not None:
                lanes.append(scenario.map.lane(ref))
        return lanes

    def d_safe(self, scenario: Scenario) -> float:
        return scenario.planner_overrides.get("d_safe", self.params.d_safe)

    def candidates(self, world: JointState, scenario: Scenario) -> List[PlanCandidate]:
        p = self.params
        horizon = int(scenario.planner_overrides.get("horizon_steps", p.horizon_steps))
        dt = scenario.sim.dt
        ego_id = scenario.ego.id
        ego = world.states[ego_id]

        predictions = [
            predict_constant_velocity(world.states[aid], scenario.map, horizon, dt)
            for aid in sorted(world.states)
            if aid != ego_id
        ]

        out = []
        for lane in self._candidate_lanes(ego, scenario):
            for accel in p.accel_grid:
                states = _rollout(ego, lane, accel, horizon, dt, scenario.sim.v_max)
                clearance = math.inf
                for pred in predictions:
                    for k in range(horizon):
                        d = math.hypot(
                            states[k].position.x - pred.waypoints[k].x,
                            states[k].position.y - pred.waypoints[k].y,
                        )
                        clearance = min(clearance, d)
                terminal = states[-1].position
                cost = (
                    math.hypot(
                        terminal.x - scenario.ego_goal.x,
                        terminal.y - scenario.ego_goal.y,
                    )
                    + p.comfort_weight * abs(accel)
                )
                out.append(
                    PlanCandidate(
                        target_lane=lane.id,
                        accel=accel,
                        states=states,
                        cost=cost,
                        min_clearance=clearance,
                    )
                )
        return out

    def plan(self, world: JointState, scenario: Scenario) -> List[AgentState]:
        cands = self.candidates(world, scenario)
        d_safe = self.d_safe(scenario)
        feasible = [c for c in cands if c.min_clearance >= d_safe]
        if feasible:
            best = min(feasible, key=lambda c: c.cost)
        else:
            best = max(cands, key=lambda c: c.min_clearance)
        return best.states[: scenario.sim.replan_every]


class ConstantVelocityEgoStub:
    """Planner stub that keeps the ego at its current heading and speed."""

    def plan(self, world: JointState, scenario: Scenario) -> List[AgentState]:
        ego = world.states[scenario.ego.id]
        dt = scenario.sim.dt
        out = []
        cur = ego
        for _ in range(scenario.sim.replan_every):
            cur = AgentState(
                Point2(
                    cur.position.x + cur.speed * math.cos(cur.heading) * dt,
                    cur.position.y + cur.speed * math.sin(cur.heading) * dt,
                ),
                cur.heading,
                cur.speed,
            )
            out.append(cur)
        return out


def _state_to_wire(state: AgentState) -> list:
    return [state.position.x, state.position.y, state.heading, state.speed]


def _state_from_wire(row) -> AgentState:
    return AgentState(Point2(float(row[0]), float(row[1])), float(row[2]), float(row[3]))


class StdioPlannerAdapter:
    """Bridges plan() calls to an external planner process over stdio.

    Protocol: one JSON line per request
        {"timestep": t, "agents": {id: [x, y, heading, speed], ...}}
    answered by one JSON line
        {"states": [[x, y, heading, speed], ...]}   (length = replan_every)
    The child receives the scenario config file path as its last argument.
    """

    def __init__(self, command: List[str], scenario_path: str):
        self._proc = subprocess.Popen(
            command + [scenario_path],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def plan(self, world: JointState, scenario: Scenario) -> List[AgentState]:
        request = {
            "timestep": world.timestep,
            "agents": {aid: _state_to_wire(s) for aid, s in world.states.items()},
        }
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError("external planner closed its output stream")
        reply = json.loads(line)
        return [_state_from_wire(row) for row in reply["states"]]

    def close(self):
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)


def serve_stdio(planner, scenario: Scenario, stdin=None, stdout=None) -> None:
    """Serve a Python planner over the stdio protocol (used by the child)."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        world = JointState(
            int(request["timestep"]),
            {aid: _state_from_wire(row) for aid, row in request["agents"].items()},
        )
        states = planner.plan(world, scenario)
        stdout.write(
            json.dumps({"states": [_state_to_wire(s) for s in states]}) + "\n"
        )
        stdout.flush()


def main() -> None:  # pragma: no cover - exercised via subprocess in tests
    from .scenario import load_scenario_file

    scenario = load_scenario_file(sys.argv[-1])
    serve_stdio(LatticePlanner(), scenario)


if __name__ == "__main__":  # pragma: no cover
    main()
