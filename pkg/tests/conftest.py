import math

import pytest

from avstress.geom import Point2
from avstress.scenario import load_scenario
from avstress.sim import AgentState, Episode, JointState

TWO_LANE_YAML = """
map:
  lanes:
    - id: right
      centerline: [[-60.0, 0.0], [300.0, 0.0]]
      width: 3.5
      left_neighbor: left
    - id: left
      centerline: [[-60.0, 3.5], [300.0, 3.5]]
      width: 3.5
      right_neighbor: right
agents:
  - {id: ego, role: ego, x: 0.0, y: 3.5, heading: 0.0, speed: 10.0, length: 4.8, width: 2.0}
  - {id: npc, role: simulated, x: 15.0, y: 3.5, heading: 0.0, speed: 10.0, length: 4.8, width: 2.0}
ego_goal: {x: 90.0, y: 0.0}
goal_domains:
  - {agent_id: npc, lane: left, s_min: 75.0, s_max: 175.0, l_min: -5.25, l_max: 1.75}
sim: {dt: 0.1, horizon_steps: 80, replan_every: 5, v_max: 15.0}
"""


@pytest.fixture
def two_lane_scenario():
    return load_scenario(TWO_LANE_YAML, scenario_id="two_lane")


def make_episode(scenario, positions, collision=None):
    """Episode from {agent_id: [(x, y), ...]} position lists (equal length)."""
    n = len(next(iter(positions.values())))
    trace = []
    for t in range(n):
        states = {
            aid: AgentState(Point2(*pts[t]), 0.0, 0.0) for aid, pts in positions.items()
        }
        trace.append(JointState(t, states))
    return Episode(
        scenario_id=scenario.scenario_id,
        prompts_world={},
        trace=trace,
        collision=collision,
    )


def straight_positions(start, velocity, steps, dt=0.1):
    x0, y0 = start
    vx, vy = velocity
    return [(x0 + k * vx * dt, y0 + k * vy * dt) for k in range(steps)]


def brute_force_min_distance(episode, scenario):
    """Independent exhaustive (t, n) oracle for the criticality score."""
    ego_id = scenario.ego.id
    sim_ids = [a.id for a in scenario.simulated_agents]
    best = math.inf
    for joint in episode.trace[1:]:
        ex = joint.states[ego_id].position
        for aid in sim_ids:
            other = joint.states[aid].position
            d = math.sqrt((ex.x - other.x) ** 2 + (ex.y - other.y) ** 2)
            if d < best:
                best = d
    return best
