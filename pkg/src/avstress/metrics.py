"""Episode scoring and campaign statistics.

Criticality of an episode is the negated minimum ego-to-agent center
distance over all post-initial timesteps; higher means more dangerous.
Campaign-level statistics cover collision rate, min-distance and
time-to-collision spreads, and pairwise trajectory diversity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import mean, stdev
from typing import Dict, List, Optional, Sequence

from .geom import Point2, euclidean_distance
from .scenario import Scenario
from .sim import Episode


@dataclass(frozen=True)
class EpisodeScore:
    g: float  # criticality, negative meters
    min_dist: float
    ttc_min: float  # seconds, may be inf
    collided: bool


@dataclass(frozen=True)
class CampaignStats:
    coll_rate: float  # percent
    min_dist_mean: float
    min_dist_std: float
    ttc_mean: float
    ttc_std: float
    ttc_inf_count: int
    ego_asd: float
    agent_asd: float
    n_episodes: int


def _ego_agent_distances(episode: Episode, scenario: Scenario) -> List[float]:
    """Center distances for every (t >= 1, simulated agent) pair."""
    if len(episode.trace) < 2:
        raise ValueError("criticality is undefined for a single-entry trace")
    ego_id = scenario.ego.id
    sim_ids = [a.id for a in scenario.simulated_agents]
    out = []
    for joint in episode.trace[1:]:
        ego = joint.states[ego_id]
        for aid in sim_ids:
            out.append(euclidean_distance(ego.position, joint.states[aid].position))
    return out


def criticality_score(episode: Episode, scenario: Scenario) -> float:
    """Negated minimum ego-to-agent distance over timesteps 1..end."""
    return -min(_ego_agent_distances(episode, scenario))


def min_distance(episode: Episode, scenario: Scenario) -> float:
    return min(_ego_agent_distances(episode, scenario))


def ttc_min(episode: Episode, scenario: Scenario) -> float:
    """Minimum instantaneous time-to-collision over steps and agents.

    gap = center distance minus half the two body lengths; closing speed is
    the forward difference of the gap. TTC is gap/closing when the agents
    are approaching with positive gap, 0 at contact, +inf otherwise.
    """
    if len(episode.trace) < 2:
        raise ValueError("TTC needs at least 2 trace entries")
    ego = scenario.ego
    dt = scenario.sim.dt
    best = math.inf
    for agent in scenario.simulated_agents:
        contact = 0.5 * (ego.length + agent.length)
        gaps = [
            euclidean_distance(
                joint.states[ego.id].position, joint.states[agent.id].position
            )
            - contact
            for joint in episode.trace
        ]
        for k in range(len(gaps) - 1):
            if gaps[k] <= 0.0:
                return 0.0
            closing = (gaps[k] - gaps[k + 1]) / dt
            if closing > 0.0:
                best = min(best, gaps[k] / closing)
        if gaps[-1] <= 0.0:
            return 0.0
    return best


def score_episode(episode: Episode, scenario: Scenario) -> EpisodeScore:
    md = min_distance(episode, scenario)
    return EpisodeScore(
        g=-md,
        min_dist=md,
        ttc_min=ttc_min(episode, scenario),
        collided=episode.collision is not None,
    )


def trajectory_distance(
    tau_a: Sequence[Point2], tau_b: Sequence[Point2]
) -> float:
    """Mean distance between corresponding states, truncated to the shorter
    trajectory (collision-truncated episodes compare on their common prefix).
    """
    if not tau_a or not tau_b:
        raise ValueError("trajectories must be nonempty")
    n = min(len(tau_a), len(tau_b))
    return sum(euclidean_distance(tau_a[k], tau_b[k]) for k in range(n)) / n


def asd(trajectories: Sequence[Sequence[Point2]], convention: str = "paper") -> float:
    """Pairwise average self-distance of a trajectory set.

    The default normalization divides the upper-triangle sum by
    n_e * (n_e - 1), i.e. half the mean pairwise distance;
    convention="mean_pairwise" divides by the number of pairs instead.
    """
    n_e = len(trajectories)
    if n_e < 2:
        raise ValueError("ASD needs at least 2 trajectories")
    if convention not in ("paper", "mean_pairwise"):
        raise ValueError(f"unknown ASD convention '{convention}'")
    total = 0.0
    for i in range(n_e):
        for j in range(i + 1, n_e):
            total += trajectory_distance(trajectories[i], trajectories[j])
    if convention == "paper":
        return total / (n_e * (n_e - 1))
    return total / (n_e * (n_e - 1) / 2)


def agent_trajectory(episode: Episode, agent_id: str) -> List[Point2]:
    return [joint.states[agent_id].position for joint in episode.trace]


def campaign_stats(
    episodes: Sequence[Episode],
    scenario: Scenario,
    scores: Optional[Sequence[EpisodeScore]] = None,
    asd_convention: str = "paper",
) -> CampaignStats:
    """Aggregate statistics over the successful episodes of one campaign."""
    episodes = [e for e in episodes if not e.failed and len(e.trace) >= 2]
    n_e = len(episodes)
    if n_e < 2:
        raise ValueError("campaign statistics need at least 2 successful episodes")
    if scores is None:
        scores = [score_episode(e, scenario) for e in episodes]

    collided = sum(1 for s in scores if s.collided)
    min_dists = [s.min_dist for s in scores]
    finite_ttc = [s.ttc_min for s in scores if math.isfinite(s.ttc_min)]
    ttc_inf = n_e - len(finite_ttc)

    ego_trajs = [agent_trajectory(e, scenario.ego.id) for e in episodes]
    agent_ids = [a.id for a in scenario.simulated_agents]
    agent_asds = []
    for aid in agent_ids:
        trajs = [agent_trajectory(e, aid) for e in episodes]
        agent_asds.append(asd(trajs, convention=asd_convention))

    return CampaignStats(
        coll_rate=100.0 * collided / n_e,
        min_dist_mean=mean(min_dists),
        min_dist_std=stdev(min_dists) if n_e > 1 else 0.0,
        ttc_mean=mean(finite_ttc) if finite_ttc else math.inf,
        ttc_std=stdev(finite_ttc) if len(finite_ttc) > 1 else 0.0,
        ttc_inf_count=ttc_inf,
        ego_asd=asd(ego_trajs, convention=asd_convention),
        agent_asd=mean(agent_asds),
        n_episodes=n_e,
    )
