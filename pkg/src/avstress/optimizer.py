"""Sequential prompt selection: UCB Bayesian optimization and the Sobol
random baseline, plus the campaign loop that ties sampling, simulation, and
scoring together.

Prompts live in the unit cube: 2 coordinates per prompted agent. The BO
sampler bootstraps its first two prompts from the Sobol sequence (a GP needs
two points to fit), then maximizes UCB over a dense deterministic candidate
set. The Sobol baseline never looks at scores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import surrogate
from .geom import Point2
from .metrics import EpisodeScore, criticality_score, score_episode
from .scenario import Scenario, prompt_to_world
from .sim import Episode, PlannerHandle, ReactivePolicy, simulate_episode
from .sobol import sobol_point, sobol_points

PERTURBATION = 0.02


@dataclass(frozen=True)
class Observation:
    prompt: Tuple[float, ...]
    score: float  # -inf marks a failed episode
    episode_id: str = ""

    @property
    def valid(self) -> bool:
        return math.isfinite(self.score)


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "bo"  # "bo" | "sobol"
    budget: int = 75
    beta: float = 2.0
    candidates: int = 1024
    seed: int = 0
    nu: float = 2.5
    # pin the GP hyperparameters instead of refitting by MLE each iteration
    fixed_params: Optional[surrogate.KernelParams] = None

    def __post_init__(self):
        if self.kind not in ("bo", "sobol"):
            raise ValueError(f"unknown sampler kind '{self.kind}'")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.candidates < 16:
            raise ValueError("candidate count must be >= 16")


def ucb(mean: float, variance: float, beta: float) -> float:
    """Upper confidence bound acquisition value."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    return mean + beta * math.sqrt(variance)


def _candidate_set(history: List[Observation], cfg: SamplerConfig, dim: int) -> np.ndarray:
    cands = sobol_points(cfg.candidates, dim=dim, start=1)
    locals_ = []
    for obs in history:
        base = np.asarray(obs.prompt)
        for signs in np.ndindex(*(2,) * dim):
            delta = np.where(np.array(signs) == 0, -PERTURBATION, PERTURBATION)
            locals_.append(np.clip(base + delta, 0.0, 1.0))
    if locals_:
        cands = np.vstack([cands, np.array(locals_)])
    return cands


def suggest_next(
    history: List[Observation], cfg: SamplerConfig, dim: int = 2
) -> Tuple[float, ...]:
    """Next prompt to evaluate; raises once the budget is exhausted."""
    if len(history) >= cfg.budget:
        raise RuntimeError("sampling budget exhausted")
    if cfg.kind == "sobol":
        return sobol_point(len(history) + 1, dim=dim)

    valid = [obs for obs in history if obs.valid]
    if len(valid) < 2:
        return sobol_point(len(history) + 1, dim=dim)

    X = np.array([obs.prompt for obs in valid])
    y = np.array([obs.score for obs in valid])
    if cfg.fixed_params is not None:
        model = surrogate.build_model(X, y, cfg.fixed_params, standardize=True)
    else:
        model = surrogate.fit(X, y, nu=cfg.nu)
    cands = _candidate_set(history, cfg, dim)
    mean, var = surrogate.posterior_batch(model, cands)
    acq = mean + cfg.beta * np.sqrt(np.maximum(var, 0.0))
    best = int(np.argmax(acq))  # first index wins ties
    return tuple(float(v) for v in cands[best])


@dataclass
class EpisodeRecord:
    iteration: int
    prompt: Tuple[float, ...]
    goals_world: Dict[str, Point2]
    score: float
    episode: Optional[Episode]
    metrics: Optional[EpisodeScore]
    failed: bool = False
    failure_reason: str = ""


@dataclass
class CampaignResult:
    scenario_id: str
    sampler: SamplerConfig
    records: List[EpisodeRecord] = field(default_factory=list)

    @property
    def observations(self) -> List[Observation]:
        return [
            Observation(prompt=r.prompt, score=r.score, episode_id=str(r.iteration))
            for r in self.records
        ]

    @property
    def episodes(self) -> List[Episode]:
        return [r.episode for r in self.records if r.episode is not None]


def split_prompt(
    scenario: Scenario, prompt: Tuple[float, ...]
) -> Dict[str, Point2]:
    """Map a 2N-dimensional prompt to one world goal per simulated agent."""
    goals = {}
    for i, agent in enumerate(scenario.simulated_agents):
        u = (prompt[2 * i], prompt[2 * i + 1])
        domain = scenario.goal_domains[agent.id]
        goals[agent.id] = prompt_to_world(domain, u, scenario.map)
    return goals


def prompt_dim(scenario: Scenario) -> int:
    return 2 * len(scenario.simulated_agents)


PolicyFactory = Callable[[Scenario, str, Point2], object]


def run_campaign(
    scenario: Scenario,
    cfg: SamplerConfig,
    planner: PlannerHandle,
    policy_factory: PolicyFactory = ReactivePolicy,
    episode_sink: Optional[Callable[[EpisodeRecord], None]] = None,
) -> CampaignResult:
    """Run a full sampling campaign: exactly cfg.budget episodes.

    Failed episodes are recorded with score -inf; BO excludes them from GP
    fitting but they still consume budget. The loop is deterministic given
    (scenario, cfg).
    """
    dim = prompt_dim(scenario)
    result = CampaignResult(scenario_id=scenario.scenario_id, sampler=cfg)
    history: List[Observation] = []
    for it in range(cfg.budget):
        prompt = suggest_next(history, cfg, dim=dim)
        goals = split_prompt(scenario, prompt)
        policies = {
            aid: policy_factory(scenario, aid, goal) for aid, goal in goals.items()
        }
        record = EpisodeRecord(
            iteration=it, prompt=prompt, goals_world=goals,
            score=-math.inf, episode=None, metrics=None,
        )
        try:
            episode = simulate_episode(scenario, goals, planner, policies)
            record.episode = episode
            if episode.failed:
                record.failed = True
                record.failure_reason = episode.failure_reason
            else:
                record.metrics = score_episode(episode, scenario)
                record.score = criticality_score(episode, scenario)
        except Exception as exc:
            record.failed = True
            record.failure_reason = str(exc)
        history.append(Observation(prompt=prompt, score=record.score))
        result.records.append(record)
        if episode_sink is not None:
            episode_sink(record)
    return result
