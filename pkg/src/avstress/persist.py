"""On-disk campaign layout and (de)serialization.

A campaign directory contains:
    manifest.json     run manifest, written before the first episode
    scenario.yaml     verbatim copy of the scenario config
    campaign.jsonl    one record per episode (prompt, goal, score, metrics)
    episodes/ep_NNNN.jsonl   per-episode traces
    stats.csv         one aggregate row

All writes use deterministic JSON (sorted keys, default float repr), so a
rerun with the same inputs reproduces every file byte for byte.
"""
from __future__ import annotations

import json
import math
import os
from typing import Dict, List, Optional, Tuple

from .geom import Point2
from .metrics import CampaignStats
from .optimizer import CampaignResult, EpisodeRecord, SamplerConfig
from .scenario import Scenario
from .sim import AgentState, Episode, JointState

TOOL_VERSION = "0.1.0"
TTC_CONVENTION = "per-step footprint gap over forward-difference closing speed"

STATS_COLUMNS = (
    "scenario,sampler,n,coll_pct,min_dist_mean,min_dist_std,"
    "ttc_mean,ttc_std,ttc_inf_count,ego_asd,agent_asd,seed"
)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _opt(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def write_manifest(
    out_dir: str, scenario_path: str, cfg: SamplerConfig, asd_convention: str
) -> None:
    manifest = {
        "scenario_file": os.path.basename(scenario_path),
        "sampler": {
            "kind": cfg.kind,
            "budget": cfg.budget,
            "beta": cfg.beta,
            "candidates": cfg.candidates,
            "nu": cfg.nu,
        },
        "seed": cfg.seed,
        "tool_version": TOOL_VERSION,
        "conventions": {"ttc": TTC_CONVENTION, "asd": asd_convention},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(_dump(manifest) + "\n")


def episode_to_lines(episode: Episode, scenario: Scenario) -> List[str]:
    header = {
        "type": "header",
        "scenario_id": episode.scenario_id,
        "dt": scenario.sim.dt,
        "goals": {aid: [g.x, g.y] for aid, g in episode.prompts_world.items()},
        "collision": (
            {"t": episode.collision[0], "pair": list(episode.collision[1])}
            if episode.collision
            else None
        ),
        "failed": episode.failed,
        "failure_reason": episode.failure_reason,
    }
    lines = [_dump(header)]
    for joint in episode.trace:
        lines.append(
            _dump(
                {
                    "t": joint.timestep,
                    "agents": {
                        aid: {
                            "x": s.position.x,
                            "y": s.position.y,
                            "heading": s.heading,
                            "speed": s.speed,
                        }
                        for aid, s in joint.states.items()
                    },
                }
            )
        )
    return lines


def write_episode(path: str, episode: Episode, scenario: Scenario) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(episode_to_lines(episode, scenario)) + "\n")


def read_episode(path: str) -> Tuple[Episode, dict]:
    """Parse an episode JSONL file; returns (episode, header dict)."""
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty episode file")
    try:
        header = json.loads(lines[0])
        if header.get("type") != "header":
            raise ValueError("first record is not a header")
    except (json.JSONDecodeError, ValueError) as exc:
        raise ValueError(f"{path}:1: {exc}") from exc
    trace = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            states = {
                aid: AgentState(
                    Point2(float(s["x"]), float(s["y"])),
                    float(s["heading"]),
                    float(s["speed"]),
                )
                for aid, s in rec["agents"].items()
            }
            trace.append(JointState(int(rec["t"]), states))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    collision = None
    if header.get("collision"):
        collision = (
            int(header["collision"]["t"]),
            tuple(header["collision"]["pair"]),
        )
    episode = Episode(
        scenario_id=header.get("scenario_id", ""),
        prompts_world={
            aid: Point2(float(g[0]), float(g[1]))
            for aid, g in header.get("goals", {}).items()
        },
        trace=trace,
        collision=collision,
        failed=bool(header.get("failed", False)),
        failure_reason=header.get("failure_reason", ""),
    )
    return episode, header


def campaign_record_to_json(record: EpisodeRecord, episode_file: str) -> str:
    goals = {aid: [g.x, g.y] for aid, g in record.goals_world.items()}
    goal_world = next(iter(goals.values())) if len(goals) == 1 else goals
    m = record.metrics
    return _dump(
        {
            "iter": record.iteration,
            "u": list(record.prompt),
            "goal_world": goal_world,
            "score": _opt(record.score),
            "collided": bool(m.collided) if m else False,
            "min_dist": m.min_dist if m else None,
            "ttc_min": _opt(m.ttc_min) if m else None,
            "episode_file": episode_file,
            "failed": record.failed,
        }
    )


def read_campaign_log(path: str) -> List[dict]:
    records = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def stats_csv_row(
    scenario_id: str, sampler: str, seed: int, stats: CampaignStats
) -> str:
    def fmt(v: float) -> str:
        return "inf" if not math.isfinite(v) else f"{v:.6g}"

    return ",".join(
        [
            scenario_id,
            sampler,
            str(stats.n_episodes),
            fmt(stats.coll_rate),
            fmt(stats.min_dist_mean),
            fmt(stats.min_dist_std),
            fmt(stats.ttc_mean),
            fmt(stats.ttc_std),
            str(stats.ttc_inf_count),
            fmt(stats.ego_asd),
            fmt(stats.agent_asd),
            str(seed),
        ]
    )


def write_stats_csv(path: str, rows: List[str]) -> None:
    with open(path, "w") as fh:
        fh.write(STATS_COLUMNS + "\n")
        for row in rows:
            fh.write(row + "\n")


def write_gp_grid_csv(path: str, grid) -> None:
    """Posterior grid CSV: u1,u2,mean,variance at 6 significant digits."""
    with open(path, "w") as fh:
        fh.write("u1,u2,mean,variance\n")
        for u1, u2, mean, var in grid:
            fh.write(f"{u1:.6g},{u2:.6g},{mean:.6g},{var:.6g}\n")


def write_samples_csv(path: str, prompts, scores) -> None:
    with open(path, "w") as fh:
        fh.write("u1,u2,score\n")
        for (u1, u2), score in zip(prompts, scores):
            fh.write(f"{u1:.6g},{u2:.6g},{score:.6g}\n")
