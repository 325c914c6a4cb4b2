"""Flock quality metrics, thresholds, and run aggregation with verdicts.

Three per-tick metrics over TRUE positions (never the noisy observations):

  dist_min:  minimum pairwise distance between agents (absent for one agent)
  comp_max:  maximum distance of any agent from the flock centroid
  clear_obj: minimum xy-plane distance from any agent to any obstacle center
             (center-to-center; the radii live in the threshold instead)

A run passes when, over the post-formation window, min(dist_min) and
min(clear_obj) stay strictly above their thresholds and max(comp_max) stays
strictly below comp_thr.  Equality fails: the boundaries are safety margins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .engine import ScenarioConfig, Trace
from .model import Obstacle, Vec3

__all__ = [
    "MetricsSample",
    "Thresholds",
    "RunSummary",
    "compute_metrics",
    "thresholds_from_geometry",
    "thresholds_for_scenario",
    "aggregate",
    "summary_to_dict",
    "write_summary_json",
    "markdown_table",
]


@dataclass(frozen=True)
class MetricsSample:
    """Metrics at one instant; dist_min is None for a lone agent and
    clear_obj is None when there are no obstacles."""

    time: float
    dist_min: float | None
    comp_max: float
    clear_obj: float | None


@dataclass(frozen=True)
class Thresholds:
    """Pass/fail boundaries in metres."""

    dist_thr: float
    comp_thr: float
    clear_thr: float

    def __post_init__(self) -> None:
        for name in ("dist_thr", "comp_thr", "clear_thr"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be >= 0 and finite, got {v}")


@dataclass(frozen=True)
class RunSummary:
    """Whole-run aggregates over the post-formation window plus verdicts.

    Verdicts are True (pass), False (fail), or None where the metric is
    undefined (single agent, or no obstacles).
    """

    agent_count: int
    obstacle_count: int
    controller_kind: str
    llc_family: str
    seed: int
    window_start: float
    sample_count: int
    dist_min: float | None
    comp_max: float
    clear_obj: float | None
    dist_ok: bool | None
    comp_ok: bool
    clear_ok: bool | None
    thresholds: Thresholds

    @property
    def passed(self) -> bool:
        return all(v is not False for v in (self.dist_ok, self.comp_ok, self.clear_ok))


def _positions_array(true_positions: np.ndarray | Sequence[Vec3]) -> np.ndarray:
    if isinstance(true_positions, np.ndarray):
        return true_positions.astype(float, copy=False)
    return np.array([tuple(p) for p in true_positions], dtype=float)


def compute_metrics(
    true_positions: np.ndarray | Sequence[Vec3],
    obstacles: Sequence[Obstacle] = (),
    time: float = 0.0,
) -> MetricsSample:
    """Exact min/max metrics over all pairs and agents at one instant."""
    pos = _positions_array(true_positions)
    n = pos.shape[0]
    if n < 1:
        raise ValueError("compute_metrics needs at least one agent")

    dist_min: float | None = None
    if n >= 2:
        ii, jj = np.triu_indices(n, k=1)
        dx = pos[ii, 0] - pos[jj, 0]
        dy = pos[ii, 1] - pos[jj, 1]
        dz = pos[ii, 2] - pos[jj, 2]
        dist_min = math.sqrt(float((dx * dx + dy * dy + dz * dz).min()))

    centroid = pos.mean(axis=0)
    cx = pos[:, 0] - centroid[0]
    cy = pos[:, 1] - centroid[1]
    cz = pos[:, 2] - centroid[2]
    comp_max = math.sqrt(float((cx * cx + cy * cy + cz * cz).max()))

    clear_obj: float | None = None
    if obstacles:
        ox = np.array([o.x for o in obstacles])
        oy = np.array([o.y for o in obstacles])
        ex = pos[:, 0][:, None] - ox[None, :]
        ey = pos[:, 1][:, None] - oy[None, :]
        clear_obj = math.sqrt(float((ex * ex + ey * ey).min()))

    return MetricsSample(time=time, dist_min=dist_min, comp_max=comp_max, clear_obj=clear_obj)


def thresholds_from_geometry(
    r_drone: float,
    r_safety: float,
    r_k: float = 0.0,
    comp_thr: float = 10.0,
) -> Thresholds:
    """dist_thr = 2 r_drone + r_safety; clear_thr = r_drone + r_k + r_safety;
    comp_thr passes through (no geometric definition exists for it)."""
    for name, v in (("r_drone", r_drone), ("r_safety", r_safety), ("r_k", r_k)):
        if v < 0.0:
            raise ValueError(f"{name} must be >= 0, got {v}")
    return Thresholds(
        dist_thr=2.0 * r_drone + r_safety,
        comp_thr=comp_thr,
        clear_thr=r_drone + r_k + r_safety,
    )


def thresholds_for_scenario(
    cfg: ScenarioConfig,
    r_safety: float = 0.06,
    comp_thr: float = 10.0,
) -> Thresholds:
    """Thresholds implied by a scenario's geometry; r_k is the largest
    obstacle radius present (0 when there are none)."""
    r_k = max((o.radius for o in cfg.obstacles), default=0.0)
    return thresholds_from_geometry(cfg.cost.r_drone, r_safety, r_k, comp_thr)


def aggregate(
    trace: Trace,
    thresholds: Thresholds,
    formation_time: float | None = None,
) -> RunSummary:
    """Worst-case aggregates over all ticks with time >= formation_time.

    formation_time defaults to the scenario's own setting.  Raises
    ValueError when the window contains no samples.
    """
    cfg = trace.config
    start = cfg.formation_time if formation_time is None else formation_time
    window = [rec for rec in trace.records if rec.time >= start]
    if not window:
        raise ValueError(
            f"aggregation window is empty: no ticks at or after t={start} "
            f"(trace ends at t={trace.records[-1].time if trace.records else 0.0})"
        )
    samples = [compute_metrics(rec.positions, cfg.obstacles, time=rec.time) for rec in window]

    dist_vals = [s.dist_min for s in samples if s.dist_min is not None]
    clear_vals = [s.clear_obj for s in samples if s.clear_obj is not None]
    dist_min = min(dist_vals) if dist_vals else None
    comp_max = max(s.comp_max for s in samples)
    clear_obj = min(clear_vals) if clear_vals else None

    return RunSummary(
        agent_count=cfg.agent_count,
        obstacle_count=len(cfg.obstacles),
        controller_kind=cfg.controller.kind,
        llc_family=cfg.llc.family,
        seed=cfg.seed,
        window_start=start,
        sample_count=len(samples),
        dist_min=dist_min,
        comp_max=comp_max,
        clear_obj=clear_obj,
        dist_ok=None if dist_min is None else dist_min > thresholds.dist_thr,
        comp_ok=comp_max < thresholds.comp_thr,
        clear_ok=None if clear_obj is None else clear_obj > thresholds.clear_thr,
        thresholds=thresholds,
    )


def _verdict(ok: bool | None) -> str | None:
    return None if ok is None else ("pass" if ok else "fail")


def summary_to_dict(summary: RunSummary) -> dict:
    """JSON-shaped view of a RunSummary."""
    return {
        "scenario": {
            "agent_count": summary.agent_count,
            "obstacle_count": summary.obstacle_count,
            "controller": summary.controller_kind,
            "llc_family": summary.llc_family,
            "seed": summary.seed,
        },
        "window": {"start_time": summary.window_start, "sample_count": summary.sample_count},
        "thresholds": {
            "dist_thr": summary.thresholds.dist_thr,
            "comp_thr": summary.thresholds.comp_thr,
            "clear_thr": summary.thresholds.clear_thr,
        },
        "metrics": {
            "dist_min": summary.dist_min,
            "comp_max": summary.comp_max,
            "clear_obj": summary.clear_obj,
        },
        "verdicts": {
            "dist_min": _verdict(summary.dist_ok),
            "comp_max": _verdict(summary.comp_ok),
            "clear_obj": _verdict(summary.clear_ok),
            "overall": "pass" if summary.passed else "fail",
        },
    }


def write_summary_json(
    summary: RunSummary,
    dest: str | Path | IO[str],
    scenario_echo: dict | None = None,
) -> None:
    """Write the summary (optionally with the full scenario echo) as JSON."""
    payload = summary_to_dict(summary)
    if scenario_echo is not None:
        payload["scenario_echo"] = scenario_echo
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


# --- markdown reporting -------------------------------------------------------

_METRIC_NAMES = ("dist_min", "comp_max", "clear_obj")


def _cell(value: float | None, ok: bool | None) -> str:
    if value is None:
        return "-"
    mark = "" if ok is None else (" ok" if ok else " FAIL")
    return f"{value:.2f}{mark}"


def _combine(cell_summaries: list[RunSummary]) -> tuple:
    # Worst case across seeds: smallest clearances, largest spread.
    dist_vals = [s.dist_min for s in cell_summaries if s.dist_min is not None]
    clear_vals = [s.clear_obj for s in cell_summaries if s.clear_obj is not None]
    thr = cell_summaries[0].thresholds
    dist = min(dist_vals) if dist_vals else None
    comp = max(s.comp_max for s in cell_summaries)
    clear = min(clear_vals) if clear_vals else None
    return (
        (dist, None if dist is None else dist > thr.dist_thr),
        (comp, comp < thr.comp_thr),
        (clear, None if clear is None else clear > thr.clear_thr),
    )


def markdown_table(summaries: Iterable[RunSummary]) -> str:
    """Grid of worst-case metrics: one row per (flock size, obstacle count),
    one column group per (controller, LLC family), seeds combined worst-case."""
    summaries = list(summaries)
    if not summaries:
        raise ValueError("markdown_table needs at least one summary")

    rows = sorted({(s.agent_count, s.obstacle_count) for s in summaries})
    groups = [
        (ctrl, fam)
        for ctrl in ("SPC", "PFC")
        for fam in ("A", "B")
        if any(s.controller_kind == ctrl and s.llc_family == fam for s in summaries)
    ]

    header = ["|D|", "obstacles"]
    for ctrl, fam in groups:
        header += [f"{ctrl}/{fam} {m}" for m in _METRIC_NAMES]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for size, n_obs in rows:
        cells = [str(size), str(n_obs)]
        for ctrl, fam in groups:
            bucket = [
                s
                for s in summaries
                if (s.agent_count, s.obstacle_count) == (size, n_obs)
                and s.controller_kind == ctrl
                and s.llc_family == fam
            ]
            if not bucket:
                cells += ["-", "-", "-"]
            else:
                cells += [_cell(v, ok) for v, ok in _combine(bucket)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
