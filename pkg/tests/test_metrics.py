"""Metric tests: hand-geometry oracles, threshold formulas, strict verdict
boundaries, aggregation windows, and the markdown report."""

from __future__ import annotations

import io
import json
import math

import numpy as np
import pytest

from flockspc import (
    ControllerConfig,
    CostParams,
    LLCConfig,
    Obstacle,
    ScenarioConfig,
    SpawnSpec,
    Thresholds,
    TickRecord,
    Trace,
    Vec3,
    aggregate,
    compute_metrics,
    markdown_table,
    summary_to_dict,
    thresholds_for_scenario,
    thresholds_from_geometry,
    write_summary_json,
)


def _trace(frames, obstacles=()) -> Trace:
    """Synthetic trace from [(time, positions)] pairs; everything else zeroed."""
    n = len(frames[0][1])
    cfg = ScenarioConfig(
        agent_count=n,
        spawn=SpawnSpec(positions=tuple(Vec3(*p) for p in frames[0][1])),
        cost=CostParams(w_coh=20.0, w_sep=9.0, w_tar=0.0, w_obs=0.0, r_drone=0.07),
        controller=ControllerConfig(kind="SPC"),
        llc=LLCConfig(family="A"),
        r_h=math.inf,
        noise_sigma=0.0,
        physics_dt=0.01,
        control_period=0.1,
        duration=max(t for t, _ in frames) + 0.1,
        seed=0,
        obstacles=tuple(obstacles),
        formation_time=0.0,
    )
    records = []
    for k, (t, pos) in enumerate(frames):
        arr = np.asarray(pos, dtype=float)
        zeros = np.zeros_like(arr)
        records.append(TickRecord(
            index=k, time=t, target=None, positions=arr, velocities=zeros,
            observed_self=arr.copy(), setpoints=arr.copy(),
            costs=np.zeros((n, 5)), grad_norms=np.zeros(n)))
    return Trace(config=cfg, records=tuple(records))


def test_metrics_hand_geometry_oracle():
    s = compute_metrics([Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)])
    assert abs(s.dist_min - 1.0) <= 1e-15, f"dist_min {s.dist_min}"
    assert abs(s.comp_max - math.sqrt(5.0) / 3.0) <= 1e-12, f"comp_max {s.comp_max}"
    assert s.clear_obj is None


def test_metrics_clearance_is_xy_center_distance():
    s = compute_metrics([Vec3(5, 6, 2), Vec3(5, 9, 1)], [Obstacle(5, 5, 0.15)])
    assert abs(s.clear_obj - 1.0) <= 1e-15, (
        f"clear_obj {s.clear_obj}: z must be ignored and radii excluded")


def test_metrics_single_agent_has_no_dist():
    s = compute_metrics([Vec3(1, 2, 3)])
    assert s.dist_min is None
    assert s.comp_max == 0.0


def test_metrics_comp_zero_iff_coincident():
    s = compute_metrics([Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)])
    assert s.comp_max == 0.0
    s = compute_metrics([Vec3(1, 1, 1), Vec3(1, 1, 1.001)])
    assert s.comp_max > 0.0


def test_metrics_translation_invariant():
    rng = np.random.default_rng(2)
    pos = rng.uniform(-3, 3, size=(6, 3))
    obs = [Obstacle(0.5, -0.2, 0.15), Obstacle(2.0, 1.0, 0.15)]
    t = rng.uniform(-20, 20, size=3)
    a = compute_metrics(pos, obs)
    b = compute_metrics(pos + t,
                        [Obstacle(o.x + t[0], o.y + t[1], o.radius) for o in obs])
    assert abs(a.dist_min - b.dist_min) <= 1e-9
    assert abs(a.comp_max - b.comp_max) <= 1e-9
    assert abs(a.clear_obj - b.clear_obj) <= 1e-9


def test_metrics_insertion_never_increases_dist_min():
    rng = np.random.default_rng(8)
    for _ in range(50):
        pos = rng.uniform(-2, 2, size=(5, 3))
        base = compute_metrics(pos).dist_min
        extended = np.vstack([pos, rng.uniform(-2, 2, size=(1, 3))])
        assert compute_metrics(extended).dist_min <= base + 1e-15


def _brute_force(pos: np.ndarray, obstacles) -> tuple:
    n = pos.shape[0]
    dist = None
    if n >= 2:
        best = math.inf
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                best = min(best, dx * dx + dy * dy + dz * dz)
        dist = math.sqrt(best)
    centroid = pos.mean(axis=0)
    worst = 0.0
    for i in range(n):
        cx = pos[i, 0] - centroid[0]
        cy = pos[i, 1] - centroid[1]
        cz = pos[i, 2] - centroid[2]
        worst = max(worst, cx * cx + cy * cy + cz * cz)
    comp = math.sqrt(worst)
    clear = None
    if obstacles:
        best = math.inf
        for o in obstacles:
            for i in range(n):
                ex = pos[i, 0] - o.x
                ey = pos[i, 1] - o.y
                best = min(best, ex * ex + ey * ey)
        clear = math.sqrt(best)
    return dist, comp, clear


def test_metrics_match_brute_force_exactly():
    rng = np.random.default_rng(31)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        pos = rng.uniform(-5, 5, size=(n, 3))
        n_obs = int(rng.integers(0, 4))
        obstacles = [Obstacle(float(x), float(y), 0.15)
                     for x, y in rng.uniform(-5, 5, size=(n_obs, 2))]
        s = compute_metrics(pos, obstacles)
        dist, comp, clear = _brute_force(pos, obstacles)
        assert s.dist_min == dist, f"dist {s.dist_min} != {dist}"
        assert s.comp_max == comp, f"comp {s.comp_max} != {comp}"
        assert s.clear_obj == clear, f"clear {s.clear_obj} != {clear}"


def test_threshold_formulas():
    t = thresholds_from_geometry(0.07, 0.06)
    assert abs(t.dist_thr - 0.20) <= 1e-15, f"dist_thr {t.dist_thr}"
    t = thresholds_from_geometry(0.07, 0.06, r_k=0.15)
    assert abs(t.clear_thr - 0.28) <= 1e-15, f"clear_thr {t.clear_thr}"
    t = thresholds_from_geometry(0.0, 0.0, 0.0, comp_thr=0.0)
    assert t.dist_thr == 0.0 and t.clear_thr == 0.0 and t.comp_thr == 0.0
    with pytest.raises(ValueError):
        thresholds_from_geometry(-0.01, 0.06)


def test_thresholds_for_scenario_uses_largest_obstacle():
    tr = _trace([(0.0, [(0, 0, 1), (1, 0, 1)])],
                obstacles=[Obstacle(3, 0, 0.15), Obstacle(5, 0, 0.30)])
    t = thresholds_for_scenario(tr.config)
    assert abs(t.clear_thr - (0.07 + 0.30 + 0.06)) <= 1e-15
    bare = _trace([(0.0, [(0, 0, 1), (1, 0, 1)])])
    assert thresholds_for_scenario(bare.config).clear_thr == pytest.approx(0.13)


def test_verdict_boundary_is_strict():
    thr = Thresholds(dist_thr=0.5, comp_thr=10.0, clear_thr=0.28)
    tr = _trace([(0.0, [(0, 0, 1), (0.5, 0, 1)])])  # exactly dist_thr apart
    s = aggregate(tr, thr)
    assert s.dist_min == 0.5
    assert s.dist_ok is False, "equality with the threshold must fail"
    assert not s.passed
    tr = _trace([(0.0, [(0, 0, 1), (0.5000001, 0, 1)])])
    assert aggregate(tr, thr).dist_ok is True


def test_aggregate_worst_case_over_window():
    frames = [
        (0.0, [(0, 0, 1), (0.10, 0, 1)]),  # pre-formation chaos, excluded
        (10.0, [(0, 0, 1), (0.78, 0, 1)]),
        (10.1, [(0, 0, 1), (0.80, 0, 1)]),
        (10.2, [(0, 0, 1), (0.79, 0, 1)]),
    ]
    thr = Thresholds(dist_thr=0.20, comp_thr=10.0, clear_thr=0.28)
    s = aggregate(_trace(frames), thr, formation_time=10.0)
    assert abs(s.dist_min - 0.78) <= 1e-15, f"window min {s.dist_min}"
    assert s.dist_ok is True and s.passed
    assert s.sample_count == 3

    frames[2] = (10.1, [(0, 0, 1), (0.14, 0, 1)])
    s = aggregate(_trace(frames), thr, formation_time=10.0)
    assert abs(s.dist_min - 0.14) <= 1e-15
    assert s.dist_ok is False and not s.passed


def test_aggregate_no_obstacles_reports_absent_clearance():
    tr = _trace([(1.0, [(0, 0, 1), (1, 0, 1)])])
    s = aggregate(tr, Thresholds(0.2, 10.0, 0.28))
    assert s.clear_obj is None and s.clear_ok is None
    assert s.passed  # absent metric cannot fail a run


def test_aggregate_empty_window_raises():
    tr = _trace([(1.0, [(0, 0, 1), (1, 0, 1)])])
    with pytest.raises(ValueError, match="window"):
        aggregate(tr, Thresholds(0.2, 10.0, 0.28), formation_time=5.0)


def test_aggregate_uses_scenario_formation_time_by_default():
    frames = [(0.0, [(0, 0, 1), (0.1, 0, 1)]), (5.0, [(0, 0, 1), (1.0, 0, 1)])]
    tr = _trace(frames)  # helper sets formation_time=0.0: both frames count
    thr = Thresholds(0.2, 10.0, 0.28)
    assert aggregate(tr, thr).dist_min == pytest.approx(0.1)
    assert aggregate(tr, thr, formation_time=4.0).dist_min == pytest.approx(1.0)


def test_summary_json_round_trip_and_stability(tmp_path):
    tr = _trace([(1.0, [(0, 0, 1), (0.9, 0, 1)])], obstacles=[Obstacle(5, 5, 0.15)])
    s = aggregate(tr, thresholds_for_scenario(tr.config))
    d = summary_to_dict(s)
    assert d["verdicts"]["overall"] == "pass"
    assert d["metrics"]["dist_min"] == pytest.approx(0.9)
    buf1, buf2 = io.StringIO(), io.StringIO()
    write_summary_json(s, buf1)
    write_summary_json(s, buf2)
    assert buf1.getvalue() == buf2.getvalue()
    parsed = json.loads(buf1.getvalue())
    assert parsed == json.loads(json.dumps(d))
    p = tmp_path / "summary.json"
    write_summary_json(s, p, scenario_echo={"note": 1})
    assert json.loads(p.read_text())["scenario_echo"] == {"note": 1}


def test_markdown_table_layout_and_verdicts():
    thr = Thresholds(0.2, 10.0, 0.28)
    runs = []
    for seed, d in ((0, 0.78), (1, 0.61)):
        tr = _trace([(1.0, [(0, 0, 1), (d, 0, 1)])])
        cfg = tr.config
        s = aggregate(tr, thr)
        runs.append(s)
    bad = aggregate(_trace([(1.0, [(0, 0, 1), (0.14, 0, 1)])]), thr)
    table = markdown_table(runs + [bad])
    lines = table.strip().split("\n")
    assert lines[0].startswith("| |D| | obstacles |")
    assert "SPC/A dist_min" in lines[0]
    body = "\n".join(lines[2:])
    # worst case across the three runs of the same cell: 0.14 and FAIL
    assert "0.14 FAIL" in body, f"table body:\n{body}"
    assert "-" in body  # clearance column dashes without obstacles


def test_markdown_table_rejects_empty():
    with pytest.raises(ValueError):
        markdown_table([])
