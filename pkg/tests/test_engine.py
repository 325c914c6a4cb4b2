"""Simulation engine tests: observation noise and filtering, rollout
semantics, determinism, and scenario file parsing."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from flockspc import (
    ConfigError,
    ControllerConfig,
    CostParams,
    LLCConfig,
    ScenarioConfig,
    SpawnSpec,
    Vec3,
    Waypoint,
    equilibrium_distance,
    load_scenario,
    observation_stream,
    observe,
    parse_scenario,
    run_scenario,
    scenario_to_dict,
    tick_observation,
    write_trace_csv,
)

DEFAULT_COST = CostParams(w_coh=20.0, w_sep=9.0, w_tar=0.0, w_obs=0.0)


def _scenario(**overrides) -> ScenarioConfig:
    base = dict(
        agent_count=2,
        spawn=SpawnSpec(positions=(Vec3(-0.5, 0, 1.4), Vec3(0.5, 0, 1.4))),
        cost=DEFAULT_COST,
        controller=ControllerConfig(kind="SPC", epsilon=0.06, n_star=5),
        llc=LLCConfig(family="A"),
        r_h=math.inf,
        noise_sigma=0.0,
        physics_dt=0.01,
        control_period=0.1,
        duration=10.0,
        seed=0,
        formation_time=5.0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def test_observe_noise_free_returns_true_positions():
    pos = np.array([[0.0, 0.0, 1.0], [1.0, 2.0, 1.5], [-1.0, 0.3, 0.9]])
    rng = observation_stream(seed=0, tick=0, agent=0)
    out = observe(pos, 0, sigma=0.0, r_h=math.inf, rng=rng)
    assert [j for j, _ in out] == [0, 1, 2]
    for j, p in out:
        assert (p.x, p.y, p.z) == tuple(pos[j]), f"agent {j} perturbed at sigma=0"


def test_observe_noise_std_matches_sigma():
    pos = np.zeros((4, 3))
    samples = []
    for tick in range(8334):  # 8334*4*3 > 1e5 draws
        rng = observation_stream(seed=7, tick=tick, agent=0)
        out = observe(pos, 0, sigma=0.10, r_h=math.inf, rng=rng)
        samples.extend(coord for _, p in out for coord in (p.x, p.y, p.z))
    std = float(np.std(samples))
    assert abs(std - 0.10) <= 0.002, f"sample std {std:.5f} not within 2% of 0.10"
    mean = float(np.mean(samples))
    assert abs(mean) <= 0.002, f"noise mean {mean:.5f} too far from 0"


def test_observe_neighborhood_filter_strict():
    pos = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]])
    for agent in (0, 1):
        rng = observation_stream(seed=0, tick=0, agent=agent)
        out = observe(pos, agent, sigma=0.0, r_h=0.9, rng=rng)
        assert [j for j, _ in out] == [agent], (
            f"agent {agent} at 1.0 m separation should only see itself with r_h=0.9")
    # boundary: exactly r_h apart is outside (strict inequality)
    rng = observation_stream(seed=0, tick=0, agent=0)
    out = observe(np.array([[0.0, 0, 1], [1.0, 0, 1]]), 0, 0.0, 1.0, rng)
    assert [j for j, _ in out] == [0]
    rng = observation_stream(seed=0, tick=0, agent=0)
    out = observe(np.array([[0.0, 0, 1], [0.999, 0, 1]]), 0, 0.0, 1.0, rng)
    assert [j for j, _ in out] == [0, 1]


def test_observe_deterministic_per_key():
    pos = np.random.default_rng(1).uniform(-1, 1, size=(3, 3))
    a = observe(pos, 1, 0.1, math.inf, observation_stream(3, 17, 1))
    b = observe(pos, 1, 0.1, math.inf, observation_stream(3, 17, 1))
    c = observe(pos, 1, 0.1, math.inf, observation_stream(3, 18, 1))
    assert a == b, "same (seed, tick, agent) must reproduce identical noise"
    assert a != c, "different tick should give different noise"


def test_single_agent_holds_position():
    cfg = _scenario(agent_count=1, spawn=SpawnSpec(positions=(Vec3(0.3, -0.2, 1.4),)))
    trace = run_scenario(cfg)
    start = trace.records[0].positions[0]
    end = trace.records[-1].positions[0]
    drift = math.dist(start, end)
    assert drift < 1e-3, f"lone agent drifted {drift * 1000:.3f} mm over 10 s"


def test_two_agent_equilibrium_convergence():
    cfg = _scenario(duration=30.0, formation_time=25.0)
    trace = run_scenario(cfg)
    d_eq = equilibrium_distance(20.0, 9.0, 0.0)
    tail = [r for r in trace.records if r.time >= 25.0]
    dists = [math.dist(r.positions[0], r.positions[1]) for r in tail]
    mean_d = sum(dists) / len(dists)
    assert abs(mean_d - d_eq) <= 0.05 * d_eq, (
        f"mean separation {mean_d:.4f} not within 5% of {d_eq:.4f}")


def test_waypoint_switch_at_first_tick_at_or_after_time():
    wp = (Waypoint(0.0, Vec3(0, 0, 1.4)), Waypoint(2.0, Vec3(3, 0, 1.4)))
    cfg = _scenario(
        cost=CostParams(w_coh=20.0, w_sep=9.0, w_tar=150.0, w_obs=0.0),
        waypoints=wp, duration=4.0, formation_time=1.0)
    trace = run_scenario(cfg)
    for rec in trace.records:
        expect = wp[1].target if rec.time >= 2.0 - 1e-9 else wp[0].target
        assert rec.target == expect, (
            f"tick at t={rec.time}: active target {rec.target}, expected {expect}")


def test_box_spawn_respects_min_spacing_and_bounds():
    spawn = SpawnSpec(box_min=Vec3(-1.5, -1.5, 1.0), box_max=Vec3(1.5, 1.5, 1.8),
                      min_spacing=0.4)
    cfg = _scenario(agent_count=9, spawn=spawn, duration=0.1, formation_time=0.0)
    trace = run_scenario(cfg)
    pos = trace.records[0].positions
    for i in range(9):
        assert (-1.5 <= pos[i, 0] <= 1.5 and -1.5 <= pos[i, 1] <= 1.5
                and 1.0 <= pos[i, 2] <= 1.8), f"agent {i} spawned out of box: {pos[i]}"
        for j in range(i + 1, 9):
            d = math.dist(pos[i], pos[j])
            assert d >= 0.4, f"spawn spacing {d:.3f} < 0.4 between {i} and {j}"


def test_explicit_spawn_positions_exact():
    pts = (Vec3(0.1, 0.2, 1.1), Vec3(-0.4, 0.5, 1.3))
    cfg = _scenario(spawn=SpawnSpec(positions=pts), duration=0.1, formation_time=0.0)
    trace = run_scenario(cfg)
    pos = trace.records[0].positions
    assert tuple(pos[0]) == (0.1, 0.2, 1.1) and tuple(pos[1]) == (-0.4, 0.5, 1.3)


def test_same_seed_reproduces_different_seed_diverges():
    spawn = SpawnSpec(box_min=Vec3(-1, -1, 1.0), box_max=Vec3(1, 1, 1.8))
    a = run_scenario(_scenario(spawn=spawn, noise_sigma=0.1, duration=2.0,
                               formation_time=1.0, seed=0))
    b = run_scenario(_scenario(spawn=spawn, noise_sigma=0.1, duration=2.0,
                               formation_time=1.0, seed=0))
    c = run_scenario(_scenario(spawn=spawn, noise_sigma=0.1, duration=2.0,
                               formation_time=1.0, seed=1))
    assert np.array_equal(a.records[-1].positions, b.records[-1].positions)
    assert not np.array_equal(a.records[-1].positions, c.records[-1].positions)


def test_worker_count_does_not_change_results():
    cfg = _scenario(agent_count=4, noise_sigma=0.1, duration=3.0, formation_time=1.0,
                    spawn=SpawnSpec(box_min=Vec3(-1, -1, 1.0), box_max=Vec3(1, 1, 1.8)))
    t1 = run_scenario(cfg, workers=1)
    t4 = run_scenario(cfg, workers=4)
    for r1, r4 in zip(t1.records, t4.records):
        assert np.array_equal(r1.positions, r4.positions)
        assert np.array_equal(r1.setpoints, r4.setpoints)
        assert np.array_equal(r1.costs, r4.costs)


def test_trace_shape_and_monotone_time():
    cfg = _scenario(duration=6.0, formation_time=1.0)
    trace = run_scenario(cfg)
    assert len(trace.records) == 60, f"expected 60 ticks, got {len(trace.records)}"
    times = [r.time for r in trace.records]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert times[0] == 0.0
    for rec in trace.records:
        assert rec.positions.shape == (2, 3)
        assert rec.costs.shape == (2, 5)
        assert np.isfinite(rec.positions).all()
        assert np.isfinite(rec.costs).all()
        assert (rec.grad_norms >= 0).all()


def test_observation_delay_uses_stale_positions():
    cfg = _scenario(duration=2.0, formation_time=1.0, obs_delay_ticks=1)
    trace = run_scenario(cfg)
    # with sigma=0 and one-tick delay, tick k's snapshot equals tick k-1 truth
    obs = tick_observation(trace, 5, agent=0)
    prev = trace.records[4].positions
    for j, p in obs:
        assert (p.x, p.y, p.z) == tuple(prev[j]), (
            f"delayed observation of {j} is {p}, expected {tuple(prev[j])}")


def test_obstacles_are_visible_to_cost():
    from flockspc import Obstacle
    obstacles = (Obstacle(2.0, 0.0, 0.15),)
    cfg = _scenario(obstacles=obstacles)
    assert cfg.cost.obstacles == obstacles


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="agent_count"):
        _scenario(agent_count=0)
    with pytest.raises(ConfigError, match="control_period"):
        _scenario(control_period=0.025)  # not an integer multiple of 0.01
    with pytest.raises(ConfigError, match="noise_sigma"):
        _scenario(noise_sigma=-0.1)
    with pytest.raises(ConfigError, match="duration"):
        _scenario(duration=0.05)
    with pytest.raises(ConfigError, match="waypoints"):
        _scenario(waypoints=(Waypoint(5.0, Vec3(0, 0, 1)),
                             Waypoint(1.0, Vec3(1, 0, 1))))
    with pytest.raises(ConfigError, match="formation_time"):
        _scenario(formation_time=10.0)  # == duration
    with pytest.raises(ConfigError, match="spawn.positions"):
        _scenario(agent_count=3)  # explicit spawn has only 2 points
    with pytest.raises(ValueError, match="min_spacing"):
        SpawnSpec(box_min=Vec3(0, 0, 1), box_max=Vec3(1, 1, 2), min_spacing=-1.0)
    with pytest.raises(ValueError):
        SpawnSpec()  # neither positions nor box


def _minimal_json() -> dict:
    return {
        "agent_count": 2,
        "seed": 0,
        "duration": 1.0,
        "r_h": 0.9,
        "noise_sigma": 0.0,
        "physics_dt": 0.01,
        "control_period": 0.1,
        "formation_time": 0.5,
        "spawn": {"positions": [[-0.5, 0.0, 1.4], [0.5, 0.0, 1.4]]},
        "cost": {"w_coh": 20.0, "w_sep": 9.0, "w_tar": 0.0, "w_obs": 0.0},
        "controller": {"kind": "SPC", "epsilon": 0.06, "n_star": 5},
        "llc": {"family": "A"},
    }


def test_parse_scenario_minimal():
    cfg = parse_scenario(_minimal_json())
    assert cfg.agent_count == 2
    assert cfg.controller.kind == "SPC"
    assert cfg.r_h == 0.9


def test_parse_scenario_rejects_unknown_keys():
    data = _minimal_json()
    data["weights"] = {}
    with pytest.raises(ConfigError, match="weights"):
        parse_scenario(data)
    data = _minimal_json()
    data["cost"]["w_sep_extra"] = 1.0
    with pytest.raises(ConfigError, match="cost"):
        parse_scenario(data)


def test_parse_scenario_field_level_errors():
    data = _minimal_json()
    data["controller"]["kind"] = "MPC"
    with pytest.raises(ConfigError, match="controller.kind"):
        parse_scenario(data)
    data = _minimal_json()
    data["cost"]["w_coh"] = "twenty"
    with pytest.raises(ConfigError, match="cost.w_coh"):
        parse_scenario(data)
    data = _minimal_json()
    del data["agent_count"]
    with pytest.raises(ConfigError, match="agent_count"):
        parse_scenario(data)


def test_parse_scenario_infinite_r_h():
    for token in ("inf", "Infinity", None):
        data = _minimal_json()
        data["r_h"] = token
        cfg = parse_scenario(data)
        assert cfg.r_h == math.inf, f"r_h token {token!r} not parsed as infinite"


def test_scenario_dict_round_trip(tmp_path):
    data = _minimal_json()
    data["obstacles"] = [{"x": 2.0, "y": 0.5, "radius": 0.15}]
    data["waypoints"] = [{"time": 0.0, "target": [0.0, 0.0, 1.4]}]
    cfg = parse_scenario(data)
    echoed = scenario_to_dict(cfg)
    again = parse_scenario(echoed)
    assert scenario_to_dict(again) == echoed
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(echoed))
    assert scenario_to_dict(load_scenario(p)) == echoed


def test_trace_csv_is_parseable_and_stable(tmp_path):
    cfg = _scenario(duration=1.0, formation_time=0.5, noise_sigma=0.05)
    trace = run_scenario(cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace_csv(trace, p1)
    write_trace_csv(trace, p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header[0] == "time_s" and "agent" in header
    assert len(lines) == 1 + 10 * 2  # one row per (tick, agent)
    # every float cell must round-trip
    for row in lines[1:]:
        cells = row.split(",")
        assert len(cells) == len(header)
        float(cells[0])
        assert "np" not in row, f"numpy repr leaked into csv: {row}"
