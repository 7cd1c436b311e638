import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccmpc.scenario import (
    AgentSpec,
    Mode,
    NoiseSpec,
    ObstacleRect,
    ScenarioConfig,
    ScenarioError,
    ScenarioParseError,
    dump_scenario,
    example_scenario,
    head_on_scenario,
    load_scenario,
    parse_scenario,
    random_scenario,
    save_scenario,
)

EXAMPLE_FILE = """\
[global]
horizon = 7
epsilon = 5.0
delta_pair = 0.01
samples = 100
mode = "ripp"

[agent.0]
mu0 = [130.0, 135.0, 0.0, 0.0]
goal = [300.0, 250.0]

[agent.1]
mu0 = [130, 120, 0, 0]
goal = [300, 150]
"""


def test_load_example_file(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(EXAMPLE_FILE)
    cfg = load_scenario(path)
    assert cfg.horizon == 7 and cfg.epsilon == 5.0 and cfg.sample_count == 100
    np.testing.assert_array_equal(cfg.agents[0].mu0, [130, 135, 0, 0])
    np.testing.assert_array_equal(cfg.agents[1].mu0, [130, 120, 0, 0])
    np.testing.assert_array_equal(cfg.agents[1].goal, [300, 150])
    assert cfg.delta_pair == (0.01,) * 7
    assert cfg.mode is Mode.RIPP and not cfg.ripp_halving
    np.testing.assert_array_equal(cfg.agents[0].C0, np.diag([1e-3, 1e-3, 1e-5, 1e-5]))


def _with_global(line):
    return EXAMPLE_FILE.replace("[global]\n", f"[global]\n{line}\n").replace("samples = 100\n", "" if line.startswith("samples") else "samples = 100\n")


def test_delta_split_must_exceed_one():
    with pytest.raises(ScenarioError, match="delta_split must exceed 1"):
        parse_scenario(_with_global("delta_split = 1.0"))


def test_zero_samples_rejected():
    with pytest.raises(ScenarioError, match="sample_count"):
        parse_scenario(_with_global("samples = 0"))


@pytest.mark.parametrize(
    "line,match",
    [
        ("epsilon = -1.0", "epsilon"),
        ("delta_obstacle = 1.5", "delta_obstacle"),
        ("big_m = 0.0", "big_m"),
        ('mode = "fast"', "mode"),
        ("delta_pair = [0.01, 0.02]", "delta_pair"),
        ("delta_pair = [0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 2.0]", "delta_pair"),
    ],
)
def test_invariants_named(line, match):
    key = line.split(" =")[0]
    kept = [ln for ln in EXAMPLE_FILE.splitlines(keepends=True) if not ln.startswith(key + " =")]
    text = "".join(kept).replace("[global]\n", f"[global]\n{line}\n")
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(text)


def test_parse_errors():
    with pytest.raises(ScenarioParseError):
        parse_scenario("[global\nhorizon = 7")
    with pytest.raises(ScenarioParseError, match="unknown"):
        parse_scenario(EXAMPLE_FILE + "\n[agent.2]\nmu0 = [0,0,0,0]\ngoal = [1,1]\ncolour = 3\n")
    with pytest.raises(ScenarioParseError, match="gaps"):
        parse_scenario(EXAMPLE_FILE.replace("[agent.1]", "[agent.3]"))
    with pytest.raises(ScenarioParseError, match="missing"):
        parse_scenario(EXAMPLE_FILE.replace("goal = [300, 150]\n", ""))


def test_agent_and_obstacle_invariants():
    with pytest.raises(ScenarioError, match="C0"):
        AgentSpec([0, 0, 0, 0], [1, 1], C0=np.diag([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(ScenarioError, match="u_max"):
        AgentSpec([0, 0, 0, 0], [1, 1], u_max=0.0)
    with pytest.raises(ScenarioError, match="shape"):
        AgentSpec([0, 0, 0], [1, 1])
    with pytest.raises(ScenarioError):
        ObstacleRect([0, 0], 0.0, 5.0)
    with pytest.raises(ScenarioError):
        NoiseSpec("gaussian", Q=-np.eye(4))


def test_per_timestep_budget_override():
    text = EXAMPLE_FILE.replace("delta_pair = 0.01", "delta_pair = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07]")
    cfg = parse_scenario(text)
    assert cfg.delta_pair[3] == 0.04
    assert parse_scenario(dump_scenario(cfg)) == cfg


def test_config_is_immutable():
    cfg = example_scenario()
    with pytest.raises(Exception):
        cfg.horizon = 3
    with pytest.raises(ValueError):
        cfg.agents[0].mu0[0] = 1.0


def test_round_trip_rich_config(tmp_path):
    agents = [
        AgentSpec([1.5, 2.25, 0.1, -0.2], [10.0, 20.0], 9.5, NoiseSpec("gaussian", Q=np.diag([0, 0, 0.3, 0.1]))),
        AgentSpec([7.0, 8.0, 0.0, 0.0], [0.0, 0.0], 12.0, NoiseSpec("dryden", altitude=300.0, w20=10.0), C0=np.eye(4) * 0.5),
    ]
    cfg = ScenarioConfig(
        agents,
        [ObstacleRect([50.0, 60.0], 50.0, 40.0)],
        horizon=3,
        delta_pair=[0.1, 0.2, 0.3],
        big_m=999.0,
        mode="sa",
        ripp_halving=True,
        seed=42,
        time_limit=12.5,
    )
    path = tmp_path / "rich.toml"
    save_scenario(cfg, path)
    again = load_scenario(path)
    assert again == cfg
    assert dump_scenario(again) == path.read_text()


@pytest.mark.parametrize("seed,M", [(1, 2), (2, 3), (5, 5)])
def test_random_scenario_round_trip(tmp_path, seed, M):
    cfg = random_scenario(seed, M, n_obstacles=2)
    save_scenario(cfg, tmp_path / "r.toml")
    assert load_scenario(tmp_path / "r.toml") == cfg


def test_random_scenario_determinism_and_seed_sensitivity():
    assert random_scenario(1, 2) == random_scenario(1, 2)
    a, b = random_scenario(1, 2), random_scenario(2, 2)
    assert not np.array_equal(a.agents[0].mu0, b.agents[0].mu0)


def test_random_scenario_needs_two_agents():
    with pytest.raises(ValueError):
        random_scenario(0, 1)


def _segments_intersect(p1, p2, q1, q2):
    """Independent check: solve p1 + s (p2 - p1) = q1 + r (q2 - q1) for s, r in [0, 1]."""
    A = np.column_stack([p2 - p1, q1 - q2])
    if abs(np.linalg.det(A)) < 1e-12:
        return False
    s, r = np.linalg.solve(A, q1 - p1)
    return 0 <= s <= 1 and 0 <= r <= 1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), M=st.integers(2, 5))
def test_random_segments_cross_and_stay_inside(seed, M):
    cfg = random_scenario(seed, M)
    x0, y0, x1, y1 = cfg.arena
    pts = [(a.mu0[:2], a.goal) for a in cfg.agents]
    for s, g in pts:
        for p in (s, g):
            assert x0 <= p[0] <= x1 and y0 <= p[1] <= y1
    for (s1, g1), (s2, g2) in itertools.combinations(pts, 2):
        assert _segments_intersect(s1, g1, s2, g2)


def test_random_scenario_seven_three_agents():
    cfg = random_scenario(7, 3)
    pts = [(a.mu0[:2], a.goal) for a in cfg.agents]
    assert all(_segments_intersect(*a, *b) for a, b in itertools.combinations(pts, 2))


def test_random_obstacles_clear_of_endpoints():
    cfg = random_scenario(3, 3, n_obstacles=3)
    assert len(cfg.obstacles) == 3
    for o in cfg.obstacles:
        for a in cfg.agents:
            assert not o.contains(a.mu0[:2]) and not o.contains(a.goal)


def test_helper_scenarios_validate():
    ex = example_scenario()
    assert ex.sample_count == 100 and len(ex.obstacles) == 2
    assert parse_scenario(dump_scenario(ex)) == ex
    ho = head_on_scenario()
    assert ho.n_agents == 2 and ho.agents[0].mu0[1] == ho.agents[1].mu0[1]


def test_default_big_m_and_digest():
    cfg = example_scenario()
    assert cfg.effective_big_m == pytest.approx(2 * np.hypot(400, 400) + 5)
    assert cfg.digest() == example_scenario().digest()
    assert cfg.digest() != example_scenario(seed=1).digest()


def test_with_horizon_broadcasts_uniform_budget():
    cfg = example_scenario().with_(horizon=3)
    assert cfg.delta_pair == (0.01,) * 3
