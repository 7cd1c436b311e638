"""Problem-instance data model, scenario files and random benchmark instances.

Scenario files are a TOML subset::

    [global]
    horizon = 7
    epsilon = 5.0
    delta_pair = 0.01            # or a list with one entry per timestep 1..H
    delta_obstacle = 0.05
    samples = 30
    delta_split = 2.0
    mode = "ripp"                # "sa" | "ripp" | "robust"
    seed = 0
    arena = [0.0, 0.0, 400.0, 400.0]   # xmin, ymin, xmax, ymax
    # optional: big_m, ripp_halving, a_max, cov_samples, backend, time_limit, rel_gap

    [agent.0]
    mu0 = [130.0, 135.0, 0.0, 0.0]
    goal = [300.0, 250.0]
    u_max = 12.0
    noise = "dryden"             # altitude, w20, airspeed, dt follow
    # or noise = "gaussian" with Q = [[...], ...] (4x4)
    # optional: A (4x4), B (4x2), C0 (4x4)

    [obstacle.0]
    center = [210.0, 215.0]
    width = 50.0
    height = 50.0

Agent and obstacle tables are numbered 0, 1, ... without gaps.  Matrices are
lists of rows.  :func:`save_scenario` writes floats with ``repr`` so
loading its output reproduces the configuration exactly.
"""
from __future__ import annotations

import enum
import hashlib
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .disturbance import KNOT_FT_PER_S
from .dynamics import UAV_A, UAV_B

DEFAULT_C0 = np.diag([1e-3, 1e-3, 1e-5, 1e-5])


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""


class ScenarioParseError(ValueError):
    """A scenario file is not well-formed."""


class Mode(str, enum.Enum):
    SA = "sa"
    RIPP = "ripp"
    ROBUST = "robust"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Gaussian (``Q``) or Dryden (``altitude``, ``w20``, ``airspeed``, ``dt``) disturbance."""

    kind: str = "dryden"
    Q: np.ndarray | None = None
    altitude: float = 200.0
    w20: float = 15.0 * KNOT_FT_PER_S
    airspeed: float = 45.0
    dt: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "dryden"):
            raise ScenarioError(f"noise kind must be 'gaussian' or 'dryden', got {self.kind!r}")
        if self.kind == "gaussian":
            Q = np.zeros((4, 4)) if self.Q is None else self.Q
            object.__setattr__(self, "Q", _frozen(Q))
            if self.Q.shape != (4, 4):
                raise ScenarioError(f"noise covariance Q must be 4x4, got {self.Q.shape}")
            _require_psd(self.Q, "noise covariance Q")
        else:
            object.__setattr__(self, "Q", None)
            if not 10.0 <= self.altitude <= 1000.0:
                raise ScenarioError("dryden altitude must lie in [10, 1000] ft")
            if self.airspeed <= 0 or self.dt <= 0 or self.w20 < 0:
                raise ScenarioError("dryden airspeed and dt must be positive and w20 non-negative")

    def __eq__(self, other):
        if not isinstance(other, NoiseSpec) or self.kind != other.kind:
            return False
        if self.kind == "gaussian":
            return np.array_equal(self.Q, other.Q)
        return (self.altitude, self.w20, self.airspeed, self.dt) == (other.altitude, other.w20, other.airspeed, other.dt)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AgentSpec:
    mu0: np.ndarray
    goal: np.ndarray
    u_max: float = 12.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    A: np.ndarray = field(default_factory=lambda: UAV_A)
    B: np.ndarray = field(default_factory=lambda: UAV_B)
    C0: np.ndarray = field(default_factory=lambda: DEFAULT_C0)

    def __post_init__(self):
        for name in ("mu0", "goal", "A", "B", "C0"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "u_max", float(self.u_max))
        shapes = {"mu0": (4,), "goal": (2,), "A": (4, 4), "B": (4, 2), "C0": (4, 4)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ScenarioError(f"{name} must have shape {shape}, got {getattr(self, name).shape}")
        _require_psd(self.C0, "C0")
        if not self.u_max > 0:
            raise ScenarioError(f"u_max must be positive, got {self.u_max}")

    def __eq__(self, other):
        if not isinstance(other, AgentSpec):
            return False
        arrays = ("mu0", "goal", "A", "B", "C0")
        return (
            all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
            and self.u_max == other.u_max
            and self.noise == other.noise
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ObstacleRect:
    center: np.ndarray
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        if self.center.shape != (2,):
            raise ScenarioError("obstacle center must be a 2-vector")
        if not (self.width > 0 and self.height > 0):
            raise ScenarioError("obstacle width and height must be positive")

    @property
    def lower(self) -> np.ndarray:
        return self.center - 0.5 * np.array([self.width, self.height])

    @property
    def upper(self) -> np.ndarray:
        return self.center + 0.5 * np.array([self.width, self.height])

    def contains(self, points) -> np.ndarray:
        """Strict interior membership of (..., 2) points."""
        p = np.asarray(points, dtype=float)
        return np.all((p > self.lower) & (p < self.upper), axis=-1)

    def __eq__(self, other):
        return (
            isinstance(other, ObstacleRect)
            and np.array_equal(self.center, other.center)
            and (self.width, self.height) == (other.width, other.height)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    agents: tuple
    obstacles: tuple = ()
    horizon: int = 7
    epsilon: float = 5.0
    delta_pair: tuple | float = 0.01  # scalar: same budget at every timestep
    delta_obstacle: float = 0.05
    sample_count: int = 30
    big_m: float | None = None  # None: 2 * arena diagonal + epsilon
    delta_split: float = 2.0
    mode: Mode = Mode.RIPP
    seed: int = 0
    ripp_halving: bool = False
    arena: tuple = (0.0, 0.0, 400.0, 400.0)
    a_max: float = 1.0
    cov_samples: int = 100_000
    backend: str = "highs"
    time_limit: float = math.inf
    rel_gap: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError:
            raise ScenarioError(f"mode must be one of sa, ripp, robust, got {self.mode!r}") from None
        object.__setattr__(self, "arena", tuple(float(a) for a in self.arena))
        dp = self.delta_pair
        if np.ndim(dp) == 0:
            dp = (float(dp),) * max(int(self.horizon), 0)
        object.__setattr__(self, "delta_pair", tuple(float(d) for d in dp))
        self.validate()

    def validate(self) -> None:
        def need(ok, msg):
            if not ok:
                raise ScenarioError(msg)

        need(isinstance(self.horizon, (int, np.integer)) and self.horizon >= 1, "horizon must be an integer >= 1")
        need(isinstance(self.sample_count, (int, np.integer)) and self.sample_count >= 1, "sample_count must be an integer >= 1")
        need(len(self.agents) >= 1, "scenario needs at least one agent")
        need(all(isinstance(a, AgentSpec) for a in self.agents), "agents must be AgentSpec instances")
        need(all(isinstance(o, ObstacleRect) for o in self.obstacles), "obstacles must be ObstacleRect instances")
        need(self.epsilon > 0, "epsilon must be positive")
        need(len(self.delta_pair) == self.horizon, f"delta_pair needs {self.horizon} entries, got {len(self.delta_pair)}")
        need(all(0.0 <= d <= 1.0 for d in self.delta_pair), "delta_pair entries must lie in [0, 1]")
        need(0.0 <= self.delta_obstacle <= 1.0, "delta_obstacle must lie in [0, 1]")
        need(self.delta_split > 1.0, "delta_split must exceed 1")
        need(self.big_m is None or self.big_m > 0, "big_m must be positive")
        need(len(self.arena) == 4 and self.arena[0] < self.arena[2] and self.arena[1] < self.arena[3], "arena must be [xmin, ymin, xmax, ymax] with xmin < xmax and ymin < ymax")
        need(self.a_max >= 0, "a_max must be non-negative")
        need(isinstance(self.cov_samples, (int, np.integer)) and self.cov_samples >= 2, "cov_samples must be an integer >= 2")
        need(self.backend in ("highs", "bnb"), "backend must be 'highs' or 'bnb'")
        need(self.time_limit > 0, "time_limit must be positive")
        need(self.rel_gap >= 0, "rel_gap must be non-negative")

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def arena_diagonal(self) -> float:
        x0, y0, x1, y1 = self.arena
        return math.hypot(x1 - x0, y1 - y0)

    @property
    def default_big_m(self) -> float:
        return 2.0 * self.arena_diagonal + self.epsilon

    @property
    def effective_big_m(self) -> float:
        return self.default_big_m if self.big_m is None else float(self.big_m)

    def with_(self, **changes) -> ScenarioConfig:
        """Copy with fields replaced (a scalar ``delta_pair`` is broadcast over the horizon)."""
        if "horizon" in changes and "delta_pair" not in changes:
            if len(set(self.delta_pair)) == 1:
                changes["delta_pair"] = self.delta_pair[0]
        return replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return False
        return dump_scenario(self) == dump_scenario(other)

    __hash__ = None

    def digest(self) -> str:
        return hashlib.sha256(dump_scenario(self).encode()).hexdigest()


def _require_psd(C, what):
    C = np.asarray(C, dtype=float)
    scale = max(1.0, float(np.abs(C).max()))
    if not np.allclose(C, C.T, atol=1e-12 * scale):
        raise ScenarioError(f"{what} must be symmetric")
    if np.linalg.eigvalsh(0.5 * (C + C.T)).min() < -1e-12 * scale:
        raise ScenarioError(f"{what} must be positive semidefinite")


# -- file format ----------------------------------------------------------------

_GLOBAL_KEYS = {
    "horizon": "horizon",
    "epsilon": "epsilon",
    "delta_pair": "delta_pair",
    "delta_obstacle": "delta_obstacle",
    "samples": "sample_count",
    "big_m": "big_m",
    "delta_split": "delta_split",
    "mode": "mode",
    "seed": "seed",
    "ripp_halving": "ripp_halving",
    "arena": "arena",
    "a_max": "a_max",
    "cov_samples": "cov_samples",
    "backend": "backend",
    "time_limit": "time_limit",
    "rel_gap": "rel_gap",
}
_AGENT_KEYS = {"mu0", "goal", "u_max", "noise", "A", "B", "C0", "Q", "altitude", "w20", "airspeed", "dt"}
_OBSTACLE_KEYS = {"center", "width", "height"}


def _numbered(table, section):
    if not isinstance(table, dict):
        raise ScenarioParseError(f"[{section}] must contain numbered sub-tables like [{section}.0]")
    try:
        keys = sorted(table, key=int)
    except ValueError:
        raise ScenarioParseError(f"[{section}.*] sub-tables must be numbered, got {sorted(table)}") from None
    if [int(k) for k in keys] != list(range(len(keys))):
        raise ScenarioParseError(f"[{section}.k] tables must be numbered 0..{len(keys) - 1} without gaps")
    return [table[k] for k in keys]


def _check_keys(table, allowed, where):
    unknown = set(table) - set(allowed)
    if unknown:
        raise ScenarioParseError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _agent_from_table(t, k) -> AgentSpec:
    _check_keys(t, _AGENT_KEYS, f"[agent.{k}]")
    for key in ("mu0", "goal"):
        if key not in t:
            raise ScenarioParseError(f"[agent.{k}] is missing {key!r}")
    kind = t.get("noise", "dryden")
    if kind == "gaussian":
        noise = NoiseSpec("gaussian", Q=t.get("Q"))
    else:
        dryden = {key: float(t[key]) for key in ("altitude", "w20", "airspeed", "dt") if key in t}
        noise = NoiseSpec(kind, **dryden)
    extra = {key: t[key] for key in ("A", "B", "C0") if key in t}
    return AgentSpec(t["mu0"], t["goal"], t.get("u_max", 12.0), noise, **extra)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    _check_keys(data, {"global", "agent", "obstacle"}, "top level")
    g = data.get("global", {})
    _check_keys(g, _GLOBAL_KEYS, "[global]")
    kwargs = {_GLOBAL_KEYS[k]: v for k, v in g.items()}
    agents = [_agent_from_table(t, k) for k, t in enumerate(_numbered(data.get("agent", {}), "agent"))]
    obstacles = []
    for k, t in enumerate(_numbered(data.get("obstacle", {}), "obstacle")):
        _check_keys(t, _OBSTACLE_KEYS, f"[obstacle.{k}]")
        obstacles.append(ObstacleRect(t["center"], t["width"], t["height"]))
    try:
        return ScenarioConfig(agents, obstacles, **kwargs)
    except TypeError as exc:
        raise ScenarioParseError(str(exc)) from None


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError(f"malformed scenario file: {exc}") from None
    return scenario_from_dict(data)


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    arr = np.asarray(v)
    if arr.ndim >= 1:
        return "[" + ", ".join(_fmt(float(x)) if arr.ndim == 1 else _fmt(x) for x in arr) + "]"
    raise TypeError(f"cannot format {v!r}")


def dump_scenario(cfg: ScenarioConfig) -> str:
    out = ["[global]"]
    g = [
        ("horizon", cfg.horizon),
        ("epsilon", float(cfg.epsilon)),
        ("delta_pair", float(cfg.delta_pair[0]) if len(set(cfg.delta_pair)) == 1 else list(cfg.delta_pair)),
        ("delta_obstacle", float(cfg.delta_obstacle)),
        ("samples", cfg.sample_count),
        ("delta_split", float(cfg.delta_split)),
        ("mode", cfg.mode.value),
        ("seed", cfg.seed),
        ("ripp_halving", cfg.ripp_halving),
        ("arena", list(cfg.arena)),
        ("a_max", float(cfg.a_max)),
        ("cov_samples", cfg.cov_samples),
        ("backend", cfg.backend),
        ("time_limit", float(cfg.time_limit)),
        ("rel_gap", float(cfg.rel_gap)),
    ]
    if cfg.big_m is not None:
        g.insert(5, ("big_m", float(cfg.big_m)))
    out += [f"{k} = {_fmt(v)}" for k, v in g]
    for k, a in enumerate(cfg.agents):
        out += ["", f"[agent.{k}]", f"mu0 = {_fmt(a.mu0)}", f"goal = {_fmt(a.goal)}", f"u_max = {_fmt(a.u_max)}"]
        out.append(f"noise = {_fmt(a.noise.kind)}")
        if a.noise.kind == "gaussian":
            out.append(f"Q = {_fmt(a.noise.Q)}")
        else:
            n = a.noise
            out += [f"altitude = {_fmt(float(n.altitude))}", f"w20 = {_fmt(float(n.w20))}"]
            out += [f"airspeed = {_fmt(float(n.airspeed))}", f"dt = {_fmt(float(n.dt))}"]
        if not np.array_equal(a.A, UAV_A):
            out.append(f"A = {_fmt(a.A)}")
        if not np.array_equal(a.B, UAV_B):
            out.append(f"B = {_fmt(a.B)}")
        if not np.array_equal(a.C0, DEFAULT_C0):
            out.append(f"C0 = {_fmt(a.C0)}")
    for k, o in enumerate(cfg.obstacles):
        out += ["", f"[obstacle.{k}]", f"center = {_fmt(o.center)}", f"width = {_fmt(o.width)}", f"height = {_fmt(o.height)}"]
    return "\n".join(out) + "\n"


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dump_scenario(cfg), encoding="utf-8")


# -- generated instances --------------------------------------------------------


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def random_scenario(
    seed: int,
    M: int,
    arena=(0.0, 0.0, 400.0, 400.0),
    n_obstacles: int = 0,
    approach=(60.0, 110.0),
    **overrides,
) -> ScenarioConfig:
    """Deterministic random instance whose straight start-goal segments all cross.

    Every segment passes through a common crossing point drawn uniformly from
    the middle half of the arena.  Headings are spread evenly over a half turn
    with jitter, so no two segments are parallel.  Starts lie a common
    distance (uniform in ``approach``, jittered by 10%) before the crossing
    point so that the agents arrive there at about the same time; goals lie a
    uniform fraction of the remaining room beyond it.  Both ends stay inside
    the arena.
    Obstacles (50 x 50 ft) are uniform in the arena but kept clear of starts
    and goals.  ``overrides`` are passed to :class:`ScenarioConfig`.
    """
    if M < 2:
        raise ValueError("random_scenario needs M >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(M, 7)))
    x0, y0, x1, y1 = (float(a) for a in arena)
    w, h = x1 - x0, y1 - y0
    margin = 10.0
    while True:
        p = np.array([x0 + w * rng.uniform(0.25, 0.75), y0 + h * rng.uniform(0.25, 0.75)])
        sector = math.pi / M
        base = rng.uniform(0.0, 2 * math.pi)
        headings = base + sector * np.arange(M) + rng.uniform(-0.25, 0.25, M) * sector
        rays = []
        for th in headings:
            d = np.array([math.cos(th), math.sin(th)])
            reach = []
            for sgn in (-1.0, 1.0):
                lim = math.inf
                for k, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
                    if abs(d[k]) > 1e-12:
                        bound = (hi - margin if sgn * d[k] > 0 else lo + margin) - p[k]
                        lim = min(lim, bound / (sgn * d[k]))
                reach.append(lim)
            rays.append((d, reach))
        # Near-equal start distances so the agents reach the crossing together.
        back = min(rng.uniform(*approach), min(r[0] for _, r in rays) / 1.1)
        ends = []
        for d, (r_back, r_fwd) in rays:
            dist_back = back * rng.uniform(0.9, 1.1)
            ends.append((p - dist_back * d, p + rng.uniform(0.5, 1.0) * r_fwd * d))
        starts = [s for s, _ in ends]
        if min(np.linalg.norm(a - b) for k, a in enumerate(starts) for b in starts[k + 1 :]) > 20.0:
            break
    agents = [AgentSpec(np.array([s[0], s[1], 0.0, 0.0]), g) for s, g in ends]
    obstacles = []
    while len(obstacles) < n_obstacles:
        c = np.array([x0 + 25 + (w - 50) * rng.uniform(), y0 + 25 + (h - 50) * rng.uniform()])
        o = ObstacleRect(c, 50.0, 50.0)
        pts = np.array([e for pair in ends for e in pair])
        if np.all(np.max(np.abs(pts - c), axis=1) > 45.0):
            obstacles.append(o)
    kwargs = dict(arena=tuple(arena), seed=int(seed))
    kwargs.update(overrides)
    return ScenarioConfig(agents, obstacles, **kwargs)


def example_scenario(**overrides) -> ScenarioConfig:
    """Two UAVs passing a gap between two 50 x 50 ft obstacles."""
    agents = [
        AgentSpec([130.0, 135.0, 0.0, 0.0], [300.0, 250.0]),
        AgentSpec([130.0, 120.0, 0.0, 0.0], [300.0, 150.0]),
    ]
    obstacles = [ObstacleRect([215.0, 215.0], 50.0, 50.0), ObstacleRect([215.0, 95.0], 50.0, 50.0)]
    kwargs = dict(sample_count=100, arena=(0.0, 0.0, 400.0, 400.0))
    kwargs.update(overrides)
    return ScenarioConfig(agents, obstacles, **kwargs)


def head_on_scenario(meet: bool = False, **overrides) -> ScenarioConfig:
    """Two UAVs on a collision course along the x axis.

    By default they swap ends.  With ``meet`` both head for the midpoint,
    so a plan cannot avoid the encounter by stepping past the other agent
    between two sampled timesteps.
    """
    goals = ([200.0, 200.0], [200.0, 200.0]) if meet else ([300.0, 200.0], [100.0, 200.0])
    agents = [
        AgentSpec([100.0, 200.0, 0.0, 0.0], goals[0]),
        AgentSpec([300.0, 200.0, 0.0, 0.0], goals[1]),
    ]
    kwargs = dict(arena=(0.0, 0.0, 400.0, 400.0))
    kwargs.update(overrides)
    return ScenarioConfig(agents, (), **kwargs)
