"""Monte-Carlo checks of computed plans, complexity audits and suboptimality."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import disturbance as dist
from .encoders import EncodedProblem
from .planner import PlanResult, draw_initial, draw_noise, propagate_plan
from .scenario import Mode, ScenarioConfig

CHUNK = 20_000
FLAG_SIGMAS = 3.0


@dataclass
class PairEstimate:
    i: int
    k: int
    t: int
    p: float
    se: float
    delta: float
    flagged: bool


@dataclass
class McReport:
    """Fresh-draw estimates: collision probability per (pair, t), obstacle violation per agent.

    A (pair, t) is flagged when its estimate exceeds its budget by more than
    ``FLAG_SIGMAS`` standard errors.
    """

    samples: int
    seed: int
    epsilon: float
    pairs: list[PairEstimate] = field(default_factory=list)
    obstacle: list[float] = field(default_factory=list)
    obstacle_se: list[float] = field(default_factory=list)

    @property
    def flags(self) -> list[PairEstimate]:
        return [e for e in self.pairs if e.flagged]

    @property
    def passed(self) -> bool:
        return not self.flags

    def estimate(self, i: int, k: int, t: int) -> PairEstimate:
        for e in self.pairs:
            if (e.i, e.k, e.t) == (min(i, k), max(i, k), t):
                return e
        raise KeyError((i, k, t))

    def to_json(self) -> str:
        d = asdict(self)
        d["event"] = "euclidean distance < epsilon"
        d["draws"] = "fresh, independent of planning ensembles"
        d["passed"] = self.passed
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> McReport:
        d = json.loads(text)
        pairs = [PairEstimate(**p) for p in d["pairs"]]
        return cls(d["samples"], d["seed"], d["epsilon"], pairs, d["obstacle"], d["obstacle_se"])


def standard_error(p: float, S: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / S)


def realizations(cfg: ScenarioConfig, controls, S: int, seed: int):
    """Yield chunks of fresh realized trajectories, shape (M, chunk, H+1, 4).

    Streams are keyed by (seed, agent, purpose, chunk index), so the result
    does not depend on how the chunks are scheduled.
    """
    H = cfg.horizon
    if controls is None:
        raise ValueError("no controls to validate (was the plan feasible?)")
    controls = np.asarray(controls, dtype=float)
    if controls.shape != (cfg.n_agents, H, 2):
        raise ValueError(f"controls must have shape {(cfg.n_agents, H, 2)}, got {controls.shape}")
    for c, start in enumerate(range(0, S, CHUNK)):
        n = min(CHUNK, S - start)
        init = [draw_initial(a, n, seed, i, dist.MC_INITIAL, c) for i, a in enumerate(cfg.agents)]
        noise = [draw_noise(a, H, n, seed, i, dist.MC_NOISE, c) for i, a in enumerate(cfg.agents)]
        yield propagate_plan(cfg, controls, init, noise)


def mc_collision_prob(cfg: ScenarioConfig, controls, S: int = 100_000, seed: int = 1) -> McReport:
    """Estimate Pr(||p_i - p_k||_2 < epsilon) at t = 1..H and obstacle violation per agent."""
    if S < 1:
        raise ValueError("S must be positive")
    M, H = cfg.n_agents, cfg.horizon
    hits = np.zeros((M, M, H + 1))
    obstacle_hits = np.zeros(M)
    for paths in realizations(cfg, controls, S, seed):
        pos = paths[..., :2]
        for i in range(M):
            for k in range(i + 1, M):
                close = np.linalg.norm(pos[i] - pos[k], axis=-1) < cfg.epsilon
                hits[i, k] += close.sum(axis=0)
            if cfg.obstacles:
                inside = np.zeros(pos.shape[1], dtype=bool)
                for o in cfg.obstacles:
                    inside |= o.contains(pos[i, :, 1:]).any(axis=1)
                obstacle_hits[i] += inside.sum()
    report = McReport(S, seed, cfg.epsilon)
    for t in range(1, H + 1):
        for i in range(M):
            for k in range(i + 1, M):
                p = hits[i, k, t] / S
                se = standard_error(p, S)
                delta = cfg.delta_pair[t - 1]
                report.pairs.append(PairEstimate(i, k, t, p, se, delta, bool(p > delta + FLAG_SIGMAS * se)))
    report.obstacle = (obstacle_hits / S).tolist()
    report.obstacle_se = [standard_error(p, S) for p in report.obstacle]
    return report


def mc_obstacle_violation(cfg: ScenarioConfig, controls, S: int = 100_000, seed: int = 1) -> np.ndarray:
    """Fraction of realized trajectories inside any obstacle at some t in 1..H, per agent."""
    return np.array(mc_collision_prob(cfg, controls, S, seed).obstacle)


# -- encoder-level checks ------------------------------------------------------------


def expected_binaries(cfg: ScenarioConfig, mode: Mode | str) -> dict:
    mode = Mode(mode)
    M, N, H = cfg.n_agents, cfg.sample_count, cfg.horizon
    pairs = M * (M - 1) // 2
    n_obs = len(cfg.obstacles)
    return {
        "objective": 0,
        "obstacle": M * (N + 4 * N * H * n_obs) if n_obs else 0,
        "sa_pair": 5 * N * N * H * pairs if mode is Mode.SA else 0,
        "ripp_pair": 4 * H * pairs if mode is Mode.RIPP else 0,
        "robust_pair": 4 * H * pairs if mode is Mode.ROBUST else 0,
    }


@dataclass
class ComplexityAudit:
    ok: bool
    expected: dict
    meta: dict
    actual: dict

    def diff(self) -> dict:
        keys = set(self.expected) | set(self.actual) | set(self.meta)
        return {
            k: (self.expected.get(k), self.meta.get(k), self.actual.get(k))
            for k in sorted(keys)
            if not self.expected.get(k) == self.meta.get(k) == self.actual.get(k)
        }


def audit_complexity(encoded: EncodedProblem, cfg: ScenarioConfig) -> ComplexityAudit:
    """Compare meta counts and registered binaries against the closed-form counts."""
    expected = expected_binaries(cfg, encoded.meta["mode"])
    meta = dict(encoded.meta["binaries"])
    actual = encoded.binary_counts()
    n_model = len(encoded.model.binary_ids())
    ok = expected == meta == actual and n_model == sum(expected.values())
    return ComplexityAudit(ok, expected, meta, actual)


def suboptimality(obj_ripp, obj_sa) -> float:
    """Percent by which the first objective exceeds the second."""
    vals = []
    for x in (obj_ripp, obj_sa):
        if isinstance(x, PlanResult):
            if not x.ok:
                raise ValueError(f"suboptimality needs optimal plans, got status {x.status.value}")
            x = x.objective
        if not math.isfinite(x):
            raise ValueError("suboptimality needs finite objectives")
        vals.append(float(x))
    if vals[1] <= 0:
        raise ValueError("reference objective must be positive")
    return 100.0 * (vals[0] - vals[1]) / vals[1]


def sampled_collision_fraction(samples_i, samples_k, t: int, epsilon: float) -> float:
    """Fraction of sample pairs (j, l) at time t whose sup-norm distance is at most epsilon."""
    a = np.asarray(samples_i)[:, t, :2]
    b = np.asarray(samples_k)[:, t, :2]
    d = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=-1)
    return float(np.mean(d <= epsilon))


def sampled_obstacle_fraction(samples, obstacles) -> float:
    """Fraction of sample trajectories inside some obstacle (closed box) at some t >= 1."""
    pos = np.asarray(samples)[:, 1:, :2]
    hit = np.zeros(pos.shape[0], dtype=bool)
    for o in obstacles:
        hit |= np.all((pos >= o.lower) & (pos <= o.upper), axis=-1).any(axis=1)
    return float(hit.mean())


def sample_objective(sample_paths, goals) -> float:
    """(H M N)^-1 sum over agents, t = 1..H and samples of the L1 distance to the goal."""
    M = len(sample_paths)
    N, H1 = np.asarray(sample_paths[0]).shape[:2]
    H = H1 - 1
    total = sum(
        np.abs(np.asarray(sample_paths[i])[:, 1:, :2] - np.asarray(goals[i])).sum() for i in range(M)
    )
    return float(total / (H * M * N))


def ripp_margins(mean_paths, alpha: dict, epsilon: float, halving: bool = False) -> dict:
    """Sup-norm gap between the mean-centred boxes minus epsilon, per (pair, t).

    ``alpha`` maps ``"t{t}_a{i}_a{k}"`` to the four half-widths
    (i_x, i_y, k_x, k_y) as stored in encoder metadata.
    """
    scale = 0.5 if halving else 1.0
    out = {}
    for key, (aix, aiy, akx, aky) in alpha.items():
        t, i, k = (int(part[1:]) for part in key.split("_"))
        d = np.abs(np.asarray(mean_paths)[i, t, :2] - np.asarray(mean_paths)[k, t, :2])
        gap = max(d[0] - scale * (aix + akx), d[1] - scale * (aiy + aky))
        out[(i, k, t)] = gap - epsilon
    return out
