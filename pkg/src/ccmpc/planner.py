"""End-to-end planning: draw ensembles, compute moments, encode, solve, decode."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import disturbance as dist
from .dynamics import (
    AffineCoeffs,
    MomentTrajectory,
    affine_coefficients,
    covariance_trajectory,
    mean_trajectory,
    propagate_ensemble,
)
from .encoders import EncodedProblem, assemble
from .milp import SolverSettings, Status, solve
from .scenario import AgentSpec, Mode, ScenarioConfig


def draw_initial(agent: AgentSpec, N: int, seed: int, index: int, purpose: int, chunk: int | None = None) -> np.ndarray:
    rng = dist.rng_stream(seed, index, purpose, *(() if chunk is None else (chunk,)))
    L = dist.psd_factor(agent.C0)
    return agent.mu0 + rng.standard_normal((N, 4)) @ L.T


def draw_noise(agent: AgentSpec, H: int, N: int, seed: int, index: int, purpose: int, chunk: int | None = None) -> np.ndarray:
    spec = agent.noise
    if spec.kind == "gaussian":
        return dist.draw_gaussian(spec.Q, H, N, seed, index, purpose, chunk).values
    params = dist.dryden_params(spec.altitude, spec.w20, spec.airspeed, spec.dt)
    return dist.draw_dryden(params, H, N, seed, index, purpose, chunk).values


def noise_covariances(agent: AgentSpec, H: int, cov_samples: int, seed: int, index: int) -> list[np.ndarray]:
    """Per-step disturbance covariances; Dryden ones are estimated from ``cov_samples`` draws."""
    if agent.noise.kind == "gaussian":
        return [agent.noise.Q] * H
    draws = draw_noise(agent, H, cov_samples, seed, index, dist.COV_ESTIMATE)
    return [dist.empirical_cov(draws, t) for t in range(H)]


@dataclass
class Ensembles:
    """Planning draws and derived quantities shared by every mode."""

    initial: list
    noise: list
    coeffs: list[AffineCoeffs]
    moments: list[MomentTrajectory]


def prepare(cfg: ScenarioConfig) -> Ensembles:
    """Draw the planning ensembles and moments (identical for every mode at a given seed)."""
    H, N = cfg.horizon, cfg.sample_count
    initial, noise, coeffs, moments = [], [], [], []
    for i, agent in enumerate(cfg.agents):
        x0 = draw_initial(agent, N, cfg.seed, i, dist.PLAN_INITIAL)
        nu = draw_noise(agent, H, N, cfg.seed, i, dist.PLAN_NOISE)
        initial.append(x0)
        noise.append(nu)
        coeffs.append(affine_coefficients(agent.A, agent.B, H, x0, nu))
        Q = noise_covariances(agent, H, cfg.cov_samples, cfg.seed, i)
        mom = mean_trajectory(agent.A, agent.B, agent.mu0, H)
        covs = covariance_trajectory(agent.C0, Q, agent.A)
        moments.append(MomentTrajectory(mom.mean_base, mom.mean_gain, covs))
    return Ensembles(initial, noise, coeffs, moments)


@dataclass
class PlanResult:
    mode: Mode
    status: Status
    controls: np.ndarray | None  # (M, H, 2); row t - 1 holds u_t
    objective: float
    objective_offset: float
    build_time: float
    solve_time: float
    nodes: int
    meta: dict
    mean_paths: np.ndarray | None = None  # (M, H+1, 4)
    sample_paths: list | None = None  # per agent (N, H+1, 4)
    encoded: EncodedProblem | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def solver_settings(cfg: ScenarioConfig) -> SolverSettings:
    return SolverSettings(backend=cfg.backend, time_limit=cfg.time_limit, rel_gap=cfg.rel_gap)


def plan(cfg: ScenarioConfig, mode=None, ensembles: Ensembles | None = None, halving: bool | None = None, keep_model: bool = False) -> PlanResult:
    """Open-loop plan for every agent over the horizon."""
    mode = Mode(mode or cfg.mode)
    ens = ensembles or prepare(cfg)
    t0 = time.perf_counter()
    enc = assemble(cfg, ens.coeffs, ens.moments, mode, halving)
    build = time.perf_counter() - t0
    sol = solve(enc.model, solver_settings(cfg))
    controls = mean_paths = samples = None
    if sol.values is not None and sol.status in (Status.OPTIMAL, Status.ITERATION_LIMIT):
        controls = enc.layout.decode_controls(sol.values)
        mean_paths = np.array([m.mean(controls[i]) for i, m in enumerate(ens.moments)])
        samples = [c.evaluate(controls[i]) for i, c in enumerate(ens.coeffs)]
    return PlanResult(
        mode=mode,
        status=sol.status,
        controls=controls,
        objective=sol.objective,
        objective_offset=enc.meta["objective_offset_t0"],
        build_time=build,
        solve_time=sol.stats.wall_time,
        nodes=sol.stats.nodes,
        meta=enc.meta,
        mean_paths=mean_paths,
        sample_paths=samples,
        encoded=enc if keep_model else None,
    )


def diagnose_infeasible(cfg: ScenarioConfig, mode=None, ensembles: Ensembles | None = None, halving: bool | None = None) -> str:
    """Name the first constraint family (and timestep) that makes the plan infeasible.

    Families are added back one at a time: obstacles first, then pairwise
    constraints for t = 1, 2, ...; the first addition that turns the model
    infeasible is reported.
    """
    mode = Mode(mode or cfg.mode)
    ens = ensembles or prepare(cfg)
    settings = solver_settings(cfg)
    family = f"{mode.value}_pair"

    def infeasible(**kw) -> bool:
        enc = assemble(cfg, ens.coeffs, ens.moments, mode, halving, **kw)
        return solve(enc.model, settings).status is Status.INFEASIBLE

    if cfg.obstacles and infeasible(pair_steps=()):
        return "obstacle: no control sequence keeps enough sample trajectories clear of the obstacles"
    for t in range(1, cfg.horizon + 1):
        if infeasible(pair_steps=range(1, t + 1)):
            if infeasible(pair_steps=range(1, t + 1), with_obstacles=False):
                return f"{family} at t={t}: pairwise separation cannot be met"
            return f"{family} at t={t}: pairwise separation conflicts with the obstacle constraints"
    return "none found: the full model is infeasible only in combination (or the solver stopped early)"


def shift_scenario(cfg: ScenarioConfig, states: np.ndarray, step: int) -> ScenarioConfig:
    """Scenario re-rooted at realized states, with the prior covariance kept."""
    agents = [
        AgentSpec(states[i], a.goal, a.u_max, a.noise, a.A, a.B, a.C0) for i, a in enumerate(cfg.agents)
    ]
    return cfg.with_(agents=agents, seed=cfg.seed * 1000 + step + 1)


@dataclass
class RecedingResult:
    states: np.ndarray  # (M, steps+1, 4) realized trajectory
    applied: np.ndarray  # (M, steps, 2)
    plans: list


def receding_horizon(cfg: ScenarioConfig, steps: int, mode=None, seed: int = 0) -> RecedingResult:
    """Replan every step from the realized state, applying only the first control.

    The realized disturbance is a fresh draw independent of the planning
    ensembles.  Stops early (with the trajectory so far) if a replan is not
    solved to optimality.
    """
    M = cfg.n_agents
    x = np.array([a.mu0 for a in cfg.agents])
    realized = [x.copy()]
    applied, plans = [], []
    real_noise = [draw_noise(a, steps, 1, seed, i, dist.MC_NOISE)[0] for i, a in enumerate(cfg.agents)]
    current = cfg
    for k in range(steps):
        res = plan(current, mode)
        plans.append(res)
        if not res.ok:
            break
        u = res.controls[:, 0]
        x = np.array(
            [cfg.agents[i].A @ x[i] + cfg.agents[i].B @ u[i] + real_noise[i][k] for i in range(M)]
        )
        applied.append(u)
        realized.append(x.copy())
        current = shift_scenario(cfg, x, k)
    return RecedingResult(
        np.stack(realized, axis=1),
        np.stack(applied, axis=1) if applied else np.zeros((M, 0, 2)),
        plans,
    )


def propagate_plan(cfg: ScenarioConfig, controls: np.ndarray, initial, noise) -> np.ndarray:
    """Realized trajectories (M, S, H+1, 4) of open-loop controls under given draws."""
    return np.array(
        [
            propagate_ensemble(a.A, a.B, initial[i], noise[i], controls[i], agent=i).samples
            for i, a in enumerate(cfg.agents)
        ]
    )


__all__ = [
    "Ensembles",
    "PlanResult",
    "RecedingResult",
    "draw_initial",
    "diagnose_infeasible",
    "draw_noise",
    "noise_covariances",
    "plan",
    "prepare",
    "propagate_plan",
    "receding_horizon",
    "solver_settings",
]
