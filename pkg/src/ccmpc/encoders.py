"""Translation of the stochastic planning problem into a :class:`MilpModel`.

Time indices in this module are 1-based: ``u^i_t`` drives agent ``i`` from
state ``t - 1`` to state ``t`` and collision constraints are imposed at
``t = 1..H``.  Strict separations are encoded as ``>= rhs + STRICT_MARGIN``.

Variable names (stable, so exported LP files diff cleanly)::

    u_i{i}_t{t}_{x|y}                      control
    abs_i{i}_t{t}_j{j}_{x|y}               |sample position - goal| epigraph
    e_obs_i{i}_j{j}                        sample trajectory j may hit an obstacle
    b_obs_i{i}_t{t}_o{o}_j{j}_f{f}         obstacle face relaxed
    b_sa_t{t}_a{i}_a{k}_j{j}_l{l}_f{f}     sample-pair separation side relaxed
    e_sa_t{t}_a{i}_a{k}_j{j}_l{l}          sample pair may collide
    b_ripp_t{t}_a{i}_a{k}_f{f}             RIPP separation side relaxed
    b_rob_t{t}_a{i}_a{k}_f{f}              robust separation side relaxed

Face / side index ``f``: 0 = +x, 1 = -x, 2 = +y, 3 = -y.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AffineCoeffs, MomentTrajectory
from .milp import LinExpr, MilpModel, VarKind
from .ripp import PairRegions, build_regions
from .scenario import Mode, ScenarioConfig

STRICT_MARGIN = 1e-6
FAMILIES = ("objective", "obstacle", "sa_pair", "ripp_pair", "robust_pair")

# Two-step nilpotent feedback for the robust baseline: (A + B K)^2 = 0.
ROBUST_K = np.array([[-1.0, 0.0, -2.0, 0.0], [0.0, -1.0, 0.0, -2.0]])


def budget_count(delta: float, n: int) -> int:
    """Largest integer count ``c`` with ``c / n <= delta``."""
    return int(math.floor(delta * n + 1e-9))


@dataclass
class DecisionLayout:
    """Where the decision variables live and how positions depend on them.

    ``u_ids[(i, t)]`` holds the (x, y) control variable ids.  Positions are
    ``const + sum(coef * u)``; the control part is shared by all samples of
    an agent and stored once per (agent, t, axis).
    """

    H: int
    M: int
    N: int
    coeffs: list
    moments: list | None = None
    u_ids: dict = field(default_factory=dict)
    families: dict = field(default_factory=lambda: {f: [] for f in FAMILIES})
    _ctrl: dict = field(default_factory=dict, repr=False)

    def control_part(self, i: int, t: int, axis: int) -> dict:
        """{var id: coef} of position ``axis`` of agent ``i`` at time ``t``."""
        key = (i, t, axis)
        if key not in self._ctrl:
            gain = self.coeffs[i].gain
            terms = {}
            for s in range(t):
                ux, uy = self.u_ids[(i, s + 1)]
                for var, g in ((ux, gain[t, s, axis, 0]), (uy, gain[t, s, axis, 1])):
                    if g != 0.0:
                        terms[var] = float(g)
            self._ctrl[key] = terms
        return self._ctrl[key]

    def sample_position(self, i: int, t: int, j: int) -> tuple[LinExpr, LinExpr]:
        c = self.coeffs[i].const[j, t]
        return tuple(LinExpr(self.control_part(i, t, k), float(c[k])) for k in range(2))

    def mean_position(self, i: int, t: int) -> tuple[LinExpr, LinExpr]:
        mom = self.moments[i]
        out = []
        for k in range(2):
            terms = {}
            for s in range(t):
                ux, uy = self.u_ids[(i, s + 1)]
                for var, g in ((ux, mom.mean_gain[t, s, k, 0]), (uy, mom.mean_gain[t, s, k, 1])):
                    if g != 0.0:
                        terms[var] = float(g)
            out.append(LinExpr(terms, float(mom.mean_base[t, k])))
        return tuple(out)

    def reach(self, i: int, t: int, axis: int, u_max: float) -> float:
        """Largest change the controls can make to a position coordinate."""
        return u_max * sum(abs(c) for c in self.control_part(i, t, axis).values())

    def decode_controls(self, values) -> np.ndarray:
        """Controls as an array (M, H, 2); row ``t - 1`` holds u_t."""
        out = np.zeros((self.M, self.H, 2))
        for (i, t), (ux, uy) in self.u_ids.items():
            out[i, t - 1] = values[ux], values[uy]
        return out


@dataclass
class EncodedProblem:
    model: MilpModel
    layout: DecisionLayout
    meta: dict

    def binary_counts(self) -> dict:
        return {f: len(ids) for f, ids in self.layout.families.items()}


def _diff(a: dict, b: dict) -> dict:
    out = dict(a)
    for v, c in b.items():
        out[v] = out.get(v, 0.0) - c
    return out


def _neg(a: dict) -> dict:
    return {v: -c for v, c in a.items()}


# -- individual encoders ----------------------------------------------------------


def encode_controls(model: MilpModel, layout: DecisionLayout, i: int, u_max: float) -> list[int]:
    """Control variables of agent ``i`` with box bounds ``|u| <= u_max``."""
    ids = []
    for t in range(1, layout.H + 1):
        pair = tuple(
            model.add_variable(VarKind.CONTINUOUS, -u_max, u_max, f"u_i{i}_t{t}_{ax}") for ax in "xy"
        )
        layout.u_ids[(i, t)] = pair
        ids.extend(pair)
    return ids


def encode_objective(model: MilpModel, layout: DecisionLayout, goals) -> LinExpr:
    """Normalized sample-average L1 distance to the goals over t = 1..H.

    Adds one epigraph variable per (agent, t, sample, axis) with
    ``abs >= +(p - Z)`` and ``abs >= -(p - Z)``.
    """
    H, M, N = layout.H, layout.M, layout.N
    w = 1.0 / (H * M * N)
    obj = LinExpr()
    for i in range(M):
        for t in range(1, H + 1):
            for k, ax in enumerate("xy"):
                ctrl = layout.control_part(i, t, k)
                neg = _neg(ctrl)
                const = layout.coeffs[i].const[:, t, k] - goals[i][k]
                for j in range(N):
                    a = model.add_variable(VarKind.CONTINUOUS, 0.0, math.inf, f"abs_i{i}_t{t}_j{j}_{ax}")
                    up = dict(ctrl)
                    up[a] = -1.0
                    model.add_constraint(up, "<=", -const[j], f"absp_i{i}_t{t}_j{j}_{ax}")
                    dn = dict(neg)
                    dn[a] = -1.0
                    model.add_constraint(dn, "<=", const[j], f"absn_i{i}_t{t}_j{j}_{ax}")
                    obj.add_term(a, w)
    model.set_objective(obj)
    return obj


def objective_offset(layout: DecisionLayout, goals) -> float:
    """The control-independent t = 0 term, reported alongside the objective."""
    H, M, N = layout.H, layout.M, layout.N
    total = sum(np.abs(layout.coeffs[i].const[:, 0, :2] - np.asarray(goals[i])[None]).sum() for i in range(M))
    return float(total / (H * M * N))


def encode_obstacle_chance(model: MilpModel, layout: DecisionLayout, i: int, obstacles, delta: float, big_m: float) -> list[int]:
    """Sample-average obstacle chance constraint for agent ``i``.

    Sample trajectory ``j`` is counted as violating (``e_j = 1``) whenever at
    some (t, obstacle) all four face disjuncts are relaxed; at most
    ``floor(delta N)`` trajectories may be counted.
    """
    if not obstacles:
        return []
    N, H = layout.N, layout.H
    e = [model.add_variable(VarKind.BINARY, 0, 1, f"e_obs_i{i}_j{j}") for j in range(N)]
    binaries = list(e)
    for t in range(1, H + 1):
        cx, cy = layout.control_part(i, t, 0), layout.control_part(i, t, 1)
        nx, ny = _neg(cx), _neg(cy)
        const = layout.coeffs[i].const[:, t, :2]
        for o, obs in enumerate(obstacles):
            lo, hi = obs.lower, obs.upper
            for j in range(N):
                b = [model.add_variable(VarKind.BINARY, 0, 1, f"b_obs_i{i}_t{t}_o{o}_j{j}_f{f}") for f in range(4)]
                binaries.extend(b)
                tag = f"i{i}_t{t}_o{o}_j{j}"
                # +x face: p_x >= hi_x unless relaxed, and so on.
                rows = (
                    (cx, hi[0] - const[j, 0]),
                    (nx, const[j, 0] - lo[0]),
                    (cy, hi[1] - const[j, 1]),
                    (ny, const[j, 1] - lo[1]),
                )
                for f, (terms, rhs) in enumerate(rows):
                    row = dict(terms)
                    row[b[f]] = big_m
                    model.add_constraint(row, ">=", rhs, f"obs_{tag}_f{f}")
                link = {bf: 1.0 for bf in b}
                link[e[j]] = -1.0
                model.add_constraint(link, "<=", 3.0, f"obslink_{tag}")
    model.add_constraint({ej: 1.0 for ej in e}, "<=", float(budget_count(delta, N)), f"obsbudget_i{i}")
    return binaries


def encode_sa_pair(model: MilpModel, layout: DecisionLayout, i: int, k: int, t: int, epsilon: float, delta: float, big_m: float) -> list[int]:
    """Sample-approximation collision chance constraint of agents ``i < k`` at ``t``.

    Per sample pair (j, l): four relaxable sup-norm separation rows, one
    indicator ``e`` with ``sum(b) - 3 <= e``; then
    ``sum(e) <= floor(delta N^2)``.
    """
    N = layout.N
    dx = _diff(layout.control_part(i, t, 0), layout.control_part(k, t, 0))
    dy = _diff(layout.control_part(i, t, 1), layout.control_part(k, t, 1))
    sides = (dx, _neg(dx), dy, _neg(dy))
    ci = layout.coeffs[i].const[:, t, :2]
    ck = layout.coeffs[k].const[:, t, :2]
    thr = epsilon + STRICT_MARGIN
    binaries, es = [], []
    for j in range(N):
        for l in range(N):
            tag = f"t{t}_a{i}_a{k}_j{j}_l{l}"
            c = ci[j] - ck[l]
            consts = (c[0], -c[0], c[1], -c[1])
            b = [model.add_variable(VarKind.BINARY, 0, 1, f"b_sa_{tag}_f{f}") for f in range(4)]
            e = model.add_variable(VarKind.BINARY, 0, 1, f"e_sa_{tag}")
            for f in range(4):
                row = dict(sides[f])
                row[b[f]] = big_m
                model.add_constraint(row, ">=", thr - consts[f], f"sa_{tag}_f{f}")
            link = {bf: 1.0 for bf in b}
            link[e] = -1.0
            model.add_constraint(link, "<=", 3.0, f"salink_{tag}")
            binaries.extend(b)
            binaries.append(e)
            es.append(e)
    model.add_constraint({e: 1.0 for e in es}, "<=", float(budget_count(delta, N * N)), f"sabudget_t{t}_a{i}_a{k}")
    return binaries


def _mean_separation(model, layout, i, k, t, thr_x, thr_y, big_m, prefix) -> list[int]:
    """Four relaxable rows ``+-(mu_i - mu_k) >= thr`` with at most three relaxed."""
    mi, mk = layout.mean_position(i, t), layout.mean_position(k, t)
    d = (mi[0] - mk[0], mi[1] - mk[1])
    exprs = (d[0], -d[0], d[1], -d[1])
    thrs = (thr_x, thr_x, thr_y, thr_y)
    tag = f"t{t}_a{i}_a{k}"
    if not (math.isfinite(thr_x) and math.isfinite(thr_y)):
        # No region can be certified; every side stays relaxed and the cap below is violated.
        b = [model.add_variable(VarKind.BINARY, 1, 1, f"b_{prefix}_{tag}_f{f}") for f in range(4)]
    else:
        b = [model.add_variable(VarKind.BINARY, 0, 1, f"b_{prefix}_{tag}_f{f}") for f in range(4)]
        for f in range(4):
            row = exprs[f].copy().add_term(b[f], big_m)
            model.add_constraint(row, ">=", thrs[f], f"{prefix}_{tag}_f{f}")
    model.add_constraint({bf: 1.0 for bf in b}, "<=", 3.0, f"{prefix}cap_{tag}")
    return b


def ripp_thresholds(regions: PairRegions, epsilon: float, halving: bool = False) -> tuple[float, float]:
    sx, sy = regions.threshold(halving)
    return sx + epsilon + STRICT_MARGIN, sy + epsilon + STRICT_MARGIN


def encode_ripp_pair(model: MilpModel, layout: DecisionLayout, regions: PairRegions, epsilon: float, big_m: float, halving: bool = False) -> list[int]:
    """Mean separation beyond both RIPP half-widths plus ``epsilon`` in x or in y."""
    thr_x, thr_y = ripp_thresholds(regions, epsilon, halving)
    return _mean_separation(model, layout, regions.i, regions.j, regions.t, thr_x, thr_y, big_m, "ripp")


def robust_tightening(A, B, K, a_max: float, H: int) -> np.ndarray:
    """Margins alpha(1..H) for a two-step nilpotent gain: 0, 0, then ||e_1^T L B||_1 a_max."""
    A, B, K = (np.asarray(m, dtype=float) for m in (A, B, K))
    L = A + B @ K
    if not np.allclose(L @ L, 0.0, atol=1e-12):
        raise ValueError("A + B K is not two-step nilpotent")
    alpha = np.zeros(H)
    alpha[2:] = np.abs(L[0] @ B).sum() * a_max
    return alpha


def encode_robust_pair(model: MilpModel, layout: DecisionLayout, i: int, k: int, t: int, epsilon: float, alpha, big_m: float) -> list[int]:
    thr = epsilon + 2.0 * float(alpha[t - 1]) + STRICT_MARGIN
    return _mean_separation(model, layout, i, k, t, thr, thr, big_m, "rob")


# -- big-M sufficiency ----------------------------------------------------------


def required_big_m(layout: DecisionLayout, cfg: ScenarioConfig, mode: Mode, thresholds=None) -> float:
    """Interval-arithmetic lower bound on a big-M that never cuts off a feasible point.

    A relaxed row ``expr >= thr - M`` must hold for every control in the box,
    so ``M >= thr - min(expr)``; ``min(expr)`` is bounded below by the
    constant part minus the control reach.
    """
    need = 0.0
    umax = [a.u_max for a in cfg.agents]
    H, M = layout.H, layout.M
    for i in range(M):
        for t in range(1, H + 1):
            c = layout.coeffs[i].const[:, t, :2]
            for o in cfg.obstacles:
                for k in range(2):
                    r = layout.reach(i, t, k, umax[i])
                    need = max(need, o.upper[k] - c[:, k].min() + r, c[:, k].max() + r - o.lower[k])
    for t in range(1, H + 1):
        for i in range(M):
            for k in range(i + 1, M):
                for ax in range(2):
                    r = layout.reach(i, t, ax, umax[i]) + layout.reach(k, t, ax, umax[k])
                    if mode is Mode.SA:
                        ci, ck = layout.coeffs[i].const[:, t, ax], layout.coeffs[k].const[:, t, ax]
                        spread = max(ci.max() - ck.min(), ck.max() - ci.min())
                        thr = cfg.epsilon + STRICT_MARGIN
                    else:
                        mi, mk = layout.moments[i].mean_base[t, ax], layout.moments[k].mean_base[t, ax]
                        spread = abs(mi - mk)
                        thr = thresholds[(i, k, t)][ax]
                        if not math.isfinite(thr):
                            continue
                    need = max(need, thr + spread + r)
    return need


# -- assembly ----------------------------------------------------------------------


def assemble(
    cfg: ScenarioConfig,
    coeffs: list[AffineCoeffs],
    moments: list[MomentTrajectory],
    mode: Mode | str | None = None,
    halving: bool | None = None,
    pair_steps=None,
    with_obstacles: bool = True,
) -> EncodedProblem:
    """Full planning MILP: controls, objective, obstacle and pairwise constraints.

    Pairwise constraints are appended in (t, i, k) order.  ``pair_steps`` and
    ``with_obstacles`` drop constraint families for infeasibility diagnosis;
    the resulting model no longer matches the closed-form counts.  When the scenario
    leaves ``big_m`` unset, the default is raised to the interval bound from
    :func:`required_big_m` if that is larger; an explicit ``big_m`` below the
    bound only triggers a warning.
    """
    mode = Mode(mode or cfg.mode)
    halving = cfg.ripp_halving if halving is None else halving
    H, M, N = cfg.horizon, cfg.n_agents, cfg.sample_count
    if len(coeffs) != M or (mode is not Mode.SA and len(moments) != M):
        raise ValueError("need one coefficient set and one moment trajectory per agent")
    for c in coeffs:
        if c.const.shape[:2] != (N, H + 1):
            raise ValueError(f"coefficients cover {c.const.shape[:2]} (N, H+1), scenario needs {(N, H + 1)}")

    model = MilpModel(f"ccmpc_{mode.value}")
    layout = DecisionLayout(H, M, N, list(coeffs), list(moments) if moments is not None else None)
    for i, agent in enumerate(cfg.agents):
        encode_controls(model, layout, i, agent.u_max)

    thresholds, regions, alpha = None, None, None
    if mode is Mode.RIPP:
        regions = build_regions([m.covariances for m in moments], cfg.delta_pair, cfg.delta_split)
        thresholds = {key: ripp_thresholds(r, cfg.epsilon, halving) for key, r in regions.items()}
    elif mode is Mode.ROBUST:
        alpha = robust_tightening(cfg.agents[0].A, cfg.agents[0].B, ROBUST_K, cfg.a_max, H)
        thr = cfg.epsilon + 2.0 * alpha + STRICT_MARGIN
        thresholds = {(i, k, t): (thr[t - 1], thr[t - 1]) for t in range(1, H + 1) for i in range(M) for k in range(i + 1, M)}

    needed = required_big_m(layout, cfg, mode, thresholds)
    big_m = cfg.effective_big_m
    if cfg.big_m is None and needed > big_m:
        big_m = math.ceil(needed)
    elif needed > big_m:
        warnings.warn(f"big_m={big_m:g} is below the interval bound {needed:.6g}; feasible plans may be cut off", stacklevel=2)

    goals = [a.goal for a in cfg.agents]
    encode_objective(model, layout, goals)
    if with_obstacles:
        for i in range(M):
            layout.families["obstacle"] += encode_obstacle_chance(model, layout, i, cfg.obstacles, cfg.delta_obstacle, big_m)
    steps = range(1, H + 1) if pair_steps is None else sorted(set(pair_steps))
    for t in steps:
        for i in range(M):
            for k in range(i + 1, M):
                if mode is Mode.SA:
                    ids = encode_sa_pair(model, layout, i, k, t, cfg.epsilon, cfg.delta_pair[t - 1], big_m)
                    layout.families["sa_pair"] += ids
                elif mode is Mode.RIPP:
                    ids = encode_ripp_pair(model, layout, regions[(i, k, t)], cfg.epsilon, big_m, halving)
                    layout.families["ripp_pair"] += ids
                else:
                    ids = encode_robust_pair(model, layout, i, k, t, cfg.epsilon, alpha, big_m)
                    layout.families["robust_pair"] += ids

    meta = {
        "mode": mode.value,
        "ripp_halving": bool(halving),
        "big_m": float(big_m),
        "big_m_required": float(needed),
        "objective_offset_t0": objective_offset(layout, goals),
        "n_vars": model.n_vars,
        "n_constraints": model.n_constraints,
        "binaries": {f: len(ids) for f, ids in layout.families.items()},
    }
    if regions is not None:
        meta["ripp_alpha"] = {
            f"t{t}_a{i}_a{k}": [r.region_i.alpha_x, r.region_i.alpha_y, r.region_j.alpha_x, r.region_j.alpha_y]
            for (i, k, t), r in sorted(regions.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1]))
        }
    if alpha is not None:
        meta["robust_alpha"] = alpha.tolist()
    return EncodedProblem(model, layout, meta)
