"""HiGHS backend through :func:`scipy.optimize.milp`, for models too large for the dense solver."""
from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import MilpModel, MilpSolution, SolveStats, Status

_STATUS = {
    0: Status.OPTIMAL,
    1: Status.ITERATION_LIMIT,
    2: Status.INFEASIBLE,
    3: Status.UNBOUNDED,
    4: Status.ITERATION_LIMIT,
}


def solve_highs(model: MilpModel, settings) -> MilpSolution:
    t0 = time.perf_counter()
    lb, ub = model.bounds()
    constraints = ()
    if model.n_constraints:
        lo, hi = model.row_bounds()
        constraints = LinearConstraint(model.constraint_matrix(), lo, hi)
    options = {"mip_rel_gap": settings.rel_gap, "node_limit": settings.node_limit}
    if math.isfinite(settings.time_limit):
        options["time_limit"] = settings.time_limit
    res = milp(
        model.cost_vector(),
        constraints=constraints,
        integrality=model.integrality(),
        bounds=Bounds(lb, ub),
        options=options,
    )
    stats = SolveStats(wall_time=time.perf_counter() - t0, backend="highs")
    status = _STATUS.get(res.status, Status.ITERATION_LIMIT)
    stats.best_bound = float(getattr(res, "mip_dual_bound", math.nan) or math.nan)
    stats.nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.x is None:
        obj = math.inf if status is Status.INFEASIBLE else math.nan
        return MilpSolution(status, None, obj, stats)
    # Binaries are not rounded: that would perturb big-M rows by up to M * tolerance.
    x = np.asarray(res.x, dtype=float)
    obj = float(model.cost_vector() @ x) + model.objective.constant
    return MilpSolution(status, x, obj, stats)
