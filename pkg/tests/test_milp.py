import math
import warnings

import numpy as np
import pytest
from scipy.optimize import linprog

from ccmpc.milp import (
    LinExpr,
    MilpModel,
    SolverSettings,
    Status,
    VarKind,
    export_lp_text,
    lp_relaxation,
    solve,
)
from oracles import brute_force_milp, random_milp, vertex_enumeration_lp


def test_add_variable_ids_and_errors():
    m = MilpModel()
    assert m.add_variable(VarKind.CONTINUOUS, -12, 12, "u") == 0
    b = m.add_variable(VarKind.BINARY, 0, 1, "b")
    assert m.variables[b].kind is VarKind.BINARY
    with pytest.raises(ValueError):
        m.add_variable(VarKind.CONTINUOUS, 3, 1)
    with pytest.raises(ValueError):
        m.add_variable(VarKind.BINARY, 0, 2)


def test_add_constraint_unknown_id_and_duplicate_name():
    m = MilpModel()
    x = m.add_variable(name="x")
    y = m.add_variable(name="y")
    assert m.add_constraint({x: 1, y: 1}, "<=", 1.5, "cap") == 0
    with pytest.raises(KeyError):
        m.add_constraint({7: 1.0}, "<=", 1)
    with pytest.warns(UserWarning, match="duplicate"):
        m.add_constraint({x: 1}, ">=", 0, "cap")


def test_linexpr_constant_folds_into_rhs():
    m = MilpModel()
    x = m.add_variable(lb=-10, ub=10)
    m.add_constraint(LinExpr({x: 2.0}, 3.0), "<=", 7.0)
    con = m.constraints[0]
    assert con.rhs == 4.0 and con.coefs == (2.0,)


def test_vacuous_infeasible_row():
    m = MilpModel()
    m.add_variable(lb=0, ub=1)
    m.add_constraint({}, "<=", -1.0)
    assert lp_relaxation(m).status is Status.INFEASIBLE
    assert solve(m).status is Status.INFEASIBLE


def test_lp_fractional_optimum():
    m = MilpModel()
    x = m.add_variable(lb=0, ub=1)
    y = m.add_variable(lb=0, ub=1)
    m.add_constraint({x: 1, y: 1}, "<=", 1.5)
    m.set_objective({x: -1, y: -1})
    sol = lp_relaxation(m)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(-1.5, abs=1e-9)


def test_lp_infeasible_and_unbounded():
    m = MilpModel()
    x = m.add_variable(lb=-5, ub=5)
    m.add_constraint({x: 1}, ">=", 1)
    m.add_constraint({x: 1}, "<=", 0)
    assert lp_relaxation(m).status is Status.INFEASIBLE

    m = MilpModel()
    x = m.add_variable(lb=-math.inf, ub=math.inf)
    y = m.add_variable(lb=0, ub=math.inf)
    m.add_constraint({x: 1, y: -1}, "<=", 2)
    m.set_objective({x: 1})
    assert lp_relaxation(m).status is Status.UNBOUNDED


def test_lp_equality_and_free_variables():
    m = MilpModel()
    x = m.add_variable(lb=-math.inf, ub=math.inf)
    y = m.add_variable(lb=-math.inf, ub=math.inf)
    m.add_constraint({x: 1, y: 1}, "=", 3)
    m.add_constraint({x: 1, y: -1}, "=", 1)
    m.set_objective({x: 1})
    sol = lp_relaxation(m)
    assert sol.status is Status.OPTIMAL
    np.testing.assert_allclose(sol.values, [2.0, 1.0], atol=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = 10, 3
    A = np.round(rng.normal(size=(m, n)), 2)
    b = np.round(rng.uniform(0.5, 3, size=m), 2)
    c = np.round(rng.normal(size=n), 2)
    lb, ub = np.zeros(n), rng.integers(1, 4, size=n).astype(float)
    model = MilpModel()
    ids = [model.add_variable(lb=lb[k], ub=ub[k]) for k in range(n)]
    for i in range(m):
        model.add_constraint(dict(zip(ids, A[i])), "<=", b[i])
    model.set_objective(dict(zip(ids, c)))
    expected = vertex_enumeration_lp(c, A, b, lb, ub)
    assert lp_relaxation(model).objective == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("seed", range(40))
def test_lp_matches_highs_on_random_relaxations(seed):
    rng = np.random.default_rng(1000 + seed)
    model = random_milp(rng, int(rng.integers(0, 8)), int(rng.integers(1, 10)), int(rng.integers(2, 12)))
    lb, ub = model.bounds()
    lo, hi = model.row_bounds()
    A = model.constraint_matrix().toarray()
    fin_hi, fin_lo = np.isfinite(hi), np.isfinite(lo)
    res = linprog(
        model.cost_vector(),
        A_ub=np.vstack([A[fin_hi], -A[fin_lo]]),
        b_ub=np.concatenate([hi[fin_hi], -lo[fin_lo]]),
        bounds=list(zip(lb, ub)),
        method="highs",
    )
    sol = lp_relaxation(model)
    if res.status == 2:
        assert sol.status is Status.INFEASIBLE
    else:
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(res.fun, abs=1e-6)
        assert model.max_violation(sol.values) <= 1e-6


def test_binary_integrality_cuts_fractional_point():
    m = MilpModel()
    x = m.add_variable(VarKind.BINARY, 0, 1)
    y = m.add_variable(VarKind.BINARY, 0, 1)
    m.add_constraint({x: 1, y: 1}, "<=", 1.5)
    m.set_objective({x: -1, y: -1})
    sol = solve(m)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(-1.0)
    assert sorted(sol.values) == [0.0, 1.0]


def test_infeasible_binary_model():
    m = MilpModel()
    x = m.add_variable(VarKind.BINARY, 0, 1)
    y = m.add_variable(VarKind.BINARY, 0, 1)
    m.add_constraint({x: 1, y: 1}, ">=", 0.5)
    m.add_constraint({x: 1, y: 1}, "<=", 0.7)
    assert solve(m).status is Status.INFEASIBLE


@pytest.mark.parametrize("seed", range(25))
def test_bnb_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    model = random_milp(rng, int(rng.integers(1, 9)), int(rng.integers(0, 6)), int(rng.integers(2, 9)), big=seed % 2 == 0)
    expected, _ = brute_force_milp(model)
    sol = solve(model)
    if math.isinf(expected):
        assert sol.status is Status.INFEASIBLE
        return
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(expected, abs=1e-9)
    assert model.max_violation(sol.values) <= 1e-6
    b = model.binary_ids()
    assert np.all(np.abs(sol.values[b] - np.round(sol.values[b])) <= 1e-6)
    # LP relaxation bounds the MILP from below.
    assert sol.stats.root_bound <= sol.objective + 1e-9


def test_bnb_is_deterministic():
    model = random_milp(np.random.default_rng(3), 10, 4, 8, big=True)
    a, b = solve(model), solve(model)
    assert a.status is b.status
    assert a.stats.nodes == b.stats.nodes
    np.testing.assert_array_equal(a.values, b.values)


def test_node_limit_reports_iteration_limit():
    model = random_milp(np.random.default_rng(11), 12, 3, 10, big=True)
    full = solve(model)
    limited = solve(model, SolverSettings(node_limit=1))
    if full.stats.nodes > 1:
        assert limited.status in (Status.ITERATION_LIMIT, Status.OPTIMAL, Status.INFEASIBLE)
        assert limited.status is Status.ITERATION_LIMIT or limited.stats.nodes <= 1


@pytest.mark.parametrize("seed", range(10))
def test_highs_backend_agrees_with_bnb(seed):
    model = random_milp(np.random.default_rng(50 + seed), 8, 5, 8, big=True)
    a = solve(model)
    b = solve(model, SolverSettings(backend="highs", rel_gap=0.0))
    assert a.status is b.status
    if a.status is Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-6)


# -- LP export ------------------------------------------------------------------


def _two_var_model():
    m = MilpModel("demo")
    x = m.add_variable(VarKind.BINARY, 0, 1, "pick-x")
    y = m.add_variable(VarKind.CONTINUOUS, -12, 12, "u.1")
    z = m.add_variable(VarKind.CONTINUOUS, -math.inf, math.inf, "e1")
    m.add_constraint({x: 1, y: 2}, "<=", 3, "cap")
    m.add_constraint({z: 1, y: -1}, ">=", -4, "link")
    m.set_objective(LinExpr({x: -1, y: 0.5, z: 1}, 2.0))
    return m


def test_export_sections_and_names():
    text = export_lp_text(_two_var_model())
    lines = text.splitlines()
    for section in ("Minimize", "Subject To", "Bounds", "Binary", "End"):
        assert section in lines
    assert "pick_x" in lines[lines.index("Binary") + 1]
    assert " -12 <= u_1 <= 12" in lines
    assert " _e1 free" in lines
    assert all(ord(ch) < 128 for ch in text)


def test_export_empty_model_is_minimal():
    text = export_lp_text(MilpModel("empty"))
    assert text.splitlines()[-1] == "End"
    assert "Minimize" in text and "Subject To" in text


def test_export_is_byte_stable():
    assert export_lp_text(_two_var_model()) == export_lp_text(_two_var_model())


@pytest.mark.parametrize("seed", range(8))
def test_exported_file_solved_externally(tmp_path, seed):
    highspy = pytest.importorskip("highspy")
    model = random_milp(np.random.default_rng(200 + seed), 6, 4, 7, big=True)
    path = tmp_path / "m.lp"
    path.write_text(export_lp_text(model))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.readModel(str(path))
    h.run()
    ours = solve(model)
    status = h.modelStatusToString(h.getModelStatus())
    if ours.status is Status.INFEASIBLE:
        assert "nfeasible" in status
    else:
        external = h.getInfo().objective_function_value + model.objective.constant
        assert external == pytest.approx(ours.objective, abs=1e-6)
