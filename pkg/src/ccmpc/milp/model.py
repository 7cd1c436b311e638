"""Solver-independent MILP representation."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class VarKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


class LinExpr:
    """Sparse linear expression ``sum_k coef_k * var_k + constant``."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms=None, constant: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.constant = float(constant)

    def copy(self) -> LinExpr:
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: int, coef: float) -> LinExpr:
        if coef:
            self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for v, c in other.terms.items():
                out.terms[v] = out.terms.get(v, 0.0) + c
            out.constant += other.constant
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({v: -c for v, c in self.terms.items()}, -self.constant)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        k = float(k)
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def value(self, x) -> float:
        return self.constant + sum(c * x[v] for v, c in self.terms.items())

    def __repr__(self):
        body = " + ".join(f"{c:g}*v{v}" for v, c in self.terms.items())
        return f"LinExpr({body or '0'} + {self.constant:g})"


@dataclass(frozen=True)
class Variable:
    id: int
    kind: VarKind
    lb: float
    ub: float
    name: str


@dataclass(frozen=True)
class Constraint:
    """``sum coefs[k] * x[indices[k]]  sense  rhs`` (expression constants folded into rhs)."""

    indices: tuple
    coefs: tuple
    sense: Sense
    rhs: float
    name: str


class MilpModel:
    """Variables, linear constraints and a linear objective to minimize."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = LinExpr()
        self._var_names: set[str] = set()
        self._con_names: set[str] = set()

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.kind is VarKind.BINARY]

    def add_variable(self, kind=VarKind.CONTINUOUS, lb: float = 0.0, ub: float = math.inf, name: str | None = None) -> int:
        kind = VarKind(kind)
        lb, ub = float(lb), float(ub)
        if lb > ub:
            raise ValueError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        if kind is VarKind.BINARY and (lb < 0.0 or ub > 1.0):
            raise ValueError(f"binary variable {name!r} needs bounds within [0, 1], got [{lb}, {ub}]")
        vid = len(self.variables)
        name = name or f"x{vid}"
        if name in self._var_names:
            warnings.warn(f"duplicate variable name {name!r}", stacklevel=2)
        self._var_names.add(name)
        self.variables.append(Variable(vid, kind, lb, ub, name))
        return vid

    def add_constraint(self, expr, sense, rhs: float = 0.0, name: str | None = None) -> int:
        """Append ``expr sense rhs``; ``expr`` is a LinExpr or a {var: coef} dict."""
        sense = Sense(sense)
        if not isinstance(expr, LinExpr):
            expr = LinExpr(expr)
        n = len(self.variables)
        for v in expr.terms:
            if not 0 <= v < n:
                raise KeyError(f"constraint {name!r} references unknown variable id {v}")
        cid = len(self.constraints)
        name = name or f"c{cid}"
        if name in self._con_names:
            warnings.warn(f"duplicate constraint name {name!r}", stacklevel=2)
        self._con_names.add(name)
        items = [(v, c) for v, c in expr.terms.items() if c != 0.0]
        self.constraints.append(
            Constraint(
                tuple(v for v, _ in items),
                tuple(c for _, c in items),
                sense,
                float(rhs) - expr.constant,
                name,
            )
        )
        return cid

    def set_objective(self, expr) -> None:
        expr = expr if isinstance(expr, LinExpr) else LinExpr(expr)
        for v in expr.terms:
            if not 0 <= v < len(self.variables):
                raise KeyError(f"objective references unknown variable id {v}")
        self.objective = expr

    # -- array views --------------------------------------------------------

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for v, k in self.objective.terms.items():
            c[v] += k
        return c

    def constraint_matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            rows.extend([i] * len(con.indices))
            cols.extend(con.indices)
            vals.extend(con.coefs)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_constraints, self.n_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.n_constraints, -np.inf)
        hi = np.full(self.n_constraints, np.inf)
        for i, con in enumerate(self.constraints):
            if con.sense is not Sense.GE:
                hi[i] = con.rhs
            if con.sense is not Sense.LE:
                lo[i] = con.rhs
        return lo, hi

    def integrality(self) -> np.ndarray:
        return np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=int)

    def max_violation(self, x) -> float:
        """Largest absolute constraint or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        lb, ub = self.bounds()
        worst = float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
        if self.n_constraints:
            act = self.constraint_matrix() @ x
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(lo - act, initial=0.0)), float(np.max(act - hi, initial=0.0)))
        return worst


@dataclass
class SolveStats:
    nodes: int = 0
    lp_pivots: int = 0
    wall_time: float = 0.0
    root_bound: float = math.nan
    best_bound: float = math.nan
    backend: str = ""


@dataclass
class MilpSolution:
    status: Status
    values: np.ndarray | None
    objective: float
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL
