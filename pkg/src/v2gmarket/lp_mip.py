"""Linear and mixed-integer program representation plus solvers.

The model types are solver-agnostic.  Two interchangeable solvers sit
behind the same adapter contract:

* BaselineSolver - a self-contained bounded-variable primal simplex with
  a branch-and-bound layer, no external dependency, fully deterministic.
* HighsSolver - thin adapter over scipy's HiGHS bindings for large
  instances.

Dual values are reported under one normalization: writing a constraint
as g(x) <= 0, its multiplier mu is non-negative and enters the
Lagrangian as +mu*g.  Concretely, for a row a.x <= b the reported dual
is -dz/db >= 0, for a.x >= b it is +dz/db >= 0, and for an equality it
is the plain sensitivity dz/db.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

LE = "<="
EQ = "="
GE = ">="

FEAS_TOL = 1e-7
INT_TOL = 1e-6
MIP_GAP_ABS = 1e-6

NODE_BUDGET_ENV = "V2GMARKET_NODE_BUDGET"
DEFAULT_NODE_BUDGET = 200_000


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    is_integer: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict  # variable name -> coefficient
    sense: str
    rhs: float


@dataclass(frozen=True)
class LinearProgram:
    """Minimization problem over bounded variables.

    Treat instances as read-only; solvers never mutate them.
    """

    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: dict
    objective_constant: float = 0.0

    def validate(self) -> None:
        names = set()
        for v in self.variables:
            if v.name in names:
                raise ValueError(f"duplicate variable {v.name}")
            names.add(v.name)
            if not (v.lb <= v.ub):
                raise ValueError(f"variable {v.name}: lower bound exceeds upper bound")
        seen_rows = set()
        for c in self.constraints:
            if c.name in seen_rows:
                raise ValueError(f"duplicate constraint {c.name}")
            seen_rows.add(c.name)
            if c.sense not in (LE, EQ, GE):
                raise ValueError(f"constraint {c.name}: unknown sense {c.sense}")
            if not math.isfinite(c.rhs):
                raise ValueError(f"constraint {c.name}: non-finite rhs")
            for name, coef in c.coeffs.items():
                if name not in names:
                    raise ValueError(f"constraint {c.name}: unknown variable {name}")
                if not math.isfinite(coef):
                    raise ValueError(f"constraint {c.name}: non-finite coefficient on {name}")
        for name, coef in self.objective.items():
            if name not in names:
                raise ValueError(f"objective: unknown variable {name}")
            if not math.isfinite(coef):
                raise ValueError(f"objective: non-finite coefficient on {name}")

    @property
    def has_integers(self) -> bool:
        return any(v.is_integer for v in self.variables)


@dataclass
class Solution:
    status: SolveStatus
    values: dict = field(default_factory=dict)
    duals: dict | None = None
    objective_value: float = math.nan
    iterations: int = 0
    nodes: int = 0


class LinearProgramBuilder:
    """Incremental construction helper used by the model builders."""

    def __init__(self):
        self._vars: list[Variable] = []
        self._cons: list[Constraint] = []
        self._obj: dict = {}
        self._const = 0.0

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                integer: bool = False) -> str:
        self._vars.append(Variable(name, lb, ub, integer))
        return name

    def add_constr(self, name: str, coeffs: dict, sense: str, rhs: float) -> None:
        self._cons.append(Constraint(name, dict(coeffs), sense, rhs))

    def add_objective_term(self, name: str, coef: float) -> None:
        self._obj[name] = self._obj.get(name, 0.0) + coef

    def add_objective_constant(self, value: float) -> None:
        self._const += value

    def build(self) -> LinearProgram:
        lp = LinearProgram(tuple(self._vars), tuple(self._cons), dict(self._obj), self._const)
        lp.validate()
        return lp


# ---------------------------------------------------------------------------
# compiled array form


_SENSE_CODE = {LE: 0, EQ: 1, GE: 2}


class CompiledProblem:
    """Dense array form of a LinearProgram, reusable across bound changes."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        self.n = len(lp.variables)
        self.m = len(lp.constraints)
        self.var_names = [v.name for v in lp.variables]
        self.con_names = [c.name for c in lp.constraints]
        self.var_index = {name: j for j, name in enumerate(self.var_names)}
        self.lb = np.array([v.lb for v in lp.variables], dtype=float)
        self.ub = np.array([v.ub for v in lp.variables], dtype=float)
        self.integer_idx = np.array(
            [j for j, v in enumerate(lp.variables) if v.is_integer], dtype=int)
        self.c = np.zeros(self.n)
        for name, coef in lp.objective.items():
            self.c[self.var_index[name]] = coef
        self.c0 = lp.objective_constant
        self.A = np.zeros((self.m, self.n))
        self.sense = np.zeros(self.m, dtype=int)
        self.b = np.zeros(self.m)
        for i, con in enumerate(lp.constraints):
            self.sense[i] = _SENSE_CODE[con.sense]
            self.b[i] = con.rhs
            row = self.A[i]
            for name, coef in con.coeffs.items():
                row[self.var_index[name]] = coef

    def bounds_with(self, overrides: dict | None) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = self.lb.copy(), self.ub.copy()
        if overrides:
            for name, (lo, hi) in overrides.items():
                j = self.var_index[name]
                lb[j], ub[j] = lo, hi
        return lb, ub


# ---------------------------------------------------------------------------
# bounded-variable primal simplex

_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE = 3
_FIXED = 4

_PIV_TOL = 1e-9
_RC_TOL = 1e-9
_REFACTOR_EVERY = 100


class _SimplexResult:
    def __init__(self, status, x=None, y=None, obj=math.nan, iterations=0):
        self.status = status
        self.x = x
        self.y = y
        self.obj = obj
        self.iterations = iterations


def _initial_status(lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    status = np.full(lb.shape[0], _AT_LOWER, dtype=int)
    status[np.isinf(lb)] = _FREE
    at_upper = np.isinf(lb) & np.isfinite(ub)
    status[at_upper] = _AT_UPPER
    status[lb == ub] = _FIXED
    return status


def _nonbasic_value(j: int, status: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> float:
    st = status[j]
    if st in (_AT_LOWER, _FIXED):
        return lb[j]
    if st == _AT_UPPER:
        return ub[j]
    return 0.0


class _Simplex:
    """Primal simplex over the equality system [A | I] x = b with general
    bounds, artificial columns appended for phase 1 as needed."""

    def __init__(self, A: np.ndarray, sense: np.ndarray, b: np.ndarray,
                 lb: np.ndarray, ub: np.ndarray, max_iter: int):
        m, n = A.shape
        self.m, self.n_struct = m, n
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        slack_lb[sense == 0] = 0.0
        slack_ub[sense == 0] = math.inf
        slack_lb[sense == 2] = -math.inf
        slack_ub[sense == 2] = 0.0
        # equality slacks stay fixed at zero
        self.A = np.hstack([A, np.eye(m)])
        self.lb = np.concatenate([lb, slack_lb])
        self.ub = np.concatenate([ub, slack_ub])
        self.b = b.astype(float)
        self.max_iter = max_iter
        self.iterations = 0

    def solve(self, c_struct: np.ndarray) -> _SimplexResult:
        m = self.m
        N = self.A.shape[1]
        status = _initial_status(self.lb, self.ub)
        x = np.zeros(N)
        for j in range(N):
            x[j] = _nonbasic_value(j, status, self.lb, self.ub)
            if not math.isfinite(x[j]):
                x[j] = 0.0
        residual = self.b - self.A @ x

        # rows whose slack can absorb the residual start with a slack basis;
        # the rest get an artificial column
        basis = np.full(m, -1, dtype=int)
        art_cols, art_rows = [], []
        for i in range(m):
            sj = self.n_struct + i
            r = residual[i]
            if self.lb[sj] - 1e-12 <= x[sj] + r <= self.ub[sj] + 1e-12 and status[sj] != _FIXED:
                basis[i] = sj
                status[sj] = _BASIC
            else:
                art_rows.append(i)
                art_cols.append(1.0 if r >= 0 else -1.0)
        n_art = len(art_rows)
        if n_art:
            Aart = np.zeros((m, n_art))
            for k, (i, sgn) in enumerate(zip(art_rows, art_cols)):
                Aart[i, k] = sgn
            A_ext = np.hstack([self.A, Aart])
            lb_ext = np.concatenate([self.lb, np.zeros(n_art)])
            ub_ext = np.concatenate([self.ub, np.full(n_art, math.inf)])
            status = np.concatenate([status, np.full(n_art, _BASIC, dtype=int)])
            for k, i in enumerate(art_rows):
                basis[i] = N + k
        else:
            A_ext, lb_ext, ub_ext = self.A, self.lb, self.ub

        self._A = A_ext
        self._lb = lb_ext
        self._ub = ub_ext
        self._status = status
        self._basis = basis
        self._x = np.concatenate([x, np.zeros(n_art)]) if n_art else x
        self._refresh_basis()

        if n_art:
            c1 = np.zeros(A_ext.shape[1])
            c1[N:] = 1.0
            res = self._run(c1)
            if res is not None:
                return res
            art_total = float(np.sum(self._x[N:])) if n_art else 0.0
            if art_total > FEAS_TOL:
                return _SimplexResult(SolveStatus.INFEASIBLE, iterations=self.iterations)
            # pin artificials at zero for phase 2
            self._lb[N:] = 0.0
            self._ub[N:] = 0.0
            for j in range(N, A_ext.shape[1]):
                if self._status[j] != _BASIC:
                    self._status[j] = _FIXED
                    self._x[j] = 0.0

        c2 = np.zeros(A_ext.shape[1])
        c2[: self.n_struct] = c_struct
        res = self._run(c2, phase2=True)
        if res is not None:
            return res
        y = c2[self._basis] @ self._Binv
        obj = float(c2 @ self._x)
        return _SimplexResult(SolveStatus.OPTIMAL, self._x[: self.n_struct].copy(),
                              y, obj, self.iterations)

    # -- internals ---------------------------------------------------------

    def _refresh_basis(self) -> None:
        B = self._A[:, self._basis]
        try:
            self._Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self._Binv = np.linalg.pinv(B)
        self._recompute_basics()

    def _recompute_basics(self) -> None:
        xn = self._x.copy()
        xn[self._basis] = 0.0
        self._x[self._basis] = self._Binv @ (self.b - self._A @ xn)

    def _run(self, c: np.ndarray, phase2: bool = False):
        """Pivot until optimal.  Returns a terminal _SimplexResult for
        unbounded/iteration-limit exits, None when optimal."""
        bland = False
        degen_streak = 0
        pivots_since_refactor = 0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iter:
                return _SimplexResult(SolveStatus.ITERATION_LIMIT, iterations=self.iterations)

            y = c[self._basis] @ self._Binv
            d = c - y @ self._A
            st = self._status
            can_inc = ((st == _AT_LOWER) | (st == _FREE)) & (d < -_RC_TOL)
            can_dec = ((st == _AT_UPPER) | (st == _FREE)) & (d > _RC_TOL)
            eligible = np.flatnonzero(can_inc | can_dec)
            if eligible.size == 0:
                return None
            if bland:
                j = int(eligible[0])
            else:
                scores = np.abs(d[eligible])
                j = int(eligible[int(np.argmax(scores))])
            sigma = 1.0 if can_inc[j] else -1.0

            w = self._Binv @ self._A[:, j]
            xB = self._x[self._basis]
            lbB = self._lb[self._basis]
            ubB = self._ub[self._basis]
            delta = sigma * w

            t_best = math.inf
            span = self._ub[j] - self._lb[j]
            if math.isfinite(span):
                t_best = span
            blocking = -1  # basis position; -1 means the entering bound
            rows_pos = np.flatnonzero(delta > _PIV_TOL)
            rows_neg = np.flatnonzero(delta < -_PIV_TOL)
            candidates = []
            if rows_pos.size:
                ratios = (xB[rows_pos] - lbB[rows_pos]) / delta[rows_pos]
                candidates.append((rows_pos, ratios, True))
            if rows_neg.size:
                ratios = (ubB[rows_neg] - xB[rows_neg]) / (-delta[rows_neg])
                candidates.append((rows_neg, ratios, False))
            hit_lower = True
            for rows, ratios, to_lower in candidates:
                finite = np.isfinite(ratios)
                rows, ratios = rows[finite], ratios[finite]
                if rows.size == 0:
                    continue
                ratios = np.maximum(ratios, 0.0)
                kmin = float(np.min(ratios))
                if kmin < t_best - 1e-12:
                    ties = rows[np.abs(ratios - kmin) <= 1e-12]
                    if bland:
                        r = int(ties[int(np.argmin(self._basis[ties]))])
                    else:
                        r = int(ties[int(np.argmax(np.abs(w[ties])))])
                    t_best, blocking, hit_lower = kmin, r, to_lower
                # on a tie the earlier candidate stands: a bound flip is
                # preferred over a pivot, the positive-direction group over
                # the negative one

            if not math.isfinite(t_best):
                if phase2:
                    return _SimplexResult(SolveStatus.UNBOUNDED, iterations=self.iterations)
                # the phase-1 objective is bounded below by zero, so an
                # unblocked ray here can only be numerical corruption
                return _SimplexResult(SolveStatus.ITERATION_LIMIT, iterations=self.iterations)

            if t_best <= 1e-11:
                degen_streak += 1
                if degen_streak > max(100, self.m):
                    bland = True
            else:
                degen_streak = 0
                bland = False

            self._x[self._basis] = xB - sigma * t_best * w
            if blocking == -1:
                # bound flip, basis unchanged
                self._x[j] = self._x[j] + sigma * t_best
                self._status[j] = _AT_UPPER if self._status[j] == _AT_LOWER else _AT_LOWER
            else:
                leave = self._basis[blocking]
                self._x[leave] = lbB[blocking] if hit_lower else ubB[blocking]
                if self._lb[leave] == self._ub[leave]:
                    self._status[leave] = _FIXED
                else:
                    self._status[leave] = _AT_LOWER if hit_lower else _AT_UPPER
                self._x[j] = self._x[j] + sigma * t_best
                self._basis[blocking] = j
                self._status[j] = _BASIC
                # product-form update of the basis inverse
                wr = w[blocking]
                if abs(wr) < 1e-12:
                    self._refresh_basis()
                else:
                    row = self._Binv[blocking] / wr
                    self._Binv -= np.outer(w, row)
                    self._Binv[blocking] = row
                pivots_since_refactor += 1
                if pivots_since_refactor >= _REFACTOR_EVERY:
                    self._refresh_basis()
                    pivots_since_refactor = 0


# ---------------------------------------------------------------------------
# solvers


def _node_budget_default() -> int:
    raw = os.environ.get(NODE_BUDGET_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return DEFAULT_NODE_BUDGET


def _reported_duals(comp: CompiledProblem, y: np.ndarray) -> dict:
    """Map equality-form sensitivities to the g<=0 normalization."""
    duals = {}
    for i, name in enumerate(comp.con_names):
        if comp.sense[i] == 0:  # <=
            duals[name] = -float(y[i])
        elif comp.sense[i] == 2:  # >=
            duals[name] = float(y[i])
        else:
            duals[name] = float(y[i])
    return duals


class BaselineSolver:
    """Bundled deterministic simplex + branch-and-bound solver."""

    name = "baseline"

    def __init__(self, node_budget: int | None = None, max_lp_iterations: int | None = None):
        self.node_budget = node_budget if node_budget is not None else _node_budget_default()
        self.max_lp_iterations = max_lp_iterations

    def _lp_iter_cap(self, comp: CompiledProblem) -> int:
        if self.max_lp_iterations is not None:
            return self.max_lp_iterations
        return 20_000 + 60 * (comp.n + comp.m)

    def _solve_compiled_lp(self, comp: CompiledProblem, lb: np.ndarray,
                           ub: np.ndarray) -> _SimplexResult:
        sx = _Simplex(comp.A, comp.sense, comp.b, lb, ub, self._lp_iter_cap(comp))
        return sx.solve(comp.c)

    def solve_lp(self, lp: LinearProgram, bounds_override: dict | None = None,
                 relax: bool = False) -> Solution:
        if lp.has_integers and not relax:
            raise ValueError("solve_lp on a problem with integer variables; pass relax=True")
        comp = CompiledProblem(lp)
        lb, ub = comp.bounds_with(bounds_override)
        res = self._solve_compiled_lp(comp, lb, ub)
        if res.status is not SolveStatus.OPTIMAL:
            return Solution(res.status, iterations=res.iterations)
        values = {name: float(res.x[j]) for j, name in enumerate(comp.var_names)}
        return Solution(SolveStatus.OPTIMAL, values, _reported_duals(comp, res.y),
                        res.obj + comp.c0, iterations=res.iterations)

    def solve_mip(self, lp: LinearProgram, bounds_override: dict | None = None) -> Solution:
        comp = CompiledProblem(lp)
        lb0, ub0 = comp.bounds_with(bounds_override)
        if comp.integer_idx.size == 0:
            return self.solve_lp(lp, bounds_override)

        import heapq

        root = self._solve_compiled_lp(comp, lb0, ub0)
        nodes = 1
        if root.status is SolveStatus.UNBOUNDED:
            return Solution(SolveStatus.UNBOUNDED, nodes=nodes)
        if root.status is not SolveStatus.OPTIMAL:
            return Solution(root.status, nodes=nodes)

        incumbent_x = None
        incumbent_obj = math.inf
        heap = []
        seq = 0
        heapq.heappush(heap, (root.obj, seq, {}, root))
        limit_hit = False

        while heap:
            bound, _, fixes, res = heapq.heappop(heap)
            if bound >= incumbent_obj - MIP_GAP_ABS:
                break  # best-bound search: nothing left can improve
            frac_j = self._pick_branch_var(comp, res.x)
            if frac_j < 0:
                if res.obj < incumbent_obj - 1e-12:
                    incumbent_obj = res.obj
                    incumbent_x = res.x
                continue
            xval = res.x[frac_j]
            for branch_ub, branch_lb in ((math.floor(xval), None), (None, math.ceil(xval))):
                if nodes >= self.node_budget:
                    limit_hit = True
                    break
                child = dict(fixes)
                lo = lb0[frac_j] if branch_lb is None else max(lb0[frac_j], branch_lb)
                hi = ub0[frac_j] if branch_ub is None else min(ub0[frac_j], branch_ub)
                prev = child.get(frac_j, (lb0[frac_j], ub0[frac_j]))
                lo, hi = max(prev[0], lo), min(prev[1], hi)
                if lo > hi:
                    continue
                child[frac_j] = (lo, hi)
                lb, ub = lb0.copy(), ub0.copy()
                for j, (clo, chi) in child.items():
                    lb[j], ub[j] = clo, chi
                cres = self._solve_compiled_lp(comp, lb, ub)
                nodes += 1
                if cres.status is not SolveStatus.OPTIMAL:
                    continue
                if cres.obj >= incumbent_obj - MIP_GAP_ABS:
                    continue
                seq += 1
                heapq.heappush(heap, (cres.obj, seq, child, cres))
            if limit_hit:
                break

        if incumbent_x is None:
            status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.INFEASIBLE
            return Solution(status, nodes=nodes)
        status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.OPTIMAL
        values = {name: float(incumbent_x[j]) for j, name in enumerate(comp.var_names)}
        return Solution(status, values, None, incumbent_obj + comp.c0, nodes=nodes)

    @staticmethod
    def _pick_branch_var(comp: CompiledProblem, x: np.ndarray) -> int:
        best_j, best_score = -1, INT_TOL
        for j in comp.integer_idx:
            f = x[j] - math.floor(x[j])
            score = min(f, 1.0 - f)
            if score > best_score + 1e-12:
                best_j, best_score = int(j), score
        return best_j


class HighsSolver:
    """Adapter over scipy.optimize (HiGHS) for large instances."""

    name = "highs"

    def __init__(self, node_budget: int | None = None):
        self.node_budget = node_budget if node_budget is not None else _node_budget_default()

    @staticmethod
    def _split(comp: CompiledProblem, lb, ub):
        le = comp.sense == 0
        ge = comp.sense == 2
        eq = comp.sense == 1
        A_ub = np.vstack([comp.A[le], -comp.A[ge]]) if (le.any() or ge.any()) else None
        b_ub = np.concatenate([comp.b[le], -comp.b[ge]]) if A_ub is not None else None
        A_eq = comp.A[eq] if eq.any() else None
        b_eq = comp.b[eq] if A_eq is not None else None
        bounds = list(zip(lb, ub))
        return A_ub, b_ub, A_eq, b_eq, bounds, le, ge, eq

    def solve_lp(self, lp: LinearProgram, bounds_override: dict | None = None,
                 relax: bool = False) -> Solution:
        from scipy.optimize import linprog

        if lp.has_integers and not relax:
            raise ValueError("solve_lp on a problem with integer variables; pass relax=True")
        comp = CompiledProblem(lp)
        lb, ub = comp.bounds_with(bounds_override)
        A_ub, b_ub, A_eq, b_eq, bounds, le, ge, eq = self._split(comp, lb, ub)
        # presolve is kept off: the bundled HiGHS presolve mis-solves some
        # mixed-integer models with negative variable bounds, and the same
        # build is used for the LP path
        res = linprog(comp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs", options={"presolve": False})
        status = {0: SolveStatus.OPTIMAL, 2: SolveStatus.INFEASIBLE,
                  3: SolveStatus.UNBOUNDED}.get(res.status, SolveStatus.ITERATION_LIMIT)
        if status is not SolveStatus.OPTIMAL:
            return Solution(status)
        values = {name: float(res.x[j]) for j, name in enumerate(comp.var_names)}
        duals = {}
        if res.ineqlin is not None and A_ub is not None:
            marg = res.ineqlin.marginals
            rows = list(np.flatnonzero(le)) + list(np.flatnonzero(ge))
            for k, i in enumerate(rows):
                duals[comp.con_names[i]] = -float(marg[k])
        if res.eqlin is not None and A_eq is not None:
            for k, i in enumerate(np.flatnonzero(eq)):
                duals[comp.con_names[i]] = float(res.eqlin.marginals[k])
        return Solution(SolveStatus.OPTIMAL, values, duals,
                        float(res.fun) + comp.c0, iterations=int(res.nit))

    def solve_mip(self, lp: LinearProgram, bounds_override: dict | None = None) -> Solution:
        from scipy.optimize import milp
        from scipy.optimize import Bounds, LinearConstraint
        from scipy.sparse import csr_matrix

        comp = CompiledProblem(lp)
        if comp.integer_idx.size == 0:
            return self.solve_lp(lp, bounds_override)
        lb, ub = comp.bounds_with(bounds_override)
        lo = np.where(comp.sense == 0, -np.inf, comp.b)
        hi = np.where(comp.sense == 2, np.inf, comp.b)
        integrality = np.zeros(comp.n)
        integrality[comp.integer_idx] = 1
        res = milp(
            c=comp.c,
            constraints=LinearConstraint(csr_matrix(comp.A), lo, hi),
            integrality=integrality,
            bounds=Bounds(lb, ub),
            options={"node_limit": self.node_budget, "mip_rel_gap": 0.0,
                     "presolve": False},
        )
        status = {0: SolveStatus.OPTIMAL, 2: SolveStatus.INFEASIBLE,
                  3: SolveStatus.UNBOUNDED, 1: SolveStatus.ITERATION_LIMIT,
                  }.get(res.status, SolveStatus.ITERATION_LIMIT)
        if res.x is None:
            return Solution(status)
        values = {name: float(res.x[j]) for j, name in enumerate(comp.var_names)}
        return Solution(status, values, None, float(res.fun) + comp.c0)


_DEFAULT_SOLVER: BaselineSolver | None = None


def default_solver() -> BaselineSolver:
    global _DEFAULT_SOLVER
    if _DEFAULT_SOLVER is None:
        _DEFAULT_SOLVER = BaselineSolver()
    return _DEFAULT_SOLVER


def make_solver(name: str, node_budget: int | None = None):
    if name == "baseline":
        return BaselineSolver(node_budget)
    if name == "highs":
        return HighsSolver(node_budget)
    raise ValueError(f"unknown solver {name}")


def solve_lp(lp: LinearProgram, solver=None, bounds_override: dict | None = None,
             relax: bool = False) -> Solution:
    return (solver or default_solver()).solve_lp(lp, bounds_override, relax=relax)


def solve_mip(lp: LinearProgram, solver=None, bounds_override: dict | None = None) -> Solution:
    return (solver or default_solver()).solve_mip(lp, bounds_override)


def resolve_duals_with_fixed_integers(lp: LinearProgram, sol: Solution,
                                      solver=None) -> Solution:
    """Fix every integer variable at its solved value and re-solve the LP
    so dual values become available for the mixed-integer solution."""
    if sol.status is not SolveStatus.OPTIMAL:
        raise ValueError("resolve_duals_with_fixed_integers needs an Optimal solution")
    overrides = {}
    for v in lp.variables:
        if v.is_integer:
            val = round(sol.values[v.name])
            overrides[v.name] = (float(val), float(val))
    fixed = solve_lp(lp, solver=solver, bounds_override=overrides, relax=True)
    if fixed.status is SolveStatus.OPTIMAL and math.isfinite(sol.objective_value):
        scale = max(1.0, abs(sol.objective_value))
        if abs(fixed.objective_value - sol.objective_value) > 1e-6 * scale + 1e-6:
            raise RuntimeError(
                "fixed-integer LP objective deviates from the integer solution: "
                f"{fixed.objective_value} vs {sol.objective_value}")
    return fixed


def feasibility_violations(lp: LinearProgram, values: dict, tol: float = FEAS_TOL) -> list[str]:
    """Names of constraints and bounds the given point violates."""
    out = []
    for v in lp.variables:
        x = values[v.name]
        if x < v.lb - tol or x > v.ub + tol:
            out.append(f"bound:{v.name}")
    for con in lp.constraints:
        act = sum(coef * values[name] for name, coef in con.coeffs.items())
        if con.sense == LE and act > con.rhs + tol:
            out.append(con.name)
        elif con.sense == GE and act < con.rhs - tol:
            out.append(con.name)
        elif con.sense == EQ and abs(act - con.rhs) > tol:
            out.append(con.name)
    return out


# ---------------------------------------------------------------------------
# debug dump


def to_mps(lp: LinearProgram, name: str = "PROBLEM") -> str:
    """Render the program in MPS interchange form for external cross-checks.

    Row/column names longer than the classic 8-character fields are kept
    as-is; most modern readers accept the relaxed layout.
    """
    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    sense_tag = {LE: "L", EQ: "E", GE: "G"}
    for con in lp.constraints:
        lines.append(f" {sense_tag[con.sense]}  {con.name}")
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for v in lp.variables:
        if v.is_integer != in_int:
            tag = "INTORG" if v.is_integer else "INTEND"
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 '{tag}'")
            marker += 1
            in_int = v.is_integer
        entries = []
        obj = lp.objective.get(v.name, 0.0)
        if obj:
            entries.append(("COST", obj))
        for con in lp.constraints:
            if v.name in con.coeffs and con.coeffs[v.name] != 0.0:
                entries.append((con.name, con.coeffs[v.name]))
        if not entries:
            entries.append(("COST", 0.0))
        for row, coef in entries:
            lines.append(f"    {v.name:<10}{row:<10}{coef:.12g}")
    if in_int:
        lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
    lines.append("RHS")
    if lp.objective_constant:
        lines.append(f"    RHS       COST      {-lp.objective_constant:.12g}")
    for con in lp.constraints:
        if con.rhs != 0.0:
            lines.append(f"    RHS       {con.name:<10}{con.rhs:.12g}")
    lines.append("BOUNDS")
    for v in lp.variables:
        if v.lb == v.ub:
            lines.append(f" FX BND       {v.name:<10}{v.lb:.12g}")
            continue
        if math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" FR BND       {v.name}")
            continue
        if math.isinf(v.lb):
            lines.append(f" MI BND       {v.name}")
        elif v.lb != 0.0:
            lines.append(f" LO BND       {v.name:<10}{v.lb:.12g}")
        if math.isfinite(v.ub):
            lines.append(f" UP BND       {v.name:<10}{v.ub:.12g}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
