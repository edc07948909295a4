"""Small dense linear programs with certified solutions.

The model is min c'x subject to row constraints (either sense) and box
bounds.  Solving is delegated to scipy's HiGHS backend behind this interface,
but every reported optimum is re-certified here: primal residuals are
recomputed from scratch and a dual bound is assembled from the returned
multipliers.  A solve that cannot be certified is reported as a failure,
never as a silent wrong answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

FEAS_TOL = 1e-9
GAP_TOL = 1e-8

GE = ">="
LE = "<="


@dataclass(frozen=True)
class LpModel:
    """min objective . x  s.t.  rows, senses, rhs and lower/upper bounds."""

    objective: np.ndarray
    rows: np.ndarray          # (m, n) coefficient matrix
    senses: tuple             # per-row GE or LE
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        a = np.asarray(self.rows, dtype=float)
        # reshape(-1, 0) is ambiguous, so pin the row count for empty models
        a = a.reshape(-1, c.size) if c.size else a.reshape(len(self.senses), 0)
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if a.shape[0] != b.size or len(self.senses) != b.size:
            raise ValueError("row/sense/rhs sizes disagree")
        if lo.size != c.size or hi.size != c.size:
            raise ValueError("bound sizes disagree with variable count")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        for arr in (c, a, b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite model coefficients")
        if any(s not in (GE, LE) for s in self.senses):
            raise ValueError("senses must be '>=' or '<='")
        for name, arr in (("objective", c), ("rows", a), ("rhs", b),
                          ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "senses", tuple(self.senses))

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self.rhs.size


@dataclass(frozen=True)
class LpSolution:
    status: str               # optimal | infeasible | unbounded | error
    x: np.ndarray | None
    objective: float | None
    max_violation: float | None
    dual_gap: float | None
    iterations: int
    message: str = ""


def check_solution(model: LpModel, x) -> tuple[float, float]:
    """Independent residual check: (max constraint/bound violation, objective).

    A feasible point has violation <= 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.num_vars,):
        raise ValueError("point has %d entries, model has %d variables"
                         % (x.size, model.num_vars))
    viol = 0.0
    if model.num_rows:
        ax = model.rows @ x
        for j, sense in enumerate(model.senses):
            resid = model.rhs[j] - ax[j] if sense == GE else ax[j] - model.rhs[j]
            viol = max(viol, resid)
    viol = max(viol, float(np.max(model.lower - x, initial=0.0)))
    finite_hi = np.isfinite(model.upper)
    if finite_hi.any():
        viol = max(viol, float(np.max((x - model.upper)[finite_hi], initial=0.0)))
    return viol, float(model.objective @ x)


def _to_ub_form(model: LpModel):
    """All rows as A x <= b."""
    signs = np.array([-1.0 if s == GE else 1.0 for s in model.senses])
    a_ub = model.rows * signs[:, None]
    b_ub = model.rhs * signs
    return a_ub, b_ub


def solve(model: LpModel, feas_tol: float = FEAS_TOL,
          gap_tol: float = GAP_TOL) -> LpSolution:
    """Solve the model and certify the answer.

    status 'optimal' guarantees: max violation <= feas_tol and a dual bound
    within gap_tol relative of the primal objective.
    """
    if model.num_vars == 0:
        # vacuous model: feasible iff every row already holds at x = ()
        ok = all(rhs <= feas_tol if sense == GE else rhs >= -feas_tol
                 for sense, rhs in zip(model.senses, model.rhs))
        if ok:
            return LpSolution("optimal", np.zeros(0), 0.0, 0.0, 0.0, 0)
        return LpSolution("infeasible", None, None, None, None, 0,
                          "empty model with unsatisfiable row")
    a_ub, b_ub = _to_ub_form(model)
    bounds = list(zip(model.lower, [u if np.isfinite(u) else None
                                    for u in model.upper]))
    res = linprog(model.objective, A_ub=a_ub if model.num_rows else None,
                  b_ub=b_ub if model.num_rows else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution("infeasible", None, None, None, None, iters, res.message)
    if res.status == 3:
        return LpSolution("unbounded", None, None, None, None, iters, res.message)
    if res.status != 0:
        return LpSolution("error", None, None, None, None, iters, res.message)
    x = np.asarray(res.x, dtype=float)
    viol, obj = check_solution(model, x)
    # dual bound from the returned multipliers (HiGHS sign conventions:
    # inequality marginals <= 0, lower-bound marginals >= 0, upper <= 0)
    dual = 0.0
    if model.num_rows:
        dual += float(res.ineqlin.marginals @ b_ub)
    lo_m = np.asarray(res.lower.marginals, dtype=float)
    hi_m = np.asarray(res.upper.marginals, dtype=float)
    finite_lo = np.isfinite(model.lower)
    finite_hi = np.isfinite(model.upper)
    dual += float(lo_m[finite_lo] @ model.lower[finite_lo])
    dual += float(hi_m[finite_hi] @ model.upper[finite_hi])
    gap = abs(obj - dual) / max(1.0, abs(obj))
    if viol > feas_tol or gap > gap_tol:
        return LpSolution("error", x, obj, viol, gap, iters,
                          "certification failed: violation=%g gap=%g" % (viol, gap))
    return LpSolution("optimal", x, obj, viol, gap, iters, res.message)


def dump_model(model: LpModel, path):
    """Write the model in CPLEX LP text format with deterministic ordering,
    for cross-checking against external solvers."""
    def term(c, v):
        return "%+.17g x%d" % (c, v)

    with open(path, "w") as fh:
        fh.write("Minimize\n obj: ")
        fh.write(" ".join(term(c, v) for v, c in enumerate(model.objective)) or "0")
        fh.write("\nSubject To\n")
        for j in range(model.num_rows):
            row = " ".join(term(model.rows[j, v], v)
                           for v in range(model.num_vars) if model.rows[j, v] != 0.0)
            fh.write(" r%d: %s %s %.17g\n" % (j, row or "0 x0", model.senses[j],
                                              model.rhs[j]))
        fh.write("Bounds\n")
        for v in range(model.num_vars):
            hi = "+inf" if not np.isfinite(model.upper[v]) else "%.17g" % model.upper[v]
            fh.write(" %.17g <= x%d <= %s\n" % (model.lower[v], v, hi))
        fh.write("End\n")
