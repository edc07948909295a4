"""Assembly and auditing of the discretized intervention program.

The planner turns statistics into a finite LP: decision variables are the
per-type masses moved to each reduction depth, the objective is the
intervention cost, and the constraints pin the degree-weighted activation
curve above the diagonal by a margin Delta on an even grid of the shrunken
domain [0, 1 - alpha].  Solutions are audited independently of the solver on
finer grids against both the relaxed and the original constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp, meanfield
from .typestats import Statistics, StatIntervention, intervention_cost, post_statistics


class PlannerError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    eps: float
    grid_n: int = 100
    delta: float | str = "auto"   # 'auto' means the guarantee value delta_n
    fine_m: int | None = None     # audit grid, default 10 * grid_n
    eta_mode: str = "full"        # 'full' or 'seed-only' (eta in {0, r_w})

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise PlannerError("eps must lie in (0, 1]")
        if self.grid_n < 1:
            raise PlannerError("grid size N must be >= 1")
        if self.delta != "auto" and float(self.delta) <= 0.0:
            raise PlannerError("Delta must be positive or 'auto'")
        if self.eta_mode not in ("full", "seed-only"):
            raise PlannerError("eta_mode must be 'full' or 'seed-only'")

    @property
    def audit_points(self) -> int:
        return self.fine_m if self.fine_m is not None else 10 * self.grid_n


def alpha_eps(p0: Statistics, eps: float) -> float:
    """Domain-shrinking constant eps * d_min / <p, d>."""
    if not (0.0 < eps <= 1.0):
        raise PlannerError("eps must lie in (0, 1]")
    d_min = p0.d_min()
    if d_min == 0:
        raise PlannerError(
            "types with in-degree 0 carry positive mass: the constraint domain "
            "becomes [0, 1] and phi(1) <= 1 makes the margin constraint "
            "unsatisfiable at z = 1. Remove zero-in-degree types (they can "
            "never be activated through links) and rescale before planning.")
    return eps * d_min / p0.moment("d")


def delta_n(p0: Statistics, eps: float, grid_n: int) -> float:
    """Margin under which grid feasibility certifies the continuum constraint:
    half the grid spacing times the uniform derivative bound."""
    if grid_n < 1:
        raise PlannerError("grid size N must be >= 1")
    alpha = alpha_eps(p0, eps)
    return (1.0 - alpha) / (2.0 * grid_n) * meanfield.derivative_bound(p0)


def _variables(p0: Statistics, eta_mode: str):
    """(type, eta) columns: every positive-mass type, reductions 1..r_w
    (seed-only keeps just eta = r_w)."""
    cols = []
    for w in p0.support():
        if w.r == 0:
            continue
        etas = range(1, w.r + 1) if eta_mode == "full" else [w.r]
        cols.extend((w, eta) for eta in etas)
    return cols


def build_lp(p0: Statistics, cfg: PlannerConfig):
    """Assemble the discretized program.

    Returns (LpModel, columns, grid) where columns[i] is the (type, eta) of
    variable i.  The eta = 0 slack is eliminated: grid rows lower-bound the
    curve lift, one budget row per type caps the moved mass at the type mass.
    Columns that cannot lift any grid point but cost something are pruned.
    """
    alpha = alpha_eps(p0, cfg.eps)
    delta = delta_n(p0, cfg.eps, cfg.grid_n) if cfg.delta == "auto" else float(cfg.delta)
    n_grid = cfg.grid_n
    zs = (1.0 - alpha) * np.arange(n_grid + 1) / n_grid
    phi0 = meanfield.phi_grid(p0, zs)
    columns = _variables(p0, cfg.eta_mode)
    coeffs = []
    keep = []
    for w, eta in columns:
        col = meanfield.coeff_a(w, eta, zs, p0)
        if not np.any(col > 0.0) and w.cost_at(eta) > 0.0:
            continue  # can never help, would never be selected
        keep.append((w, eta))
        coeffs.append(col)
    columns = keep
    nv = len(columns)
    grid_rows = np.column_stack(coeffs) if nv else np.zeros((n_grid + 1, 0))
    grid_rhs = zs + delta - phi0
    types = sorted({w for w, _ in columns})
    budget_rows = np.zeros((len(types), nv))
    for j, w in enumerate(types):
        for i, (w2, _) in enumerate(columns):
            if w2 == w:
                budget_rows[j, i] = 1.0
    budget_rhs = np.array([p0.mass(w) for w in types])
    rows = np.vstack([grid_rows, budget_rows])
    senses = (lp.GE,) * (n_grid + 1) + (lp.LE,) * len(types)
    rhs = np.concatenate([grid_rhs, budget_rhs])
    objective = np.array([w.cost_at(eta) for w, eta in columns])
    model = lp.LpModel(objective, rows, senses, rhs,
                       np.zeros(nv), np.full(nv, np.inf))
    return model, columns, zs


def solution_to_intervention(p0: Statistics, columns, x) -> StatIntervention:
    """Rebuild the full intervention from LP variables, restoring the eta = 0
    mass of each type from mass conservation."""
    per_type: dict = {w: {} for w in p0.support()}
    for (w, eta), v in zip(columns, np.asarray(x, dtype=float)):
        v = max(0.0, float(v))
        if v > 0.0:
            per_type[w][eta] = per_type[w].get(eta, 0.0) + v
    masses = {}
    for w in p0.support():
        moved = sum(per_type[w].values())
        scale = p0.mass(w) / moved if moved > p0.mass(w) else 1.0
        total = 0.0
        for eta, v in per_type[w].items():
            masses[(w, eta)] = v * scale
            total += v * scale
        masses[(w, 0)] = p0.mass(w) - total
    return StatIntervention(masses)


@dataclass(frozen=True)
class AuditReport:
    zmax: float
    margin: float
    argmin_z: float

    @property
    def ok(self) -> bool:
        return self.margin > 0.0


def audit_original(p0: Statistics, xi: StatIntervention, eps: float,
                   m: int) -> AuditReport:
    """Check the un-relaxed constraint: the post-intervention curve must stay
    strictly above the diagonal up to psi^{-1}(1 - eps)."""
    p_post = post_statistics(p0, xi)
    zmax = meanfield.psi_inverse(p_post, 1.0 - eps)
    zs = np.linspace(0.0, zmax, m + 1)
    margins = meanfield.phi_grid(p_post, zs) - zs
    i = int(np.argmin(margins))
    return AuditReport(zmax, float(margins[i]), float(zs[i]))


def audit_relaxed(p0: Statistics, xi: StatIntervention, eps: float,
                  m: int) -> AuditReport:
    """Check the relaxed constraint on the fixed domain [0, 1 - alpha],
    cross-checking the decomposed curve against a direct evaluation."""
    alpha = alpha_eps(p0, eps)
    zs = np.linspace(0.0, 1.0 - alpha, m + 1)
    direct = meanfield.phi_grid(post_statistics(p0, xi), zs)
    decomposed = meanfield.phi_decomposed(p0, xi, zs)
    mismatch = float(np.max(np.abs(direct - decomposed)))
    if mismatch > 1e-8:
        raise PlannerError("decomposition cross-check failed: %g" % mismatch)
    margins = direct - zs
    i = int(np.argmin(margins))
    return AuditReport(1.0 - alpha, float(margins[i]), float(zs[i]))


@dataclass(frozen=True)
class PlanResult:
    xi: StatIntervention
    cost: float
    alpha: float
    delta_used: float
    delta_guarantee: float
    guarantee_regime: bool       # delta_used >= delta_guarantee
    grid_margin: float           # min over grid rows of lift minus requirement
    relaxed_audit: AuditReport
    original_audit: AuditReport
    lp_status: str
    lp_iterations: int
    lp_gap: float
    config: PlannerConfig
    binding_rows: tuple = ()

    def to_dict(self):
        from .typestats import intervention_to_records
        return {
            "config": {
                "eps": self.config.eps, "grid_n": self.config.grid_n,
                "delta": self.config.delta, "fine_m": self.config.audit_points,
                "eta_mode": self.config.eta_mode,
            },
            "alpha_eps": self.alpha,
            "delta_used": self.delta_used,
            "delta_N": self.delta_guarantee,
            "regime": "guarantee (Delta >= Delta_N)" if self.guarantee_regime
                      else "empirical (Delta < Delta_N)",
            "cost": self.cost,
            "xi": intervention_to_records(self.xi),
            "audit": {
                "grid_margin": self.grid_margin,
                "relaxed_margin": self.relaxed_audit.margin,
                "original_margin": self.original_audit.margin,
                "zmax": self.original_audit.zmax,
            },
            "lp": {"status": self.lp_status, "iterations": self.lp_iterations,
                   "gap": self.lp_gap},
        }


def plan(p0: Statistics, cfg: PlannerConfig) -> PlanResult:
    """Solve the discretized program and audit the result.

    Raises PlannerError on infeasibility, naming the binding grid points.
    """
    alpha = alpha_eps(p0, cfg.eps)
    delta_guar = delta_n(p0, cfg.eps, cfg.grid_n)
    delta = delta_guar if cfg.delta == "auto" else float(cfg.delta)
    model, columns, zs = build_lp(p0, cfg)
    sol = lp.solve(model)
    if sol.status == "infeasible":
        phi0 = meanfield.phi_grid(p0, zs)
        need = zs + delta - phi0
        # rows where even the full budget cannot close the gap
        capacity = np.zeros_like(zs)
        for i, (w, eta) in enumerate(columns):
            capacity += p0.mass(w) * meanfield.coeff_a(w, eta, zs, p0)
        worst = [float(z) for z, nd, cap in zip(zs, need, capacity) if nd > cap]
        raise PlannerError(
            "LP infeasible: budgets cannot lift the curve above z + Delta at "
            "grid points %s" % (worst[:5] if worst else "(degenerate)"))
    if sol.status != "optimal":
        raise PlannerError("LP solve failed: %s (%s)" % (sol.status, sol.message))
    xi = solution_to_intervention(p0, columns, sol.x)
    cost = intervention_cost(xi)
    # independent residual audit of the grid rows
    viol, _ = lp.check_solution(model, sol.x)
    n_grid = cfg.grid_n
    lift = model.rows[: n_grid + 1] @ sol.x if len(columns) else np.zeros(n_grid + 1)
    grid_margin = float(np.min(lift - model.rhs[: n_grid + 1]))
    m = cfg.audit_points
    relaxed = audit_relaxed(p0, xi, cfg.eps, m)
    original = audit_original(p0, xi, cfg.eps, m)
    binding = tuple(float(z) for z, g in zip(zs, lift - model.rhs[: n_grid + 1])
                    if g <= 1e-9)
    return PlanResult(
        xi=xi, cost=cost, alpha=alpha, delta_used=delta,
        delta_guarantee=delta_guar,
        guarantee_regime=delta >= delta_guar - 1e-15,
        grid_margin=grid_margin, relaxed_audit=relaxed, original_audit=original,
        lp_status=sol.status, lp_iterations=sol.iterations,
        lp_gap=sol.dual_gap if sol.dual_gap is not None else float("nan"),
        config=cfg, binding_rows=binding,
    )
