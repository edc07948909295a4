import math

import numpy as np
import pytest

from conftest import lin, random_statistics
from ltmplan import lp, meanfield
from ltmplan.planner import (AuditReport, PlannerConfig, PlannerError,
                             alpha_eps, audit_original, audit_relaxed,
                             build_lp, delta_n, plan,
                             solution_to_intervention)
from ltmplan.typestats import (AgentType, Statistics, intervention_cost,
                               post_statistics)


def mixed_quartic():
    """d = k = 4 family with thresholds 1, 2, 3."""
    return Statistics({AgentType(4, 4, 1, lin(1)): 0.3,
                       AgentType(4, 4, 2, lin(2)): 0.4,
                       AgentType(4, 4, 3, lin(3)): 0.3})


def guarantee_config(p0, eps):
    """Grid fine enough that the certified margin fits under alpha."""
    alpha = alpha_eps(p0, eps)
    n = math.ceil(meanfield.derivative_bound(p0) * (1.0 - alpha) / alpha)
    return PlannerConfig(eps=eps, grid_n=n, delta="auto")


def test_config_validation():
    with pytest.raises(PlannerError):
        PlannerConfig(eps=0.0)
    with pytest.raises(PlannerError):
        PlannerConfig(eps=0.1, grid_n=0)
    with pytest.raises(PlannerError):
        PlannerConfig(eps=0.1, delta=-0.1)
    with pytest.raises(PlannerError):
        PlannerConfig(eps=0.1, eta_mode="bogus")
    assert PlannerConfig(eps=0.1, grid_n=50).audit_points == 500
    assert PlannerConfig(eps=0.1, fine_m=77).audit_points == 77


def test_alpha_eps():
    p = Statistics({AgentType(1, 1, 1, lin(1)): 2 / 3,
                    AgentType(2, 2, 2, lin(2)): 1 / 3})
    # eps * d_min / <d> = 0.2 * 1 / (4/3)
    assert alpha_eps(p, 0.2) == pytest.approx(0.15)
    with pytest.raises(PlannerError, match="in-degree 0"):
        alpha_eps(Statistics({AgentType(0, 2, 1, lin(1)): 1.0}), 0.2)


def test_delta_n():
    p = mixed_quartic()
    alpha = alpha_eps(p, 0.1)
    expect = (1.0 - alpha) / 200 * meanfield.derivative_bound(p)
    assert delta_n(p, 0.1, 100) == pytest.approx(expect)


def test_build_lp_structure():
    p0 = mixed_quartic()
    cfg = PlannerConfig(eps=0.1, grid_n=10, delta=0.05)
    model, columns, zs = build_lp(p0, cfg)
    # reductions 1..r for each type: 1 + 2 + 3 variables
    assert len(columns) == 6
    assert model.num_rows == 11 + 3          # grid rows plus one budget per type
    assert model.senses[:11] == (lp.GE,) * 11
    assert model.senses[11:] == (lp.LE,) * 3
    assert zs[0] == 0.0 and zs[-1] == pytest.approx(1.0 - alpha_eps(p0, 0.1))
    # grid row rhs is z + Delta - phi0(z)
    phi0 = meanfield.phi_grid(p0, zs)
    assert model.rhs[:11] == pytest.approx(zs + 0.05 - phi0)
    # objective carries each type's cost table
    for c, (w, eta) in zip(model.objective, columns):
        assert c == w.cost_at(eta)


def test_build_lp_seed_only():
    p0 = mixed_quartic()
    _, columns, _ = build_lp(p0, PlannerConfig(eps=0.1, grid_n=10, delta=0.05,
                                               eta_mode="seed-only"))
    assert [(w.r, eta) for w, eta in columns] == [(1, 1), (2, 2), (3, 3)]


def test_solution_to_intervention_round_trip():
    p0 = mixed_quartic()
    cfg = PlannerConfig(eps=0.1, grid_n=20, delta=0.05)
    model, columns, _ = build_lp(p0, cfg)
    sol = lp.solve(model)
    assert sol.status == "optimal"
    xi = solution_to_intervention(p0, columns, sol.x)
    xi.validate_against(p0)
    assert intervention_cost(xi) == pytest.approx(sol.objective, abs=1e-9)


def test_plan_reference_instance():
    # the cheapest fix is moving mass of the threshold-1 type down one step
    res = plan(mixed_quartic(), PlannerConfig(eps=0.1, grid_n=100, delta=0.05))
    assert res.cost == pytest.approx(0.05, abs=1e-8)
    assert not res.guarantee_regime
    active = {(w.r, eta): m for w, eta, m in res.xi.active_items()}
    assert set(active) == {(1, 1)}
    assert active[(1, 1)] == pytest.approx(0.05, abs=1e-8)
    assert res.grid_margin >= -1e-9
    assert res.relaxed_audit.margin > 0.0
    assert res.original_audit.ok
    assert res.lp_status == "optimal"


def test_plan_guarantee_regime_random():
    rng = np.random.default_rng(41)
    for _ in range(12):
        p0 = random_statistics(rng, max_types=4, k_max=5, d_equals_k=True)
        eps = float(rng.uniform(0.3, 0.6))
        res = plan(p0, guarantee_config(p0, eps))
        assert res.guarantee_regime
        assert res.grid_margin >= -1e-9
        # certified regime implies the continuum constraints hold
        assert res.relaxed_audit.margin > 0.0
        assert res.original_audit.margin > 0.0
        res.xi.validate_against(p0)


def test_plan_cost_decreases_with_grid_refinement():
    p0 = Statistics({AgentType(2, 2, 1, lin(1)): 0.4,
                     AgentType(2, 2, 2, lin(2)): 0.6})
    costs = []
    for n in (25, 50, 100, 200):
        res = plan(p0, PlannerConfig(eps=0.45, grid_n=n, delta="auto"))
        costs.append(res.cost)
    assert all(b <= a + 1e-10 for a, b in zip(costs, costs[1:]))
    assert costs[-1] < costs[0]


def test_plan_seed_only_never_cheaper():
    rng = np.random.default_rng(42)
    strict = 0
    for _ in range(10):
        p0 = random_statistics(rng, max_types=4, k_max=5, d_equals_k=True)
        eps = float(rng.uniform(0.3, 0.6))
        cfg = guarantee_config(p0, eps)
        full = plan(p0, cfg)
        seed = plan(p0, PlannerConfig(eps=eps, grid_n=cfg.grid_n,
                                      delta="auto", eta_mode="seed-only"))
        assert full.cost <= seed.cost + 1e-9
        if full.cost < seed.cost - 1e-9:
            strict += 1
    assert strict >= 1


def test_plan_infeasible_reports_grid_points():
    p0 = Statistics({AgentType(2, 2, 2, lin(2)): 1.0})
    # Delta far above alpha: near z = 1 - alpha even full seeding cannot
    # reach z + Delta
    with pytest.raises(PlannerError, match="infeasible"):
        plan(p0, PlannerConfig(eps=0.1, grid_n=50, delta=0.2))


def test_audits_flag_inadequate_intervention():
    p0 = mixed_quartic()
    from ltmplan.typestats import null_intervention
    xi = null_intervention(p0)
    rel = audit_relaxed(p0, xi, 0.1, 200)
    orig = audit_original(p0, xi, 0.1, 200)
    # without seeded mass the curve starts on the diagonal at z = 0, so the
    # strict-margin requirement already fails there
    assert not rel.ok and rel.margin <= 0.0
    assert not orig.ok


def test_plan_to_dict_is_json_ready():
    import json
    res = plan(mixed_quartic(), PlannerConfig(eps=0.1, grid_n=50, delta=0.05))
    doc = res.to_dict()
    text = json.dumps(doc)
    assert "empirical" in doc["regime"]
    assert doc["cost"] == pytest.approx(res.cost)
    assert json.loads(text)["lp"]["status"] == "optimal"
