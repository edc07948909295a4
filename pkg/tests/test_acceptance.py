"""End-to-end acceptance suite.

Each test prints a single PASS/FAIL line for its criterion so the suite
output doubles as a checklist.  Tolerances are pinned; loosening them is not
an option when a criterion fails.
"""

import math
import os

import numpy as np
import pytest
from scipy.stats import binom as sp_binom

from conftest import lin, random_intervention, random_statistics
from lp_oracle import random_model, vertex_enumerate
from ltmplan import lp, meanfield
from ltmplan.meanfield import _tail_sum, binom_tail, phi_grid, phi_decomposed
from ltmplan.planner import (PlannerConfig, alpha_eps, audit_original, plan)
from ltmplan.sampler import SamplerError, monte_carlo_validate, sample_configuration_model
from ltmplan.typestats import AgentType, Statistics, post_statistics


def report(num, ok, detail):
    print("[criterion %d] %s: %s" % (num, "PASS" if ok else "FAIL", detail))
    assert ok, detail


def test_criterion_01_binomial_tail_oracles():
    zs = np.arange(0, 101) / 100.0
    worst_small = 0.0
    for k in range(1, 21):
        for r in range(0, k + 1):
            got = binom_tail(k, r, zs)
            ref = np.array([math.fsum(math.comb(k, u) * z**u * (1 - z)**(k - u)
                                      for u in range(r, k + 1)) for z in zs])
            worst_small = max(worst_small, float(np.max(np.abs(got - ref))))
    worst_rel = 0.0
    rng = np.random.default_rng(101)
    for k in (50, 500, 5000):
        for r in sorted({1, 2, k // 4, k // 2, 3 * k // 4, k - 1, k}):
            for z in zs[1:-1]:
                beta_path = binom_tail(k, r, float(z))
                recur_path = _tail_sum(k, r, float(z))
                rel = abs(beta_path - recur_path) / max(recur_path, 1e-15)
                worst_rel = max(worst_rel, rel)
    ok = worst_small <= 1e-12 and worst_rel <= 1e-9
    report(1, ok, "brute-force abs %.3g (<=1e-12), beta-vs-recurrence rel %.3g "
           "(<=1e-9)" % (worst_small, worst_rel))


def test_criterion_02_decomposition_identity():
    rng = np.random.default_rng(102)
    zs = np.linspace(0.0, 1.0, 101)
    worst = 0.0
    for _ in range(100):
        p0 = random_statistics(rng, max_types=10, k_max=8)
        xi = random_intervention(rng, p0)
        direct = phi_grid(post_statistics(p0, xi), zs)
        decomposed = phi_decomposed(p0, xi, zs)
        worst = max(worst, float(np.max(np.abs(direct - decomposed))))
    report(2, worst <= 1e-10,
           "max decomposition mismatch %.3g (<=1e-10) over 100 instances" % worst)


def test_criterion_03_derivative_bound():
    rng = np.random.default_rng(103)
    zs = np.linspace(0.0, 1.0, 10_000)
    worst_excess = -np.inf
    for _ in range(50):
        p0 = random_statistics(rng, max_types=6, k_max=6)
        xi = random_intervention(rng, p0)
        bound = meanfield.derivative_bound(p0)
        vals = phi_grid(post_statistics(p0, xi), zs) - zs
        slopes = np.abs(vals[2:] - vals[:-2]) / (zs[2] - zs[0])
        worst_excess = max(worst_excess, float(np.max(slopes)) - bound)
    report(3, worst_excess <= 1e-6,
           "max slope excess over bound %.3g (<=1e-6) on 50 instances" % worst_excess)


def _guarantee_instances(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        p0 = random_statistics(rng, max_types=5, k_max=5, d_equals_k=True)
        eps = float(rng.uniform(0.3, 0.6))
        alpha = alpha_eps(p0, eps)
        n = math.ceil(meanfield.derivative_bound(p0) * (1.0 - alpha) / alpha)
        out.append((p0, PlannerConfig(eps=eps, grid_n=n, delta="auto")))
    return out


def test_criterion_04_guarantee_scale_feasibility():
    margins = []
    for p0, cfg in _guarantee_instances(104, 20):
        res = plan(p0, cfg)
        assert res.guarantee_regime
        audit = audit_original(p0, res.xi, cfg.eps, 10 * cfg.grid_n)
        margins.append(audit.margin)
    ok = all(m > 0.0 for m in margins)
    report(4, ok, "fine-grid original-constraint margins all positive "
           "(min %.3g) on 20 guarantee-scale instances" % min(margins))


def test_criterion_05_cost_trend_in_grid_size():
    splits = [(0.4, 0.6), (0.3, 0.7), (0.5, 0.5), (0.2, 0.8), (0.6, 0.4)]
    ok = True
    details = []
    for m1, m2 in splits:
        p0 = Statistics({AgentType(2, 2, 1, lin(1)): m1,
                         AgentType(2, 2, 2, lin(2)): m2})
        costs = [plan(p0, PlannerConfig(eps=0.45, grid_n=n, delta="auto")).cost
                 for n in (25, 50, 100, 200)]
        monotone = all(b <= a + 1e-10 for a, b in zip(costs, costs[1:]))
        contracting = abs(costs[3] - costs[2]) <= abs(costs[2] - costs[1]) + 1e-9
        ok = ok and monotone and contracting
        details.append("%.4f->%.4f" % (costs[0], costs[-1]))
    report(5, ok, "costs non-increasing and contracting in N on 5 instances "
           "(%s)" % ", ".join(details))


def test_criterion_06_monte_carlo_tracks_mean_field():
    p0 = Statistics({AgentType(4, 4, 1, lin(1)): 0.3,
                     AgentType(4, 4, 2, lin(2)): 0.4,
                     AgentType(4, 4, 3, lin(3)): 0.3})
    res = plan(p0, PlannerConfig(eps=0.1, grid_n=100, delta=0.05))
    rep = monte_carlo_validate(p0, res.xi, n=100_000, replicates=20,
                               eps=0.1, seed=106)
    ok = (rep.success_rate >= 0.95 and rep.sup_dev_y <= 0.02
          and rep.sup_dev_z <= 0.02)
    report(6, ok, "success rate %.2f (>=0.95), sup|Y-y| %.4f, sup|Z-z| %.4f "
           "(<=0.02) over 20 replicates at n=1e5" % (rep.success_rate,
                                                     rep.sup_dev_y, rep.sup_dev_z))


def test_criterion_07_no_self_loop_acceptance_constant():
    # Claimed limit: e^(-nu/2) = e^-1 for a single type d = k = 3.  The
    # sampler pairs out-stubs to in-stubs of the *same* node list, so the
    # expected number of self-loop pairings is <dk>/<d> = 3, not nu/2 = 1,
    # and the measured acceptance concentrates near e^-3.  The criterion is
    # kept at its stated target and fails honestly; see test_sampler.py
    # test_sample_acceptance_law for the verified law.
    p = Statistics({AgentType(3, 3, 1, lin(1)): 1.0})
    accepted = 0
    draws = 1000
    for s in range(draws):
        try:
            _, _, _, info = sample_configuration_model(p, 200, seed=s,
                                                       max_retries=1)
            accepted += 1
        except SamplerError:
            pass
    rate = accepted / draws
    target = math.exp(-1.0)
    ok = abs(rate - target) <= 0.05
    report(7, ok, "empirical acceptance %.4f vs e^-1 = %.4f (+-0.05); "
           "measured law is e^-3 = %.4f" % (rate, target, math.exp(-3.0)))


def test_criterion_08_lp_oracle_and_restriction():
    rng = np.random.default_rng(108)
    worst = 0.0
    ok = True
    for _ in range(200):
        m = random_model(rng, max_vars=8, max_rows=8)
        ref_status, ref_obj = vertex_enumerate(m)
        sol = lp.solve(m)
        if sol.status != ref_status:
            ok = False
            break
        if ref_status == "optimal":
            worst = max(worst, abs(sol.objective - ref_obj))
            # restriction: one extra constraint can only raise the optimum
            extra = rng.normal(size=(1, m.num_vars))
            aug = lp.LpModel(m.objective, np.vstack([m.rows, extra]),
                             m.senses + (lp.GE,),
                             np.append(m.rhs, rng.normal()),
                             m.lower, m.upper)
            aug_sol = lp.solve(aug)
            if aug_sol.status == "optimal" and \
                    aug_sol.objective < sol.objective - 1e-9:
                ok = False
                break
    ok = ok and worst <= 1e-7
    report(8, ok, "200 random LPs match vertex oracle (worst gap %.3g <= 1e-7) "
           "and restriction property holds" % worst)


def test_criterion_09_full_reductions_beat_seed_only():
    strict = 0
    ok = True
    for p0, cfg in _guarantee_instances(104, 20):
        full = plan(p0, cfg)
        seed_cfg = PlannerConfig(eps=cfg.eps, grid_n=cfg.grid_n, delta="auto",
                                 eta_mode="seed-only")
        seed = plan(p0, seed_cfg)
        if full.cost > seed.cost + 1e-9:
            ok = False
        if full.cost < seed.cost - 1e-9:
            strict += 1
    ok = ok and strict >= 1
    report(9, ok, "full-depth LP optimum <= seed-only optimum on all 20 "
           "instances, strictly smaller on %d" % strict)


EPINIONS_ENV = "LTMPLAN_EPINIONS_EDGES"
POWERGRID_ENV = "LTMPLAN_POWERGRID_EDGES"


def test_criterion_10_dataset_reproduction(tmp_path):
    epinions = os.environ.get(EPINIONS_ENV)
    powergrid = os.environ.get(POWERGRID_ENV)
    if not epinions or not powergrid:
        print("[criterion 10] SKIP: set %s and %s to run the dataset "
              "reproduction" % (EPINIONS_ENV, POWERGRID_ENV))
        pytest.skip("user-supplied dataset paths not configured")
    from ltmplan.cli import main
    out_e = str(tmp_path / "epinions")
    rc = main(["experiment", "--preset", "epinions", "--edges", epinions,
               "--seed", "0", "--out", out_e])
    assert rc == 0
    import json
    with open(os.path.join(out_e, "experiment.json")) as fh:
        doc_e = json.load(fh)
    out_p = str(tmp_path / "powergrid")
    rc = main(["experiment", "--preset", "powergrid", "--edges", powergrid,
               "--seed", "0", "--out", out_p])
    assert rc == 0
    with open(os.path.join(out_p, "experiment.json")) as fh:
        doc_p = json.load(fh)
    ok = (doc_e["final_fraction_mean"] >= 0.9
          and doc_p["final_fraction_mean"] >= 0.7)
    report(10, ok, "epinions final fraction %.3f (>=0.9), powergrid mean "
           "final fraction %.3f (>=0.7)"
           % (doc_e["final_fraction_mean"], doc_p["final_fraction_mean"]))
