"""Configuration-model sampling and realization of statistical interventions.

Networks are drawn by pairing out-stubs with in-stubs through a uniform
random permutation, rejecting and redrawing whole permutations until none of
the pairings is a self-loop.  Per-edge repair is deliberately not used: it
would bias the law away from the uniform conditional distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import MultiGraph, ltm_trajectory
from .meanfield import recursion
from .typestats import (Statistics, StatIntervention, StatsError,
                        check_well_posed, post_statistics)


class SamplerError(RuntimeError):
    pass


def _largest_remainder(targets, total: int, rng) -> np.ndarray:
    """Integer counts summing to total, floor + largest remainder; exact
    remainder ties broken by a seeded shuffle so runs are reproducible."""
    targets = np.asarray(targets, dtype=float)
    floors = np.floor(targets + 1e-12).astype(np.int64)
    leftover = total - int(floors.sum())
    if leftover < 0:
        # tolerate tiny overshoot from float noise
        order = np.argsort(targets - floors)
        for idx in order:
            if leftover == 0:
                break
            if floors[idx] > 0:
                floors[idx] -= 1
                leftover += 1
    if leftover > 0:
        remainders = targets - floors
        jitter = rng.random(targets.size) * 1e-9
        order = np.argsort(-(remainders + jitter), kind="stable")
        for idx in order[:leftover]:
            floors[idx] += 1
    return floors


def round_intervention(xi: StatIntervention, n: int, seed=None) -> dict:
    """Integer node counts per (type, eta) summing per type to round(n * p_w).

    Idempotent when all n * xi_w(eta) are already integers.
    """
    rng = np.random.default_rng(seed)
    by_type: dict = {}
    for (w, eta), m in xi.items():
        by_type.setdefault(w, {})[eta] = m
    counts = {}
    for w in sorted(by_type):
        etas = sorted(by_type[w])
        masses = np.array([by_type[w][e] for e in etas])
        total = int(round(n * float(masses.sum())))
        ints = _largest_remainder(n * masses, total, rng)
        for e, c in zip(etas, ints):
            if c > 0:
                counts[(w, e)] = int(c)
    return counts


@dataclass(frozen=True)
class SampleInfo:
    attempts: int
    nu: float
    predicted_acceptance: float


def _type_counts(p: Statistics, n: int, rng) -> dict:
    types = sorted(p.support())
    targets = np.array([n * p.mass(w) for w in types])
    ints = _largest_remainder(targets, n, rng)
    return {w: int(c) for w, c in zip(types, ints) if c > 0}


def sample_configuration_model(p: Statistics, n: int, seed=None,
                               max_retries: int = 1000):
    """Draw a network with n nodes and type statistics p.

    Out-stubs (node repeated by out-degree) are matched to in-stubs (node
    repeated by in-degree) by a uniform permutation, redrawn until no stub
    pairing joins a node to itself.  Returns (graph, thresholds, per-node
    types, SampleInfo).
    """
    rng = np.random.default_rng(seed)
    counts = _type_counts(p, n, rng)
    report = check_well_posed(n, p)
    if not report.moment_balance or not report.degree_bound:
        raise SamplerError("statistics not realizable on %d nodes: %s" % (n, report))
    types = sorted(counts)
    node_types = []
    for w in types:
        node_types.extend([w] * counts[w])
    kappa = np.array([w.k for w in node_types], dtype=np.int64)
    delta = np.array([w.d for w in node_types], dtype=np.int64)
    rho = np.array([w.r for w in node_types], dtype=np.int64)
    if int(kappa.sum()) != int(delta.sum()):
        raise SamplerError("stub imbalance after rounding: %d out vs %d in"
                           % (int(kappa.sum()), int(delta.sum())))
    tails = np.repeat(np.arange(len(node_types)), kappa)
    heads_base = np.repeat(np.arange(len(node_types)), delta)
    nu = p.nu()
    for attempt in range(1, max_retries + 1):
        perm = rng.permutation(heads_base.size)
        heads = heads_base[perm]
        if not np.any(tails == heads):
            g = MultiGraph(len(node_types), tails, heads)
            info = SampleInfo(attempt, nu, math.exp(-nu / 2.0))
            return g, rho, node_types, info
    raise SamplerError(
        "no self-loop-free wiring found in %d draws; asymptotic acceptance is "
        "exp(-nu/2) = %.3g with nu = %.3g, consider a larger retry budget"
        % (max_retries, math.exp(-nu / 2.0), nu))


def realize_intervention(g: MultiGraph, assignment, rho, xi: StatIntervention,
                         seed=None) -> np.ndarray:
    """Turn a statistical intervention into per-node threshold reductions on a
    concrete network: for each (type, eta) count, pick that many nodes of the
    type uniformly without replacement and reduce them by eta."""
    rng = np.random.default_rng(seed)
    counts = round_intervention(xi, g.n, seed=rng)
    nodes_by_type: dict = {}
    for i, w in enumerate(assignment):
        nodes_by_type.setdefault(w, []).append(i)
    h = np.zeros(g.n, dtype=np.int64)
    picked: dict = {}
    for (w, eta), c in sorted(counts.items()):
        if eta == 0:
            continue
        pool = picked.setdefault(w, list(nodes_by_type.get(w, [])))
        if c > len(pool):
            raise SamplerError("intervention asks for %d nodes of type %s, "
                               "only %d available" % (c, w, len(pool)))
        chosen = rng.choice(len(pool), size=c, replace=False)
        chosen_nodes = [pool[j] for j in chosen]
        for node in chosen_nodes:
            h[node] = eta
        remaining = set(chosen)
        picked[w] = [v for j, v in enumerate(pool) if j not in remaining]
    rho = np.asarray(rho, dtype=np.int64)
    if np.any(h > rho):
        raise SamplerError("realized intervention exceeds thresholds")
    return h


def cascade_fractions(g: MultiGraph, rho, t_max=None):
    """Run the cascade from all-zeros; return per-step (active fraction Y,
    fraction of links pointing to active nodes Z)."""
    if t_max is None:
        # from all-zeros the dynamics are monotone, so the fixed point arrives
        # within n steps; one extra step confirms it
        t_max = g.n + 1
    states, fixed, _ = ltm_trajectory(g, rho, np.zeros(g.n, dtype=np.int8), t_max)
    delta = g.in_degrees
    total_links = float(delta.sum())
    ys = np.array([s.sum() / g.n for s in states])
    zs = np.array([(delta * s).sum() / total_links for s in states])
    return ys, zs, fixed


@dataclass(frozen=True)
class McReport:
    replicates: int
    final_fractions: np.ndarray
    success_rate: float
    sup_dev_y: float
    sup_dev_z: float
    network_trajectories: list
    recursion_trajectory: list
    nu: float
    mean_attempts: float
    seed: object = None

    def to_dict(self):
        return {
            "replicates": self.replicates,
            "final_fractions": [float(v) for v in self.final_fractions],
            "success_rate": self.success_rate,
            "sup_dev_y": self.sup_dev_y,
            "sup_dev_z": self.sup_dev_z,
            "nu": self.nu,
            "mean_attempts": self.mean_attempts,
            "seed": self.seed,
        }


def _padded(values: np.ndarray, length: int) -> np.ndarray:
    """Extend a converged trajectory by repeating its terminal value."""
    if values.size >= length:
        return values[:length]
    return np.concatenate([values, np.full(length - values.size, values[-1])])


def monte_carlo_validate(p0: Statistics, xi: StatIntervention, n: int,
                         replicates: int, eps: float, seed=None) -> McReport:
    """Sample networks from the post-intervention statistics, run the cascade
    from all-zeros, and compare against the mean-field recursion.

    Success per replicate means the final active fraction reaches 1 - eps.
    Replicates use independent child seeds and merge deterministically.
    """
    p_post = post_statistics(p0, xi)
    rec, _ = recursion(p_post)
    rec_z = np.array([z for z, _ in rec])
    rec_y = np.array([y for _, y in rec])
    # the recursion output lags one step: y(t+1) = psi(z(t)); align by index
    finals = []
    sup_y = 0.0
    sup_z = 0.0
    attempts = []
    trajectories = []
    seeds = np.random.SeedSequence(seed).spawn(max(replicates, 1))
    for rep in range(replicates):
        rng_seed = seeds[rep]
        g, rho, _, info = sample_configuration_model(p_post, n, seed=rng_seed)
        attempts.append(info.attempts)
        ys, zs, _ = cascade_fractions(g, rho)
        trajectories.append((ys, zs))
        finals.append(float(ys[-1]))
        horizon = max(ys.size, rec_y.size)
        sup_y = max(sup_y, float(np.max(np.abs(_padded(ys, horizon)
                                               - _padded(rec_y, horizon)))))
        sup_z = max(sup_z, float(np.max(np.abs(_padded(zs, horizon)
                                               - _padded(rec_z, horizon)))))
    finals = np.array(finals)
    success = float(np.mean(finals >= 1.0 - eps)) if replicates else 0.0
    return McReport(
        replicates=replicates, final_fractions=finals, success_rate=success,
        sup_dev_y=sup_y, sup_dev_z=sup_z,
        network_trajectories=trajectories,
        recursion_trajectory=list(zip(rec_z, rec_y)),
        nu=p_post.nu(),
        mean_attempts=float(np.mean(attempts)) if attempts else 0.0,
        seed=seed,
    )
