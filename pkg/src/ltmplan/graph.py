"""Directed multigraph storage and synchronous threshold dynamics.

A node observes the heads of its outgoing links: node i switches to state 1
when at least rho_i of the nodes it points to are in state 1.  Thresholds are
therefore bounded by the out-degree.  Parallel edges count with multiplicity;
self-loops are never allowed.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph, state, threshold or intervention data."""


@dataclass(frozen=True)
class MultiGraph:
    """Immutable directed multigraph given by parallel tail/head arrays."""

    n: int
    tails: np.ndarray
    heads: np.ndarray
    _adj: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph must have at least one node, got n=%d" % self.n)
        tails = np.ascontiguousarray(self.tails, dtype=np.int64)
        heads = np.ascontiguousarray(self.heads, dtype=np.int64)
        if tails.shape != heads.shape or tails.ndim != 1:
            raise GraphError("tails and heads must be 1-D arrays of equal length")
        if tails.size:
            if tails.min() < 0 or tails.max() >= self.n:
                raise GraphError("tail node id out of range [0, %d)" % self.n)
            if heads.min() < 0 or heads.max() >= self.n:
                raise GraphError("head node id out of range [0, %d)" % self.n)
            if np.any(tails == heads):
                bad = int(np.flatnonzero(tails == heads)[0])
                raise GraphError(
                    "self-loop at edge %d (node %d)" % (bad, int(tails[bad]))
                )
        tails.setflags(write=False)
        heads.setflags(write=False)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "heads", heads)
        # adjacency counts A[i, j] = number of edges i -> j; duplicates sum
        adj = sp.csr_matrix(
            (np.ones(tails.size, dtype=np.int64), (tails, heads)),
            shape=(self.n, self.n),
        )
        adj.sum_duplicates()
        object.__setattr__(self, "_adj", adj)

    @property
    def edge_count(self) -> int:
        return int(self.tails.size)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.tails, minlength=self.n)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.heads, minlength=self.n)

    def neighbor_activity(self, x: np.ndarray) -> np.ndarray:
        """Per-node count of active observed neighbors, with multiplicity."""
        return self._adj @ x.astype(np.int64)


def _check_state(g: MultiGraph, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (g.n,):
        raise GraphError("state has length %d, expected %d" % (x.size, g.n))
    if not np.isin(x, (0, 1)).all():
        raise GraphError("state entries must be 0 or 1")
    return x.astype(np.int8)


def check_thresholds(g: MultiGraph, rho, clamp: bool = False) -> np.ndarray:
    """Validate a threshold vector against out-degrees.

    With clamp=True, entries above the out-degree are lowered to it instead of
    rejected (callers should record that this happened).
    """
    rho = np.asarray(rho)
    if rho.shape != (g.n,):
        raise GraphError("threshold vector has length %d, expected %d" % (rho.size, g.n))
    if not np.issubdtype(rho.dtype, np.integer):
        if not np.all(rho == np.floor(rho)):
            raise GraphError("thresholds must be integers")
        rho = rho.astype(np.int64)
    rho = rho.astype(np.int64)
    if rho.min(initial=0) < 0:
        raise GraphError("thresholds must be non-negative")
    kappa = g.out_degrees
    if np.any(rho > kappa):
        if clamp:
            rho = np.minimum(rho, kappa)
        else:
            bad = int(np.flatnonzero(rho > kappa)[0])
            raise GraphError(
                "threshold %d exceeds out-degree %d at node %d"
                % (int(rho[bad]), int(kappa[bad]), bad)
            )
    return rho


def ltm_step(g: MultiGraph, rho: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One synchronous update: node i is active iff its observed active count
    meets its threshold.  The input state is not modified."""
    x = _check_state(g, x)
    rho = check_thresholds(g, rho)
    return (g.neighbor_activity(x) >= rho).astype(np.int8)


def ltm_trajectory(g: MultiGraph, rho, x0, t_max: int):
    """Iterate the threshold map from x0 for up to t_max steps.

    Returns (states, fixed_point, t_stop) where states = [x(0), ..., x(t_stop)]
    and fixed_point is True when x(t_stop) maps to itself (detected one step
    early, so the trajectory is not padded with repeats).
    """
    if t_max < 0:
        raise GraphError("t_max must be >= 0")
    x = _check_state(g, x0)
    rho = check_thresholds(g, rho)
    states = [x]
    fixed = False
    for _ in range(t_max):
        x_next = (g.neighbor_activity(x) >= rho).astype(np.int8)
        if np.array_equal(x_next, x):
            fixed = True
            break
        states.append(x_next)
        x = x_next
    return states, fixed, len(states) - 1


def apply_intervention(rho, h) -> np.ndarray:
    """Reduce thresholds entry-wise; h must not exceed rho anywhere."""
    rho = np.asarray(rho, dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    if rho.shape != h.shape:
        raise GraphError("intervention length %d does not match thresholds %d"
                         % (h.size, rho.size))
    if h.min(initial=0) < 0:
        raise GraphError("intervention entries must be non-negative")
    if np.any(h > rho):
        bad = int(np.flatnonzero(h > rho)[0])
        raise GraphError("infeasible intervention: h=%d > rho=%d at node %d"
                         % (int(h[bad]), int(rho[bad]), bad))
    return rho - h


def active_fraction(x) -> float:
    x = np.asarray(x)
    return float(x.sum()) / x.size


def check_target(g: MultiGraph, rho, h, eps: float):
    """Simulate from the all-zeros state under reduced thresholds and test
    whether the final active fraction reaches 1 - eps.

    Returns (ok, final_fraction, t_stop).  The horizon is n steps; from the
    all-zeros state the dynamics is monotone, so stopping at the first fixed
    point gives the same terminal state.
    """
    if not (0 < eps <= 1):
        raise GraphError("eps must lie in (0, 1]")
    reduced = apply_intervention(check_thresholds(g, rho), h)
    states, _, t_stop = ltm_trajectory(g, reduced, np.zeros(g.n, dtype=np.int8), g.n)
    frac = active_fraction(states[-1])
    return frac >= 1.0 - eps, frac, t_stop


def parse_edge_list(path, undirected: bool = False, drop_self_loops: bool = False):
    """Read a whitespace-separated "tail head" file into a MultiGraph.

    Lines starting with '#' or '%' are comments.  Node tokens are arbitrary
    strings, remapped to contiguous ids; the mapping is returned so results
    can be reported in the original labels.  With undirected=True every line
    u v emits both (u, v) and (v, u).
    """
    id_map: dict[str, int] = {}
    tails: list[int] = []
    heads: list[int] = []
    dropped = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line[0] in "#%":
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphError("%s:%d: expected 'tail head', got %r"
                                 % (path, lineno, line))
            u_tok, v_tok = parts[0], parts[1]
            if u_tok == v_tok:
                if drop_self_loops:
                    dropped += 1
                    continue
                raise GraphError("%s:%d: self-loop on node %r (use --drop-self-loops)"
                                 % (path, lineno, u_tok))
            u = id_map.setdefault(u_tok, len(id_map))
            v = id_map.setdefault(v_tok, len(id_map))
            tails.append(u)
            heads.append(v)
            if undirected:
                tails.append(v)
                heads.append(u)
    if not id_map:
        raise GraphError("%s: no edges found, empty network rejected" % path)
    if dropped:
        print("warning: dropped %d self-loop line(s) from %s" % (dropped, path),
              file=sys.stderr)
    g = MultiGraph(len(id_map), np.asarray(tails), np.asarray(heads))
    return g, id_map
