"""
Parameterised distribution over graphs.

Edge ``i -> j`` has probability ``sigmoid(gamma[i, j]) * sigmoid(theta[i, j])``
with ``theta`` antisymmetric: ``gamma`` gates existence, ``theta`` picks the
orientation of the pair.
"""

from __future__ import annotations

import itertools
import json

import numpy as np
from scipy.special import expit

from .graph import Dag, is_acyclic, topological_order
from .optim import Adam

DAG_RETRIES = 32
CLAMP = 9.0


def sigmoid(x):
    return expit(x)


class GraphBelief:
    """Structural parameters ``gamma`` and ``theta`` plus their optimizer state.

    ``frozen`` marks ordered pairs excluded from updates (used when part of
    the structure is clamped to known values).
    """

    def __init__(self, n, gamma=None, theta=None, frozen=None):
        self.n = int(n)
        self.gamma = np.zeros((n, n)) if gamma is None else np.array(gamma, dtype=float)
        theta = np.zeros((n, n)) if theta is None else np.array(theta, dtype=float)
        self.theta = np.triu(theta, 1) - np.triu(theta, 1).T
        np.fill_diagonal(self.gamma, 0.0)
        self.frozen = np.zeros((n, n), dtype=bool) if frozen is None else np.array(frozen, bool)
        self.gamma_opt = Adam()
        self.theta_opt = Adam()

    def copy(self) -> "GraphBelief":
        out = GraphBelief(self.n, self.gamma, self.theta, self.frozen)
        for src, dst in ((self.gamma_opt, out.gamma_opt), (self.theta_opt, out.theta_opt)):
            dst.t = src.t
            dst.m = {k: v.copy() for k, v in src.m.items()}
            dst.v = {k: v.copy() for k, v in src.v.items()}
        return out

    def edge_probs(self) -> np.ndarray:
        p = sigmoid(self.gamma) * sigmoid(self.theta)
        np.fill_diagonal(p, 0.0)
        return p

    def enforce_antisymmetry(self):
        upper = np.triu(self.theta, 1)
        self.theta = upper - upper.T

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "gamma": self.gamma.tolist(), "theta": self.theta.tolist(),
                           "frozen": self.frozen.astype(int).tolist()})

    @classmethod
    def from_json(cls, text) -> "GraphBelief":
        d = json.loads(text)
        return cls(d["n"], d["gamma"], d["theta"], d.get("frozen"))


def edge_prob(belief: GraphBelief, i: int, j: int) -> float:
    if i == j:
        raise ValueError("no self-loops: edge_prob(i, i) is undefined")
    return float(sigmoid(belief.gamma[i, j]) * sigmoid(belief.theta[i, j]))


def _fallback_order(belief):
    score = sigmoid(belief.theta).sum(axis=1) - 0.5  # diagonal adds sigmoid(0)
    return sorted(range(belief.n), key=lambda v: (-score[v], v))


def _order_tournament(order, n):
    t = np.zeros((n, n), dtype=bool)
    for a, u in enumerate(order):
        for v in order[a + 1 :]:
            t[u, v] = True
    return t


def _is_transitive(tournaments):
    """A tournament is acyclic iff its out-degrees are exactly 0..n-1."""
    n = tournaments.shape[-1]
    return np.all(np.sort(tournaments.sum(axis=-1), axis=-1) == np.arange(n), axis=-1)


def _draw_tournaments(s_theta, count, rng):
    n = s_theta.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    fwd = rng.random((count, n, n)) < s_theta[None]
    fwd &= upper[None]
    back = upper[None] & ~fwd
    return fwd | np.swapaxes(back, 1, 2)


def sample_dags(belief: GraphBelief, count: int, rng, retries: int = DAG_RETRIES) -> np.ndarray:
    """Vectorised two-phase sampler, returns ``(count, n, n)`` 0/1 adjacencies.

    Phase 1 draws an orientation for every pair; cyclic tournaments are
    redrawn up to ``retries`` times, after which the deterministic order by
    descending total orientation weight is used.  Phase 2 keeps each
    oriented edge with probability ``sigmoid(gamma)``.
    """
    n = belief.n
    s_theta = sigmoid(belief.theta)
    tour = _draw_tournaments(s_theta, count, rng)
    bad = np.flatnonzero(~_is_transitive(tour))
    for _ in range(retries):
        if len(bad) == 0:
            break
        tour[bad] = _draw_tournaments(s_theta, len(bad), rng)
        bad = bad[~_is_transitive(tour[bad])]
    if len(bad):
        tour[bad] = _order_tournament(_fallback_order(belief), n)
    keep = rng.random((count, n, n)) < sigmoid(belief.gamma)[None]
    return (tour & keep).astype(np.int8)


def sample_dag(belief: GraphBelief, rng) -> Dag:
    return Dag(sample_dags(belief, 1, rng)[0])


def dag_distribution(belief: GraphBelief, retries: int = DAG_RETRIES):
    """Exact output distribution of :func:`sample_dags` by enumeration.

    Returns ``(adjs, probs)`` with ``adjs`` of shape ``(K, n, n)``.  Only
    feasible for very small ``n`` (the loop visits every tournament and
    every edge subset).
    """
    n = belief.n
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    s_theta = sigmoid(belief.theta)
    s_gamma = sigmoid(belief.gamma)
    tours, weights = [], []
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        t = np.zeros((n, n), dtype=bool)
        w = 1.0
        for (i, j), b in zip(pairs, bits):
            if b:
                t[i, j] = True
                w *= s_theta[i, j]
            else:
                t[j, i] = True
                w *= 1.0 - s_theta[i, j]
        tours.append(t)
        weights.append(w)
    tours = np.array(tours)
    weights = np.array(weights)
    ok = _is_transitive(tours)
    accept = weights[ok].sum()
    fail = 1.0 - accept
    # attempts: the first draw plus `retries` redraws
    scale = sum(fail**r for r in range(retries + 1))
    tour_probs = {}
    for t, w in zip(tours[ok], weights[ok]):
        tour_probs[t.tobytes()] = (t, w * scale)
    if fail > 0:
        t = _order_tournament(_fallback_order(belief), n)
        key = t.tobytes()
        prev = tour_probs.get(key, (t, 0.0))[1]
        tour_probs[key] = (t, prev + fail ** (retries + 1))

    adjs, probs = [], []
    for t, pt in tour_probs.values():
        edges = list(zip(*np.nonzero(t)))
        for keep in itertools.product((0, 1), repeat=len(edges)):
            a = np.zeros((n, n), dtype=np.int8)
            p = pt
            for (i, j), k in zip(edges, keep):
                if k:
                    a[i, j] = 1
                    p *= s_gamma[i, j]
                else:
                    p *= 1.0 - s_gamma[i, j]
            adjs.append(a)
            probs.append(p)
    return np.array(adjs), np.array(probs)


def mask_distribution(belief: GraphBelief):
    """Exact law of independent ``Bernoulli(p_ij)`` adjacency masks.

    These are the (possibly cyclic) masks used by the fitting stages.
    Returns ``(adjs, probs)`` over all ``2^(n(n-1))`` off-diagonal patterns.
    """
    n = belief.n
    p = belief.edge_probs()
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    adjs, probs = [], []
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        a = np.zeros((n, n), dtype=np.int8)
        w = 1.0
        for (i, j), b in zip(pairs, bits):
            a[i, j] = b
            w *= p[i, j] if b else 1.0 - p[i, j]
        adjs.append(a)
        probs.append(w)
    return np.array(adjs).reshape(-1, n, n), np.array(probs)


def extract_graph(belief: GraphBelief) -> Dag:
    """Point estimate: keep ``i -> j`` iff both sigmoids exceed 0.5.

    If that leaves a cycle, edges lying on cycles are removed one at a
    time, weakest ``sigmoid(gamma) * sigmoid(theta)`` first.
    """
    adj = ((belief.gamma > 0) & (belief.theta > 0)).astype(np.int8)
    np.fill_diagonal(adj, 0)
    probs = belief.edge_probs()
    while not is_acyclic(adj):
        reach = _reachability(adj)
        on_cycle = (adj > 0) & reach.T
        cand = np.argwhere(on_cycle)
        weakest = min(cand, key=lambda e: (probs[e[0], e[1]], e[0], e[1]))
        adj[weakest[0], weakest[1]] = 0
    return Dag(adj)


def _reachability(adj):
    n = adj.shape[0]
    reach = adj.astype(bool)
    for k in range(n):
        reach = reach | (reach[:, [k]] & reach[[k], :])
    return reach


def clamp_known_edges(belief: GraphBelief, truth: Dag, free_node: int, magnitude: float = CLAMP):
    """Pin every pair not touching ``free_node`` to the true structure.

    Returns a new belief whose clamped pairs are marked frozen; pairs
    incident to ``free_node`` keep the values they had in ``belief``.
    """
    n = belief.n
    if not 0 <= free_node < n:
        raise ValueError(f"free_node {free_node} out of range")
    pos = {v: k for k, v in enumerate(topological_order(truth))}
    out = belief.copy()
    for i in range(n):
        for j in range(n):
            if i == j or free_node in (i, j):
                continue
            out.gamma[i, j] = magnitude if truth.adj[i, j] else -magnitude
            if truth.adj[i, j]:
                out.theta[i, j] = magnitude
            elif truth.adj[j, i]:
                out.theta[i, j] = -magnitude
            else:
                out.theta[i, j] = magnitude if pos[i] < pos[j] else -magnitude
            out.frozen[i, j] = True
    return out
