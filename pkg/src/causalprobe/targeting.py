"""
Intervention-target acquisition strategies.

Every scoring function returns a :class:`ScoreVector` with one finite score
per candidate node; higher means "intervene here".  Each candidate gets its
own child random stream, so scores for one node never depend on how many
draws another node consumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .condmodel import ConditionalModelSet, sample_rows_multi
from .enco import _row_masks, gradients_from_contrasts, likelihood_contrasts
from .graphbelief import GraphBelief, sample_dags
from .scm import CategoricalScm, intervene_sample

AIT_FLOOR = 1e-12
AIT_CAP = 1e12


@dataclass
class ScoreVector:
    scores: np.ndarray
    method: str
    round: int = 0

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"{self.method} produced non-finite scores: {self.scores}")

    def argmax(self) -> int:
        return int(np.argmax(self.scores))


def _child_streams(rng, n):
    return rng.spawn(n)


def _git_score_from_rows(belief, models, x, target, groups, K, lambda_sparse, rng, squared,
                         theta_sparsity=False):
    """Sum over row groups of the structural-gradient norm on that group.

    Frozen pairs never move, so their entries do not count.
    """
    per = len(x) // groups
    masks = _row_masks(belief, len(x), K, rng, groups=groups)
    dL = likelihood_contrasts(models, x, masks).reshape(groups, per, belief.n, belief.n)
    t = np.full((groups, per), target)
    dg, dt = gradients_from_contrasts(belief, dL, t, lambda_sparse, theta_sparsity=theta_sparsity)
    dg, dt = dg * ~belief.frozen, dt * ~belief.frozen
    sq = (dg**2).sum(axis=(1, 2)) + (dt**2).sum(axis=(1, 2))
    return float(sq.sum() if squared else np.sqrt(sq).sum())


def git_score_for_graphs(belief, models, dags, target, S, K, lambda_sparse, rng, squared=True,
                         theta_sparsity=False):
    """Score of one target given an explicit stack of sampled graphs."""
    x = sample_rows_multi(models, dags, S, target, rng)
    return _git_score_from_rows(belief, models, x, target, len(dags), K, lambda_sparse, rng, squared,
                                theta_sparsity)


def git_scores(belief: GraphBelief, models: ConditionalModelSet, M=50, S=32, K=100,
               lambda_sparse=4e-3, rng=None, squared=True, round=0,
               theta_sparsity=False) -> ScoreVector:
    """Expected structural-gradient magnitude under imaginary interventions.

    For every candidate ``i``: draw ``M`` graphs from the belief, sample
    ``S`` rows per graph from the learned conditionals with ``i`` set
    uniformly at random, run the graph-fitting estimators on each graph's
    rows and add up ``|d_gamma|^2 + |d_theta|^2`` (plain norms when
    ``squared`` is False).
    """
    if M < 1 or S < 1:
        raise ValueError("M and S must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    scores = np.zeros(belief.n)
    for i, r in enumerate(_child_streams(rng, belief.n)):
        dags = sample_dags(belief, M, r)
        scores[i] = git_score_for_graphs(belief, models, dags, i, S, K, lambda_sparse, r, squared,
                                         theta_sparsity)
    return ScoreVector(scores, "git" if squared else "git_unsquared", round)


def git_privileged_scores(belief, models, scm: CategoricalScm, M=50, S=32, K=100,
                          lambda_sparse=4e-3, rng=None, squared=True, round=0,
                          theta_sparsity=False) -> ScoreVector:
    """As :func:`git_scores`, but each of the ``M`` batches is real interventional data."""
    if M < 1 or S < 1:
        raise ValueError("M and S must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    scores = np.zeros(belief.n)
    for i, r in enumerate(_child_streams(rng, belief.n)):
        x = intervene_sample(scm, i, M * S, r).samples
        scores[i] = _git_score_from_rows(belief, models, x, i, M, K, lambda_sparse, r, squared,
                                         theta_sparsity)
    return ScoreVector(scores, "git_privileged", round)


def epsilon_greedy_select(scores: ScoreVector, epsilon: float, rng) -> int:
    """Argmax (lowest index on ties) with probability ``1 - epsilon``, else uniform."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    s = scores.scores if isinstance(scores, ScoreVector) else np.asarray(scores)
    if rng.random() < epsilon:
        return int(rng.integers(len(s)))
    return int(np.argmax(s))


def _one_hot(x, cards):
    offsets = np.concatenate([[0], np.cumsum(cards)[:-1]])
    out = np.zeros((len(x), int(np.sum(cards))))
    rows = np.arange(len(x))[:, None]
    out[rows, offsets[None, :] + x] = 1.0
    return out


def ait_score_from_samples(x, groups, cards) -> float:
    """Between-graph over within-graph variance of one-hot encoded samples."""
    v = _one_hot(x, cards).reshape(groups, len(x) // groups, -1)
    mu_g = v.mean(axis=1)
    mu = v.reshape(-1, v.shape[-1]).mean(axis=0)
    vbg = float(((mu_g - mu) ** 2).sum())
    vwg = float(((v - mu_g[:, None, :]) ** 2).sum())
    if vwg < AIT_FLOOR:
        return 0.0 if vbg < AIT_FLOOR else AIT_CAP
    return vbg / vwg


def ait_scores(belief, models, M=50, S=32, rng=None, round=0) -> ScoreVector:
    if M < 2 or S < 2:
        raise ValueError("AIT needs M >= 2 graphs and S >= 2 samples")
    rng = np.random.default_rng() if rng is None else rng
    scores = np.zeros(belief.n)
    for i, r in enumerate(_child_streams(rng, belief.n)):
        dags = sample_dags(belief, M, r)
        x = sample_rows_multi(models, dags, S, i, r)
        scores[i] = ait_score_from_samples(x, M, models.cards)
    return ScoreVector(scores, "ait", round)


def graph_log_likelihoods(models: ConditionalModelSet, x, dags, target) -> np.ndarray:
    """``L[r, g] = log P_{G_g, target}(x_r)``; identical parent sets are evaluated once.

    ``target=None`` gives the observational likelihood.
    """
    x = np.asarray(x, dtype=np.int64)
    rows = np.arange(len(x))
    base = 0.0 if target is None else -np.log(models.cards[target])
    out = np.full((len(x), len(dags)), base)
    for j, m in enumerate(models.models):
        if j == target:
            continue
        cols, inverse = np.unique(dags[:, :, j], axis=0, return_inverse=True)
        lp = np.empty((len(x), len(cols)))
        for u, col in enumerate(cols):
            lp[:, u] = m.log_probs(x, col.astype(float))[rows, x[:, j]]
        out += lp[:, inverse.ravel()]
    return out


def cbed_score_for_graphs(models, dags, target, S, rng) -> float:
    """BALD-style mutual information estimate for one target and fixed graphs."""
    M = len(dags)
    x = sample_rows_multi(models, dags, S, target, rng)
    L = graph_log_likelihoods(models, x, dags, target)
    own = L[np.arange(len(x)), np.repeat(np.arange(M), S)]
    conditional = -own.mean()
    marginal = -(logsumexp(L, axis=1) - np.log(M)).mean()
    return float(marginal - conditional)


def cbed_scores(belief, models, M=50, S=32, rng=None, round=0) -> ScoreVector:
    if M < 2 or S < 1:
        raise ValueError("CBED needs M >= 2 graphs and S >= 1 samples")
    rng = np.random.default_rng() if rng is None else rng
    scores = np.zeros(belief.n)
    for i, r in enumerate(_child_streams(rng, belief.n)):
        dags = sample_dags(belief, M, r)
        scores[i] = cbed_score_for_graphs(models, dags, i, S, r)
    return ScoreVector(scores, "cbed", round)


@dataclass
class RoundRobinState:
    n: int
    rng: np.random.Generator
    unvisited: list = field(default_factory=list)

    def __post_init__(self):
        if not self.unvisited:
            self.unvisited = list(range(self.n))


def random_round_robin(state: RoundRobinState) -> int:
    """Uniform pick among nodes not yet chosen in the current cycle."""
    k = int(state.rng.integers(len(state.unvisited)))
    choice = state.unvisited.pop(k)
    if not state.unvisited:
        state.unvisited = list(range(state.n))
    return int(choice)
