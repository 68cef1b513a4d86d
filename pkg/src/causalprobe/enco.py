"""
Graph-fitting stage: score-function gradients for ``gamma`` and ``theta``.

For an interventional row with target ``k`` and a sampled adjacency ``C``,
the per-pair likelihood contrast is

    dL[i, j] = -log f_j(x_j | C[:, j] with i forced in)
               + log f_j(x_j | C[:, j] with i forced out)

and the estimators are

    d_gamma[i, j] = sigmoid'(gamma_ij) sigmoid(theta_ij) E[dL[i, j] + lam]   (j != k)
    A[k, j]       = sigmoid'(theta_kj) sigmoid(gamma_kj) E[dL[k, j]]
    d_theta       = A - A.T

Expectations run over rows and over adjacency masks with independent
``Bernoulli(sigmoid(gamma) * sigmoid(theta))`` entries, one mask per row
(``K`` masks cycled across the rows).  Masks may be cyclic: each node only
reads its own column.  Rows
with different targets may be mixed; each row contributes only to the
entries its target makes estimable, which reproduces the target-frequency
weighting of the two-sided ``theta`` update.

The orientation estimator carries no sparsity term.  With
``theta_sparsity=True`` it becomes ``E[dL[k, j] + lam]`` instead; the
sparsity term is charged to edges whose child is not intervened on, so in
that form both estimators are exact gradients of :func:`exact_Lg` on
two-node systems.  Without it, ``d_theta`` is the exact gradient of the
likelihood part alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .condmodel import ConditionalModelSet, NetStack, sample_edge_masks
from .graphbelief import GraphBelief, mask_distribution, sigmoid
from .scm import CategoricalScm, Dataset, joint_table

LAMBDA_SPARSE = 4e-3
LR_GAMMA = 2e-2
LR_THETA = 1e-1
# Contrasts only feed Monte Carlo estimates; single precision halves their cost.
CONTRAST_DTYPE = np.float32


@dataclass
class StructuralGradient:
    d_gamma: np.ndarray
    d_theta: np.ndarray

    def norm_sq(self) -> float:
        return float((self.d_gamma**2).sum() + (self.d_theta**2).sum())


def likelihood_contrasts(models: ConditionalModelSet, x: np.ndarray, masks: np.ndarray,
                         dtype=None):
    """``dL[b, i, j]`` for each row ``b`` under its own mask ``masks[b]``.

    Uniform net-model sets take a batched path evaluated in ``dtype``
    (default :data:`CONTRAST_DTYPE`); other model kinds are evaluated
    exactly, one node at a time.
    """
    B, n = x.shape
    if NetStack.supports(models):
        stack = NetStack(models, CONTRAST_DTYPE if dtype is None else dtype)
        return stack.contrasts(np.asarray(x, dtype=np.int64), np.asarray(masks))
    dL = np.zeros((B, n, n))
    for j, m in enumerate(models.models):
        lp_in, lp_out = m.flip_log_probs(x, masks[:, :, j])
        dL[:, :, j] = lp_out - lp_in
    idx = np.arange(n)
    dL[:, idx, idx] = 0.0
    return dL


def gradients_from_contrasts(belief: GraphBelief, dL, targets, lambda_sparse, weights=None,
                             theta_sparsity=False):
    """Estimator from precomputed contrasts.

    ``dL`` has shape ``(..., B, n, n)`` and ``targets`` shape ``(..., B)``;
    any leading axes are treated as independent groups, each producing its
    own gradient.  ``weights`` (same shape as ``targets``) default to
    uniform ``1/B`` within a group.
    """
    dL = np.asarray(dL)
    targets = np.asarray(targets)
    n = dL.shape[-1]
    B = dL.shape[-3]
    w = np.full(targets.shape, 1.0 / B) if weights is None else np.asarray(weights, dtype=float)
    idx = np.arange(n)
    off = ~np.eye(n, dtype=bool)
    term = (dL + lambda_sparse) * w[..., None, None]
    child_is_target = targets[..., None] == idx  # (..., B, n) over j
    gamma_term = np.where(child_is_target[..., None, :], 0.0, term)
    parent_is_target = child_is_target[..., :, None]  # over i
    if not theta_sparsity:
        term = dL * w[..., None, None]
    theta_term = np.where(parent_is_target, term, 0.0)
    e_gamma = gamma_term.sum(axis=-3) * off
    e_theta = theta_term.sum(axis=-3) * off

    sg, st = sigmoid(belief.gamma), sigmoid(belief.theta)
    d_gamma = sg * (1 - sg) * st * e_gamma
    a = st * (1 - st) * sg * e_theta
    d_theta = a - np.swapaxes(a, -1, -2)
    return d_gamma, d_theta


def _row_masks(belief, rows, K, rng, groups=1):
    """One mask per row, drawn as ``K`` samples per group cycled over rows."""
    per_group = rows // groups
    masks = sample_edge_masks(belief.edge_probs(), groups * K, rng)
    masks = masks.reshape(groups, K, belief.n, belief.n)
    pick = np.arange(per_group) % K
    return masks[:, pick].reshape(rows, belief.n, belief.n)


def _targets_of(batch):
    if isinstance(batch, Dataset):
        if batch.intervention_target is None:
            raise ValueError("batch has no intervention target")
        return batch.samples, np.full(len(batch), batch.intervention_target)
    raise TypeError("expected a Dataset")


def structural_gradient(belief, models, x, targets, K, lambda_sparse, rng,
                        theta_sparsity=False) -> StructuralGradient:
    """Gradient estimate on rows ``x`` whose intervention targets are ``targets``."""
    x = np.asarray(x, dtype=np.int64)
    targets = np.asarray(targets)
    if np.any(targets < 0):
        raise ValueError("every row needs an intervention target")
    if K < 1:
        raise ValueError("K must be at least 1")
    masks = _row_masks(belief, len(x), K, rng)
    dL = likelihood_contrasts(models, x, masks)
    return StructuralGradient(*gradients_from_contrasts(belief, dL, targets, lambda_sparse,
                                                        theta_sparsity=theta_sparsity))


def estimate_gamma_grad(belief, models, batch: Dataset, K, lambda_sparse, rng) -> np.ndarray:
    x, t = _targets_of(batch)
    return structural_gradient(belief, models, x, t, K, lambda_sparse, rng).d_gamma


def estimate_theta_grad(belief, models, batch: Dataset, K, lambda_sparse, rng,
                        theta_sparsity=False) -> np.ndarray:
    x, t = _targets_of(batch)
    return structural_gradient(belief, models, x, t, K, lambda_sparse, rng, theta_sparsity).d_theta


def _check_enum_bounds(belief, models):
    if belief.n > 4 or max(models.cards) > 3:
        raise ValueError("exact enumeration limited to n <= 4 nodes with at most 3 categories")


def _enumerated_rows(scm, target):
    joint = joint_table(scm, target)
    configs = np.array(np.unravel_index(np.arange(joint.size), joint.shape)).T
    return configs.astype(np.int64), joint.ravel()


def exact_Lg(belief: GraphBelief, models: ConditionalModelSet, target: int, lambda_sparse: float,
             scm: CategoricalScm) -> float:
    """Expected graph-fitting loss by full enumeration.

    Sums over every adjacency mask (independent Bernoulli entries) and
    every sample of ``scm`` under a uniform intervention on ``target``:
    the NLL of all non-intervened nodes plus ``lambda_sparse`` times the
    expected number of edges into non-intervened nodes.
    """
    _check_enum_bounds(belief, models)
    adjs, p_graph = mask_distribution(belief)
    xs, p_x = _enumerated_rows(scm, target)
    keep = np.arange(belief.n) != target
    total = 0.0
    for adj, pg in zip(adjs, p_graph):
        nll = 0.0
        for j in np.flatnonzero(keep):
            lp = models[j].log_probs(xs, adj[:, j].astype(float))
            nll -= p_x @ lp[np.arange(len(xs)), xs[:, j]]
        total += pg * (nll + lambda_sparse * adj[:, keep].sum())
    return float(total)


def expected_structural_gradient(belief, models, target, lambda_sparse, scm,
                                 theta_sparsity=False) -> StructuralGradient:
    """Exact expectation of the sampled estimators (masks and data enumerated)."""
    _check_enum_bounds(belief, models)
    adjs, p_graph = mask_distribution(belief)
    xs, p_x = _enumerated_rows(scm, target)
    x = np.tile(xs, (len(adjs), 1))
    masks = np.repeat(adjs.astype(float), len(xs), axis=0)
    w = np.outer(p_graph, p_x).ravel()
    dL = likelihood_contrasts(models, x, masks)
    t = np.full(len(x), target)
    return StructuralGradient(*gradients_from_contrasts(belief, dL, t, lambda_sparse, weights=w,
                                                        theta_sparsity=theta_sparsity))


def graph_fitting_round(belief: GraphBelief, models: ConditionalModelSet, batches, K=100,
                        lambda_sparse=LAMBDA_SPARSE, lr_gamma=LR_GAMMA, lr_theta=LR_THETA, rng=None,
                        theta_sparsity=False):
    """One Adam step on ``gamma`` and ``theta``.

    ``batches`` is a list of ``(target, Dataset)``; their gradients are
    pooled with weights proportional to batch size.  Frozen pairs and the
    diagonal never move, and ``theta`` stays antisymmetric.  Returns the
    pooled :class:`StructuralGradient`.
    """
    if not batches:
        raise ValueError("graph fitting needs at least one batch")
    rng = np.random.default_rng() if rng is None else rng
    xs, ts = [], []
    for target, data in batches:
        xs.append(data.samples)
        ts.append(np.full(len(data), target))
    grad = structural_gradient(belief, models, np.concatenate(xs), np.concatenate(ts),
                               K, lambda_sparse, rng, theta_sparsity)
    apply_structural_update(belief, grad, lr_gamma, lr_theta)
    return grad


def apply_structural_update(belief: GraphBelief, grad: StructuralGradient, lr_gamma, lr_theta):
    free = (~belief.frozen & ~np.eye(belief.n, dtype=bool)).astype(float)
    belief.gamma_opt.step({"gamma": belief.gamma}, {"gamma": grad.d_gamma}, lr=lr_gamma,
                          mask={"gamma": free})
    belief.theta_opt.step({"theta": belief.theta}, {"theta": grad.d_theta}, lr=lr_theta,
                          mask={"theta": free})
    belief.enforce_antisymmetry()
