"""
Learnable per-node conditional distributions with parent masking.

Each node ``j`` owns a model of ``P(X_j | masked inputs)``.  The input is
the full sample row together with a 0/1 vector saying which other nodes
count as parents; masked-out nodes must not influence the output.

Two kinds are provided:

``net``
    per-parent embeddings, one hidden affine layer with LeakyReLU and an
    output affine layer.  A masked parent feeds a learned "absent"
    embedding instead of its value embedding.
``table``
    one logit vector per joint configuration of all other nodes.  Masked
    parents are marginalised uniformly (the output is the average of the
    per-configuration distributions), so log-probabilities are exact.
    Only practical for tiny systems; used by the exact oracles.

Gradients are derived by hand (reverse mode); nothing here depends on an
autodiff library.
"""

from __future__ import annotations

import io
import itertools
import json
from typing import Optional, Sequence

import numpy as np

from .graph import Dag
from .optim import Adam
from .scm import Dataset


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_mask(node, mask):
    if np.any(mask[..., node] != 0):
        raise ValueError(f"mask for node {node} includes the node itself (self-loop)")


class ConditionalModel:
    """Base class: subclasses implement ``log_probs`` and ``_grad``."""

    kind = ""

    def __init__(self, node: int, cards: Sequence[int]):
        self.node = int(node)
        self.cards = tuple(int(c) for c in cards)
        self.card = self.cards[self.node]
        self.params: dict[str, np.ndarray] = {}

    @property
    def n(self):
        return len(self.cards)

    def log_probs(self, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Log-distribution over this node's categories, shape ``(B, card)``."""
        raise NotImplementedError

    def batch_grad(self, x, mask, weights=None):
        """Weighted mean of ``log p(x[:, node])`` and its parameter gradient."""
        raise NotImplementedError

    def log_prob(self, x_i: int, parent_mask, x) -> float:
        x = np.asarray(x, dtype=np.int64)[None, :]
        mask = np.asarray(parent_mask, dtype=float)[None, :]
        return float(self.log_probs(x, mask)[0, x_i])

    def grad_log_prob(self, x_i: int, parent_mask, x) -> dict:
        x = np.array(x, dtype=np.int64)[None, :]
        x[0, self.node] = x_i
        mask = np.asarray(parent_mask, dtype=float)[None, :]
        return self.batch_grad(x, mask)[1]

    def flip_log_probs(self, x, mask):
        """``log p(x_node)`` with each candidate parent forced in and forced out.

        Returns two ``(B, n)`` arrays; column ``i`` holds the value with
        ``mask[:, i]`` set to 1 (resp. 0).  The node's own column is 0.
        """
        x = np.asarray(x, dtype=np.int64)
        mask = np.asarray(mask, dtype=float)
        B = len(x)
        rows = np.arange(B)
        lp_in = np.zeros((B, self.n))
        lp_out = np.zeros((B, self.n))
        for i in range(self.n):
            if i == self.node:
                continue
            m = mask.copy()
            m[:, i] = 1.0
            lp_in[:, i] = self.log_probs(x, m)[rows, x[:, self.node]]
            m[:, i] = 0.0
            lp_out[:, i] = self.log_probs(x, m)[rows, x[:, self.node]]
        return lp_in, lp_out

    def copy(self):
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone


class NetModel(ConditionalModel):
    kind = "net"

    def __init__(self, node, cards, embed_dim=8, hidden=64, slope=0.1, rng=None):
        super().__init__(node, cards)
        if not 0.0 <= slope < 1.0:
            raise ValueError("LeakyReLU slope must lie in [0, 1)")
        rng = np.random.default_rng() if rng is None else rng
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.slope = slope
        self.offsets = np.concatenate([[0], np.cumsum(self.cards)[:-1]]).astype(np.int64)
        fan1 = self.n * embed_dim
        b1 = fan1**-0.5
        b2 = hidden**-0.5
        self.params = {
            "emb": rng.normal(0.0, 0.1, size=(sum(self.cards), embed_dim)),
            "absent": np.zeros((self.n, embed_dim)),
            "W1": rng.uniform(-b1, b1, size=(fan1, hidden)),
            "b1": rng.uniform(-b1, b1, size=hidden),
            "W2": rng.uniform(-b2, b2, size=(hidden, self.card)),
            "b2": rng.uniform(-b2, b2, size=self.card),
        }

    def _inputs(self, x, mask):
        p = self.params
        e = p["emb"][self.offsets[None, :] + x]  # (B, n, E)
        on = mask[:, :, None] > 0
        inp = np.where(on, e, p["absent"][None, :, :])
        return e, on, inp.reshape(len(x), -1)

    def _act(self, z):
        return np.where(z > 0, z, self.slope * z)

    def log_probs(self, x, mask):
        x = np.asarray(x, dtype=np.int64)
        mask = np.broadcast_to(np.asarray(mask, dtype=float), x.shape)
        _check_mask(self.node, mask)
        _, _, inp = self._inputs(x, mask)
        p = self.params
        z1 = inp @ p["W1"] + p["b1"]
        return _log_softmax(self._act(z1) @ p["W2"] + p["b2"])

    def batch_grad(self, x, mask, weights=None):
        x = np.asarray(x, dtype=np.int64)
        mask = np.broadcast_to(np.asarray(mask, dtype=float), x.shape)
        _check_mask(self.node, mask)
        B = len(x)
        w = np.full(B, 1.0 / B) if weights is None else np.asarray(weights, dtype=float)
        p = self.params
        e, on, inp = self._inputs(x, mask)
        z1 = inp @ p["W1"] + p["b1"]
        a1 = self._act(z1)
        logp = _log_softmax(a1 @ p["W2"] + p["b2"])
        target = x[:, self.node]
        value = float(w @ logp[np.arange(B), target])

        g = -np.exp(logp)
        g[np.arange(B), target] += 1.0
        g *= w[:, None]
        grads = {"W2": a1.T @ g, "b2": g.sum(axis=0)}
        dz1 = (g @ p["W2"].T) * np.where(z1 > 0, 1.0, self.slope)
        grads["W1"] = inp.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        dinp = (dz1 @ p["W1"].T).reshape(B, self.n, self.embed_dim)
        demb = np.zeros_like(p["emb"])
        idx = (self.offsets[None, :] + x)[on[:, :, 0]]
        np.add.at(demb, idx, dinp[on[:, :, 0]])
        grads["emb"] = demb
        grads["absent"] = np.where(on, 0.0, dinp).sum(axis=0)
        return value, grads

    def flip_log_probs(self, x, mask):
        x = np.asarray(x, dtype=np.int64)
        mask = np.broadcast_to(np.asarray(mask, dtype=float), x.shape)
        _check_mask(self.node, mask)
        B, n, E = len(x), self.n, self.embed_dim
        p = self.params
        e, _, inp = self._inputs(x, mask)
        z1 = inp @ p["W1"] + p["b1"]  # (B, H)
        W1 = p["W1"].reshape(n, E, self.hidden)
        delta = np.einsum("bne,neh->bnh", e - p["absent"][None], W1)
        m = mask[:, :, None]
        z_in = z1[:, None, :] + (1.0 - m) * delta
        z_out = z1[:, None, :] - m * delta
        target = x[:, self.node]
        rows = np.arange(B)

        def pick(z):
            lp = _log_softmax(self._act(z) @ p["W2"] + p["b2"])  # (B, n, C)
            out = lp[rows, :, target]
            out[:, self.node] = 0.0
            return out

        return pick(z_in), pick(z_out)


class TableModel(ConditionalModel):
    kind = "table"

    def __init__(self, node, cards, rng=None, scale=0.0):
        super().__init__(node, cards)
        self.others = [i for i in range(self.n) if i != self.node]
        shape = tuple(self.cards[i] for i in self.others) + (self.card,)
        logits = np.zeros(shape) if rng is None else rng.normal(0.0, scale, size=shape)
        self.params = {"logits": logits}

    def _probs_all(self):
        logits = self.params["logits"]
        return np.exp(_log_softmax(logits))

    def _row(self, x_row, m_row, probs):
        """Distribution for one row plus the slice bookkeeping for its gradient."""
        index = []
        masked = []
        for ax, i in enumerate(self.others):
            if m_row[i] > 0:
                index.append(int(x_row[i]))
            else:
                index.append(slice(None))
                masked.append(ax)
        sub = probs[tuple(index)]
        nm = int(np.prod([self.cards[self.others[a]] for a in masked])) if masked else 1
        dist = sub.reshape(-1, self.card).mean(axis=0)
        return tuple(index), sub, nm, dist

    def log_probs(self, x, mask):
        x = np.asarray(x, dtype=np.int64)
        mask = np.broadcast_to(np.asarray(mask, dtype=float), x.shape)
        _check_mask(self.node, mask)
        probs = self._probs_all()
        out = np.empty((len(x), self.card))
        for r in range(len(x)):
            out[r] = np.log(self._row(x[r], mask[r], probs)[3])
        return out

    def batch_grad(self, x, mask, weights=None):
        x = np.asarray(x, dtype=np.int64)
        mask = np.broadcast_to(np.asarray(mask, dtype=float), x.shape)
        _check_mask(self.node, mask)
        B = len(x)
        w = np.full(B, 1.0 / B) if weights is None else np.asarray(weights, dtype=float)
        probs = self._probs_all()
        grad = np.zeros_like(self.params["logits"])
        value = 0.0
        for r in range(B):
            c = int(x[r, self.node])
            index, sub, nm, dist = self._row(x[r], mask[r], probs)
            value += w[r] * np.log(dist[c])
            # d log(mean_k P_k[c]) / d logits_k = P_k[c] (e_c - P_k) / (nm * dist[c])
            pc = sub[..., c : c + 1]
            local = -pc * sub
            local[..., c] += pc[..., 0]
            grad[index] += w[r] * local / (nm * dist[c])
        return float(value), {"logits": grad}


def make_model(kind: str, node: int, cards, rng=None, **kw) -> ConditionalModel:
    if kind == "net":
        return NetModel(node, cards, rng=rng, **kw)
    if kind == "table":
        return TableModel(node, cards, rng=rng, **kw)
    raise ValueError(f"unknown model kind {kind!r}")


class ConditionalModelSet:
    """One model per node plus the optimizer state that trains them."""

    def __init__(self, models, lr=5e-3, weight_decay=1e-4):
        self.models = list(models)
        for j, m in enumerate(self.models):
            if m.node != j:
                raise ValueError(f"model at position {j} is for node {m.node}")
        self.optimizers = [Adam(lr=lr, weight_decay=weight_decay) for _ in self.models]

    @classmethod
    def create(cls, cards, kind="net", rng=None, lr=5e-3, weight_decay=1e-4, **kw):
        rng = np.random.default_rng() if rng is None else rng
        models = [make_model(kind, j, cards, rng=rng, **kw) for j in range(len(cards))]
        return cls(models, lr=lr, weight_decay=weight_decay)

    def __len__(self):
        return len(self.models)

    def __getitem__(self, j):
        return self.models[j]

    @property
    def cards(self):
        return self.models[0].cards

    def copy(self):
        clone = ConditionalModelSet([m.copy() for m in self.models])
        for src, dst in zip(self.optimizers, clone.optimizers):
            dst.lr, dst.weight_decay, dst.betas, dst.eps = src.lr, src.weight_decay, src.betas, src.eps
            dst.t = src.t
            dst.m = {k: v.copy() for k, v in src.m.items()}
            dst.v = {k: v.copy() for k, v in src.v.items()}
        return clone

    def joint_log_prob(self, x, adj, intervention=None):
        """``log P_G(x)`` for rows ``x`` under graph(s) ``adj``.

        ``adj`` is ``(n, n)`` or per-row ``(B, n, n)``.  The intervened node
        contributes the uniform log-probability.
        """
        x = np.asarray(x, dtype=np.int64)
        adj = np.asarray(adj, dtype=float)
        rows = np.arange(len(x))
        total = np.zeros(len(x))
        for j, m in enumerate(self.models):
            if j == intervention:
                total -= np.log(m.card)
                continue
            mask = adj[..., :, j]
            total += m.log_probs(x, mask)[rows, x[:, j]]
        return total

    # -- checkpoints ----------------------------------------------------
    def to_bytes(self) -> bytes:
        meta = {"format": "causalprobe-models", "version": 1, "models": []}
        arrays = {}
        for j, m in enumerate(self.models):
            entry = {"kind": m.kind, "node": m.node, "cards": list(m.cards), "shapes": {}}
            if m.kind == "net":
                entry.update(embed_dim=m.embed_dim, hidden=m.hidden, slope=m.slope)
            for name, arr in m.params.items():
                entry["shapes"][name] = list(arr.shape)
                arrays[f"{j}/{name}"] = arr.ravel()
            meta["models"].append(entry)
        buf = io.BytesIO()
        np.savez(buf, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ConditionalModelSet":
        data = np.load(io.BytesIO(blob))
        meta = json.loads(bytes(data["__meta__"]).decode())
        models = []
        for j, entry in enumerate(meta["models"]):
            if entry["kind"] == "net":
                m = NetModel(entry["node"], entry["cards"], entry["embed_dim"], entry["hidden"],
                             entry["slope"], rng=np.random.default_rng(0))
            else:
                m = TableModel(entry["node"], entry["cards"])
            for name, shape in entry["shapes"].items():
                m.params[name] = data[f"{j}/{name}"].reshape(shape).copy()
            models.append(m)
        return cls(models)


class NetStack:
    """Every node's :class:`NetModel` evaluated as one batched network.

    Requires identical cardinalities and layer sizes across nodes.  Params
    and optimizer moments are stacked along a leading node axis; the
    arithmetic is elementwise identical to looping over the models.
    """

    KEYS = ("emb", "absent", "W1", "b1", "W2", "b2")

    def __init__(self, models: "ConditionalModelSet", dtype=np.float64):
        self.models = models
        self.dtype = dtype
        ms = models.models
        self.n = len(ms)
        self.offsets = ms[0].offsets
        self.embed_dim, self.hidden, self.slope = ms[0].embed_dim, ms[0].hidden, ms[0].slope
        self.params = {k: np.stack([m.params[k] for m in ms]).astype(dtype, copy=False)
                       for k in self.KEYS}

    @staticmethod
    def supports(models: "ConditionalModelSet") -> bool:
        ms = models.models
        if not all(isinstance(m, NetModel) for m in ms):
            return False
        first = ms[0]
        return all(m.card == first.card and m.embed_dim == first.embed_dim
                   and m.hidden == first.hidden and m.slope == first.slope for m in ms)

    def write_back(self):
        for j, m in enumerate(self.models.models):
            for k in self.KEYS:
                m.params[k] = self.params[k][j].copy()

    def stacked_optimizer(self, lr, weight_decay) -> Adam:
        opts = self.models.optimizers
        opt = Adam(lr=lr, betas=opts[0].betas, eps=opts[0].eps, weight_decay=weight_decay)
        opt.t = opts[0].t
        if opts[0].m:
            opt.m = {k: np.stack([o.m[k] for o in opts]) for k in self.KEYS}
            opt.v = {k: np.stack([o.v[k] for o in opts]) for k in self.KEYS}
        return opt

    def write_back_optimizer(self, opt: Adam):
        for j, o in enumerate(self.models.optimizers):
            o.t = opt.t
            o.m = {k: opt.m[k][j].copy() for k in opt.m}
            o.v = {k: opt.v[k][j].copy() for k in opt.v}

    def _forward(self, x, masks):
        p = self.params
        idx = self.offsets[None, :] + x  # (B, n)
        e = p["emb"][:, idx]  # (J, B, n, E)
        on = np.transpose(masks, (2, 0, 1)) > 0  # (J, B, n)
        inp = np.where(on[..., None], e, p["absent"][:, None])
        inp = inp.reshape(self.n, len(x), -1)
        z1 = inp @ p["W1"] + p["b1"][:, None]
        return idx, e, on, inp, z1

    def _act(self, z):
        return np.maximum(z, self.slope * z)

    def batch_grad(self, x, masks, weights=None):
        """Weighted ``log p`` per node and stacked gradients; ``masks`` is ``(B, n, n)``.

        ``weights`` has shape ``(n, B)`` and defaults to ``1/B`` everywhere.
        """
        p = self.params
        J, B = self.n, len(x)
        w = np.full((J, B), 1.0 / B) if weights is None else np.asarray(weights)
        idx, e, on, inp, z1 = self._forward(x, masks)
        a1 = self._act(z1)
        logp = _log_softmax(a1 @ p["W2"] + p["b2"][:, None])
        jj = np.arange(J)[:, None]
        bb = np.arange(B)[None, :]
        target = x.T  # (J, B)
        values = (logp[jj, bb, target] * w).sum(axis=1)

        g = -np.exp(logp)
        g[jj, bb, target] += 1.0
        g *= w[..., None]
        grads = {"W2": np.swapaxes(a1, 1, 2) @ g, "b2": g.sum(axis=1)}
        dz1 = (g @ np.swapaxes(p["W2"], 1, 2)) * np.where(z1 > 0, 1.0, self.slope)
        grads["W1"] = np.swapaxes(inp, 1, 2) @ dz1
        grads["b1"] = dz1.sum(axis=1)
        dinp = (dz1 @ np.swapaxes(p["W1"], 1, 2)).reshape(J, B, -1, self.embed_dim)
        S = p["emb"].shape[1]
        flat = (np.arange(J)[:, None, None] * S + idx[None]).astype(np.int64)
        demb = np.zeros((J * S, self.embed_dim))
        np.add.at(demb, flat[on], dinp[on])
        grads["emb"] = demb.reshape(J, S, self.embed_dim)
        off = np.swapaxes(~on, 1, 2)[..., None, :].astype(dinp.dtype)  # (J, n, 1, B)
        grads["absent"] = (off @ np.swapaxes(dinp, 1, 2))[..., 0, :]
        return values, grads

    def contrasts(self, x, masks):
        """``dL[b, i, j] = log f_j(. | i out) - log f_j(. | i in)``; zero diagonal."""
        p = self.params
        J, B, E = self.n, len(x), self.embed_dim
        idx, e, on, inp, z1 = self._forward(x, masks)
        W1 = p["W1"].reshape(J, J, E, self.hidden)
        diff = np.swapaxes(e - p["absent"][:, None], 1, 2)  # (J, n, B, E)
        delta = diff @ W1  # (J, n, B, H)
        sign = 1.0 - 2.0 * np.transpose(masks, (2, 1, 0)).astype(self.dtype)  # +1 adds, -1 removes
        target = x.T  # (J, B)
        W2 = p["W2"][:, None]
        b2 = p["b2"][:, None, None]
        onehot = np.arange(W2.shape[-1]) == target[:, None, :, None]

        def pick(z):
            logits = self._act(z) @ W2 + b2
            top = logits.max(axis=-1, keepdims=True)
            lse = np.log(np.exp(logits - top).sum(axis=-1)) + top[..., 0]
            return np.where(onehot, logits, 0.0).sum(axis=-1) - lse

        # Flipping parent i changes exactly one of the two evaluations.
        # dL = lp(out) - lp(in) = -sign * (lp(flipped) - lp(current))
        current = pick(z1[:, None])  # (J, 1, B)
        flipped = pick(z1[:, None] + sign[..., None] * delta)  # (J, n, B)
        dL = -sign * (flipped - current)
        dL = np.transpose(dL, (2, 1, 0)).astype(np.float64)
        i = np.arange(J)
        dL[:, i, i] = 0.0
        return dL


def sample_edge_masks(edge_probs: np.ndarray, count: int, rng) -> np.ndarray:
    """Independent Bernoulli adjacency masks, shape ``(count, n, n)``."""
    p = np.asarray(edge_probs)
    masks = (rng.random((count,) + p.shape) < p[None]).astype(float)
    idx = np.arange(p.shape[0])
    masks[:, idx, idx] = 0.0
    return masks


def _row_weights(targets, n):
    """``(n, B)`` weights averaging each node's loss over rows where it was not clamped."""
    keep = targets[None, :] != np.arange(n)[:, None]
    return keep / np.maximum(keep.sum(axis=1, keepdims=True), 1)


def fit_distribution(models: ConditionalModelSet, belief, data: Dataset, iters=1000, batch=128,
                     lr=5e-3, weight_decay=1e-4, k_masks=1, rng=None, targets=None):
    """Minibatch NLL training with adjacency masks drawn from ``belief``.

    Each step draws ``batch`` rows, gives every row ``k_masks`` fresh masks
    from ``Bernoulli(sigmoid(gamma) * sigmoid(theta))`` and takes one Adam
    step per node.  ``targets`` optionally gives each row's intervened node
    (``-1`` for observational rows); a node's own loss skips the rows where
    it was clamped.  Returns the per-step NLL (summed over nodes).
    """
    x_all = data.samples if isinstance(data, Dataset) else np.asarray(data)
    if len(x_all) == 0:
        raise ValueError("cannot fit on an empty dataset")
    if targets is not None:
        targets = np.asarray(targets)
        if targets.shape != (len(x_all),):
            raise ValueError("targets needs one entry per row")
    rng = np.random.default_rng() if rng is None else rng
    probs = belief.edge_probs()
    n = x_all.shape[1]
    trace = np.empty(iters)
    if NetStack.supports(models):
        stack = NetStack(models)
        opt = stack.stacked_optimizer(lr, weight_decay)
        for step in range(iters):
            idx = rng.integers(len(x_all), size=batch)
            x = np.repeat(x_all[idx], k_masks, axis=0)
            masks = sample_edge_masks(probs, len(x), rng)
            w = None if targets is None else _row_weights(np.repeat(targets[idx], k_masks), n)
            values, grads = stack.batch_grad(x, masks, w)
            opt.step(stack.params, {k: -g for k, g in grads.items()})
            trace[step] = -values.sum()
        stack.write_back()
        stack.write_back_optimizer(opt)
        for o in models.optimizers:
            o.lr, o.weight_decay = lr, weight_decay
        return trace
    for opt in models.optimizers:
        opt.lr, opt.weight_decay = lr, weight_decay
    for step in range(iters):
        idx = rng.integers(len(x_all), size=batch)
        x = np.repeat(x_all[idx], k_masks, axis=0)
        masks = sample_edge_masks(probs, len(x), rng)
        w = None if targets is None else _row_weights(np.repeat(targets[idx], k_masks), n)
        nll = 0.0
        for j, (m, opt) in enumerate(zip(models.models, models.optimizers)):
            value, grads = m.batch_grad(x, masks[:, :, j], None if w is None else w[j])
            opt.step(m.params, {k: -g for k, g in grads.items()})
            nll -= value
        trace[step] = nll
    return trace


def _depths(adj: np.ndarray) -> np.ndarray:
    """Longest-path depth of every node, for a stack of DAGs ``(M, n, n)``."""
    M, n, _ = adj.shape
    depth = np.zeros((M, n), dtype=np.int64)
    for _ in range(n):
        # depth[j] = max over parents i of depth[i] + 1
        cand = np.where(adj > 0, depth[:, :, None] + 1, 0).max(axis=1)
        if np.array_equal(cand, depth):
            break
        depth = cand
    return depth


def sample_rows_multi(models: ConditionalModelSet, adjs: np.ndarray, per_graph: int,
                      intervention: Optional[int], rng) -> np.ndarray:
    """Ancestral samples from several graphs at once.

    Returns ``(M * per_graph, n)`` rows; rows ``g*per_graph:(g+1)*per_graph``
    come from graph ``adjs[g]``.
    """
    adjs = np.asarray(adjs)
    M, n, _ = adjs.shape
    cards = models.cards
    graph_of = np.repeat(np.arange(M), per_graph)
    x = np.zeros((M * per_graph, n), dtype=np.int64)
    row_adj = adjs[graph_of].astype(float)
    if intervention is not None:
        x[:, intervention] = rng.integers(cards[intervention], size=len(x))
    depth = _depths(adjs)[graph_of]
    for d in range(int(depth.max()) + 1):
        for j in range(n):
            if j == intervention:
                continue
            rows = np.flatnonzero(depth[:, j] == d)
            if len(rows) == 0:
                continue
            logp = models[j].log_probs(x[rows], row_adj[rows, :, j])
            probs = np.exp(logp)
            cum = np.cumsum(probs, axis=1)
            u = rng.random(len(rows)) * cum[:, -1]
            x[rows, j] = np.minimum((u[:, None] >= cum).sum(axis=1), cards[j] - 1)
    return x


def sample_from_models(models: ConditionalModelSet, dag: Dag, intervention: Optional[int],
                       count: int, rng) -> Dataset:
    """Sample ``count`` rows from the learned conditionals wired up as ``dag``.

    The intervened node, if any, is drawn uniformly.
    """
    adj = dag.adj if isinstance(dag, Dag) else np.asarray(dag)
    if not isinstance(dag, Dag):
        Dag(adj)  # raises on cycles
    if intervention is not None and not 0 <= intervention < adj.shape[0]:
        raise ValueError(f"intervention {intervention} out of range")
    x = sample_rows_multi(models, adj[None], count, intervention, rng)
    return Dataset(x, intervention)
