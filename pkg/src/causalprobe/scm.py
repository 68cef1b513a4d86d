"""
Categorical structural causal models.

A model is a :class:`~causalprobe.graph.Dag` plus one conditional
probability table per node.  Table rows are indexed row-major over the
parent configuration, in the order given by ``Cpt.parent_ids`` (the last
parent varies fastest).

Sampling functions take an explicit ``numpy.random.Generator`` and are
deterministic given it.  Callers that sample in parallel must hand each
worker its own child stream (``SeedSequence.spawn``); streams are never
shared.
"""

from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import Dag, topological_order


@dataclass(frozen=True, eq=False)
class Cpt:
    node: int
    parent_ids: tuple[int, ...]
    parent_cards: tuple[int, ...]
    card: int
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        rows = int(np.prod(self.parent_cards)) if self.parent_cards else 1
        if table.shape != (rows, self.card):
            raise ValueError(
                f"CPT of node {self.node}: expected shape {(rows, self.card)}, got {table.shape}"
            )
        if np.any(table < 0) or np.any(table > 1):
            raise ValueError(f"CPT of node {self.node} has entries outside [0, 1]")
        if not np.allclose(table.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError(f"CPT rows of node {self.node} do not sum to 1")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "parent_ids", tuple(int(p) for p in self.parent_ids))
        object.__setattr__(self, "parent_cards", tuple(int(c) for c in self.parent_cards))

    def row_index(self, values: np.ndarray) -> np.ndarray:
        """Row indices for a batch of full samples ``values`` (shape ``(B, n)``)."""
        if not self.parent_ids:
            return np.zeros(len(values), dtype=np.int64)
        cols = values[:, list(self.parent_ids)]
        return np.ravel_multi_index(cols.T, self.parent_cards)


@dataclass(frozen=True, eq=False)
class CategoricalScm:
    dag: Dag
    cpts: tuple[Cpt, ...]
    cardinalities: tuple[int, ...]
    names: Optional[tuple[str, ...]] = None
    labels: Optional[tuple[tuple[str, ...], ...]] = None

    def __post_init__(self):
        n = self.dag.n
        object.__setattr__(self, "cpts", tuple(self.cpts))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if len(self.cpts) != n or len(self.cardinalities) != n:
            raise ValueError("need one CPT and one cardinality per node")
        for j, cpt in enumerate(self.cpts):
            if cpt.node != j:
                raise ValueError(f"CPT at position {j} is for node {cpt.node}")
            if sorted(cpt.parent_ids) != self.dag.parents(j):
                raise ValueError(
                    f"node {j}: CPT parents {cpt.parent_ids} != graph parents {self.dag.parents(j)}"
                )
            if cpt.card != self.cardinalities[j]:
                raise ValueError(f"node {j}: CPT cardinality disagrees with the model")
            for p, c in zip(cpt.parent_ids, cpt.parent_cards):
                if self.cardinalities[p] != c:
                    raise ValueError(f"node {j}: parent {p} cardinality disagrees")
        if self.names is None:
            object.__setattr__(self, "names", tuple(f"X{i}" for i in range(n)))
        else:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.dag.n

    def to_json(self) -> str:
        payload = {
            "format": "causalprobe-scm",
            "version": 1,
            "names": list(self.names),
            "cardinalities": list(self.cardinalities),
            "adjacency": self.dag.adj.tolist(),
            "cpts": [
                {
                    "node": c.node,
                    "parents": list(c.parent_ids),
                    "table": c.table.tolist(),
                }
                for c in self.cpts
            ],
        }
        if self.labels is not None:
            payload["labels"] = [list(l) for l in self.labels]
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "CategoricalScm":
        d = json.loads(text)
        cards = tuple(d["cardinalities"])
        cpts = tuple(
            Cpt(
                node=c["node"],
                parent_ids=tuple(c["parents"]),
                parent_cards=tuple(cards[p] for p in c["parents"]),
                card=cards[c["node"]],
                table=np.array(c["table"], dtype=float),
            )
            for c in d["cpts"]
        )
        labels = tuple(tuple(l) for l in d["labels"]) if "labels" in d else None
        return cls(
            dag=Dag(np.array(d["adjacency"], dtype=np.int8)),
            cpts=cpts,
            cardinalities=cards,
            names=tuple(d["names"]),
            labels=labels,
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of category indices, one column per node."""

    samples: np.ndarray
    intervention_target: Optional[int] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.int64)
        if s.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    def validate(self, cardinalities: Sequence[int]) -> None:
        cards = np.asarray(cardinalities)
        if self.samples.shape[1] != len(cards):
            raise ValueError("column count does not match the number of nodes")
        if np.any(self.samples < 0) or np.any(self.samples >= cards[None, :]):
            raise ValueError("sample value outside its node's category range")

    def to_csv(self, names: Sequence[str]) -> str:
        buf = io.StringIO()
        if self.intervention_target is not None:
            buf.write(f"# intervention={self.intervention_target}\n")
        buf.write(",".join(names) + "\n")
        np.savetxt(buf, self.samples, fmt="%d", delimiter=",")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        target = None
        lines = text.splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "intervention":
                    target = int(value)
                continue
            body.append(line)
        rows = [list(map(int, l.split(","))) for l in body[1:] if l.strip()]
        ncols = len(body[0].split(","))
        samples = np.array(rows, dtype=np.int64).reshape(-1, ncols)
        return cls(samples, target)


def _sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of ``probs`` by inverse-CDF."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs)) * cum[:, -1]
    return np.minimum((u[:, None] >= cum).sum(axis=1), probs.shape[1] - 1)


def _sample(scm: CategoricalScm, count: int, rng, target: Optional[int]) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be positive")
    x = np.zeros((count, scm.n), dtype=np.int64)
    for j in topological_order(scm.dag):
        if j == target:
            x[:, j] = rng.integers(scm.cardinalities[j], size=count)
            continue
        cpt = scm.cpts[j]
        x[:, j] = _sample_categorical(cpt.table[cpt.row_index(x)], rng)
    return x


def ancestral_sample(scm: CategoricalScm, count: int, rng) -> Dataset:
    """Draw ``count`` observational rows."""
    return Dataset(_sample(scm, count, rng, None))


def intervene_sample(scm: CategoricalScm, target: int, count: int, rng) -> Dataset:
    """Draw ``count`` rows with ``target``'s mechanism replaced by a uniform draw."""
    if not 0 <= target < scm.n:
        raise ValueError(f"intervention target {target} out of range for {scm.n} nodes")
    return Dataset(_sample(scm, count, rng, target), intervention_target=int(target))


def random_cpt_scm(dag: Dag, cardinalities, concentration: float, rng) -> CategoricalScm:
    """SCM whose CPT rows are independent symmetric-Dirichlet draws."""
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    if np.isscalar(cardinalities):
        cardinalities = [int(cardinalities)] * dag.n
    cards = tuple(int(c) for c in cardinalities)
    cpts = []
    for j in range(dag.n):
        parents = tuple(dag.parents(j))
        pcards = tuple(cards[p] for p in parents)
        rows = int(np.prod(pcards)) if pcards else 1
        table = rng.dirichlet(np.full(cards[j], float(concentration)), size=rows)
        # Dirichlet draws can underflow to exact zeros at tiny concentrations.
        table = table / table.sum(axis=1, keepdims=True)
        cpts.append(Cpt(j, parents, pcards, cards[j], table))
    return CategoricalScm(dag, tuple(cpts), cards)


def joint_table(scm: CategoricalScm, target: Optional[int] = None) -> np.ndarray:
    """Exact joint (or post-interventional joint) as an n-dimensional array.

    Only meant for tiny systems; size is the product of all cardinalities.
    """
    cards = scm.cardinalities
    configs = np.array(list(itertools.product(*[range(c) for c in cards])), dtype=np.int64)
    logp = np.zeros(len(configs))
    for j, cpt in enumerate(scm.cpts):
        if j == target:
            logp -= np.log(cards[j])
        else:
            with np.errstate(divide="ignore"):
                logp += np.log(cpt.table[cpt.row_index(configs), configs[:, j]])
    return np.exp(logp).reshape(cards)
