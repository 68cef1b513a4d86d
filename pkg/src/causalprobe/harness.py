"""
Experiment orchestration: the online acquisition loop, suites of runs and
the pre-initialisation probe.

Randomness comes from one root seed.  Every consumer draws from its own
named substream keyed by ``(component, round, ...)``, so e.g. switching the
targeting strategy never changes the ground-truth model or the
observational data of a run.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import bif
from .condmodel import ConditionalModelSet, fit_distribution
from .enco import graph_fitting_round
from .graph import FAMILIES, generate_synthetic, shd
from .graphbelief import GraphBelief, clamp_known_edges, extract_graph
from .metrics import RoundEntry, RunRecord, aggregate_table, aushd, eaushd
from .scm import CategoricalScm, Dataset, ancestral_sample, intervene_sample, random_cpt_scm
from .targeting import (
    RoundRobinState,
    ScoreVector,
    ait_scores,
    cbed_scores,
    epsilon_greedy_select,
    git_privileged_scores,
    git_scores,
    random_round_robin,
)

log = logging.getLogger(__name__)

STRATEGIES = ("git", "git_privileged", "epsilon_git", "ait", "cbed", "random")
OUTPUT_ENV = "CAUSALPROBE_OUTPUT"


@dataclass
class ExperimentConfig:
    """Everything that defines one run.  Defaults are the full-scale settings."""

    graph: str = "chain"  # family name, "bif:<name-or-path>" or "scm:<json path>"
    n: int = 25
    edge_prob: float = 0.3
    cardinality: Optional[int] = None  # synthetic default 10; file sources must agree if set
    concentration: float = 0.5
    obs_size: int = 5000
    rounds: int = 100
    batch: int = 32
    strategy: str = "git"
    epsilon: float = 0.0
    mc_graphs: int = 50
    mc_samples: int = 32
    squared_score: bool = True
    model_kind: str = "net"
    embed_dim: int = 8
    hidden: int = 64
    dist_iters: int = 1000
    dist_batch: int = 128
    init_dist_iters: Optional[int] = None
    graph_iters: int = 100
    graph_samples: int = 100
    graph_batch: int = 128
    epochs_per_round: int = 1
    lambda_sparse: float = 4e-3
    theta_sparsity: bool = False
    lr_model: float = 5e-3
    weight_decay: float = 1e-4
    lr_gamma: float = 2e-2
    lr_theta: float = 1e-1
    cold_start: bool = False
    latest_only: bool = False
    mixed_data: bool = False
    shadow_strategy: Optional[str] = None
    seed: int = 0
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.cardinality is not None and self.cardinality < 2:
            raise ValueError("cardinality must be at least 2")
        counts = ("n", "obs_size", "batch", "mc_graphs", "mc_samples", "dist_iters",
                  "dist_batch", "graph_iters", "graph_samples", "graph_batch", "embed_dim", "hidden", "epochs_per_round")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.shadow_strategy not in (None, *STRATEGIES):
            raise ValueError(f"unknown shadow strategy {self.shadow_strategy!r}")
        is_family = self.graph in FAMILIES
        if not (is_family or self.graph.startswith(("bif:", "scm:"))):
            raise ValueError(f"graph source {self.graph!r} not understood")

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """Small settings that finish in seconds to minutes on one core."""
        base = dict(n=8, cardinality=4, dist_iters=100, graph_iters=100, graph_samples=20,
                    rounds=40, mc_graphs=20, lambda_sparse=2e-2)
        base.update(overrides)
        return cls(**base)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def key(self) -> str:
        """Stable hash of the run-defining fields (excludes seed and output location)."""
        d = asdict(self)
        d.pop("output_dir")
        d.pop("seed")
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def label(self) -> str:
        if self.graph in FAMILIES:
            return f"{self.graph}-{self.n}"
        return Path(self.graph.split(":", 1)[1]).stem


class Streams:
    """Named random substreams derived from one root seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def __call__(self, name: str, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()), *map(int, keys)))
        return np.random.default_rng(ss)


def build_scm(config: ExperimentConfig, streams: Streams) -> CategoricalScm:
    """Ground truth named by ``config.graph``; file sources are checked against ``cardinality``."""
    if config.graph in FAMILIES:
        dag = generate_synthetic(config.graph, config.n, config.edge_prob, streams("graph"))
        card = 10 if config.cardinality is None else config.cardinality
        return random_cpt_scm(dag, card, config.concentration, streams("cpt"))
    kind, src = config.graph.split(":", 1)
    if kind == "bif":
        scm = bif.load_network(src) if src in bif.BUNDLED else bif.to_scm(bif.load_bif(src))
    else:
        scm = CategoricalScm.from_json(Path(src).read_text())
    if config.cardinality is not None and any(c != config.cardinality for c in scm.cardinalities):
        raise ValueError(f"cardinality {config.cardinality} does not match the source "
                         f"(per-node cardinalities {list(scm.cardinalities)})")
    return scm


def _new_models(config, scm, streams, tag=0):
    kw = {}
    if config.model_kind == "net":
        kw = dict(embed_dim=config.embed_dim, hidden=config.hidden)
    return ConditionalModelSet.create(scm.cardinalities, config.model_kind, rng=streams("init", tag),
                                      lr=config.lr_model, weight_decay=config.weight_decay, **kw)


def score_targets(strategy, config, belief, models, scm, rng, round_idx) -> Optional[ScoreVector]:
    M, S, K, lam = config.mc_graphs, config.mc_samples, config.graph_samples, config.lambda_sparse
    if strategy in ("git", "epsilon_git"):
        return git_scores(belief, models, M, S, K, lam, rng, config.squared_score, round_idx,
                          config.theta_sparsity)
    if strategy == "git_privileged":
        return git_privileged_scores(belief, models, scm, M, S, K, lam, rng, config.squared_score,
                                     round_idx, config.theta_sparsity)
    if strategy == "ait":
        return ait_scores(belief, models, max(M, 2), max(S, 2), rng, round_idx)
    if strategy == "cbed":
        return cbed_scores(belief, models, max(M, 2), S, rng, round_idx)
    return None


class OnlineRun:
    """State of one online run; :func:`run_online` drives it to completion."""

    def __init__(self, config: ExperimentConfig, scm: Optional[CategoricalScm] = None,
                 belief: Optional[GraphBelief] = None):
        self.config = config
        self.streams = Streams(config.seed)
        self.scm = build_scm(config, self.streams) if scm is None else scm
        if config.graph in FAMILIES and self.scm.n != config.n:
            raise ValueError("config n disagrees with the ground-truth model")
        self.obs = ancestral_sample(self.scm, config.obs_size, self.streams("obs"))
        self.initial_belief = GraphBelief(self.scm.n) if belief is None else belief.copy()
        self.belief = self.initial_belief.copy()
        self.models = _new_models(config, self.scm, self.streams)
        self.int_batches: list[Dataset] = []
        self.rr = RoundRobinState(self.scm.n, self.streams("roundrobin"))
        self.record = RunRecord(config.strategy, config.seed, initial_shd=0)
        self.rows: list[dict] = []
        self.shadow_scores: list[np.ndarray] = []

    @property
    def n_int(self):
        return sum(len(b) for b in self.int_batches)

    def current_shd(self) -> int:
        return shd(extract_graph(self.belief), self.scm.dag)

    def _dist_data(self):
        """Rows for distribution fitting and their targets (``-1`` = observational)."""
        if self.config.mixed_data and self.int_batches:
            pool = [self.obs] + self.int_batches
            x = np.concatenate([b.samples for b in pool])
            t = np.concatenate([np.full(len(b), -1 if b.intervention_target is None
                                        else b.intervention_target) for b in pool])
            return Dataset(x), t
        return self.obs, None

    def fit_models(self, keys, iters):
        data, targets = self._dist_data()
        trace = fit_distribution(self.models, self.belief, data, iters,
                                 self.config.dist_batch, self.config.lr_model,
                                 self.config.weight_decay, rng=self.streams("dist", *keys),
                                 targets=targets)
        return float(trace[-min(len(trace), 10):].mean()) if len(trace) else float("nan")

    def fit_graph(self, *keys):
        cfg = self.config
        pool = self.int_batches[-1:] if cfg.latest_only else self.int_batches
        x = np.concatenate([b.samples for b in pool])
        t = np.concatenate([np.full(len(b), b.intervention_target) for b in pool])
        rng = self.streams("graphfit", *keys)
        norms = []
        for _ in range(cfg.graph_iters):
            idx = rng.integers(len(x), size=min(cfg.graph_batch, len(x)))
            batches = [(int(k), Dataset(x[idx][t[idx] == k], int(k))) for k in np.unique(t[idx])]
            g = graph_fitting_round(self.belief, self.models, batches, cfg.graph_samples,
                                    cfg.lambda_sparse, cfg.lr_gamma, cfg.lr_theta, rng,
                                    cfg.theta_sparsity)
            norms.append((np.linalg.norm(g.d_gamma), np.linalg.norm(g.d_theta)))
        return np.mean(norms, axis=0)

    def start(self):
        iters = self.config.init_dist_iters or self.config.dist_iters
        loss = self.fit_models((0,), iters)
        self.record.initial_shd = self.current_shd()
        self.rows.append(dict(round=0, target="", shd=self.record.initial_shd, n_int=0,
                              dist_nll=loss, grad_norm_gamma="", grad_norm_theta=""))

    def select(self, round_idx):
        cfg = self.config
        scores = score_targets(cfg.strategy, cfg, self.belief, self.models, self.scm,
                               self.streams("strategy", round_idx), round_idx)
        if cfg.shadow_strategy is not None:
            shadow = score_targets(cfg.shadow_strategy, cfg, self.belief, self.models, self.scm,
                                   self.streams("shadow", round_idx), round_idx)
            if shadow is not None:
                self.shadow_scores.append(shadow.scores)
        if cfg.strategy == "random":
            return random_round_robin(self.rr), None
        if cfg.strategy == "epsilon_git":
            return epsilon_greedy_select(scores, cfg.epsilon, self.streams("select", round_idx)), scores
        return scores.argmax(), scores

    def step(self, round_idx):
        cfg = self.config
        target, scores = self.select(round_idx)
        batch = intervene_sample(self.scm, target, cfg.batch, self.streams("query", round_idx))
        self.int_batches.append(batch)
        if cfg.cold_start:
            self.belief = self.initial_belief.copy()
            self.models = _new_models(cfg, self.scm, self.streams, round_idx)
            loss = self.fit_models((round_idx, 0), cfg.init_dist_iters or cfg.dist_iters)
            norms = [self.fit_graph(round_idx, r) for r in range(round_idx)][-1]
        else:
            for epoch in range(cfg.epochs_per_round):
                loss = self.fit_models((round_idx, epoch), cfg.dist_iters)
                norms = self.fit_graph(round_idx, epoch)
        d = self.current_shd()
        self.record.rounds.append(RoundEntry(round_idx, int(target), d,
                                             None if scores is None else scores.scores))
        self.rows.append(dict(round=round_idx, target=int(target), shd=d, n_int=self.n_int,
                              dist_nll=loss, grad_norm_gamma=float(norms[0]),
                              grad_norm_theta=float(norms[1])))
        log.debug("round %d target %d shd %d", round_idx, target, d)


def run_online(config: ExperimentConfig, scm: Optional[CategoricalScm] = None,
               belief: Optional[GraphBelief] = None) -> RunRecord:
    """Observational fit, then ``config.rounds`` rounds of select / query / refit."""
    run = OnlineRun(config, scm, belief)
    run.start()
    for t in range(1, config.rounds + 1):
        run.step(t)
    run.record.validate()
    run.record.extras["belief"] = run.belief
    run.record.extras["models"] = run.models
    run.record.extras["rows"] = run.rows
    if config.shadow_strategy is not None:
        run.record.extras["shadow_scores"] = np.array(run.shadow_scores)
    if config.output_dir:
        save_run(run, Path(config.output_dir))
    return run.record


def run_preinit_probe(config: ExperimentConfig, free_node: int, scm=None):
    """Run with all structure clamped to the truth except pairs touching ``free_node``.

    Returns ``(record, histogram)`` where the histogram counts how often
    each node was chosen.
    """
    streams = Streams(config.seed)
    scm = build_scm(config, streams) if scm is None else scm
    if not 0 <= free_node < scm.n:
        raise ValueError(f"free_node {free_node} out of range")
    belief = clamp_known_edges(GraphBelief(scm.n), scm.dag, free_node)
    record = run_online(config, scm=scm, belief=belief)
    hist = np.bincount(record.targets, minlength=scm.n) if record.rounds else np.zeros(scm.n, int)
    record.extras["histogram"] = hist
    return record, hist


# -- persistence ---------------------------------------------------------

RUN_COLUMNS = ["round", "target", "shd", "n_int", "dist_nll", "grad_norm_gamma", "grad_norm_theta"]


def _run_csv(run: OnlineRun) -> str:
    n = run.scm.n
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(RUN_COLUMNS + [f"score_{i}" for i in range(n)])
    score_rows = {e.round: e.scores for e in run.record.rounds}
    for row in run.rows:
        s = score_rows.get(row["round"])
        scores = [""] * n if s is None else [repr(float(v)) for v in s]
        w.writerow([row[c] for c in RUN_COLUMNS] + scores)
    return buf.getvalue()


def _scores_csv(run: OnlineRun) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["round", "method", "node", "score", "chosen"])
    for e in run.record.rounds:
        if e.scores is None:
            continue
        for node, s in enumerate(e.scores):
            w.writerow([e.round, run.config.strategy, node, repr(float(s)), int(node == e.target)])
    return buf.getvalue()


def save_run(run: OnlineRun, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(run.config.to_json())
    (out / "run.csv").write_text(_run_csv(run))
    (out / "scores.csv").write_text(_scores_csv(run))
    (out / "belief.json").write_text(run.belief.to_json())
    (out / "models.bin").write_bytes(run.models.to_bytes())
    hist = np.bincount(run.record.targets, minlength=run.scm.n) if run.record.rounds else []
    (out / "targets_histogram.csv").write_text(
        "node,count\n" + "".join(f"{i},{c}\n" for i, c in enumerate(hist)))
    if run.shadow_scores:
        np.savetxt(out / "shadow_scores.csv", np.array(run.shadow_scores), delimiter=",")
    (out / "DONE").write_text("")


def validate_run_csv(text: str) -> list[dict]:
    """Parse a ``run.csv`` and check every row against the column schema."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    if header[: len(RUN_COLUMNS)] != RUN_COLUMNS:
        raise ValueError(f"unexpected header {header}")
    extra = header[len(RUN_COLUMNS):]
    if extra != [f"score_{i}" for i in range(len(extra))]:
        raise ValueError("score columns must be score_0..score_{n-1}")
    rows = []
    for k, row in enumerate(reader):
        if int(row["round"]) != k:
            raise ValueError(f"row {k}: rounds must be contiguous from 0")
        if int(row["shd"]) < 0:
            raise ValueError(f"row {k}: negative SHD")
        if k == 0:
            if row["target"] != "":
                raise ValueError("round 0 has no target")
        else:
            if not 0 <= int(row["target"]) < len(extra):
                raise ValueError(f"row {k}: target out of range")
            if int(row["n_int"]) < 0:
                raise ValueError(f"row {k}: negative n_int")
            float(row["grad_norm_gamma"]), float(row["grad_norm_theta"])
        float(row["dist_nll"])
        for c in extra:
            if row[c] != "":
                float(row[c])
        rows.append(row)
    return rows


def load_run_dir(path: Path):
    """``(config, shd series incl. round 0, targets, n)`` from a saved run directory."""
    config = ExperimentConfig.from_json((path / "config.json").read_text())
    text = (path / "run.csv").read_text()
    rows = validate_run_csv(text)
    n = sum(1 for c in text.splitlines()[0].split(",") if c.startswith("score_"))
    shds = [int(r["shd"]) for r in rows]
    targets = [int(r["target"]) for r in rows[1:]]
    return config, shds, targets, n


# -- suites --------------------------------------------------------------

def _run_one(config_json: str):
    config = ExperimentConfig.from_json(config_json)
    try:
        run_online(config)
        return config.output_dir, None
    except Exception as exc:  # recorded per run, the suite keeps going
        log.exception("run %s failed", config.output_dir)
        return config.output_dir, f"{type(exc).__name__}: {exc}"


def run_suite(configs, output_dir, parallelism: int = 1, level: float = 0.90, seed: int = 0):
    """Run every config (skipping finished ones) and write the aggregate tables.

    Returns a dict with the table texts and the list of failures.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    configs = list(configs)
    if not configs:
        raise ValueError("empty suite")
    pending = []
    run_dirs = []
    for cfg in configs:
        d = out / "runs" / f"{cfg.label()}_{cfg.strategy}_{cfg.key()}_s{cfg.seed}"
        run_dirs.append(d)
        if (d / "DONE").exists():
            continue
        pending.append(dataclasses.replace(cfg, output_dir=str(d)).to_json())
    if parallelism > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_one, pending))
    else:
        results = [_run_one(c) for c in pending]
    failures = [(d, err) for d, err in results if err is not None]
    if failures:
        (out / "failures.csv").write_text(
            "run,error\n" + "".join(f"{d},{json.dumps(e)}\n" for d, e in failures))
    tables = aggregate_runs([d for d in run_dirs if (d / "DONE").exists()], out, level, seed)
    tables["failures"] = failures
    return tables


def aggregate_runs(run_dirs, out: Optional[Path] = None, level=0.90, seed=0) -> dict:
    """AUSHD / final-SHD / EAUSHD tables and a target histogram from saved runs."""
    aushds, finals, hists = {}, {}, {}
    for d in run_dirs:
        config, shds, targets, n = load_run_dir(Path(d))
        key = (config.label(), config.strategy)
        if config.rounds >= 1:
            aushds.setdefault(key, []).append(aushd(shds[1:], config.rounds))
        finals.setdefault(key, []).append(shds[-1])
        counts = np.bincount(np.asarray(targets, dtype=int), minlength=n)
        hists[key] = hists.get(key, 0) + counts
    eau = {}
    for (g, m), vals in aushds.items():
        base = aushds.get((g, "random"))
        if base:
            eau[(g, m)] = [eaushd(v, base) for v in vals]
    rng = np.random.default_rng(seed)
    tables = {
        "aushd_table.csv": aggregate_table(aushds, level, rng),
        "shd_table.csv": aggregate_table(finals, level, rng),
        "eaushd_table.csv": aggregate_table(eau, level, rng),
    }
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["graph", "method", "node", "count"])
    for (g, m), h in sorted(hists.items()):
        for node, c in enumerate(h):
            w.writerow([g, m, node, int(c)])
    tables["targets_histogram.csv"] = buf.getvalue()
    if out is not None:
        for name, text in tables.items():
            Path(out, name).write_text(text)
    return tables


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "causalprobe-output"))
