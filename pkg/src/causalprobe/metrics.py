"""Evaluation metrics over run logs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata


@dataclass
class RoundEntry:
    round: int
    target: int
    shd: int
    scores: Optional[np.ndarray] = None


@dataclass
class RunRecord:
    """One online run: the initial SHD plus one entry per acquisition round."""

    method: str
    seed: int
    initial_shd: int
    rounds: list[RoundEntry] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def validate(self):
        for k, e in enumerate(self.rounds, start=1):
            if e.round != k:
                raise ValueError(f"round indices must be contiguous from 1; got {e.round} at {k}")
            if e.shd < 0 or int(e.shd) != e.shd:
                raise ValueError("SHD entries must be nonnegative integers")

    @property
    def shd_series(self) -> list[int]:
        return [e.shd for e in self.rounds]

    @property
    def targets(self) -> list[int]:
        return [e.target for e in self.rounds]

    def score_matrix(self) -> np.ndarray:
        return np.array([e.scores for e in self.rounds if e.scores is not None])


def aushd(shd_series: Sequence[float], T: int) -> float:
    """Mean SHD over the first ``T`` rounds."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if T > len(shd_series):
        raise ValueError(f"horizon T={T} exceeds series length {len(shd_series)}")
    return float(math.fsum(shd_series[:T]) / T)


def eaushd(method_aushd: float, random_baseline_aushds: Sequence[float]) -> float:
    """Improvement of a method's AUSHD over the Random mean (higher is better)."""
    if len(random_baseline_aushds) == 0:
        raise ValueError("baseline list is empty")
    return -(method_aushd - float(np.mean(random_baseline_aushds)))


def target_entropy(histogram: Sequence[float]) -> float:
    """Shannon entropy in nats of a selection histogram."""
    h = np.asarray(histogram, dtype=float)
    total = h.sum()
    if total <= 0:
        raise ValueError("histogram is empty")
    p = h[h > 0] / total
    return float(-(p * np.log(p)).sum())


def spearman(a, b, pearson_only: bool = False) -> float:
    """Rank correlation (average ranks for ties).

    Returns ``nan`` for a constant series; aggregation helpers skip it.
    With ``pearson_only`` the raw values are correlated instead of ranks.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two series of equal length >= 2")
    if not pearson_only:
        a, b = rankdata(a), rankdata(b)
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return float("nan")
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


def score_correlation(scores_a, scores_b, pearson_only: bool = False) -> float:
    """Node-averaged correlation of two per-round score streams.

    Both inputs have shape ``(rounds, n)``.  Scores are first normalised to
    sum to one within each round, then correlated node by node across
    rounds; nodes with an undefined correlation are skipped.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    a = a / np.where(a.sum(axis=1, keepdims=True) == 0, 1.0, a.sum(axis=1, keepdims=True))
    b = b / np.where(b.sum(axis=1, keepdims=True) == 0, 1.0, b.sum(axis=1, keepdims=True))
    values = [spearman(a[:, i], b[:, i], pearson_only) for i in range(a.shape[1])]
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else float("nan")


def bootstrap_ci(samples: Sequence[float], level: float = 0.90, resamples: int = 10000, rng=None):
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    if resamples < 1000:
        raise ValueError("use at least 1000 resamples")
    rng = np.random.default_rng() if rng is None else rng
    idx = rng.integers(len(x), size=(resamples, len(x)))
    means = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    return float(low), float(high)


def format_cell(values, level=0.90, rng=None) -> str:
    values = list(values)
    mean = float(np.mean(values))
    if len(values) < 2:
        return f"{mean:.2f}"
    low, high = bootstrap_ci(values, level, rng=rng)
    return f"{mean:.2f} ({low:.2f}, {high:.2f})"


def aggregate_table(results: dict, level=0.90, rng=None) -> str:
    """CSV with one row per graph and one column per method.

    ``results`` maps ``(graph, method)`` to a list of per-seed values.
    """
    graphs = sorted({g for g, _ in results})
    methods = sorted({m for _, m in results})
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["graph", *methods])
    for g in graphs:
        w.writerow([g, *[format_cell(results[(g, m)], level, rng) if (g, m) in results else ""
                         for m in methods]])
    return buf.getvalue()
