"""Posterior summaries: co-clustering, point-estimate partition, entropy,
posterior mean weight tables, and generative diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .crm import AtomicMeasure, CrmSpec
from .errors import DataError
from .plackett_luce import PartialRanking, simulate_rankings


@dataclass
class McmcTrace:
    """In-memory view of a persisted sampler run.

    ``assignments`` is (N, L) for mixture runs and None for single-population
    runs, which instead carry per-iteration ``weights`` (N, K) and
    ``residuals`` (N,).
    """

    iterations: np.ndarray
    model: str
    seed: int
    config: dict = field(default_factory=dict)
    item_labels: list = field(default_factory=list)
    assignments: np.ndarray | None = None
    alpha: np.ndarray | None = None
    phi: np.ndarray | None = None
    gamma_dp: np.ndarray | None = None
    n_clusters: np.ndarray | None = None
    weights: np.ndarray | None = None
    residuals: np.ndarray | None = None

    def __post_init__(self):
        self.iterations = np.asarray(self.iterations)
        if len(self.iterations) == 0:
            raise DataError("trace contains no retained iterations")
        if np.any(np.diff(self.iterations) <= 0):
            raise DataError("trace iteration indices must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return len(self.iterations)


@dataclass(frozen=True)
class Partition:
    """Assignment of each ranking to a cluster, with dense labels."""

    labels: np.ndarray
    canonical: bool = False
    source_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    def canonicalize(self) -> "Partition":
        """Relabel clusters by decreasing size (ties by first appearance).
        Idempotent."""
        sizes = self.sizes()
        first = np.full(self.n_clusters, len(self.labels))
        for pos, lab in enumerate(self.labels):
            if pos < first[lab]:
                first[lab] = pos
        order = sorted(range(self.n_clusters), key=lambda j: (-sizes[j], first[j]))
        remap = np.empty(self.n_clusters, dtype=np.int64)
        remap[order] = np.arange(self.n_clusters)
        return Partition(remap[self.labels], canonical=True,
                         source_index=self.source_index)


def _assignment_matrix(trace) -> np.ndarray:
    if isinstance(trace, McmcTrace):
        if trace.assignments is None:
            raise DataError("trace carries no assignments (single-population run?)")
        return np.asarray(trace.assignments)
    return np.asarray(trace)


def coclustering_matrix(trace) -> np.ndarray:
    """Empirical pairwise same-cluster frequencies across samples.

    Symmetric with unit diagonal.  Accepts an McmcTrace or an (N, L)
    assignment matrix.
    """
    assign = _assignment_matrix(trace)
    if assign.ndim != 2 or assign.shape[0] < 1:
        raise DataError("need at least one assignment sample")
    n, L = assign.shape
    zeta = np.zeros((L, L))
    for row in assign:
        zeta += row[:, None] == row[None, :]
    return zeta / n


def _pair_counts(labels: np.ndarray) -> int:
    sizes = np.bincount(labels)
    return int(np.sum(sizes.astype(np.int64) ** 2))


def _dahl_scores_dense(assign: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    scores = np.empty(len(assign))
    for i, row in enumerate(assign):
        delta = (row[:, None] == row[None, :]).astype(float)
        scores[i] = np.sum((delta - zeta) ** 2)
    return scores


def _dahl_scores_streaming(assign: np.ndarray) -> np.ndarray:
    # Least-squares scores up to a constant, without materializing the
    # co-clustering matrix: score_i = S_i - (2/N) sum_i' |contingency(i,i')|^2
    # + const, where S_i counts same-cluster pairs of sample i.  O(N^2 L).
    n, L = assign.shape
    width = int(assign.max()) + 1
    s_own = np.array([_pair_counts(row) for row in assign], dtype=float)
    cross = np.zeros(n)
    row_len = width * width
    offsets = (np.arange(n) * row_len)[:, None]
    for i in range(n):
        joint = assign[i][None, :] * width + assign  # (n, L) cell codes
        counts = np.bincount((joint + offsets).ravel(), minlength=n * row_len)
        cross[i] = np.sum(counts.astype(np.int64) ** 2) / n
    return s_own - 2.0 * cross


def dahl_point_estimate(trace, zeta: np.ndarray | None = None,
                        dense_limit: int = 5000) -> Partition:
    """The sampled partition closest (least squares) to the co-clustering
    matrix; ties broken by earliest iteration.

    Below ``dense_limit`` rankings the matrix is formed explicitly (reusing
    ``zeta`` if provided); above it the scores are accumulated streaming
    from pairwise contingency tables.
    """
    assign = _assignment_matrix(trace)
    n, L = assign.shape
    if L <= dense_limit:
        if zeta is None:
            zeta = coclustering_matrix(assign)
        scores = _dahl_scores_dense(assign, zeta)
    else:
        scores = _dahl_scores_streaming(assign)
    best = int(np.argmin(scores))  # argmin takes the first minimum
    _, labels = np.unique(assign[best], return_inverse=True)
    return Partition(labels.astype(np.int64), source_index=best)


def normalized_entropy(weights, n_items: int) -> float:
    """Entropy of the K+1 normalized masses (K items plus the residual),
    scaled by log(K+1) so the value lies in [0, 1]."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_items + 1,):
        raise ValueError(f"expected {n_items + 1} masses (items plus residual), "
                         f"got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    nz = w[w > 0]
    h = float(-(nz * np.log(nz)).sum())
    return h / math.log(n_items + 1)


def posterior_mean_weights(snapshots: Sequence, partition: Partition) -> np.ndarray:
    """Average the per-cluster normalized weights over retained snapshots.

    ``snapshots`` is a sequence of (w, w_star) pairs with w of shape (J, K)
    and w_star of shape (J,), produced by a run conditioned on ``partition``.
    Returns (J, K+1) mean normalized weights, residual in the last column.
    """
    if not snapshots:
        raise ValueError("no retained snapshots")
    J = partition.n_clusters
    acc = None
    for w, w_star in snapshots:
        if w.shape[0] != J:
            raise ValueError("snapshot cluster count does not match the partition")
        stacked = np.concatenate([w, w_star[:, None]], axis=1)
        stacked = stacked / stacked.sum(axis=1, keepdims=True)
        acc = stacked if acc is None else acc + stacked
    return acc / len(snapshots)


def weight_table(mean_weights: np.ndarray, cluster: int,
                 item_labels: Sequence) -> list:
    """Rows (label, weight) for one cluster, sorted by weight descending;
    the residual aggregate is listed last as '<unobserved>'."""
    row = mean_weights[cluster]
    order = np.argsort(-row[:-1], kind="stable")
    rows = [(item_labels[k], float(row[k])) for k in order]
    rows.append(("<unobserved>", float(row[-1])))
    return rows


def mean_items_curve(spec: CrmSpec, m: int, l_max: int, replicates: int,
                     rng) -> dict:
    """Monte Carlo estimate of the expected number of distinct items seen in
    the first L lists, for L = 1..l_max.

    Gamma-family measures are simulated lazily (exact); other families use a
    fine default truncation.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    counts = np.empty((replicates, l_max))
    for r in range(replicates):
        if spec.is_gamma_type:
            measure = AtomicMeasure({}, float(rng.gamma(spec.alpha, 1.0 / spec.tau)))
            conc = spec.alpha
        else:
            from .crm import TruncationRule, default_threshold, simulate_crm
            measure = simulate_crm(spec, TruncationRule.threshold(
                default_threshold(spec)), rng)
            conc = None
        rankings, _ = simulate_rankings(measure, l_max, m, rng,
                                        tail_concentration=conc)
        seen: set = set()
        for i, ranking in enumerate(rankings):
            seen.update(ranking.items)
            counts[r, i] = len(seen)
    mean = counts.mean(axis=0)
    stderr = counts.std(axis=0, ddof=1) / math.sqrt(replicates) if replicates > 1 \
        else np.zeros(l_max)
    return {"L": np.arange(1, l_max + 1), "mean": mean, "stderr": stderr}


def ranking_heatmap_export(rankings: Sequence[PartialRanking]) -> tuple:
    """Matrix view of lists for plotting: one row per list, one column per
    item in order of first appearance, cells holding the rank (NaN if the
    item is absent from the list).

    Returns (matrix, column item ids).
    """
    order: list = []
    seen: set = set()
    for ranking in rankings:
        for item in ranking:
            if item not in seen:
                seen.add(item)
                order.append(item)
    col = {item: j for j, item in enumerate(order)}
    mat = np.full((len(rankings), len(order)), np.nan)
    for i, ranking in enumerate(rankings):
        for pos, item in enumerate(ranking, start=1):
            mat[i, col[item]] = pos
    return mat, order
