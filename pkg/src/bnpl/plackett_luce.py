"""Partial top-m rankings and their sequential-choice likelihoods.

A ranking is generated by a race: every atom of a measure gets an
independent exponential clock with rate equal to its mass, and the list
records the first m arrivals.  Equivalently, items are drawn one by one
with probability proportional to the mass still in play.  The inter-arrival
durations between successive picks are the latent variables that make the
likelihood conjugate to gamma-distributed masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .crm import AtomicMeasure, CrmSpec, ItemRegistry, laplace_exponent, log_tilted_moment
from .errors import DataError


@dataclass(frozen=True)
class PartialRanking:
    """Ordered, duplicate-free list of item ids (a top-m list)."""

    items: tuple

    def __post_init__(self):
        items = tuple(int(i) for i in self.items)
        object.__setattr__(self, "items", items)
        if len(items) < 1:
            raise ValueError("a ranking must contain at least one item")
        if len(set(items)) != len(items):
            raise ValueError(f"ranking contains duplicate items: {items}")

    @property
    def m(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


class RankingDataset:
    """A collection of partial rankings over a shared item registry.

    Precomputes the dense views used by the samplers: per-item occurrence
    counts ``n``, zero-padded ``items_padded`` (L, m_max) with ``mask``, and
    flat occurrence triples (list index, position, item id).
    """

    def __init__(self, rankings: Sequence[PartialRanking], registry: ItemRegistry):
        self.rankings = list(rankings)
        self.registry = registry
        if not self.rankings:
            raise DataError("dataset contains no rankings")
        self.L = len(self.rankings)
        self.K = len(registry)
        self.lengths = np.array([r.m for r in self.rankings], dtype=np.int64)
        self.m_max = int(self.lengths.max())

        self.items_padded = np.zeros((self.L, self.m_max), dtype=np.int64)
        self.mask = np.zeros((self.L, self.m_max), dtype=bool)
        for i, r in enumerate(self.rankings):
            self.items_padded[i, : r.m] = r.items
            self.mask[i, : r.m] = True

        self.occ_list = np.repeat(np.arange(self.L), self.lengths)
        self.occ_pos = np.concatenate([np.arange(m) for m in self.lengths])
        self.occ_item = self.items_padded[self.mask]

        self.n = np.bincount(self.occ_item, minlength=self.K).astype(np.int64)
        bad = [registry.label_of(k) for k in range(self.K) if self.n[k] == 0]
        if bad:
            raise DataError(f"registered items never occur in the data: {bad}")

    @classmethod
    def from_lists(cls, lists: Iterable[Sequence], registry: ItemRegistry | None = None):
        """Build a dataset from label sequences, registering labels in
        first-appearance order."""
        registry = registry if registry is not None else ItemRegistry()
        rankings = []
        for row in lists:
            if len(set(row)) != len(row):
                raise DataError(f"list contains a repeated item: {row!r}")
            rankings.append(PartialRanking(tuple(registry.add(x) for x in row)))
        return cls(rankings, registry)

    def total_occurrences(self) -> int:
        return int(self.lengths.sum())


@dataclass
class LatentZ:
    """Inter-arrival durations, one per rank position, zero-padded to m_max."""

    values: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        if self.values.ndim != 2 or self.values.shape[0] != self.lengths.shape[0]:
            raise ValueError("values must be (L, m_max) matching lengths")
        for i, m in enumerate(self.lengths):
            if np.any(self.values[i, :m] <= 0):
                raise ValueError(f"latent durations must be positive (list {i})")
            if np.any(self.values[i, m:] != 0):
                raise ValueError(f"padding must be zero (list {i})")

    @classmethod
    def from_lists(cls, rows: Sequence[Sequence[float]]) -> "LatentZ":
        lengths = np.array([len(r) for r in rows], dtype=np.int64)
        vals = np.zeros((len(rows), int(lengths.max())), dtype=float)
        for i, r in enumerate(rows):
            vals[i, : len(r)] = r
        return cls(vals, lengths)

    def total(self) -> float:
        return float(self.values.sum())


def occurrence_indicator(ranking: PartialRanking, position: int, item: int) -> int:
    """1 unless ``item`` occupies a rank strictly before ``position`` (1-based)."""
    if not 1 <= position <= ranking.m:
        raise ValueError(f"position must be in 1..{ranking.m}, got {position}")
    return 0 if item in ranking.items[: position - 1] else 1


def delta_weighted_sums(dataset: RankingDataset, z_values: np.ndarray) -> np.ndarray:
    """Per-item sums of durations over the positions where the item is still
    in play: s_k = sum over (list, position) with indicator 1 of Z.

    For an item ranked at position p of a list, the indicator is 1 exactly
    for positions 1..p, so its contribution is the inclusive prefix sum up
    to p; items absent from a list contribute that list's full duration.
    """
    prefix = np.cumsum(z_values, axis=1)
    per_list = z_values.sum(axis=1)
    s = np.full(dataset.K, per_list.sum())
    np.subtract.at(s, dataset.occ_item,
                   per_list[dataset.occ_list] - prefix[dataset.occ_list, dataset.occ_pos])
    return s


def pl_log_probability(measure: AtomicMeasure, ranking: PartialRanking) -> float:
    """Log probability of observing ``ranking`` as the first m arrivals.

    Invariant to rescaling all masses (including the residual) by any
    positive constant.
    """
    total = measure.total()
    out = 0.0
    used = 0.0
    for item in ranking:
        try:
            w = measure.atoms[item]
        except KeyError:
            raise ValueError(f"ranked item {item} has no atom in the measure") from None
        denom = total - used
        if denom <= 0:
            raise ValueError("ranking exhausts the measure: zero denominator")
        out += math.log(w) - math.log(denom)
        used += w
    return out


def latent_z_rate(measure: AtomicMeasure, ranking: PartialRanking, position: int) -> float:
    """Exponential rate of the waiting time before the ``position``-th arrival
    (1-based): total mass minus the masses already ranked before it."""
    if position < 1 or position > ranking.m + 1:
        raise ValueError(f"position must be in 1..{ranking.m + 1}, got {position}")
    used = sum(measure.atoms[i] for i in ranking.items[: position - 1])
    rate = measure.total() - used
    if rate <= 0:
        raise ValueError(f"nonpositive rate {rate} at position {position}: "
                         "inconsistent measure/ranking state")
    return float(rate)


class _Race:
    # Mutable sequential sampler over a measure; splits the residual lazily
    # into fresh atoms using Beta(1, conc) size-biased fractions (exact when
    # the residual is the full tail of a gamma-type measure).
    def __init__(self, measure: AtomicMeasure, rng, tail_concentration):
        self.ids = sorted(measure.atoms)
        self.masses = [measure.atoms[i] for i in self.ids]
        self.residual = measure.residual_mass
        self.rng = rng
        self.conc = tail_concentration
        self.next_id = max(self.ids) + 1 if self.ids else 0

    def draw_ranking(self, m: int) -> PartialRanking:
        if m < 1:
            raise ValueError("m must be >= 1")
        masses = np.array(self.masses, dtype=float)
        ids = list(self.ids)
        alive = np.ones(len(ids), dtype=bool)
        picks = []
        for _ in range(m):
            live = masses * alive
            total = live.sum() + self.residual
            if total <= 0:
                raise ValueError("measure exhausted before m arrivals")
            x = self.rng.random() * total
            cum = np.cumsum(live)
            j = int(np.searchsorted(cum, x, side="right"))
            if j < len(ids):
                picks.append(ids[j])
                alive[j] = False
            else:
                if self.conc is None:
                    raise ValueError("the residual won a race position but no tail "
                                     "concentration was given to instantiate a fresh item")
                v = self.rng.beta(1.0, self.conc)
                w_new = self.residual * v
                self.residual *= 1.0 - v
                new_id = self.next_id
                self.next_id += 1
                ids.append(new_id)
                masses = np.append(masses, w_new)
                alive = np.append(alive, False)
                picks.append(new_id)
        # Persist fresh atoms for subsequent draws.
        self.ids = ids
        self.masses = list(masses)
        return PartialRanking(tuple(picks))

    def measure(self) -> AtomicMeasure:
        return AtomicMeasure({i: w for i, w in zip(self.ids, self.masses)}, self.residual)


def sample_top_m(measure: AtomicMeasure, m: int, rng,
                 tail_concentration: float | None = None) -> PartialRanking:
    """Draw one top-m list from the race over ``measure``.

    If the residual wins a position, a fresh item id is instantiated by
    splitting off a size-biased fraction of the residual; this requires
    ``tail_concentration`` (the concentration of the tail's law) and is
    exact for gamma-type measures whose residual is the whole tail.
    """
    return _Race(measure, rng, tail_concentration).draw_ranking(m)


def simulate_rankings(measure: AtomicMeasure, n_lists: int, m, rng,
                      tail_concentration: float | None = None):
    """Draw ``n_lists`` top-m lists from one evolving measure.

    Fresh atoms instantiated from the residual persist across lists, so
    repeat appearances of new items are possible.  ``m`` may be an int or a
    per-list sequence of lengths.  Returns ``(rankings, final_measure)``.
    """
    if np.isscalar(m):
        m = [int(m)] * n_lists
    if len(m) != n_lists:
        raise ValueError("length of m does not match n_lists")
    race = _Race(measure, rng, tail_concentration)
    rankings = [race.draw_ranking(mi) for mi in m]
    return rankings, race.measure()


def joint_log_density(dataset: RankingDataset, z: LatentZ,
                      measure: AtomicMeasure) -> float:
    """Log density of the rankings and their latent durations given a measure.

    Equals ``-total * sum(Z) + sum_k [n_k log w_k - w_k (s_k - sum(Z))]``
    where s_k are the indicator-weighted duration sums.  Location densities
    of the atoms are excluded throughout the package.
    """
    try:
        w = np.array([measure.atoms[k] for k in range(dataset.K)], dtype=float)
    except KeyError as exc:
        raise ValueError(f"measure is missing an atom for item {exc.args[0]}") from None
    total = measure.total()
    s = delta_weighted_sums(dataset, z.values)
    z_total = z.total()
    return float(-total * z_total + np.sum(dataset.n * np.log(w) - w * (s - z_total)))


def marginal_log_likelihood(dataset: RankingDataset, z: LatentZ, spec: CrmSpec) -> float:
    """Log marginal density of (rankings, durations) with the measure
    integrated out: ``-psi(sum Z) + sum_k log kappa(n_k, s_k)``."""
    s = delta_weighted_sums(dataset, z.values)
    z_total = z.total()
    return float(-laplace_exponent(spec, z_total)
                 + np.sum(log_tilted_moment(spec, dataset.n, s)))
