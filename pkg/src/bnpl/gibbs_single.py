"""Gibbs samplers for the single-population ranking model.

Three samplers share the latent-duration augmentation:

* ``gibbs_sweep_single`` -- the nonparametric gamma-process sampler, fully
  conjugate (durations, observed-item masses, the aggregate unobserved mass,
  and optionally the concentration).
* ``finite_gibbs_sweep`` -- the finite-universe baseline with M items whose
  M -> infinity limit recovers the nonparametric updates; used as an oracle.
* ``gen_crm_sweep`` -- the generalized-gamma variant with the unobserved
  mass marginalized out and durations updated by random-walk moves on the
  log scale.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .crm import AtomicMeasure, CrmSpec, Family
from .plackett_luce import RankingDataset, delta_weighted_sums


@dataclass(frozen=True)
class AlphaPrior:
    """Gamma(a, b) prior on the concentration; (0, 0) encodes the improper
    1/alpha prior (valid whenever at least one item has been observed)."""

    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("prior parameters must be nonnegative")


@dataclass
class SingleModelState:
    """Latent state: observed-item masses, aggregate unobserved mass,
    per-position durations, and the concentration."""

    weights: np.ndarray
    residual: float
    z: np.ndarray
    alpha: float
    tau: float
    iteration: int = 0

    def total_mass(self) -> float:
        return float(self.weights.sum() + self.residual)

    def measure(self) -> AtomicMeasure:
        return AtomicMeasure({k: float(w) for k, w in enumerate(self.weights)},
                             self.residual)


def cond_weight_params(n_k: int, s_k: float, tau: float, sigma: float = 0.0):
    """Gamma(shape, rate) parameters of an observed item's mass given the
    durations: shape ``n_k - sigma``, rate ``tau + s_k``.

    ``s_k`` is the item's indicator-weighted duration sum.  ``sigma = 0``
    gives the gamma-process update Gamma(n_k, tau + s_k).
    """
    if n_k < 1:
        raise ValueError("n_k must be >= 1: unobserved items have no atom")
    if s_k < 0:
        raise ValueError("s_k must be nonnegative")
    return (n_k - sigma, tau + s_k)


def cond_residual_params(spec: CrmSpec, sum_z: float):
    """Gamma(alpha, tau + sum_z) parameters of the aggregate unobserved mass.

    Only available for the gamma family; for generalized gamma the
    unobserved total is not gamma-distributed and must be marginalized
    (see ``gen_crm_sweep``).
    """
    if not spec.is_gamma_type:
        raise ValueError("residual update is gamma only for the gamma family; "
                         "use the marginalized sweep for generalized gamma")
    if sum_z < 0:
        raise ValueError("sum_z must be nonnegative")
    return (spec.alpha, spec.tau + sum_z)


def cond_alpha_params(prior: AlphaPrior, n_items: int, sum_z: float, tau: float):
    """Gamma parameters of the concentration given durations, with the
    masses marginalized out: Gamma(a + K, b + log(1 + sum_z / tau))."""
    shape = prior.a + n_items
    if shape <= 0:
        raise ValueError("posterior shape a + K must be positive")
    return (shape, prior.b + math.log1p(sum_z / tau))


def draw_durations(weights: np.ndarray, residual: float,
                   dataset: RankingDataset, rng) -> np.ndarray:
    """Sample all inter-arrival durations from their exponential
    conditionals given the masses: rate = remaining mass at each position."""
    sel = weights[dataset.items_padded] * dataset.mask
    prefix_excl = np.cumsum(sel, axis=1) - sel
    rates = (weights.sum() + residual) - prefix_excl
    z = rng.standard_exponential(sel.shape) / rates
    z *= dataset.mask
    return z


def init_single_state(dataset: RankingDataset, alpha: float, tau: float,
                      rng) -> SingleModelState:
    """Unit masses for observed items, mean-scaled residual, durations from
    their conditional.  The first sweep forgets the mass initialization."""
    weights = np.ones(dataset.K)
    residual = alpha / tau
    z = draw_durations(weights, residual, dataset, rng)
    return SingleModelState(weights, residual, z, alpha, tau)


def gibbs_sweep_single(state: SingleModelState, dataset: RankingDataset,
                       spec: CrmSpec, prior: AlphaPrior | None, rng) -> SingleModelState:
    """One full conjugate sweep, in fixed order: all durations, all
    observed-item masses, then (if ``prior`` is given) the concentration
    immediately followed by the unobserved mass.

    The concentration conditional is derived with the unobserved mass
    marginalized out, so the two updates are fused here and not exposed
    separately.  Mutates and returns ``state``; deterministic given the
    generator state.
    """
    if not spec.is_gamma_type:
        raise ValueError("gibbs_sweep_single requires the gamma family")
    tau = state.tau
    state.z = draw_durations(state.weights, state.residual, dataset, rng)
    s = delta_weighted_sums(dataset, state.z)
    state.weights = rng.gamma(dataset.n.astype(float), 1.0 / (tau + s))
    sum_z = float(state.z.sum())
    if prior is not None:
        shape, rate = cond_alpha_params(prior, dataset.K, sum_z, tau)
        state.alpha = float(rng.gamma(shape, 1.0 / rate))
    shape, rate = cond_residual_params(
        dataclasses.replace(spec, alpha=state.alpha), sum_z)
    state.residual = float(rng.gamma(shape, 1.0 / rate))
    state.iteration += 1
    return state


@dataclass
class FiniteModelState:
    """State of the finite-universe baseline: observed-item masses plus the
    aggregated mass of the M - K never-observed items."""

    weights: np.ndarray
    unobserved_total: float
    n_items: int
    z: np.ndarray
    iteration: int = 0

    def total_mass(self) -> float:
        return float(self.weights.sum() + self.unobserved_total)


def init_finite_state(dataset: RankingDataset, n_items: int, alpha: float,
                      tau: float, rng) -> FiniteModelState:
    if n_items < dataset.K:
        raise ValueError(f"finite universe M={n_items} smaller than the "
                         f"{dataset.K} observed items")
    weights = np.ones(dataset.K)
    unobs = alpha * (n_items - dataset.K) / n_items / tau
    z = draw_durations(weights, unobs, dataset, rng)
    return FiniteModelState(weights, unobs, n_items, z)


def finite_gibbs_sweep(state: FiniteModelState, dataset: RankingDataset,
                       alpha: float, tau: float, rng) -> FiniteModelState:
    """One sweep of the finite-M sampler: Gamma(alpha/M + n_k, tau + s_k)
    per item.  Items never observed keep indicator 1 everywhere, so their
    aggregate updates as Gamma(alpha (M-K)/M, tau + sum Z), which converges
    to the nonparametric residual update as M grows."""
    M, K = state.n_items, dataset.K
    if M < K:
        raise ValueError("finite universe smaller than observed item count")
    state.z = draw_durations(state.weights, state.unobserved_total, dataset, rng)
    s = delta_weighted_sums(dataset, state.z)
    state.weights = rng.gamma(alpha / M + dataset.n, 1.0 / (tau + s))
    state.unobserved_total = float(
        rng.gamma(alpha * (M - K) / M, 1.0 / (tau + state.z.sum())))
    state.iteration += 1
    return state


@dataclass
class GenCrmState(SingleModelState):
    """Adds the random-walk bookkeeping for the marginalized sampler."""

    mh_log_step: float = math.log(0.5)
    adapting: bool = True
    adapt_count: int = 0


def init_gen_crm_state(dataset: RankingDataset, spec: CrmSpec, rng) -> GenCrmState:
    base = init_single_state(dataset, spec.alpha, spec.tau, rng)
    return GenCrmState(base.weights, 0.0, base.z, spec.alpha, spec.tau)


def gen_crm_sweep(state: GenCrmState, dataset: RankingDataset, spec: CrmSpec,
                  rng) -> GenCrmState:
    """One sweep of the generalized-gamma sampler.

    Durations are updated first by per-coordinate random-walk moves on
    log Z, targeting the joint with both the observed masses and the
    unobserved total marginalized out:

        exp(-psi(sum Z)) * prod_k kappa(n_k, s_k) * prod Jacobians.

    Observed masses are then drawn from Gamma(n_k - sigma, tau + s_k).
    The proposal scale adapts toward 0.44 acceptance while
    ``state.adapting`` is set, and is frozen otherwise.
    """
    if spec.family != Family.GENERALIZED_GAMMA:
        raise ValueError("gen_crm_sweep requires the generalized gamma family")
    tau, sig, alpha = spec.tau, spec.sigma, spec.alpha
    n = dataset.n.astype(float)
    step = math.exp(state.mh_log_step)

    z = state.z
    s = delta_weighted_sums(dataset, z)
    total_z = float(z.sum())

    def log_psi_term(tz):
        return -(alpha / sig) * ((tau + tz) ** sig - tau ** sig) if sig > 0 \
            else -alpha * math.log1p(tz / tau)

    kappa_term = -np.sum((n - sig) * np.log(tau + s))
    accepted = 0
    proposed = 0
    for li in range(dataset.L):
        row_items = dataset.items_padded[li]
        for pos in range(int(dataset.lengths[li])):
            cur = z[li, pos]
            theta_new = math.log(cur) + step * rng.standard_normal()
            new = math.exp(theta_new)
            dz = new - cur
            s_prop = s + dz
            preceding = row_items[:pos]
            s_prop[preceding] -= dz
            kappa_prop = -np.sum((n - sig) * np.log(tau + s_prop))
            delta = (log_psi_term(total_z + dz) + kappa_prop + theta_new) \
                - (log_psi_term(total_z) + kappa_term + math.log(cur))
            proposed += 1
            if math.log(rng.random()) < delta:
                z[li, pos] = new
                s = s_prop
                total_z += dz
                kappa_term = kappa_prop
                accepted += 1
    if state.adapting and proposed:
        rate = accepted / proposed
        state.adapt_count += 1
        state.mh_log_step += (rate - 0.44) / (1 + state.adapt_count) ** 0.6

    state.weights = rng.gamma(n - sig, 1.0 / (tau + s))
    state.residual = 0.0
    state.iteration += 1
    return state
