"""Dirichlet process mixture of nonparametric ranking components.

Clusters share a common pool of items through a root measure: each cluster's
measure is tied to the root by Poisson counts (the same coupling as
``crm.pitt_walker_forward``), which preserves each cluster's gamma-process
marginal while letting masses differ across clusters.  Inference is a
partially collapsed Gibbs sampler whose step order matters; ``mixture_sweep``
executes the steps in the one order that is known to be valid:

  1a. resample total masses from the prior hierarchy (scale non-identifiable),
  1b. coupling counts u given masses,
  2a-d. concentration alpha (root and cluster residuals marginalized), then
        root residual, residual counts, cluster residuals,
  3. root atom masses given counts,
  4. latent durations,
  5. cluster atom masses,
  6. slice-sampled stick weights and assignments,
  7. mixture concentration gamma,
  8. coupling strength phi by random-walk move with counts marginalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ive
from scipy.stats import poisson as _poisson

from .plackett_luce import RankingDataset


@dataclass(frozen=True)
class MixturePriors:
    """Hyperpriors and sampler knobs for the mixture model.

    ``(0, 0)`` pairs encode the improper 1/x priors used by default for the
    concentration ``alpha``, the mixture concentration ``gamma_dp`` and the
    coupling strength ``phi``.  ``u_sampler`` selects Metropolis ("mh",
    default) or exact truncated-summation ("exact") updates for the
    coupling counts.
    """

    alpha: tuple = (0.0, 0.0)
    gamma_dp: tuple = (0.0, 0.0)
    phi: tuple = (0.0, 0.0)
    phi_step: float = 0.2
    u_sampler: str = "mh"

    def __post_init__(self):
        for name in ("alpha", "gamma_dp", "phi"):
            a, b = getattr(self, name)
            if a < 0 or b < 0:
                raise ValueError(f"{name} prior parameters must be nonnegative")
        if self.phi_step < 0:
            raise ValueError("phi_step must be nonnegative")
        if self.u_sampler not in ("mh", "exact"):
            raise ValueError("u_sampler must be 'mh' or 'exact'")


@dataclass
class MixtureState:
    """Full latent state of the mixture sampler.

    Arrays are indexed by dense cluster labels 0..J-1 and registry item ids
    0..K-1.  Exact zeros in ``w`` and ``w0`` are meaningful: an atom exists
    in a cluster iff it was observed there or carries a positive count.
    """

    c: np.ndarray            # (L,) cluster assignment per ranking
    pi: np.ndarray           # (J,) stick weights of instantiated clusters
    pi_star: float           # leftover stick mass
    w0: np.ndarray           # (K,) root masses (exact zeros allowed)
    w0_star: float           # root residual mass
    u: np.ndarray            # (J, K) coupling counts
    u_star: np.ndarray       # (J,) residual coupling counts
    w: np.ndarray            # (J, K) cluster masses (exact zeros allowed)
    w_star: np.ndarray       # (J,) cluster residual masses
    z: np.ndarray            # (L, m_max) latent durations, zero padded
    alpha: float
    phi: float
    gamma_dp: float
    tau: float = 1.0
    omega: np.ndarray | None = None
    iteration: int = 0
    n_jk: np.ndarray | None = None       # cached per-cluster occurrence counts
    cluster_z: np.ndarray | None = None  # cached per-cluster duration sums
    phi_log_step: float = math.log(0.2)
    phi_adapting: bool = True
    phi_adapt_count: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.w_star)

    def cluster_totals(self) -> np.ndarray:
        return self.w.sum(axis=1) + self.w_star

    def root_total(self) -> float:
        return float(self.w0.sum() + self.w0_star)


# ---------------------------------------------------------------------------
# cluster-restricted statistics


def cluster_counts(dataset: RankingDataset, c: np.ndarray, n_clusters: int) -> np.ndarray:
    """Occurrence counts n_jk of each item within each cluster."""
    n = np.zeros((n_clusters, dataset.K), dtype=np.int64)
    np.add.at(n, (c[dataset.occ_list], dataset.occ_item), 1)
    return n


def cluster_z_sums(c: np.ndarray, z: np.ndarray, n_clusters: int) -> np.ndarray:
    """Total duration per cluster."""
    return np.bincount(c, weights=z.sum(axis=1), minlength=n_clusters)


def cluster_delta_sums(dataset: RankingDataset, c: np.ndarray, z: np.ndarray,
                       n_clusters: int) -> np.ndarray:
    """Indicator-weighted duration sums s_jk restricted to each cluster."""
    prefix = np.cumsum(z, axis=1)
    per_list = z.sum(axis=1)
    s = np.repeat(cluster_z_sums(c, z, n_clusters)[:, None], dataset.K, axis=1)
    np.subtract.at(s, (c[dataset.occ_list], dataset.occ_item),
                   per_list[dataset.occ_list] - prefix[dataset.occ_list, dataset.occ_pos])
    return s


# ---------------------------------------------------------------------------
# conditional parameter computations (pure)


def cond_cluster_weight_params(n_jk: int, u_jk: int, tau: float, phi: float,
                               s_jk: float):
    """Gamma(shape, rate) for a cluster atom mass given counts and durations.

    Shape ``n_jk + u_jk`` and rate ``tau + phi + s_jk``; a zero shape means
    the mass is exactly zero (the atom is absent from the cluster).
    """
    if s_jk < 0:
        raise ValueError("s_jk must be nonnegative")
    return (n_jk + u_jk, tau + phi + s_jk)


def cond_cluster_residual_params(alpha: float, u_j_star: int, tau: float,
                                 phi: float, zsum_j: float):
    """Gamma(alpha + u_j*, tau + phi + ztilde_j) for a cluster's residual."""
    return (alpha + u_j_star, tau + phi + zsum_j)


def cond_root_weight_params(sum_u: int, n_clusters: int, phi: float, tau: float,
                            alpha: float | None = None):
    """Gamma(shape, rate) for a root mass given the coupling counts.

    Atom case (``alpha`` omitted): shape ``sum_j u_jk``, degenerate at zero
    when no cluster carries a count.  Residual case (``alpha`` given):
    shape ``alpha + sum_j u_j*``.  The rate is ``J phi + tau`` either way.
    """
    if sum_u < 0:
        raise ValueError("counts must be nonnegative")
    shape = float(sum_u) if alpha is None else alpha + sum_u
    return (shape, n_clusters * phi + tau)


def mixture_x0_y0(cluster_z: np.ndarray, phi: float):
    """Auxiliary sums for the collapsed concentration update (tau = 1):
    x0 = sum_j phi*zt_j / (1 + phi + zt_j), y0 = sum_j log((1+phi+zt_j)/(1+phi))."""
    zt = np.asarray(cluster_z, dtype=float)
    x0 = float(np.sum(phi * zt / (1.0 + phi + zt)))
    y0 = float(np.sum(np.log1p(zt / (1.0 + phi))))
    return x0, y0


def cond_alpha_mixture_params(prior: tuple, n_items: int, cluster_z: np.ndarray,
                              tau: float, phi: float, strict_tau: bool = True):
    """Gamma(a + K, b + y0 + log(1 + x0)) for the concentration given
    durations and assignments, with all masses and counts marginalized.

    The collapsed form is only available for tau = 1; with ``strict_tau``
    (the default) any other tau is rejected rather than extrapolated.
    """
    if strict_tau and tau != 1.0:
        raise ValueError("the collapsed concentration update requires tau = 1; "
                         "set strict_tau=False to apply the tau=1 form anyway")
    a, b = prior
    shape = a + n_items
    if shape <= 0:
        raise ValueError("posterior shape a + K must be positive")
    x0, y0 = mixture_x0_y0(cluster_z, phi)
    return (shape, b + y0 + math.log1p(x0))


# ---------------------------------------------------------------------------
# mass transition densities (counts marginalized)


def log_bessel_i(nu, x):
    """log I_nu(x) for x >= 0, switching to the leading series term where the
    scaled Bessel function underflows."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0, np.log(ive(nu, np.maximum(x, 1e-300))) + x, -np.inf)
        small = np.isneginf(out) & (x > 0)
    if np.any(small):
        xs = np.where(small, x, 1.0)
        series = (nu * (np.log(xs) - math.log(2.0)) - gammaln(nu + 1.0)
                  + np.log1p(xs * xs / (4.0 * (nu + 1.0))))
        out = np.where(small, series, out)
    return out if out.ndim else float(out)


def transition_log_density_w(w_j, w_0, tau: float, phi: float,
                             alpha: float | None = None, kind: str = "atom"):
    """Log density of a cluster mass given the matching root mass, with the
    Poisson coupling count marginalized out.

    Atom case: a point mass exp(-phi w_0) at w_j = 0 plus a continuous
    component on w_j > 0; passing ``w_j = 0`` returns the log point mass,
    ``w_j > 0`` the continuous log density.  Residual case (``kind =
    "residual"``, requires ``alpha``): fully continuous with Bessel order
    alpha - 1.  Vectorized over broadcastable ``w_j``, ``w_0``.
    """
    w_j = np.asarray(w_j, dtype=float)
    w_0 = np.asarray(w_0, dtype=float)
    if np.any(w_j < 0):
        raise ValueError("w_j must be nonnegative")
    rate = tau + phi
    if kind == "atom":
        x = 2.0 * np.sqrt(w_j * phi * w_0 * rate)
        with np.errstate(divide="ignore", invalid="ignore"):
            cont = (log_bessel_i(1.0, x)
                    + 0.5 * (np.log(phi * rate * w_0) - np.log(w_j))
                    - phi * (w_j + w_0) - tau * w_j)
            cont = np.where(w_0 > 0, cont, -np.inf)
        out = np.where(w_j > 0, cont, -phi * w_0)
    elif kind == "residual":
        if alpha is None or alpha <= 0:
            raise ValueError("residual transition density requires alpha > 0")
        if np.any(w_j <= 0):
            raise ValueError("residual masses are strictly positive")
        # w_0 -> 0 collapses to the count-zero branch, a plain gamma density.
        w0_safe = np.where(w_0 > 0, w_0, 1.0)
        x = 2.0 * np.sqrt(w_j * phi * w0_safe * rate)
        cont = (log_bessel_i(alpha - 1.0, x)
                + 0.5 * (alpha + 1.0) * math.log(rate)
                + 0.5 * (alpha - 1.0) * (np.log(w_j) - np.log(phi * w0_safe))
                - phi * (w_j + w0_safe) - tau * w_j)
        zero = (alpha * math.log(rate) + (alpha - 1.0) * np.log(w_j)
                - rate * w_j - gammaln(alpha))
        out = np.where(w_0 > 0, cont, zero)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# coupling count updates


def _zt_poisson(rng, mu: np.ndarray) -> np.ndarray:
    """Zero-truncated Poisson draws via inverse cdf on (e^{-mu}, 1)."""
    lo = np.exp(-mu)
    q = lo + (1.0 - lo) * rng.random(mu.shape)
    return _poisson.ppf(q, mu).astype(np.int64)


def _exact_count_draw(rng, log_term, u_start):
    # Draw from p(u) propto exp(log_term(u)), u >= u_start, by summing terms
    # until the tail is negligible past the mode.
    terms = []
    u = u_start
    best = -np.inf
    while True:
        t = log_term(u)
        terms.append(t)
        best = max(best, t)
        if t < best - 40.0 and u > u_start + 2:
            break
        u += 1
        if u - u_start > 100000:
            raise RuntimeError("count conditional failed to converge")
    logp = np.array(terms)
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return u_start + int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))


def cond_u_given_w(kind: str, w_0: float, w_j: float, u: int, tau: float,
                   phi: float, alpha: float, rng, method: str = "mh") -> int:
    """One update of a single coupling count given the two masses.

    Atom kind, ``w_j > 0``: Metropolis with a zero-truncated Poisson(phi w_0)
    proposal accepted on the gamma-density ratio, or an exact draw from the
    normalized product when ``method="exact"``.  Atom kind, ``w_j = 0``: the
    exact two-point law P(u=0) = 1 / (1 + phi w_0 (tau+phi)).  Residual
    kind: Poisson(phi w_0) proposal with a Gamma(alpha + u, tau + phi)
    density ratio (or the exact summation).
    """
    rate = tau + phi
    if kind == "atom":
        if w_j == 0:
            p1 = phi * w_0 * rate
            return int(rng.random() * (1.0 + p1) < p1)
        if u < 1:
            raise ValueError("a positive mass requires a positive count")
        mu = phi * w_0
        if mu <= 0:
            raise ValueError("positive cluster mass with zero root mass is "
                             "outside the model's support")
        if method == "exact":
            return _exact_count_draw(
                rng, lambda k: k * math.log(mu * rate * w_j) - gammaln(k + 1) - gammaln(k), 1)
        prop = int(_zt_poisson(rng, np.array([mu]))[0])
        logr = (prop - u) * math.log(rate * w_j) - gammaln(prop) + gammaln(u)
        return prop if math.log(rng.random()) < logr else u
    if kind == "residual":
        mu = phi * w_0
        if method == "exact":
            return _exact_count_draw(
                rng, lambda k: (k * math.log(mu) if k else 0.0) - gammaln(k + 1)
                + (alpha + k) * math.log(rate) + (alpha + k - 1) * math.log(w_j)
                - gammaln(alpha + k), 0) if mu > 0 else 0
        prop = int(rng.poisson(mu))
        logr = (prop - u) * math.log(rate * w_j) - gammaln(alpha + prop) + gammaln(alpha + u)
        return prop if math.log(rng.random()) < logr else u
    raise ValueError(f"unknown kind {kind!r}")


def joint_uw_log_accept(w_new: float, w_old: float, zsum_j: float) -> float:
    """Log acceptance ratio of the joint (count, mass) refresh proposed from
    the coupling prior: only the duration likelihood factor survives."""
    return -(w_new - w_old) * zsum_j


def _update_u_block(state: MixtureState, dataset: RankingDataset, rng,
                    method: str) -> None:
    # (i) counts for atoms with positive mass, (ii) exact two-point update
    # where the mass is zero, (iii) joint (u, w) refresh for items unobserved
    # in the cluster (restores irreducibility), (iv) residual counts.
    J, K = state.u.shape
    phi, tau, alpha = state.phi, state.tau, state.alpha
    rate = tau + phi
    w0b = np.broadcast_to(state.w0, (J, K))
    zt = state.cluster_z

    pos = state.w > 0
    if np.any(pos):
        mu = phi * w0b[pos]
        if np.any(mu <= 0):
            raise RuntimeError("support invariant violated: positive cluster "
                               "mass above a zero root mass")
        cur = state.u[pos]
        wv = state.w[pos]
        if method == "exact":
            prop = np.array([
                _exact_count_draw(rng, lambda k, m=m, x=x: k * math.log(m * rate * x)
                                  - gammaln(k + 1) - gammaln(k), 1)
                for m, x in zip(mu, wv)], dtype=np.int64)
            state.u[pos] = prop
        else:
            prop = _zt_poisson(rng, mu)
            logr = (prop - cur) * np.log(rate * wv) - gammaln(prop) + gammaln(cur)
            acc = np.log(rng.random(cur.shape)) < logr
            state.u[pos] = np.where(acc, prop, cur)

    zero = ~pos
    if np.any(zero):
        p1 = phi * w0b[zero] * rate
        state.u[zero] = (rng.random(p1.shape) * (1.0 + p1) < p1).astype(np.int64)

    unobserved = state.n_jk == 0
    if np.any(unobserved):
        mu = phi * w0b[unobserved]
        u_prop = rng.poisson(mu).astype(np.int64)
        w_prop = rng.gamma(u_prop.astype(float), 1.0 / rate)
        zsums = np.broadcast_to(zt[:, None], (J, K))[unobserved]
        logr = -(w_prop - state.w[unobserved]) * zsums
        acc = np.log(rng.random(mu.shape)) < logr
        uu = state.u[unobserved]
        ww = state.w[unobserved]
        state.u[unobserved] = np.where(acc, u_prop, uu)
        state.w[unobserved] = np.where(acc, w_prop, ww)

    mu = phi * state.w0_star
    if method == "exact":
        state.u_star = np.array([
            cond_u_given_w("residual", state.w0_star, ws, us, tau, phi, alpha,
                           rng, method="exact")
            for ws, us in zip(state.w_star, state.u_star)], dtype=np.int64)
    else:
        prop = rng.poisson(mu, size=J).astype(np.int64)
        logr = ((prop - state.u_star) * np.log(rate * state.w_star)
                - gammaln(alpha + prop) + gammaln(alpha + state.u_star))
        acc = np.log(rng.random(J)) < logr
        state.u_star = np.where(acc, prop, state.u_star)


# ---------------------------------------------------------------------------
# durations, weights, likelihood matrix


def draw_durations_mixture(state: MixtureState, dataset: RankingDataset, rng) -> np.ndarray:
    sel = state.w[state.c[:, None], dataset.items_padded] * dataset.mask
    totals = state.cluster_totals()
    rates = totals[state.c][:, None] - (np.cumsum(sel, axis=1) - sel)
    z = rng.standard_exponential(sel.shape) / rates
    z *= dataset.mask
    return z


def pl_loglik_matrix(w: np.ndarray, w_star: np.ndarray,
                     dataset: RankingDataset) -> np.ndarray:
    """Log likelihood of every ranking under every cluster measure: (L, J).

    Rankings containing an item with zero mass in a cluster get -inf there.
    """
    sel = w[:, dataset.items_padded] * dataset.mask[None, :, :]
    totals = w.sum(axis=1) + w_star
    denom = totals[:, None, None] - (np.cumsum(sel, axis=2) - sel)
    with np.errstate(divide="ignore"):
        ll = np.where(dataset.mask[None, :, :], np.log(sel) - np.log(denom), 0.0)
    return ll.sum(axis=2).T


# ---------------------------------------------------------------------------
# slice-sampled assignments


def _instantiate_cluster(state: MixtureState, rng):
    # Fresh cluster measure drawn from the coupling given the current root.
    rate = state.tau + state.phi
    u_new = rng.poisson(state.phi * state.w0).astype(np.int64)
    w_new = rng.gamma(u_new.astype(float), 1.0 / rate)
    u_star_new = int(rng.poisson(state.phi * state.w0_star))
    w_star_new = float(rng.gamma(state.alpha + u_star_new, 1.0 / rate))
    return u_new, w_new, u_star_new, w_star_new


def slice_assignments_update(state: MixtureState, dataset: RankingDataset,
                             rng, max_new_clusters: int = 10000) -> None:
    """Resample stick weights and cluster assignments with auxiliary slices.

    Block order: (a) Dirichlet(mu_1..mu_J, gamma) over instantiated sticks
    plus the remainder, (b) a uniform slice per ranking, (c) extend sticks
    and instantiate fresh cluster measures until the instantiated mass
    covers every slice, then reassign each ranking among clusters whose
    stick exceeds its slice, proportionally to the ranking's likelihood.
    Empty clusters are dropped and labels compacted afterwards.
    """
    J = state.n_clusters
    counts = np.bincount(state.c, minlength=J).astype(float)
    dirich = rng.dirichlet(np.concatenate([counts, [state.gamma_dp]]))
    pi = dirich[:J].copy()
    pi_rest = float(dirich[J])
    omega = pi[state.c] * rng.random(dataset.L)
    omega_min = float(omega.min())

    u_ext, w_ext, us_ext, ws_ext, pi_ext = [], [], [], [], []
    covered = pi.sum()
    while covered < 1.0 - omega_min:
        if len(pi_ext) >= max_new_clusters:
            raise RuntimeError("slice extension failed to terminate; "
                               "gamma_dp may be astronomically large")
        v = rng.beta(1.0, state.gamma_dp)
        pi_new = pi_rest * v
        pi_rest *= 1.0 - v
        un, wn, usn, wsn = _instantiate_cluster(state, rng)
        pi_ext.append(pi_new)
        u_ext.append(un)
        w_ext.append(wn)
        us_ext.append(usn)
        ws_ext.append(wsn)
        covered += pi_new

    if pi_ext:
        pi_all = np.concatenate([pi, pi_ext])
        u_all = np.vstack([state.u, np.array(u_ext, dtype=np.int64)])
        w_all = np.vstack([state.w, np.array(w_ext)])
        us_all = np.concatenate([state.u_star, np.array(us_ext, dtype=np.int64)])
        ws_all = np.concatenate([state.w_star, np.array(ws_ext)])
    else:
        pi_all, u_all, w_all, us_all, ws_all = pi, state.u, state.w, state.u_star, state.w_star

    loglik = pl_loglik_matrix(w_all, ws_all, dataset)
    eligible = pi_all[None, :] > omega[:, None]
    with np.errstate(invalid="ignore"):
        scored = np.where(eligible, loglik, -np.inf)
    gumbel = rng.gumbel(size=scored.shape)
    c_new = np.argmax(scored + gumbel, axis=1)

    kept, c_compact = np.unique(c_new, return_inverse=True)
    state.c = c_compact.astype(np.int64)
    state.pi = pi_all[kept]
    state.pi_star = max(1.0 - float(state.pi.sum()), 0.0)
    state.u = u_all[kept]
    state.w = w_all[kept]
    state.u_star = us_all[kept]
    state.w_star = ws_all[kept]
    state.omega = omega
    state.n_jk = cluster_counts(dataset, state.c, state.n_clusters)
    state.cluster_z = cluster_z_sums(state.c, state.z, state.n_clusters)


# ---------------------------------------------------------------------------
# hyperparameter updates


def gamma_dp_mixture_params(a: float, b: float, n_clusters: int, n_lists: int,
                            eta: float):
    """Two-component gamma mixture for the stick concentration given the
    auxiliary beta variable: shapes (a + J, a + J - 1), rate b - log(eta),
    and the probability of the larger shape."""
    rate = b - math.log(eta)
    shape_hi = a + n_clusters
    shape_lo = a + n_clusters - 1
    odds = shape_lo / (n_lists * rate)
    return shape_hi, shape_lo, rate, odds / (1.0 + odds)


def update_gamma_dp(state: MixtureState, priors: MixturePriors, n_lists: int,
                    rng) -> float:
    """Auxiliary-variable update of the stick concentration."""
    a, b = priors.gamma_dp
    eta = rng.beta(state.gamma_dp + 1.0, n_lists)
    shape_hi, shape_lo, rate, p_hi = gamma_dp_mixture_params(
        a, b, state.n_clusters, n_lists, eta)
    shape = shape_hi if rng.random() < p_hi else shape_lo
    if shape <= 0:
        raise ValueError("improper conditional for gamma_dp (flat prior with a "
                         "single cluster); use a proper gamma_dp prior")
    state.gamma_dp = float(rng.gamma(shape, 1.0 / rate))
    return state.gamma_dp


def _phi_log_target_terms(state: MixtureState, phi: float) -> float:
    atom = transition_log_density_w(state.w, state.w0[None, :], state.tau, phi,
                                    kind="atom")
    resid = transition_log_density_w(state.w_star, state.w0_star, state.tau, phi,
                                     alpha=state.alpha, kind="residual")
    return float(np.sum(atom) + np.sum(resid))


def update_phi_mh(state: MixtureState, priors: MixturePriors, rng) -> float:
    """Log-normal random-walk update of the coupling strength, with the
    counts marginalized out of the mass transition densities."""
    step = math.exp(state.phi_log_step)
    eps = rng.standard_normal()
    phi_new = state.phi * math.exp(step * eps)
    a, b = priors.phi
    # Prior ratio for Gamma(a, b); (0, 0) gives the improper 1/phi density.
    logr = (a - 1.0) * math.log(phi_new / state.phi) - b * (phi_new - state.phi)
    logr += math.log(phi_new / state.phi)  # proposal Jacobian
    logr += _phi_log_target_terms(state, phi_new) - _phi_log_target_terms(state, state.phi)
    accepted = math.log(rng.random()) < logr
    if accepted:
        state.phi = float(phi_new)
    if state.phi_adapting:
        state.phi_adapt_count += 1
        state.phi_log_step += ((1.0 if accepted else 0.0) - 0.234) \
            / (1 + state.phi_adapt_count) ** 0.6
    return state.phi


# ---------------------------------------------------------------------------
# initialization and the full sweep


def init_mixture_state(dataset: RankingDataset, alpha: float, phi: float,
                       gamma_dp: float, tau: float, rng,
                       seed_concentration: float = 1.0,
                       phi_step: float = 0.2) -> MixtureState:
    """Sequential seeding of assignments followed by one forward pass of the
    mass hierarchy, so every support invariant holds from the start."""
    c = np.zeros(dataset.L, dtype=np.int64)
    sizes: list = []
    for i in range(dataset.L):
        weights = np.array(sizes + [seed_concentration], dtype=float)
        cum = np.cumsum(weights)
        pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        c[i] = pick
        if pick == len(sizes):
            sizes.append(1)
        else:
            sizes[pick] += 1
    J = len(sizes)

    n_jk = cluster_counts(dataset, c, J)
    u = n_jk.copy()
    u_star = np.zeros(J, dtype=np.int64)
    rate0 = J * phi + tau
    w0 = rng.gamma(u.sum(axis=0).astype(float), 1.0 / rate0)
    w0_star = float(rng.gamma(alpha, 1.0 / rate0))
    rate = tau + phi
    w = rng.gamma((n_jk + u).astype(float), 1.0 / rate)
    w_star = rng.gamma(alpha + u_star.astype(float), 1.0 / rate)
    pi = rng.dirichlet(np.concatenate([np.bincount(c, minlength=J).astype(float),
                                       [gamma_dp]]))
    state = MixtureState(
        c=c, pi=pi[:J].copy(), pi_star=float(pi[J]), w0=w0, w0_star=w0_star,
        u=u, u_star=u_star, w=w, w_star=w_star,
        z=np.zeros((dataset.L, dataset.m_max)), alpha=alpha, phi=phi,
        gamma_dp=gamma_dp, tau=tau, n_jk=n_jk,
        phi_log_step=math.log(phi_step) if phi_step > 0 else -math.inf)
    state.z = draw_durations_mixture(state, dataset, rng)
    state.cluster_z = cluster_z_sums(state.c, state.z, J)
    return state


def mixture_sweep(state: MixtureState, dataset: RankingDataset,
                  priors: MixturePriors, rng, *,
                  sample_assignments: bool = True,
                  sample_alpha: bool = True,
                  sample_gamma: bool = True,
                  sample_phi: bool = True,
                  strict_tau: bool = True) -> MixtureState:
    """One full sweep, in the fixed valid order (see module docstring).

    The ``sample_*`` switches freeze individual blocks (used for conditional
    runs and validation); frozen blocks are skipped entirely.  Mutates and
    returns ``state``; deterministic given the generator state.
    """
    J = state.n_clusters
    phi, tau = state.phi, state.tau

    # 1a. resample non-identifiable totals from the prior hierarchy and
    # rescale atoms proportionally (normalized weights unchanged).
    new_root = rng.gamma(state.alpha, 1.0 / tau)
    scale0 = new_root / state.root_total()
    state.w0 *= scale0
    state.w0_star *= scale0
    m_aux = rng.poisson(phi * new_root, size=J)
    new_totals = rng.gamma(state.alpha + m_aux.astype(float), 1.0 / (tau + phi))
    scales = new_totals / state.cluster_totals()
    state.w *= scales[:, None]
    state.w_star *= scales

    # 1b. coupling counts.
    _update_u_block(state, dataset, rng, priors.u_sampler)

    # 2a-d. concentration with residual chain marginalized, then the
    # root residual, residual counts, and cluster residuals, forward in
    # the hierarchy.
    if sample_alpha:
        shape, rate_a = cond_alpha_mixture_params(
            priors.alpha, dataset.K, state.cluster_z, tau, phi, strict_tau)
        state.alpha = float(rng.gamma(shape, 1.0 / rate_a))
    x0, _ = mixture_x0_y0(state.cluster_z, phi)
    state.w0_star = float(rng.gamma(state.alpha, 1.0 / (tau + x0)))
    thin = (1.0 + phi) / (1.0 + phi + state.cluster_z)
    state.u_star = rng.poisson(thin * phi * state.w0_star).astype(np.int64)
    state.w_star = rng.gamma(state.alpha + state.u_star.astype(float),
                             1.0 / (tau + phi + state.cluster_z))

    # 3. root masses given counts.
    shape0 = state.u.sum(axis=0).astype(float)
    rate0 = J * phi + tau
    state.w0 = rng.gamma(shape0, 1.0 / rate0)
    state.w0_star = float(rng.gamma(state.alpha + state.u_star.sum(), 1.0 / rate0))

    # 4. latent durations.
    state.z = draw_durations_mixture(state, dataset, rng)
    state.cluster_z = cluster_z_sums(state.c, state.z, J)

    # 5. cluster masses.
    s_jk = cluster_delta_sums(dataset, state.c, state.z, J)
    state.w = rng.gamma((state.n_jk + state.u).astype(float),
                        1.0 / (tau + phi + s_jk))
    state.w_star = rng.gamma(state.alpha + state.u_star.astype(float),
                             1.0 / (tau + phi + state.cluster_z))

    # 6. sticks and assignments.
    if sample_assignments:
        slice_assignments_update(state, dataset, rng)

    # 7. stick concentration.
    if sample_gamma:
        update_gamma_dp(state, priors, dataset.L, rng)

    # 8. coupling strength.
    if sample_phi:
        update_phi_mh(state, priors, rng)

    state.iteration += 1
    return state
