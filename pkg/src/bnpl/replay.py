"""Prior-replay (successive-conditional) harnesses for sampler validation.

The joint-distribution test alternates one transition of a posterior sampler
with an exact re-draw of the data given the current latent state.  If the
sampler is correct, every recorded statistic of the latent state is
marginally distributed according to the prior, which we can also sample
directly; discrepancies beyond Monte Carlo error expose bugs in any
conditional or in the step order.

Re-drawing data requires instantiating atoms lazily out of the aggregate
residual masses.  For the single-population model this is plain size-biased
stick-breaking.  For the mixture the residuals hide a coupled hierarchy:
the residual coupling counts partition into latent shared atoms by a
Chinese-restaurant scheme, root and cluster residuals split over those
atoms by Dirichlet laws, and within each cluster's own fresh component by
stick-breaking.  All of these conditionals are exact for gamma-type
measures, so the replay chain has no discretization bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crm import AtomicMeasure, CrmSpec, Family, ItemRegistry
from .gibbs_single import (AlphaPrior, SingleModelState, draw_durations,
                           gibbs_sweep_single)
from .mixture import (MixturePriors, MixtureState, cluster_counts,
                      cluster_z_sums, draw_durations_mixture, mixture_sweep)
from .plackett_luce import PartialRanking, RankingDataset, simulate_rankings
from .rng import make_generator


def _dataset_from_id_lists(lists) -> tuple[RankingDataset, list]:
    """Dense dataset from rankings over arbitrary hashable item keys.

    Returns the dataset and the key corresponding to each dense id.
    """
    registry = ItemRegistry()
    rankings = []
    for row in lists:
        rankings.append(PartialRanking(tuple(registry.add(key) for key in row)))
    return RankingDataset(rankings, registry), registry.labels


# ---------------------------------------------------------------------------
# single-population model


def regenerate_single_data(state: SingleModelState, n_lists: int, list_len: int,
                           rng) -> tuple[RankingDataset, SingleModelState]:
    """Draw a fresh dataset from the current measure and re-express the state
    around the new observed item set.

    Fresh items split off the residual by Beta(1, alpha) fractions; items no
    longer observed fold their mass back into the residual.  Durations are
    re-drawn from their conditional given the new rankings.
    """
    measure = AtomicMeasure({k: float(w) for k, w in enumerate(state.weights)},
                            state.residual)
    rankings, final = simulate_rankings(measure, n_lists, list_len, rng,
                                        tail_concentration=state.alpha)
    dataset, id_keys = _dataset_from_id_lists([r.items for r in rankings])
    new_w = np.array([final.atoms[key] for key in id_keys])
    observed = set(id_keys)
    folded = sum(w for k, w in final.atoms.items() if k not in observed)
    state.weights = new_w
    state.residual = float(final.residual_mass + folded)
    state.z = draw_durations(state.weights, state.residual, dataset, rng)
    return dataset, state


def single_prior_replay(n_sweeps: int, n_lists: int, list_len: int,
                        prior: AlphaPrior, tau: float, seed: int) -> dict:
    """Successive-conditional chain for the single-population sampler.

    Requires a proper concentration prior (moments must exist).  Returns
    arrays of per-sweep statistics: concentration and total mass.
    """
    if prior.a <= 0 or prior.b <= 0:
        raise ValueError("prior replay needs a proper concentration prior")
    rng = make_generator(seed)
    alpha = rng.gamma(prior.a, 1.0 / prior.b)
    total = rng.gamma(alpha, 1.0 / tau)
    state = SingleModelState(np.zeros(0), float(total), np.zeros((0, 0)), alpha, tau)
    dataset, state = regenerate_single_data(state, n_lists, list_len, rng)
    spec = CrmSpec(Family.GAMMA, alpha=1.0, tau=tau)

    stats = {"alpha": np.empty(n_sweeps), "total": np.empty(n_sweeps)}
    for it in range(n_sweeps):
        gibbs_sweep_single(state, dataset, spec, prior, rng)
        stats["alpha"][it] = state.alpha
        stats["total"][it] = state.total_mass()
        dataset, state = regenerate_single_data(state, n_lists, list_len, rng)
    return stats


def single_prior_sample(n: int, prior: AlphaPrior, tau: float, seed: int) -> dict:
    """Direct draws of the same statistics from the prior."""
    rng = make_generator(seed)
    alpha = rng.gamma(prior.a, 1.0 / prior.b, size=n)
    total = rng.gamma(alpha, 1.0 / tau)
    return {"alpha": alpha, "total": total}


# ---------------------------------------------------------------------------
# mixture model


@dataclass
class _Table:
    # A latent shared atom of the root's residual region: coupling counts it
    # received from each cluster's residual, plus its instantiated masses.
    per_cluster: np.ndarray
    w0: float = 0.0
    w: np.ndarray | None = None


def _crp_partition_balls(u_star: np.ndarray, alpha: float, rng) -> list[_Table]:
    # Residual coupling counts land on the root's latent atoms proportionally
    # to mass; marginally over the (Dirichlet-process) normalized tail this
    # is a Chinese-restaurant partition of all counts jointly.
    J = len(u_star)
    tables: list[_Table] = []
    counts: list[int] = []
    for j in range(J):
        for _ in range(int(u_star[j])):
            weights = np.array(counts + [alpha], dtype=float)
            cum = np.cumsum(weights)
            pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            if pick == len(tables):
                tables.append(_Table(np.zeros(J, dtype=np.int64)))
                counts.append(0)
            tables[pick].per_cluster[j] += 1
            counts[pick] += 1
    return tables


def regenerate_mixture_data(state: MixtureState, n_lists: int, list_len: int,
                            rng) -> tuple[RankingDataset, MixtureState]:
    """Draw a fresh dataset from the per-cluster measures and re-express the
    state around the new observed item set.

    The residual hierarchy is instantiated exactly: residual counts
    partition into latent shared atoms (CRP over all counts), the root
    residual splits over those atoms and a remainder by a Dirichlet law,
    each cluster's residual splits over its share of those atoms plus a
    cluster-specific fresh component, and fresh atoms pop off the fresh
    component by stick-breaking during the races.  Atoms that end up
    observed are promoted into the dense arrays; everything else folds back
    into the residual aggregates.
    """
    J, K = state.w.shape
    alpha, phi, tau = state.alpha, state.phi, state.tau
    c = state.c

    tables = _crp_partition_balls(state.u_star, alpha, rng)
    T = len(tables)
    # Root residual over tables + remainder.
    g = rng.gamma(np.array([t.per_cluster.sum() for t in tables] + [alpha],
                           dtype=float))
    fr = g / g.sum()
    for t, f in zip(tables, fr[:T]):
        t.w0 = f * state.w0_star
    root_rest = fr[T] * state.w0_star
    # Cluster residual over its tables + its own fresh component.
    fresh_pool = np.empty(J)
    for j in range(J):
        shapes = np.array([t.per_cluster[j] for t in tables] + [alpha], dtype=float)
        g = rng.gamma(shapes)  # zero shapes give exact zeros
        total = g.sum()
        for t, gi in zip(tables, g[:T]):
            if t.w is None:
                t.w = np.zeros(J)
            t.w[j] = gi / total * state.w_star[j]
        fresh_pool[j] = g[T] / total * state.w_star[j]

    # Races.  Candidate keys: ("o", k) observed atoms, ("t", t) tables,
    # ("f", j, i) popped fresh atoms of cluster j.
    fresh_atoms: list[list] = [[] for _ in range(J)]
    lists = []
    for li in range(n_lists):
        j = int(c[li])
        keys = [("o", k) for k in range(K) if state.w[j, k] > 0]
        masses = [state.w[j, k] for k in range(K) if state.w[j, k] > 0]
        for ti, t in enumerate(tables):
            if t.w is not None and t.w[j] > 0:
                keys.append(("t", ti))
                masses.append(t.w[j])
        for fi, (mass, _) in enumerate(fresh_atoms[j]):
            keys.append(("f", j, fi))
            masses.append(mass)
        masses = np.array(masses, dtype=float)
        alive = np.ones(len(keys), dtype=bool)
        picks = []
        for _ in range(list_len):
            live = masses * alive
            total = live.sum() + fresh_pool[j]
            x = rng.random() * total
            cum = np.cumsum(live)
            idx = int(np.searchsorted(cum, x, side="right"))
            if idx < len(keys):
                picks.append(keys[idx])
                alive[idx] = False
            else:
                v = rng.beta(1.0, alpha)
                mass = fresh_pool[j] * v
                fresh_pool[j] *= 1.0 - v
                fi = len(fresh_atoms[j])
                fresh_atoms[j].append((mass, fi))
                picks.append(("f", j, fi))
                keys.append(("f", j, fi))
                masses = np.append(masses, mass)
                alive = np.append(alive, False)
        lists.append(picks)

    dataset, id_keys = _dataset_from_id_lists(lists)
    K_new = dataset.K
    w0_new = np.zeros(K_new)
    u_new = np.zeros((J, K_new), dtype=np.int64)
    w_new = np.zeros((J, K_new))
    promoted_tables = set()
    for k, key in enumerate(id_keys):
        if key[0] == "o":
            w0_new[k] = state.w0[key[1]]
            u_new[:, k] = state.u[:, key[1]]
            w_new[:, k] = state.w[:, key[1]]
        elif key[0] == "t":
            t = tables[key[1]]
            promoted_tables.add(key[1])
            w0_new[k] = t.w0
            u_new[:, k] = t.per_cluster
            w_new[:, k] = t.w if t.w is not None else 0.0
        else:
            _, j, fi = key
            w_new[j, k] = fresh_atoms[j][fi][0]

    observed_old = {key[1] for key in id_keys if key[0] == "o"}
    folded_old = [k for k in range(K) if k not in observed_old]
    left_tables = [ti for ti in range(T) if ti not in promoted_tables]

    state.w0_star = float(root_rest
                          + sum(tables[ti].w0 for ti in left_tables)
                          + state.w0[folded_old].sum())
    u_star = np.zeros(J, dtype=np.int64)
    w_star = fresh_pool.copy()
    for ti in left_tables:
        u_star += tables[ti].per_cluster
        if tables[ti].w is not None:
            w_star += tables[ti].w
    if folded_old:
        u_star += state.u[:, folded_old].sum(axis=1)
        w_star += state.w[:, folded_old].sum(axis=1)
    # Popped fresh atoms are always ranked, hence always promoted.
    state.u_star = u_star
    state.w_star = w_star
    state.w0 = w0_new
    state.u = u_new
    state.w = w_new
    state.n_jk = cluster_counts(dataset, c, J)
    state.z = draw_durations_mixture(state, dataset, rng)
    state.cluster_z = cluster_z_sums(c, state.z, J)
    return dataset, state


def _crp_draw(n: int, gamma: float, rng) -> np.ndarray:
    labels = np.zeros(n, dtype=np.int64)
    sizes: list = []
    for i in range(n):
        weights = np.array(sizes + [gamma], dtype=float)
        cum = np.cumsum(weights)
        pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        labels[i] = pick
        if pick == len(sizes):
            sizes.append(1)
        else:
            sizes[pick] += 1
    return labels


_MIX_STATS = ("alpha", "gamma", "phi", "n_clusters", "root_total", "cluster_total")


def mixture_prior_replay(n_sweeps: int, n_lists: int, list_len: int,
                         priors: MixturePriors, tau: float, seed: int) -> dict:
    """Successive-conditional chain for the mixture sampler.

    All three hyperpriors must be proper.  Statistics per sweep: the three
    hyperparameters, the number of clusters, the root total mass, and the
    total mass of the cluster containing the first ranking.
    """
    for name in ("alpha", "gamma_dp", "phi"):
        a, b = getattr(priors, name)
        if a <= 0 or b <= 0:
            raise ValueError(f"prior replay needs a proper {name} prior")
    rng = make_generator(seed)
    alpha = rng.gamma(*_inv(priors.alpha))
    gamma = rng.gamma(*_inv(priors.gamma_dp))
    phi = rng.gamma(*_inv(priors.phi))

    c = _crp_draw(n_lists, gamma, rng)
    J = int(c.max()) + 1
    w0_star = rng.gamma(alpha, 1.0 / tau)
    u_star = rng.poisson(phi * w0_star, size=J).astype(np.int64)
    w_star = rng.gamma(alpha + u_star.astype(float), 1.0 / (tau + phi))
    counts = np.bincount(c, minlength=J).astype(float)
    pi = rng.dirichlet(np.concatenate([counts, [gamma]]))
    state = MixtureState(
        c=c, pi=pi[:J].copy(), pi_star=float(pi[J]),
        w0=np.zeros(0), w0_star=float(w0_star),
        u=np.zeros((J, 0), dtype=np.int64), u_star=u_star,
        w=np.zeros((J, 0)), w_star=w_star,
        z=np.zeros((n_lists, list_len)), alpha=float(alpha), phi=float(phi),
        gamma_dp=float(gamma), tau=tau,
        phi_log_step=math.log(priors.phi_step), phi_adapting=False)
    dataset, state = regenerate_mixture_data(state, n_lists, list_len, rng)

    stats = {k: np.empty(n_sweeps) for k in _MIX_STATS}
    for it in range(n_sweeps):
        mixture_sweep(state, dataset, priors, rng)
        stats["alpha"][it] = state.alpha
        stats["gamma"][it] = state.gamma_dp
        stats["phi"][it] = state.phi
        stats["n_clusters"][it] = state.n_clusters
        stats["root_total"][it] = state.root_total()
        stats["cluster_total"][it] = state.cluster_totals()[state.c[0]]
        dataset, state = regenerate_mixture_data(state, n_lists, list_len, rng)
    return stats


def _inv(prior: tuple) -> tuple:
    a, b = prior
    return a, 1.0 / b


def mixture_prior_sample(n: int, n_lists: int, priors: MixturePriors,
                         tau: float, seed: int) -> dict:
    """Direct draws of the replay statistics from the mixture prior."""
    rng = make_generator(seed)
    stats = {k: np.empty(n) for k in _MIX_STATS}
    for i in range(n):
        alpha = rng.gamma(*_inv(priors.alpha))
        gamma = rng.gamma(*_inv(priors.gamma_dp))
        phi = rng.gamma(*_inv(priors.phi))
        c = _crp_draw(n_lists, gamma, rng)
        J = int(c.max()) + 1
        t0 = rng.gamma(alpha, 1.0 / tau)
        m = rng.poisson(phi * t0, size=J)
        tj = rng.gamma(alpha + m.astype(float), 1.0 / (tau + phi))
        stats["alpha"][i] = alpha
        stats["gamma"][i] = gamma
        stats["phi"][i] = phi
        stats["n_clusters"][i] = J
        stats["root_total"][i] = t0
        stats["cluster_total"][i] = tj[c[0]]
    return stats


# ---------------------------------------------------------------------------
# comparison


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated sequence via batch means."""
    n = len(x) // n_batches
    if n < 1:
        raise ValueError("sequence too short for the requested batches")
    batches = x[: n * n_batches].reshape(n_batches, n).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(n_batches))


def geweke_zscores(chain_stats: dict, prior_stats: dict,
                   n_batches: int = 50) -> dict:
    """Z-scores comparing first and second moments of chain statistics
    against direct prior draws.  Chain standard errors use batch means to
    account for autocorrelation."""
    out = {}
    for key, chain in chain_stats.items():
        prior = prior_stats[key]
        for moment, fn in (("mean", lambda v: v), ("second_moment", np.square)):
            a, b = fn(np.asarray(chain, dtype=float)), fn(np.asarray(prior, dtype=float))
            se = math.hypot(batch_means_se(a, n_batches),
                            float(b.std(ddof=1) / math.sqrt(len(b))))
            out[f"{key}:{moment}"] = float((a.mean() - b.mean()) / se)
    return out
