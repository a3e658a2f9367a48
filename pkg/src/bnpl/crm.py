"""Completely random measures: jump-intensity mathematics and simulation.

A homogeneous CRM is identified here by its jump intensity

    lam(w) = alpha / Gamma(1 - sigma) * w**(-1 - sigma) * exp(-tau * w),

which covers the gamma process (``sigma = 0``) and the generalized gamma
family (stable at ``tau = 0``, inverse Gaussian at ``sigma = 1/2``).  Atom
locations are never represented explicitly: items are opaque integer ids and
a measure is a finite table of instantiated atom masses plus one aggregate
``residual_mass`` for everything not yet instantiated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np
from scipy import integrate, optimize
from scipy.special import exp1, gammainc, gammaln


class Family(str, enum.Enum):
    GAMMA = "gamma"
    GENERALIZED_GAMMA = "generalized-gamma"


@dataclass(frozen=True)
class CrmSpec:
    """Hyperparameters of a (generalized) gamma process.

    Parameters
    ----------
    family : Family
        Gamma or generalized gamma.
    alpha : float
        Concentration, > 0.
    tau : float
        Inverse scale, >= 0 (> 0 for the gamma family).
    sigma : float
        Index in [0, 1).  Must be 0 for the gamma family.
    """

    family: Family = Family.GAMMA
    alpha: float = 1.0
    tau: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (0.0 <= self.sigma < 1.0):
            raise ValueError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.family == Family.GAMMA:
            if self.tau <= 0:
                raise ValueError("gamma family requires tau > 0")
            if self.sigma != 0.0:
                raise ValueError("gamma family requires sigma = 0")
        elif self.tau == 0.0 and self.sigma == 0.0:
            # alpha/w is not normalisable: the race over atoms would diverge.
            raise ValueError("generalized gamma requires tau > 0 or sigma > 0")

    @property
    def is_gamma_type(self) -> bool:
        """True when the jump intensity is exactly the gamma-process one."""
        return self.sigma == 0.0

    def levy_density(self, w):
        """Jump intensity lam(w) evaluated pointwise for w > 0."""
        w = np.asarray(w, dtype=float)
        lg = (math.log(self.alpha) - gammaln(1.0 - self.sigma)
              - (1.0 + self.sigma) * np.log(w) - self.tau * w)
        return np.exp(lg)

    def levy_tail(self, w: float) -> float:
        """Integral of the jump intensity over (w, infinity)."""
        if w <= 0:
            return math.inf
        if self.sigma == 0.0:
            return self.alpha * float(exp1(self.tau * w))
        if self.tau == 0.0:
            return self.alpha * w ** (-self.sigma) / (self.sigma * math.gamma(1.0 - self.sigma))
        val, _ = integrate.quad(self.levy_density, w, np.inf, epsabs=0.0, epsrel=1e-10)
        return float(val)

    def expected_tail_mass(self, cutoff: float) -> float:
        """Expected total mass of jumps below ``cutoff``: int_0^c w lam(w) dw."""
        if cutoff <= 0:
            return 0.0
        a, t, s = self.alpha, self.tau, self.sigma
        if t == 0.0:
            return a * cutoff ** (1.0 - s) / ((1.0 - s) * math.gamma(1.0 - s))
        # int_0^c w^{-s} e^{-tw} dw = t^{s-1} Gamma(1-s) P(1-s, tc)
        return a * t ** (s - 1.0) * float(gammainc(1.0 - s, t * cutoff))


def laplace_exponent(spec: CrmSpec, z):
    """Laplace exponent psi(z) = int (1 - e^{-zw}) lam(w) dw.

    Closed forms: ``alpha * log(1 + z/tau)`` for the gamma family and
    ``(alpha/sigma) * ((tau+z)**sigma - tau**sigma)`` otherwise.  Accepts
    scalars or arrays; psi(0) = 0 and psi is increasing and concave.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    if spec.sigma == 0.0:
        out = spec.alpha * np.log1p(z / spec.tau)
    else:
        s = spec.sigma
        out = (spec.alpha / s) * ((spec.tau + z) ** s - spec.tau ** s)
    return out if out.ndim else float(out)


def log_tilted_moment(spec: CrmSpec, n, z):
    """log kappa(n, z) where kappa(n, z) = int w^n e^{-zw} lam(w) dw.

    For the generalized gamma family this is
    ``alpha * Gamma(n - sigma) / ((tau + z)^{n - sigma} Gamma(1 - sigma))``,
    with sigma = 0 recovering ``alpha * Gamma(n) / (tau + z)^n``.  ``n`` and
    ``z`` broadcast.
    """
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("n must be a positive integer (the n = 0 integral diverges)")
    z = np.asarray(z, dtype=float)
    rate = spec.tau + z
    if np.any(rate <= 0):
        raise ValueError("tau + z must be positive")
    s = spec.sigma
    out = (math.log(spec.alpha) + gammaln(n - s) - gammaln(1.0 - s)
           - (n - s) * np.log(rate))
    return out if out.ndim else float(out)


def tilted_moment(spec: CrmSpec, n: int, z):
    """n-th moment kappa(n, z) of the exponentially tilted jump intensity."""
    out = np.exp(log_tilted_moment(spec, n, z))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite view of an atomic measure: instantiated atoms plus a tail.

    ``atoms`` maps item id -> strictly positive mass; ``residual_mass`` is
    the aggregate mass of all atoms not individually instantiated.
    Instances are treated as immutable; derive new measures instead of
    mutating.
    """

    atoms: Dict[int, float]
    residual_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "atoms", dict(self.atoms))
        for k, w in self.atoms.items():
            if not (w > 0) or not math.isfinite(w):
                raise ValueError(f"atom {k} has non-positive mass {w}")
        if self.residual_mass < 0 or not math.isfinite(self.residual_mass):
            raise ValueError(f"residual_mass must be finite and >= 0, got {self.residual_mass}")

    def total(self) -> float:
        return float(sum(self.atoms.values()) + self.residual_mass)

    def mass(self, item: int) -> float:
        try:
            return self.atoms[item]
        except KeyError:
            raise KeyError(f"item {item} has no atom in this measure") from None

    def scaled(self, factor: float) -> "AtomicMeasure":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return AtomicMeasure({k: w * factor for k, w in self.atoms.items()},
                             self.residual_mass * factor)


@dataclass(frozen=True)
class CountMeasure:
    """Integer-valued measure on the same item ids plus a residual count."""

    counts: Dict[int, int]
    residual_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(self.counts))
        if any(v < 0 for v in self.counts.values()) or self.residual_count < 0:
            raise ValueError("counts must be nonnegative")

    def total(self) -> int:
        return int(sum(self.counts.values()) + self.residual_count)


class ItemRegistry:
    """Bijection between external item labels and dense integer ids."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list = []
        self._ids: Dict[str, int] = {}
        for lab in labels:
            self.add(lab)

    def add(self, label) -> int:
        """Register ``label`` (idempotent) and return its id."""
        if label in self._ids:
            return self._ids[label]
        new_id = len(self._labels)
        self._ids[label] = new_id
        self._labels.append(label)
        return new_id

    def id_of(self, label) -> int:
        return self._ids[label]

    def label_of(self, item_id: int):
        return self._labels[item_id]

    @property
    def labels(self) -> list:
        return list(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label) -> bool:
        return label in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, ItemRegistry) and self._labels == other._labels


@dataclass(frozen=True)
class TruncationRule:
    """How to truncate a simulated CRM: keep K largest jumps or all above eps."""

    kind: str
    value: float

    @classmethod
    def top_k(cls, k: int) -> "TruncationRule":
        if k < 1:
            raise ValueError("top_k requires k >= 1")
        return cls("top_k", float(k))

    @classmethod
    def threshold(cls, eps: float) -> "TruncationRule":
        if eps <= 0:
            raise ValueError("threshold requires eps > 0")
        return cls("threshold", float(eps))


def default_threshold(spec: CrmSpec) -> float:
    """Default truncation threshold: tiny relative to the expected total."""
    scale = spec.alpha / spec.tau if spec.tau > 0 else spec.alpha
    return 1e-10 * scale


def _simulate_size_biased(spec, truncation, rng, start_id):
    # Exact for gamma-type intensities: total ~ Gamma(alpha, tau), atoms are
    # size-biased stick-breaking fractions Beta(1, alpha) of the remainder.
    total = rng.gamma(spec.alpha, 1.0 / spec.tau)
    atoms: Dict[int, float] = {}
    remaining = total
    next_id = start_id
    if truncation.kind == "top_k":
        for _ in range(int(truncation.value)):
            v = rng.beta(1.0, spec.alpha)
            atoms[next_id] = remaining * v
            remaining *= 1.0 - v
            next_id += 1
    else:
        while remaining > truncation.value:
            v = rng.beta(1.0, spec.alpha)
            atoms[next_id] = remaining * v
            remaining *= 1.0 - v
            next_id += 1
    atoms = {k: w for k, w in atoms.items() if w > 0}
    return AtomicMeasure(atoms, remaining)


def _invert_levy_tail(spec, target: float, hi_start: float) -> float:
    # Solve levy_tail(w) = target for w; the tail is strictly decreasing.
    hi = hi_start
    while spec.levy_tail(hi) > target:
        hi *= 2.0
    lo = hi
    while spec.levy_tail(lo) < target:
        lo /= 2.0
        if lo < 1e-300:
            return 0.0
    return float(optimize.brentq(lambda w: spec.levy_tail(w) - target, lo, hi,
                                 xtol=1e-300, rtol=1e-12))


def _simulate_inverse_levy(spec, truncation, rng, start_id):
    # Decreasing jumps: w_i = tail^{-1}(E_1 + ... + E_i) with E_i ~ Exp(1).
    scale = spec.alpha / spec.tau if spec.tau > 0 else spec.alpha
    atoms: Dict[int, float] = {}
    cum = 0.0
    next_id = start_id
    last = None
    if truncation.kind == "top_k":
        for _ in range(int(truncation.value)):
            cum += rng.exponential()
            last = _invert_levy_tail(spec, cum, scale + 1.0)
            if last <= 0:
                break
            atoms[next_id] = last
            next_id += 1
        cutoff = last if last is not None else 0.0
    else:
        cutoff = truncation.value
        while True:
            cum += rng.exponential()
            w = _invert_levy_tail(spec, cum, scale + 1.0)
            if w <= cutoff:
                break
            atoms[next_id] = w
            next_id += 1
    return AtomicMeasure(atoms, spec.expected_tail_mass(cutoff))


def simulate_crm(spec: CrmSpec, truncation: TruncationRule, rng,
                 method: str | None = None, start_id: int = 0) -> AtomicMeasure:
    """Draw a truncated realisation of the CRM.

    Parameters
    ----------
    spec : CrmSpec
    truncation : TruncationRule
        ``top_k(K)`` keeps K jumps; ``threshold(eps)`` keeps jumps above eps
        (for the size-biased method: until the remainder drops below eps).
    rng : numpy.random.Generator
    method : {"size-biased", "inverse-levy"}, optional
        ``size-biased`` (gamma-type intensities only) draws the exact
        Gamma(alpha, tau) total and splits it by stick-breaking, so totals
        are exactly distributed regardless of truncation.  ``inverse-levy``
        generates strictly decreasing jumps and carries the expected tail
        mass in ``residual_mass``.  Defaults to size-biased for gamma-type
        intensities, inverse-levy otherwise.
    start_id : int
        First item id to assign to generated atoms.
    """
    if method is None:
        method = "size-biased" if spec.is_gamma_type else "inverse-levy"
    if method == "size-biased":
        if not spec.is_gamma_type:
            raise ValueError("size-biased simulation is exact only for gamma-type "
                             "intensities; use method='inverse-levy'")
        return _simulate_size_biased(spec, truncation, rng, start_id)
    if method == "inverse-levy":
        return _simulate_inverse_levy(spec, truncation, rng, start_id)
    raise ValueError(f"unknown simulation method {method!r}")


def pitt_walker_forward(g0: AtomicMeasure, phi: float, spec: CrmSpec,
                        rng) -> tuple[CountMeasure, AtomicMeasure]:
    """Draw a child measure coupled to ``g0`` through Poisson counts.

    Each atom k of ``g0`` receives a count u_k ~ Poisson(phi * w_0k); the
    child's mass there is Gamma(u_k, tau + phi) when u_k > 0 and exactly 0
    otherwise.  The residual of ``g0`` receives u_* ~ Poisson(phi * w_0*),
    and the child's residual (coupled-tail plus fresh-atom component
    combined) is Gamma(alpha + u_*, tau + phi).  Marginally the child
    follows the same law as a Gamma(alpha, tau) process when ``g0`` does.
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    if not spec.is_gamma_type:
        raise ValueError("the Poisson-gamma coupling is defined for gamma-type "
                         "intensities only")
    rate = spec.tau + phi
    counts: Dict[int, int] = {}
    child_atoms: Dict[int, float] = {}
    for k in sorted(g0.atoms):
        u = int(rng.poisson(phi * g0.atoms[k]))
        counts[k] = u
        if u > 0:
            child_atoms[k] = rng.gamma(u, 1.0 / rate)
    u_star = int(rng.poisson(phi * g0.residual_mass))
    child_resid = rng.gamma(spec.alpha + u_star, 1.0 / rate)
    return CountMeasure(counts, u_star), AtomicMeasure(child_atoms, child_resid)
