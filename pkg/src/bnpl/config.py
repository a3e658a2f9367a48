"""Run configuration shared by the CLI and the programmatic drivers."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError

MODELS = ("single", "mixture", "general-crm")


@dataclass
class RunConfig:
    """Everything that determines a fit besides the data and the seed.

    ``alpha_prior`` etc. are (a, b) gamma-prior pairs; (0, 0) encodes the
    flat 1/x priors used by default.  Setting a prior to None fixes the
    corresponding hyperparameter at its initial value.
    """

    model: str = "single"
    alpha: float = 1.0
    tau: float = 1.0
    sigma: float = 0.0
    phi: float = 1.0
    gamma_dp: float = 1.0
    alpha_prior: tuple | None = (0.0, 0.0)
    gamma_prior: tuple | None = (0.0, 0.0)
    phi_prior: tuple | None = (0.0, 0.0)
    phi_step: float = 0.2
    u_sampler: str = "mh"
    iterations: int = 20000
    burnin: int = 10000
    thinning: int = 1
    seed: int | None = None
    strict_tau: bool = True

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.tau <= 0 and self.model != "general-crm":
            raise ConfigError("tau must be positive")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        if not (0.0 <= self.sigma < 1.0):
            raise ConfigError("sigma must lie in [0, 1)")
        if self.model == "mixture":
            if self.phi <= 0:
                raise ConfigError("phi must be positive")
            if self.gamma_dp <= 0:
                raise ConfigError("gamma must be positive")
            if self.strict_tau and self.tau != 1.0:
                raise ConfigError("the mixture sampler requires tau = 1 "
                                  "(pass --no-strict-tau to override)")
        if self.iterations <= self.burnin:
            raise ConfigError(f"iterations ({self.iterations}) must exceed "
                              f"burnin ({self.burnin})")
        if self.burnin < 0:
            raise ConfigError("burnin must be nonnegative")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if self.u_sampler not in ("mh", "exact"):
            raise ConfigError("u-sampler must be 'mh' or 'exact'")
        return self

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("alpha_prior", "gamma_prior", "phi_prior"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        for key in ("alpha_prior", "gamma_prior", "phi_prior"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def fingerprint(self) -> str:
        """Hash of everything except the seed (the seed is recorded alongside)."""
        payload = self.to_dict()
        payload.pop("seed")
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
