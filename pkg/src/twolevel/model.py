"""One r-th two-level queue and the heavy-traffic family that generates the sequence."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from . import dists
from .dists import DistributionSpec


@dataclass(frozen=True)
class QueueParams:
    threshold: int
    arrival_below: DistributionSpec
    arrival_above: DistributionSpec
    workload: DistributionSpec
    c1: float
    c2: float

    def __post_init__(self):
        if int(self.threshold) != self.threshold or self.threshold < 1:
            raise ValueError("threshold must be an integer >= 1")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("service speeds must be positive")
        lam2 = 1.0 / dists.mean(self.arrival_above)
        mu = 1.0 / dists.mean(self.workload)
        if not lam2 / (self.c2 * mu) < 1.0:
            raise ValueError("rho_2 = lambda_2/(c_2 mu) must be < 1")

    @property
    def is_exponential(self) -> bool:
        return all(d.family == "exponential"
                   for d in (self.arrival_below, self.arrival_above, self.workload))


def traffic_quantities(p: QueueParams) -> tuple[float, float, float, float, float]:
    """(lambda_1, lambda_2, mu, rho_1, rho_2)."""
    lam1 = 1.0 / dists.mean(p.arrival_below)
    lam2 = 1.0 / dists.mean(p.arrival_above)
    mu = 1.0 / dists.mean(p.workload)
    return lam1, lam2, mu, lam1 / (p.c1 * mu), lam2 / (p.c2 * mu)


@dataclass(frozen=True)
class HeavyTrafficFamily:
    """Limit data plus shape templates; lambda_i = c_i mu at the limit."""

    mu: float
    c1: float
    c2: float
    b1: float
    b2: float
    ell1: float
    arrival_below: DistributionSpec = dists.exponential(1.0)
    arrival_above: DistributionSpec = dists.exponential(1.0)
    workload: DistributionSpec = dists.exponential(1.0)

    def __post_init__(self):
        if not self.b2 > 0:
            raise ValueError("b2 must be positive")
        if not (self.mu > 0 and self.c1 > 0 and self.c2 > 0 and self.ell1 > 0):
            raise ValueError("mu, c1, c2, ell1 must be positive")
        if self.lam1 == self.lam2:
            s1 = dists.scv(self.arrival_below)
            s2 = dists.scv(self.arrival_above)
            if abs(s1 - s2) > 1e-12:
                warnings.warn("lambda_1 == lambda_2 but arrival variances differ", stacklevel=2)

    @property
    def lam1(self) -> float:
        return self.c1 * self.mu

    @property
    def lam2(self) -> float:
        return self.c2 * self.mu

    def limit_sigmas(self) -> tuple[float, float, float]:
        """Limit (sigma_e1, sigma_e2, sigma_s) with SCV held fixed."""
        se1 = math.sqrt(dists.scv(self.arrival_below)) / self.lam1
        se2 = math.sqrt(dists.scv(self.arrival_above)) / self.lam2
        ss = math.sqrt(dists.scv(self.workload)) / self.mu
        return se1, se2, ss

    def limit_distribution(self):
        from .limits import LimitDistribution, sigma_beta

        se1, se2, ss = self.limit_sigmas()
        s1, _ = sigma_beta(self.lam1, se1, self.mu, ss, self.c1, self.b1)
        s2, _ = sigma_beta(self.lam2, se2, self.mu, ss, self.c2, self.b2)
        return LimitDistribution(self.ell1, self.b1, self.b2, self.c1, self.c2, self.mu, s1, s2)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu, "c1": self.c1, "c2": self.c2,
            "b1": self.b1, "b2": self.b2, "ell1": self.ell1,
            "arrival_below": self.arrival_below.to_dict(),
            "arrival_above": self.arrival_above.to_dict(),
            "workload": self.workload.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeavyTrafficFamily":
        allowed = {"mu", "c1", "c2", "b1", "b2", "ell1",
                   "arrival_below", "arrival_above", "workload"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown family fields: {sorted(unknown)}")
        kw = {k: float(d[k]) for k in ("mu", "c1", "c2", "b1", "b2", "ell1")}
        for k in ("arrival_below", "arrival_above", "workload"):
            if k in d:
                kw[k] = DistributionSpec.from_dict(d[k])
        return cls(**kw)


def instantiate(fam: HeavyTrafficFamily, r: float) -> QueueParams:
    """r-th system: lambda_i = c_i mu - r mu b_i exactly, threshold round(ell1/r)."""
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    lam1 = fam.c1 * fam.mu - r * fam.mu * fam.b1
    lam2 = fam.c2 * fam.mu - r * fam.mu * fam.b2
    if lam1 <= 0 or lam2 <= 0:
        raise ValueError(f"r={r} gives a nonpositive arrival rate")
    ell = int(round(fam.ell1 / r))
    if ell < 1:
        raise ValueError(f"r={r} gives threshold < 1")
    return QueueParams(
        threshold=ell,
        arrival_below=dists.scale_to_mean(fam.arrival_below, 1.0 / lam1),
        arrival_above=dists.scale_to_mean(fam.arrival_above, 1.0 / lam2),
        workload=dists.scale_to_mean(fam.workload, 1.0 / fam.mu),
        c1=fam.c1,
        c2=fam.c2,
    )


def exponential_params(ell: int, lam1: float, lam2: float, mu: float,
                       c1: float = 1.0, c2: float = 1.0) -> QueueParams:
    return QueueParams(ell, dists.exponential(lam1), dists.exponential(lam2),
                       dists.exponential(mu), c1, c2)
