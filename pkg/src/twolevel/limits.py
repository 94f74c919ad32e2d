"""Heavy-traffic limit objects: constants, conditional densities, weights and the mixture law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import DomainError, RngStream, expm1_over


def _expm1_minus_x(y: float) -> float:
    # e^y - 1 - y without cancellation near 0
    if abs(y) < 1e-3:
        return y * y * (0.5 + y * (1 / 6 + y * (1 / 24 + y / 120)))
    return math.expm1(y) - y


def sigma_beta(lam: float, sigma_e: float, mu: float, sigma_s: float,
               c: float, b: float) -> tuple[float, float]:
    """sigma^2 = lam^2 sigma_e^2 + mu^2 sigma_s^2 and beta = 2b/(c sigma^2)."""
    s2 = lam * lam * sigma_e * sigma_e + mu * mu * sigma_s * sigma_s
    return s2, 2.0 * b / (c * s2)


def density_below(x, beta1: float, ell1: float, b1_is_zero: bool | None = None):
    x = np.asarray(x, dtype=float)
    zero = beta1 == 0 if b1_is_zero is None else b1_is_zero
    inside = (x >= 0) & (x <= ell1)
    if zero:
        val = np.full_like(x, 1.0 / ell1)
    else:
        val = np.exp(-beta1 * np.clip(x, 0.0, ell1)) / (ell1 * expm1_over(-beta1 * ell1))
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def density_above(x, beta2: float, ell1: float):
    x = np.asarray(x, dtype=float)
    out = np.where(x > ell1, beta2 * np.exp(-beta2 * np.maximum(x - ell1, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def weights(b1: float, b2: float, c1: float, c2: float, sigma1_sq: float,
            ell1: float) -> tuple[float, float]:
    if not b2 > 0:
        raise ValueError("b2 must be positive")
    if b1 == 0:
        a1 = 2 * b2 * ell1 / (c2 * sigma1_sq + 2 * b2 * ell1)
    else:
        e = math.expm1(2 * b1 / (c1 * sigma1_sq) * ell1)
        a1 = c1 * b2 * e / (c2 * b1 + c1 * b2 * e)
    return a1, 1.0 - a1


def exp_weights(beta1: float, beta2: float, ell1: float, b1_is_zero: bool) -> tuple[float, float]:
    """Weights of the exponential model, where sigma_i^2 = 2 and beta_i = b_i/c_i."""
    if b1_is_zero:
        a1 = beta2 * ell1 / (1 + beta2 * ell1)
    else:
        e = math.expm1(beta1 * ell1)
        a1 = beta2 * e / (beta1 + beta2 * e)
    return a1, 1.0 - a1


def alpha_limit(lam1: float, lam2: float, a1: float, a2: float) -> float:
    return lam1 * a1 + lam2 * a2


def mean_L_limit(b1: float, b2: float, c1: float, c2: float, sigma1_sq: float,
                 sigma2_sq: float, ell1: float) -> float:
    """Limit of (1 - rho) E[L], i.e. lim P(L=0)/r times lim E[rL]."""
    if b1 == 0:
        k = 2 * b2 * ell1 + c2 * sigma1_sq
        return sigma1_sq * (2 * b2 * ell1 * (b2 * ell1 + c2 * sigma1_sq)
                            + c2 * c2 * sigma1_sq * sigma2_sq) / (2 * k * k)
    y = 2 * b1 / (c1 * sigma1_sq) * ell1
    e = math.expm1(y)
    d = c2 * b1 + c1 * b2 * e
    n = (c1 * c1 * b2 * b2 * sigma1_sq * _expm1_minus_x(y)
         + 2 * b1 * b1 * b2 * c2 * ell1 + c2 * c2 * b1 * b1 * sigma2_sq)
    return math.exp(y) * n / (2 * d * d)


@dataclass(frozen=True)
class LimitDistribution:
    ell1: float
    b1: float
    b2: float
    c1: float
    c2: float
    mu: float
    sigma1_sq: float
    sigma2_sq: float

    def __post_init__(self):
        if not self.b2 > 0:
            raise ValueError("b2 must be positive")
        if not (self.ell1 > 0 and self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ValueError("ell1 and variances must be positive")

    @property
    def beta1(self) -> float:
        return 2 * self.b1 / (self.c1 * self.sigma1_sq)

    @property
    def beta2(self) -> float:
        return 2 * self.b2 / (self.c2 * self.sigma2_sq)

    @property
    def b1_is_zero(self) -> bool:
        return self.b1 == 0

    @property
    def A(self) -> tuple[float, float]:
        return weights(self.b1, self.b2, self.c1, self.c2, self.sigma1_sq, self.ell1)

    @property
    def lam(self) -> tuple[float, float]:
        return self.c1 * self.mu, self.c2 * self.mu


def cdf_below(ld: LimitDistribution, x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, ld.ell1)
    if ld.b1_is_zero:
        return x / ld.ell1
    b = ld.beta1
    num = x * np.vectorize(lambda t: expm1_over(-b * t))(x)
    return num / (ld.ell1 * expm1_over(-b * ld.ell1))


def cdf_above(ld: LimitDistribution, x):
    x = np.asarray(x, dtype=float)
    return np.where(x > ld.ell1, -np.expm1(-ld.beta2 * np.maximum(x - ld.ell1, 0.0)), 0.0)


def mixture_cdf(ld: LimitDistribution, x):
    a1, a2 = ld.A
    out = a1 * cdf_below(ld, x) + a2 * cdf_above(ld, x)
    out = np.where(np.asarray(x) < 0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def mixture_pdf(ld: LimitDistribution, x):
    a1, a2 = ld.A
    return (a1 * density_below(x, ld.beta1, ld.ell1, ld.b1_is_zero)
            + a2 * density_above(x, ld.beta2, ld.ell1))


def mean_below(ld: LimitDistribution) -> float:
    if ld.b1_is_zero:
        return ld.ell1 / 2
    y = ld.beta1 * ld.ell1
    return ld.ell1 * _expm1_minus_x(y) / (y * math.expm1(y))


def mixture_mean(ld: LimitDistribution) -> float:
    a1, a2 = ld.A
    return a1 * mean_below(ld) + a2 * (ld.ell1 + 1.0 / ld.beta2)


def p0_over_r_limit(ld: LimitDistribution) -> float:
    """Limit of P(L=0)/r."""
    if ld.b1_is_zero:
        return ld.sigma1_sq * ld.b2 / (ld.c2 * ld.sigma1_sq + 2 * ld.b2 * ld.ell1)
    y = ld.beta1 * ld.ell1
    d = ld.c2 * ld.b1 + ld.c1 * ld.b2 * math.expm1(y)
    return ld.b1 * ld.b2 * math.exp(y) / d


def mgf_cond(ld: LimitDistribution, i: int, theta: float) -> float:
    """Conditional MGF of the i-th component."""
    ell = ld.ell1
    if i == 1:
        if ld.b1_is_zero:
            return expm1_over(theta * ell)
        b = ld.beta1
        return math.exp(theta * ell) * expm1_over((b - theta) * ell) / expm1_over(b * ell)
    if i == 2:
        if theta >= ld.beta2:
            raise DomainError("theta must be < beta2")
        return math.exp(theta * ell) * ld.beta2 / (ld.beta2 - theta)
    raise ValueError("i must be 1 or 2")


def mixture_mgf(ld: LimitDistribution, theta: float) -> float:
    a1, a2 = ld.A
    return a1 * mgf_cond(ld, 1, theta) + a2 * mgf_cond(ld, 2, theta)


def sample_mixture(ld: LimitDistribution, stream: RngStream, n: int) -> np.ndarray:
    """Component by weight, then inverse CDF within the component."""
    g = stream.gen
    a1, _ = ld.A
    u = g.random((n, 2))
    low = u[:, 0] < a1
    if ld.b1_is_zero:
        x1 = ld.ell1 * u[:, 1]
    else:
        b = ld.beta1
        x1 = -np.log1p(u[:, 1] * math.expm1(-b * ld.ell1)) / b
    x2 = ld.ell1 - np.log1p(-u[:, 1]) / ld.beta2
    return np.where(low, x1, x2)
