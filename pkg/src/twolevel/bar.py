"""Test-function exponents eta/zeta, their expansions, and limit stationary-equation residuals."""

from __future__ import annotations

import dataclasses
import math

from scipy import optimize

from . import dists
from .dists import DistributionSpec, DomainError, truncated_laplace
from .limits import LimitDistribution, mgf_cond


def _domain_floor(spec: DistributionSpec, cap: float) -> float:
    """Infimum of s with a finite transform."""
    if not math.isinf(cap) or spec.family in ("deterministic", "uniform"):
        return -math.inf
    if spec.family == "hyperexponential":
        return -min(spec.params["rates"])
    return -spec.params["rate"]


def _solve(spec: DistributionSpec, sign: float, theta: float, cap: float) -> float:
    """Root s of e^{sign*theta} E[e^{-s (T ^ cap)}] = 1; the transform is decreasing in s."""
    if theta == 0:
        return 0.0
    target = math.exp(-sign * theta)

    def f(s):
        return truncated_laplace(spec, s, cap) - target

    step = (abs(theta) + 1.0) / dists.mean(spec)
    floor = _domain_floor(spec, cap)
    hi = step
    while f(hi) >= 0:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("no sign change above")
    lo = max(-step, 0.5 * floor) if math.isfinite(floor) else -step
    for _ in range(2000):
        if f(lo) > 0:
            break
        lo = 0.5 * (lo + floor) if math.isfinite(floor) else 2.0 * lo
    else:
        raise DomainError("no sign change: transform diverges before the root")
    s = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    # one Newton polish, derivative by a central difference
    h = 1e-7 * max(1.0, abs(s))
    if math.isfinite(floor) and s - h <= floor:
        return s
    d = (f(s + h) - f(s - h)) / (2 * h)
    if d != 0:
        s2 = s - f(s) / d
        if abs(f(s2)) < abs(f(s)):
            s = s2
    return s


def solve_eta(spec: DistributionSpec, theta: float, cap: float = math.inf) -> float:
    """eta with e^theta E[e^{-eta (T ^ cap)}] = 1."""
    return _solve(spec, 1.0, theta, cap)


def solve_zeta(spec: DistributionSpec, theta: float, cap: float = math.inf) -> float:
    """zeta with e^{-theta} E[e^{-zeta (T ^ cap)}] = 1."""
    return _solve(spec, -1.0, theta, cap)


def taylor_exponent(spec: DistributionSpec, role: str, theta: float, r: float) -> float:
    """Second-order expansion: lam r theta + lam^3 sd^2 (r theta)^2/2, or the service mirror."""
    rate = 1.0 / dists.mean(spec)
    var = dists.moments(spec)[1]
    u = r * theta
    if role == "service":
        return -rate * u + 0.5 * rate**3 * var * u * u
    if role in ("arrival", "arrival1", "arrival2"):
        return rate * u + 0.5 * rate**3 * var * u * u
    raise ValueError("role must be 'arrival' or 'service'")


def expansion_error(spec: DistributionSpec, role: str, theta: float, r: float) -> float:
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    if theta == 0:
        return 0.0
    solver = solve_zeta if role == "service" else solve_eta
    return abs(solver(spec, r * theta, 1.0 / r) - taylor_exponent(spec, role, theta, r))


@dataclasses.dataclass(frozen=True)
class ExponentPair:
    theta: float
    eta1: float
    eta2: float
    zeta: float
    cap: float


def exponents(arrival_below, arrival_above, workload, theta: float, r: float) -> ExponentPair:
    """Exponents at the scaled argument r*theta, with cap 1/r."""
    cap = 1.0 / r
    u = r * theta
    return ExponentPair(theta, solve_eta(arrival_below, u, cap), solve_eta(arrival_above, u, cap),
                        solve_zeta(workload, u, cap), cap)


def test_function(theta1: float, theta2: float, r: float, exps: tuple[ExponentPair, ExponentPair],
                  state: tuple[float, float, float], ell: int) -> float:
    """f(z, x1, x2) = sum_i e^{r theta_i z} exp(-eta_i x1^ - zeta(theta_i) x2^) 1(z in region i).

    exps[i] must be solved at theta_i; z is the unscaled queue length.
    """
    z, x1, x2 = state
    e1, e2 = exps
    cap = 1.0 / r
    x1c, x2c = min(x1, cap), min(x2, cap)
    if z <= ell:
        return math.exp(r * theta1 * z - e1.eta1 * x1c - e1.zeta * x2c)
    return math.exp(r * theta2 * z - e2.eta2 * x1c - e2.zeta * x2c)


def _with_small_b1(ld: LimitDistribution) -> LimitDistribution:
    return dataclasses.replace(ld, b1=1e-8) if ld.b1 == 0 else ld


def limit_bar_residual(ld: LimitDistribution, theta1: float, theta2: float) -> float:
    """Absolute left side of the limit stationary equation with independent theta_1, theta_2 <= 0."""
    if theta2 > 0:
        raise DomainError("theta2 must be <= 0")
    ld = _with_small_b1(ld)
    a1, a2 = ld.A
    b1, b2, c1, c2 = ld.b1, ld.b2, ld.c1, ld.c2
    s1, s2, ell = ld.sigma1_sq, ld.sigma2_sq, ld.ell1
    be1, be2 = ld.beta1, ld.beta2
    phi1 = a1 * mgf_cond(ld, 1, theta1)
    phi2 = a2 * mgf_cond(ld, 2, theta2)
    em1 = math.expm1(be1 * ell)
    k1 = theta1 * c1 * s1 / 2 * a1
    val = ((-b1 * theta1 + 0.5 * c1 * s1 * theta1**2) * phi1
           + (-b2 * theta2 + 0.5 * c2 * s2 * theta2**2) * phi2
           + be1 * math.exp(be1 * ell) / em1 * k1
           - be1 * math.exp(theta1 * ell) / em1 * k1
           + be2 * math.exp(theta2 * ell) * theta2 * c2 * s2 / 2 * a2)
    return abs(val)


def diffusion_bar_residual(ld: LimitDistribution, theta: float) -> float:
    """Absolute left side of the reflected-diffusion stationary equation at theta_1 = theta_2."""
    ld = _with_small_b1(ld)
    a1, a2 = ld.A
    be1 = ld.beta1
    phi1 = a1 * mgf_cond(ld, 1, theta)
    phi2 = a2 * mgf_cond(ld, 2, theta)
    val = ((-ld.b1 * theta + 0.5 * ld.c1 * ld.sigma1_sq * theta**2) * phi1
           + (-ld.b2 * theta + 0.5 * ld.c2 * ld.sigma2_sq * theta**2) * phi2
           + be1 * math.exp(be1 * ld.ell1) / math.expm1(be1 * ld.ell1)
           * theta * ld.c1 * ld.sigma1_sq / 2 * a1)
    return abs(val)
