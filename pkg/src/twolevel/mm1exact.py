"""Exact stationary law of the two-level M/M/1 queue.

States: (1, l) and (2, l) for l = 0..n with n the threshold, and (3, l) for l > n.
Phase 2 marks that the last arrival came at rate lambda_2 while the queue sat at
or below n; the first arrival out of it lands in phase 1 (or above the threshold).
The tail p_{3,l} = rho22^{l-n-1} p_{3,n+1} is always handled analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import DomainError
from .model import QueueParams, traffic_quantities

MAX_THRESHOLD = 100_000


@dataclass(frozen=True)
class ChainSolution:
    n: int
    lam1: float
    lam2: float
    c1mu: float
    c2mu: float
    p1: np.ndarray
    p2: np.ndarray
    p3: float

    @property
    def rho22(self) -> float:
        return self.lam2 / self.c2mu

    @property
    def x(self) -> float:  # rho_11
        return self.lam1 / self.c1mu

    @property
    def g(self) -> float:  # gamma_12
        return self.c1mu / (self.c1mu + self.lam2)

    @property
    def q(self) -> float:  # rho_21
        return self.lam2 / self.c1mu

    def total_mass(self) -> float:
        return math.fsum(self.p1) + math.fsum(self.p2) + self.p3 / (1 - self.rho22)

    def p3_at(self, level: int) -> float:
        if level <= self.n:
            return 0.0
        return self.p3 * self.rho22 ** (level - self.n - 1)

    def marginal(self, upto: int) -> np.ndarray:
        """P(L = l) for l = 0..upto."""
        out = np.zeros(upto + 1)
        m = min(upto, self.n)
        out[: m + 1] = (self.p1 + self.p2)[: m + 1]
        if upto > self.n:
            j = np.arange(upto - self.n)
            out[self.n + 1:] = self.p3 * self.rho22**j
        return out

    def p_zero(self) -> float:
        return self.p1[0] + self.p2[0]

    def p_at_or_below(self) -> float:
        return math.fsum(self.p1) + math.fsum(self.p2)

    def mean_L(self) -> float:
        lv = np.arange(self.n + 1)
        rho = self.rho22
        tail = self.p3 * ((self.n + 1) / (1 - rho) + rho / (1 - rho) ** 2)
        return math.fsum(lv * (self.p1 + self.p2)) + tail

    def utilization(self) -> float:
        return 1.0 - self.p_zero()


def _rates(params: QueueParams):
    if not params.is_exponential:
        raise ValueError("the exact chain needs exponential arrivals and workload")
    if params.threshold > MAX_THRESHOLD:
        raise ValueError(f"threshold above {MAX_THRESHOLD}")
    lam1, lam2, mu, _, _ = traffic_quantities(params)
    return params.threshold, lam1, lam2, params.c1 * mu, params.c2 * mu


def _generator(n, lam1, lam2, c1mu, c2mu) -> np.ndarray:
    """Generator on {(1,l)} u {(2,l)} u {(3,n+1)}; the tail round trip is folded out."""
    m = 2 * n + 3
    i1 = lambda l: l
    i2 = lambda l: n + 1 + l
    i3 = 2 * n + 2
    Q = np.zeros((m, m))
    for l in range(n + 1):
        # arrivals
        Q[i1(l), i1(l + 1) if l < n else i3] += lam1
        Q[i2(l), i1(l + 1) if l < n else i3] += lam2
        # departures
        if l >= 1:
            Q[i1(l), i1(l - 1)] += c1mu
            Q[i2(l), i2(l - 1)] += c1mu
    Q[i3, i2(n)] += c2mu
    Q[np.diag_indices(m)] = -Q.sum(axis=1)
    return Q


def solve_dense(params: QueueParams) -> ChainSolution:
    """Brute-force oracle: one balance equation replaced by normalization."""
    n, lam1, lam2, c1mu, c2mu = _rates(params)
    Q = _generator(n, lam1, lam2, c1mu, c2mu)
    A = Q.T.copy()
    w = np.ones(2 * n + 3)
    w[-1] = 1.0 / (1.0 - lam2 / c2mu)
    A[-1, :] = w
    rhs = np.zeros(2 * n + 3)
    rhs[-1] = 1.0
    p = np.linalg.solve(A, rhs)
    if not np.all(np.isfinite(p)):
        raise np.linalg.LinAlgError("singular balance system")
    return ChainSolution(n, lam1, lam2, c1mu, c2mu, p[: n + 1].copy(), p[n + 1: 2 * n + 2].copy(),
                         float(p[-1]))


def solve_recursive(params: QueueParams) -> ChainSolution:
    """Explicit solution from the single free constant p_{2,n} (set to 1, normalized last).

    p_{2,l} = g^{n-l} P (1 <= l <= n), p_{2,0} = p_{2,1}/q, p_{3,n+1} = P/gamma22,
    p_{1,n} = P/x, and the p_1 column comes from x p_{1,k} - p_{1,k+1} = q S_k with
    S_k = sum_{l=1}^{k} p_{2,l-1}, run downward from k = n-1. Every term is positive.
    """
    n, lam1, lam2, c1mu, c2mu = _rates(params)
    x = lam1 / c1mu
    g = c1mu / (c1mu + lam2)
    q = lam2 / c1mu
    g22 = c2mu / (c1mu + lam2)
    P = 1.0
    p2 = np.empty(n + 1)
    p2[1:] = g ** np.arange(n - 1, -1, -1) * P
    p2[0] = p2[1] / q
    p3 = P / g22
    S = np.concatenate(([0.0], np.cumsum(p2[:n])))  # S[k] = sum_{l<k} p2[l]
    p1 = np.empty(n + 1)
    p1[n] = P / x
    for k in range(n - 1, -1, -1):
        p1[k] = (p1[k + 1] + q * S[k]) / x
    z = math.fsum(p1) + math.fsum(p2) + p3 / (1.0 - lam2 / c2mu)
    return ChainSolution(n, lam1, lam2, c1mu, c2mu, p1 / z, p2 / z, p3 / z)


def _geom(y: float, k: int) -> float:
    """sum_{j<k} y^j, zero for k <= 0."""
    if k <= 0:
        return 0.0
    d = y - 1.0
    if abs(d) < 1e-9:
        return k + k * (k - 1) / 2 * d + k * (k - 1) * (k - 2) / 6 * d * d
    return (y**k - 1.0) / d


def p1_closed(sol: ChainSolution, k: int) -> float:
    """Closed form of p_{1,k} in terms of p_{1,0} and p_{2,n} (cross-check of the recursion).

    p_{1,k} = x^k p_{1,0} - g^{n-1} P G(x, k-1)
              - (q P/(1-g)) [g^{n-k+2} G(xg, k-2) - g^n G(x, k-2)],  G(y, m) = sum_{j<m} y^j.
    """
    x, g, q, n = sol.x, sol.g, sol.q, sol.n
    P = sol.p2[n]
    if k == 0:
        return sol.p1[0]
    b = q * P / (1 - g)
    return (x**k * sol.p1[0] - g ** (n - 1) * P * _geom(x, k - 1)
            - b * (g ** (n - k + 2) * _geom(x * g, k - 2) - g**n * _geom(x, k - 2)))


def balance_residuals(sol: ChainSolution, relative: bool = False) -> np.ndarray:
    """Residuals of every stationary equation, tail equation included.

    Default scale is the total rate (a flux error); relative=True divides by the larger side.
    """
    n, l1, l2, a, c = sol.n, sol.lam1, sol.lam2, sol.c1mu, sol.c2mu
    p1, p2, p3 = sol.p1, sol.p2, sol.p3
    scale = l1 + l2 + a + c
    res = []

    def rel(lhs, rhs):
        den = max(abs(lhs), abs(rhs), 1e-300) if relative else scale
        res.append(abs(lhs - rhs) / den)

    rel(l1 * p1[0], a * p1[1] if n >= 1 else 0.0)
    for l in range(1, n):
        rel((l1 + a) * p1[l], l1 * p1[l - 1] + a * p1[l + 1] + l2 * p2[l - 1])
    rel((l1 + a) * p1[n], l1 * p1[n - 1] + l2 * p2[n - 1])
    rel(l2 * p2[0], a * p2[1])
    for l in range(1, n):
        rel((l2 + a) * p2[l], a * p2[l + 1])
    rel((l2 + a) * p2[n], c * p3)
    rel((l2 + c) * p3, l1 * p1[n] + l2 * p2[n] + c * sol.p3_at(n + 2))
    for lev in (n + 2, n + 5):
        rel(l2 * sol.p3_at(lev), c * sol.p3_at(lev + 1))
    return np.array(res)


# --------------------------------------------------------------- generating functions


def _hsum(z: float, g: float, m: int) -> float:
    """sum_{j=0}^{m} z^j g^{m-j}."""
    if m < 0:
        return 0.0
    if abs(z - g) < 1e-6 * max(z, g):
        return float(np.sum(z ** np.arange(m + 1) * g ** np.arange(m, -1, -1)))
    return (z ** (m + 1) - g ** (m + 1)) / (z - g)


def _geom_exp(u: float, k: int) -> float:
    """sum_{j<k} e^{u j}."""
    if u == 0:
        return float(k)
    return math.expm1(k * u) / math.expm1(u)


def mgf_direct(sol: ChainSolution, r: float, theta: float) -> tuple[float, float, float, float]:
    """Direct summation oracle for (g1, g2, g3, g)."""
    z = math.exp(r * theta)
    if z * sol.rho22 >= 1:
        raise DomainError("e^{r theta} rho22 >= 1")
    w = z ** np.arange(sol.n + 1)
    g1 = math.fsum(w * sol.p1)
    g2 = math.fsum(w * sol.p2)
    g3 = z ** (sol.n + 1) * sol.p3 / (1 - z * sol.rho22)
    return g1, g2, g3, g1 + g2 + g3


def mgf_closed(sol: ChainSolution, r: float, theta: float) -> tuple[float, float, float, float]:
    """Closed forms of g_j(theta) = sum_l e^{r theta l} p_{j,l}."""
    u = r * theta
    z = math.exp(u)
    n, x, g, q = sol.n, sol.x, sol.g, sol.q
    if z * sol.rho22 >= 1:
        raise DomainError("e^{r theta} rho22 >= 1")
    P = sol.p2[n]
    g3 = z ** (n + 1) * sol.p3 / (1 - z * sol.rho22)
    g2 = (g ** (n - 1) / q + z * _hsum(z, g, n - 1)) * P
    if abs(x * z - 1) < 1e-6:
        g1 = math.fsum(z ** np.arange(n + 1) * sol.p1)
    else:
        gz = _geom_exp(u, n) - 1.0  # sum_{k=1}^{n-1} z^k
        t = sol.p2[0] * gz + P / (1 - g) * (z * g * g * _hsum(z, g, n - 2) - g**n * gz)
        g1 = (x * z ** (n + 1) * sol.p1[n] - sol.p1[0] + q * z * t) / (x * z - 1)
    return g1, g2, g3, g1 + g2 + g3


# ------------------------------------------------------------------ scaled law and limits


@dataclass(frozen=True)
class LatticeLaw:
    """Law of r L on the lattice r*{0, 1, ...}."""

    r: float
    pmf: np.ndarray

    @property
    def atoms(self) -> np.ndarray:
        return self.r * np.arange(len(self.pmf))

    def cdf(self, x):
        cum = np.cumsum(self.pmf)
        idx = np.floor(np.asarray(x, dtype=float) / self.r + 1e-9).astype(int)
        out = np.where(idx < 0, 0.0, cum[np.clip(idx, 0, len(cum) - 1)])
        return np.where(idx >= len(cum), 1.0, out)


def scaled_distribution(sol: ChainSolution, r: float) -> LatticeLaw:
    """Law of r L, truncated once the cumulative mass passes 1 - 1e-12."""
    head = sol.p1 + sol.p2
    rest = 1.0 - math.fsum(head)
    rho = sol.rho22
    extra = 0
    if rest > 1e-12:
        # p3 rho^j / (1-rho) summed to J-1 leaves p3 rho^J/(1-rho)
        extra = int(math.ceil(math.log(1e-12 * (1 - rho) / sol.p3) / math.log(rho))) + 1
        extra = max(extra, 1)
    tail = sol.p3 * rho ** np.arange(extra)
    return LatticeLaw(r, np.concatenate((head, tail)))


def boundary_ratios(sol: ChainSolution) -> tuple[float, float, float]:
    n = sol.n
    return sol.p2[n] / sol.p1[n], sol.p3 / sol.p1[n], sol.p1[0] / sol.p1[n]


def boundary_ratio_limits(lam1: float, lam2: float, beta1: float, ell1: float):
    k = (lam1 + lam2) / lam2
    return 1.0, k, k * math.exp(beta1 * ell1)


def p1ell_scaled(sol: ChainSolution, r: float) -> float:
    return sol.p1[sol.n] / r


def p1ell_limit(lam1: float, lam2: float, beta1: float, beta2: float, ell1: float) -> float:
    return lam2 * beta1 * beta2 / ((lam1 + lam2) * (beta1 + beta2 * math.expm1(beta1 * ell1)))
