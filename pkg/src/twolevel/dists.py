"""Nonnegative distribution specs: moments, sampling, truncated Laplace transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

FAMILIES = ("exponential", "deterministic", "erlang", "hyperexponential", "uniform")


class DomainError(ValueError):
    """Raised when a transform or root is requested outside its domain."""


def expm1_over(y: float) -> float:
    """(e^y - 1)/y, with the removable point at 0 filled in."""
    if abs(y) < 1e-6:
        return 1.0 + y / 2.0 + y * y / 6.0
    return math.expm1(y) / y


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        f = self.family
        if f not in FAMILIES:
            raise ValueError(f"unknown family {f!r}")
        expected = {
            "exponential": {"rate"},
            "deterministic": {"value"},
            "erlang": {"shape", "rate"},
            "hyperexponential": {"probs", "rates"},
            "uniform": {"a", "b"},
        }[f]
        if set(p) != expected:
            raise ValueError(f"{f} needs params {sorted(expected)}, got {sorted(p)}")
        if f == "exponential" and not p["rate"] > 0:
            raise ValueError("rate must be positive")
        if f == "deterministic" and not p["value"] > 0:
            raise ValueError("value must be positive")
        if f == "erlang":
            k = p["shape"]
            if int(k) != k or k < 1 or not p["rate"] > 0:
                raise ValueError("erlang needs integer shape >= 1 and positive rate")
            object.__setattr__(self, "params", {"shape": int(k), "rate": float(p["rate"])})
        if f == "hyperexponential":
            probs = tuple(float(x) for x in p["probs"])
            rates = tuple(float(x) for x in p["rates"])
            if len(probs) != len(rates) or not probs:
                raise ValueError("probs and rates must have equal nonzero length")
            if min(probs) <= 0 or min(rates) <= 0 or abs(sum(probs) - 1.0) > 1e-12:
                raise ValueError("probs must be positive and sum to 1, rates positive")
            object.__setattr__(self, "params", {"probs": probs, "rates": rates})
        if f == "uniform" and not (0 <= p["a"] < p["b"]):
            raise ValueError("uniform needs 0 <= a < b")

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    def to_dict(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        return {"family": self.family, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        if set(d) != {"family", "params"}:
            raise ValueError(f"distribution needs exactly 'family' and 'params', got {sorted(d)}")
        return cls(d["family"], dict(d["params"]))


def exponential(rate: float) -> DistributionSpec:
    return DistributionSpec("exponential", {"rate": rate})


def deterministic(value: float) -> DistributionSpec:
    return DistributionSpec("deterministic", {"value": value})


def erlang(shape: int, rate: float) -> DistributionSpec:
    return DistributionSpec("erlang", {"shape": shape, "rate": rate})


def hyperexponential(probs, rates) -> DistributionSpec:
    return DistributionSpec("hyperexponential", {"probs": tuple(probs), "rates": tuple(rates)})


def uniform(a: float, b: float) -> DistributionSpec:
    return DistributionSpec("uniform", {"a": a, "b": b})


def raw_moment(spec: DistributionSpec, k: int) -> float:
    p = spec.params
    f = spec.family
    if f == "exponential":
        return math.factorial(k) / p["rate"] ** k
    if f == "deterministic":
        return p["value"] ** k
    if f == "erlang":
        n = p["shape"]
        return math.prod(range(n, n + k)) / p["rate"] ** k
    if f == "hyperexponential":
        return sum(q * math.factorial(k) / lam**k for q, lam in zip(p["probs"], p["rates"]))
    a, b = p["a"], p["b"]
    return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))


def moments(spec: DistributionSpec) -> tuple[float, float, float]:
    """(mean, variance, third raw moment)."""
    m1 = raw_moment(spec, 1)
    var = max(raw_moment(spec, 2) - m1 * m1, 0.0)
    if spec.family == "deterministic":
        var = 0.0
    elif spec.family == "exponential":
        var = m1 * m1
    elif spec.family == "erlang":
        var = spec.params["shape"] / spec.params["rate"] ** 2
    elif spec.family == "uniform":
        var = (spec.params["b"] - spec.params["a"]) ** 2 / 12.0
    return m1, var, raw_moment(spec, 3)


def mean(spec: DistributionSpec) -> float:
    return raw_moment(spec, 1)


def std(spec: DistributionSpec) -> float:
    return math.sqrt(moments(spec)[1])


def scv(spec: DistributionSpec) -> float:
    m, v, _ = moments(spec)
    return v / (m * m)


def scale_to_mean(spec: DistributionSpec, new_mean: float) -> DistributionSpec:
    """Rescale T -> aT so the mean becomes new_mean; the SCV is unchanged."""
    if not new_mean > 0:
        raise ValueError("new_mean must be positive")
    a = new_mean / mean(spec)
    p = spec.params
    f = spec.family
    if f == "exponential":
        return exponential(p["rate"] / a)
    if f == "deterministic":
        return deterministic(new_mean)
    if f == "erlang":
        return erlang(p["shape"], p["rate"] / a)
    if f == "hyperexponential":
        return hyperexponential(p["probs"], [lam / a for lam in p["rates"]])
    return uniform(p["a"] * a, p["b"] * a)


# ---------------------------------------------------------------- sampling


class RngStream:
    """Counter-based stream keyed by (seed, stream_id).

    Draws are sequential, so the n-th value does not depend on how draws are chunked.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.Philox(ss))


def sample(spec: DistributionSpec, stream: RngStream, size: int | None = None):
    """Draw from spec. Returns a float when size is None, else an array."""
    n = 1 if size is None else int(size)
    g = stream.gen
    p = spec.params
    f = spec.family
    if f == "exponential":
        out = g.standard_exponential(n) / p["rate"]
    elif f == "deterministic":
        out = np.full(n, float(p["value"]))
    elif f == "erlang":
        out = g.standard_exponential((n, p["shape"])).sum(axis=1) / p["rate"]
    elif f == "hyperexponential":
        u = g.random((n, 2))
        cum = np.cumsum(p["probs"])
        branch = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), len(cum) - 1)
        out = -np.log1p(-u[:, 1]) / np.asarray(p["rates"])[branch]
    else:
        out = p["a"] + (p["b"] - p["a"]) * g.random(n)
    return float(out[0]) if size is None else out


# ------------------------------------------------------- Laplace transforms


def _exp_trunc(rate: float, s: float, cap: float) -> float:
    # E[e^{-s(T ^ cap)}] for T ~ Exp(rate)
    a = rate + s
    if math.isinf(cap):
        if a <= 0:
            raise DomainError("transform diverges: s <= -rate with infinite cap")
        return rate / a
    return rate * cap * expm1_over(-a * cap) + math.exp(-a * cap)


def _erlang_trunc(k: int, rate: float, s: float, cap: float) -> float:
    a = rate + s
    if math.isinf(cap):
        if a <= 0:
            raise DomainError("transform diverges: s <= -rate with infinite cap")
        return (rate / a) ** k
    # tail: e^{-s cap} P(T > cap)
    j = np.arange(k)
    tail = math.exp(-a * cap) * float(np.sum((rate * cap) ** j / special.factorial(j)))
    if a > 0:
        body = (rate / a) ** k * special.gammainc(k, a * cap)
    else:
        # positive-term series of rate^k/(k-1)! * int_0^cap t^{k-1} e^{-a t} dt
        b = -a
        body, term, m = 0.0, 1.0, 0
        while True:
            add = term / (m + k)
            body += add
            if add < 1e-17 * body and m > b * cap:
                break
            m += 1
            term *= b * cap / m
        body *= (rate * cap) ** k / math.factorial(k - 1)
    return float(body + tail)


def _uniform_trunc(a: float, b: float, s: float, cap: float) -> float:
    if cap <= a:
        return math.exp(-s * cap)
    hi = min(b, cap)
    body = (hi - a) * math.exp(-s * a) * expm1_over(-s * (hi - a)) / (b - a)
    tail = math.exp(-s * cap) * max(b - cap, 0.0) / (b - a)
    return body + tail


def truncated_laplace(spec: DistributionSpec, s: float, cap: float = math.inf) -> float:
    """E[exp(-s (T ^ cap))]."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    if s == 0:
        return 1.0
    p = spec.params
    f = spec.family
    if f == "exponential":
        return _exp_trunc(p["rate"], s, cap)
    if f == "deterministic":
        return math.exp(-s * min(p["value"], cap))
    if f == "erlang":
        return _erlang_trunc(p["shape"], p["rate"], s, cap)
    if f == "hyperexponential":
        return sum(q * _exp_trunc(lam, s, cap) for q, lam in zip(p["probs"], p["rates"]))
    return _uniform_trunc(p["a"], p["b"], s, cap)


def truncated_laplace_quad(spec: DistributionSpec, s: float, cap: float) -> float:
    """Quadrature version of truncated_laplace for continuous families (test oracle)."""
    f = spec.family
    p = spec.params
    if f == "exponential":
        pdf = lambda t: p["rate"] * math.exp(-p["rate"] * t)
        sf = math.exp(-p["rate"] * cap)
    elif f == "erlang":
        k, lam = p["shape"], p["rate"]
        pdf = lambda t: lam**k * t ** (k - 1) * math.exp(-lam * t) / math.factorial(k - 1)
        sf = special.gammaincc(k, lam * cap)
    elif f == "hyperexponential":
        pdf = lambda t: sum(q * lam * math.exp(-lam * t) for q, lam in zip(p["probs"], p["rates"]))
        sf = sum(q * math.exp(-lam * cap) for q, lam in zip(p["probs"], p["rates"]))
    elif f == "uniform":
        a, b = p["a"], p["b"]
        pdf = lambda t: 1.0 / (b - a) if a <= t <= b else 0.0
        sf = min(max((b - cap) / (b - a), 0.0), 1.0)
    else:
        raise ValueError("quadrature oracle needs a continuous family")
    pts = [p["a"], p["b"]] if f == "uniform" else None
    val, _ = integrate.quad(lambda t: math.exp(-s * t) * pdf(t), 0.0, cap,
                            points=[x for x in (pts or []) if x < cap] or None,
                            epsabs=0, epsrel=1e-13, limit=200)
    return val + math.exp(-s * cap) * sf


def truncated_moment(spec: DistributionSpec, k: int, cap: float) -> float:
    """E[(T ^ cap)^k]."""
    if math.isinf(cap):
        return raw_moment(spec, k)
    p = spec.params
    f = spec.family
    if f == "deterministic":
        return min(p["value"], cap) ** k
    if f == "exponential" or f == "hyperexponential":
        probs = (1.0,) if f == "exponential" else p["probs"]
        rates = (p["rate"],) if f == "exponential" else p["rates"]
        tot = 0.0
        for q, lam in zip(probs, rates):
            # int_0^cap t^k lam e^{-lam t} dt + cap^k e^{-lam cap}
            body = math.factorial(k) / lam**k * special.gammainc(k + 1, lam * cap)
            tot += q * (body + cap**k * math.exp(-lam * cap))
        return tot
    if f == "erlang":
        n, lam = p["shape"], p["rate"]
        body = math.prod(range(n, n + k)) / lam**k * special.gammainc(n + k, lam * cap)
        return body + cap**k * special.gammaincc(n, lam * cap)
    a, b = p["a"], p["b"]
    if cap <= a:
        return cap**k
    hi = min(b, cap)
    body = (hi ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
    return body + cap**k * max(b - cap, 0.0) / (b - a)
