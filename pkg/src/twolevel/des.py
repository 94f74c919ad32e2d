"""Event-driven simulation of the two-level GI/G/1 queue with time-average and Palm estimators.

State is (L, R_e, R_s). Arrivals go first on ties. When the queue empties a fresh
workload is drawn and frozen until the next arrival. Truncation at 1/r only enters
the estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from . import dists
from .dists import RngStream
from .model import QueueParams, traffic_quantities

CHUNK = 1 << 18
# scalar accumulator slots
(T, TC, NA, ND, RS1, RS2, RS3, RE1, RE2, RE3, IS1, IS2, IE1, IE2, AREA,
 DS1, DS2, DE1, DE2, NSLOT) = range(20)


@numba.njit(cache=True, nogil=True)
def _kahan_add(arr, comp, i, v):
    y = v - comp[i]
    t = arr[i] + y
    comp[i] = (t - arr[i]) - y
    arr[i] = t


@numba.njit(cache=True, nogil=True)
def _kernel(state, bufs, idx, n, c1, c2, cap, nev, th, thc, ah, dh, sc, scc):
    """Advance up to nev events. Returns events done; stops early when a needed buffer runs dry.

    state = [L, R_e, R_s]; bufs rows = arrival_below, arrival_above, workload draws.
    """
    L = int(state[0])
    re = state[1]
    rs = state[2]
    H = th.shape[0] - 1
    m = bufs.shape[1]
    done = 0
    while done < nev:
        if L == 0:
            speed = 0.0
        elif L <= n:
            speed = c1
        else:
            speed = c2
        dt_dep = rs / speed if speed > 0.0 else np.inf
        arrival = re <= dt_dep
        if arrival:
            row = 0 if L < n else 1
        else:
            row = 2
        if idx[row] >= m:
            break
        dt = re if arrival else dt_dep
        # time averages over (t, t + dt]
        _kahan_add(th, thc, min(L, H), dt)
        _kahan_add(sc, scc, T, dt)
        _kahan_add(sc, scc, AREA, L * dt)
        if L >= 1:
            if speed > 0.0:
                above = min(max((rs - cap) / speed, 0.0), dt)
            else:
                above = dt if rs >= cap else 0.0
            if L <= n:
                _kahan_add(sc, scc, IS1, dt - above)
            else:
                _kahan_add(sc, scc, IS2, dt - above)
        above = min(max(re - cap, 0.0), dt)
        if L <= n:
            _kahan_add(sc, scc, IE1, dt - above)
        else:
            _kahan_add(sc, scc, IE2, dt - above)
        re -= dt
        rs -= speed * dt
        if arrival:
            ah[min(L, H)] += 1
            sc[NA] += 1.0
            if L == n:
                x = min(rs, cap)
                sc[RS1] += x
                sc[RS2] += x * x
                sc[RS3] += x * x * x
            re = bufs[row, idx[row]]
            idx[row] += 1
            sc[DE1 + row] += min(re, cap)
            L += 1
        else:
            L -= 1
            dh[min(L, H)] += 1
            sc[ND] += 1.0
            if L == n:
                x = min(re, cap)
                sc[RE1] += x
                sc[RE2] += x * x
                sc[RE3] += x * x * x
            rs = bufs[2, idx[2]]
            idx[2] += 1
            if L <= n:
                sc[DS1] += min(rs, cap)
            else:
                sc[DS2] += min(rs, cap)
        done += 1
    state[0] = L
    state[1] = re
    state[2] = rs
    return done


@dataclass
class BatchStats:
    """Raw accumulators of one batch; additive across batches and replications."""

    th: np.ndarray
    ah: np.ndarray
    dh: np.ndarray
    sc: np.ndarray

    @classmethod
    def empty(cls, H: int) -> "BatchStats":
        return cls(np.zeros(H + 1), np.zeros(H + 1, np.int64), np.zeros(H + 1, np.int64),
                   np.zeros(NSLOT))

    def __add__(self, o: "BatchStats") -> "BatchStats":
        return BatchStats(self.th + o.th, self.ah + o.ah, self.dh + o.dh, self.sc + o.sc)


class _Sampler:
    """Buffered draws from three streams; refilled chunk by chunk."""

    def __init__(self, params: QueueParams, seed: int, rep: int, chunk: int = CHUNK):
        self.specs = (params.arrival_below, params.arrival_above, params.workload)
        self.streams = [RngStream(seed, 3 * rep + j) for j in range(3)]
        self.chunk = chunk
        self.bufs = np.empty((3, chunk))
        for j in range(3):
            self.bufs[j] = dists.sample(self.specs[j], self.streams[j], chunk)
        self.idx = np.zeros(3, np.int64)

    def refill(self):
        for j in range(3):
            if self.idx[j] >= self.chunk:
                self.bufs[j] = dists.sample(self.specs[j], self.streams[j], self.chunk)
                self.idx[j] = 0

    def draw(self, j: int) -> float:
        self.refill()
        v = self.bufs[j, self.idx[j]]
        self.idx[j] += 1
        return float(v)


def _advance(smp: _Sampler, state, n, c1, c2, cap, nev, acc: BatchStats):
    thc = np.zeros_like(acc.th)
    scc = np.zeros(NSLOT)
    left = nev
    while left > 0:
        smp.refill()
        left -= _kernel(state, smp.bufs, smp.idx, n, c1, c2, cap, left,
                        acc.th, thc, acc.ah, acc.dh, acc.sc, scc)


@dataclass
class SimEstimates:
    params: QueueParams
    r: float
    events: int
    warmup: int
    seed: int
    batches: list = field(repr=False)
    overflow_level: int = 0
    cap: float = math.inf
    edges: list = field(default_factory=list, repr=False)

    @property
    def total(self) -> BatchStats:
        out = self.batches[0]
        for b in self.batches[1:]:
            out = out + b
        return out

    # ---- derived views; each works on any BatchStats
    def pmf(self, b: BatchStats | None = None) -> np.ndarray:
        b = b or self.total
        return b.th / b.sc[T]

    @property
    def time_pmf(self) -> np.ndarray:
        """Time-average law of L on 0..H-1; the last entry is the overflow mass."""
        return self.pmf()

    @property
    def overflow_mass(self) -> float:
        return float(self.pmf()[-1])

    @property
    def p_zero(self) -> float:
        return float(self.pmf()[0])

    @property
    def mean_L(self) -> float:
        t = self.total
        return t.sc[AREA] / t.sc[T]

    @property
    def p_at_or_below(self) -> float:
        return float(self.pmf()[: self.params.threshold + 1].sum())

    @property
    def alpha_e(self) -> float:
        t = self.total
        return t.sc[NA] / t.sc[T]

    @property
    def alpha_s(self) -> float:
        t = self.total
        return t.sc[ND] / t.sc[T]

    @property
    def palm_arrival(self) -> np.ndarray:
        t = self.total
        return t.ah / t.sc[NA]

    @property
    def palm_departure(self) -> np.ndarray:
        t = self.total
        return t.dh / t.sc[ND]

    def palm_moments(self, b: BatchStats | None = None):
        """(E_e[R_s-^k; L(0-)=l1], E_s[R_e^k; L(0)=l1]) for k = 1, 2, 3, truncated at 1/r."""
        b = b or self.total
        return b.sc[RS1:RS3 + 1] / b.sc[NA], b.sc[RE1:RE3 + 1] / b.sc[ND]

    def batch_se(self, fn) -> tuple[float, float]:
        """Pooled value of fn(BatchStats) and its batch-means standard error."""
        vals = np.array([fn(b) for b in self.batches], dtype=float)
        k = len(vals)
        return float(fn(self.total)), float(vals.std(ddof=1) / math.sqrt(k))


def run(params: QueueParams, horizon: int, warmup: int | None = None, seed: int = 0,
        cap: float = math.inf, n_batches: int = 20, rep: int = 0, r: float | None = None,
        hist_factor: int = 16) -> SimEstimates:
    """One run of `horizon` events, the first `warmup` of them discarded (default 10%)."""
    if warmup is None:
        warmup = horizon // 10
    if not horizon > warmup >= 0:
        raise ValueError("need horizon > warmup >= 0")
    n = params.threshold
    H = hist_factor * n + 1
    smp = _Sampler(params, seed, rep, chunk=min(CHUNK, max(1024, horizon)))
    state = np.array([0.0, smp.draw(0), smp.draw(2)])
    c1, c2 = float(params.c1), float(params.c2)
    cap = float(cap)
    if warmup:
        _advance(smp, state, n, c1, c2, cap, warmup, BatchStats.empty(H))
    start = state.copy()
    todo = horizon - warmup
    sizes = [todo // n_batches + (1 if i < todo % n_batches else 0) for i in range(n_batches)]
    batches = []
    for sz in sizes:
        acc = BatchStats.empty(H)
        _advance(smp, state, n, c1, c2, cap, sz, acc)
        batches.append(acc)
    return SimEstimates(params, r if r is not None else 1.0 / cap, horizon, warmup, seed,
                        batches, H, cap, [(start, state.copy())])


# -------------------------------------------------------------------- identities


def _rates(params: QueueParams):
    lam1, lam2, mu, _, _ = traffic_quantities(params)
    return lam1, lam2, mu


def palm_identity_residuals(est: SimEstimates, params: QueueParams | None = None) -> dict:
    """Left/right values and studentized residuals of the Palm/BAR identities (k = 1)."""
    p = params or est.params
    n = p.threshold
    lam1, lam2, mu = _rates(p)
    cap = 1.0 / est.r
    ets = dists.truncated_moment(p.workload, 1, cap)
    ete1 = dists.truncated_moment(p.arrival_below, 1, cap)
    ete2 = dists.truncated_moment(p.arrival_above, 1, cap)

    def pieces(b: BatchStats):
        tt = b.sc[T]
        ae = b.sc[NA] / tt
        pe = b.ah / b.sc[NA]
        ps = b.dh / b.sc[ND]
        rs, re = b.sc[RS1] / b.sc[NA], b.sc[RE1] / b.sc[ND]
        pmf = b.th / tt
        return tt, ae, pe, ps, rs, re, pmf

    def ids(b: BatchStats) -> dict:
        tt, ae, pe, ps, rs, re, pmf = pieces(b)
        pe_lt, pe_ge = pe[:n].sum(), pe[n:].sum()
        ps_le, ps_gt = ps[: n + 1].sum(), ps[n + 1:].sum()
        return {
            "alpha_e=alpha_s": (ae, b.sc[ND] / tt),
            "alpha_1": (ae, lam1 * lam2 / (lam2 * pe_lt + lam1 * pe_ge)),
            "alpha_2": (ae, p.c1 * mu * pmf[1: n + 1].sum() + p.c2 * mu * pmf[n + 1:].sum()),
            "Rs1": (p.c1 * b.sc[IS1] / tt, ae * (-rs + ets * ps_le)),
            "Rs2": (p.c2 * b.sc[IS2] / tt, ae * (rs + ets * ps_gt)),
            "Re1": (b.sc[IE1] / tt, ae * (re + ete1 * pe_lt)),
            "Re2": (b.sc[IE2] / tt, ae * (-re + ete2 * pe_ge)),
        }

    out = {}
    pooled = ids(est.total)
    per = [ids(b) for b in est.batches]
    for key, (lhs, rhs) in pooled.items():
        diffs = np.array([a - c for a, c in (d[key] for d in per)])
        se = diffs.std(ddof=1) / math.sqrt(len(diffs))
        out[key] = {"lhs": lhs, "rhs": rhs, "se": se, "z": (lhs - rhs) / se if se > 0 else 0.0}
    # level crossing, per level
    levels = np.nonzero(est.total.ah[:-1])[0]
    diffs = np.array([b.ah[:-1] / b.sc[NA] - b.dh[:-1] / b.sc[ND] for b in est.batches])
    se = diffs.std(axis=0, ddof=1) / math.sqrt(len(est.batches))
    gap = est.palm_arrival[:-1] - est.palm_departure[:-1]
    z = np.zeros_like(gap)
    ok = se > 0
    z[ok] = gap[ok] / se[ok]
    out["level_crossing"] = {"gap": gap[levels], "se": se[levels], "z": z[levels],
                             "max_abs_z": float(np.max(np.abs(z[levels]))) if len(levels) else 0.0}
    return out


@dataclass(frozen=True)
class DeltaE:
    delta1: float
    delta2: float
    E1: float
    E2: float
    resid1_over_r: float
    resid2_over_r: float
    resid1_cv_over_r: float
    resid2_cv_over_r: float


def delta_E_estimates(est: SimEstimates, params: QueueParams, r: float, b1: float,
                      b2: float, mu_limit: float | None = None) -> DeltaE:
    """Delta_i and E_i from estimated Palm moments, plus the scaled identity residuals.

    The *_cv residuals add zero-mean control variates: each fresh draw minus its known
    truncated mean, summed per regime, with the coefficients of the pathwise identities.
    They estimate the same quantity with far less noise.
    """
    lam1, lam2, mu = _rates(params)
    mu_l = mu if mu_limit is None else mu_limit
    se1 = dists.std(params.arrival_below)
    se2 = dists.std(params.arrival_above)
    ss = dists.std(params.workload)
    (rs1, rs2, _), (re1, re2, _) = est.palm_moments()
    pe_n = est.palm_arrival[params.threshold]
    d1 = mu * rs1 + lam1 * re1 - pe_n
    d2 = mu * rs1 + lam2 * re1 - pe_n
    s_term = 0.5 * ((mu * ss) ** 2 * mu * rs1 - mu * mu * rs2)
    e_term = lambda lam, se: 0.5 * (((lam * se) ** 2 + 2) * lam * re1 - lam * lam * re2)
    E1 = s_term - e_term(lam1, se1)
    E2 = -s_term + e_term(lam2, se2)
    ae = est.alpha_e
    pmf = est.time_pmf
    n = params.threshold
    p_le, p_gt = pmf[: n + 1].sum(), pmf[n + 1:].sum()
    res2 = abs(ae * d2 - r * mu_l * b2 * p_gt) / r
    res1 = abs(ae * d1 - (-r * b1 * mu_l * p_le + params.c1 * mu * pmf[0])) / r
    t = est.total
    tt = t.sc[T]
    cap = est.cap
    ms = dists.truncated_moment(params.workload, 1, cap)
    me1 = dists.truncated_moment(params.arrival_below, 1, cap)
    me2 = dists.truncated_moment(params.arrival_above, 1, cap)
    cs1 = (t.sc[DS1] - ms * t.dh[: n + 1].sum()) / tt
    cs2 = (t.sc[DS2] - ms * t.dh[n + 1:].sum()) / tt
    ce1 = (t.sc[DE1] - me1 * t.ah[:n].sum()) / tt
    ce2 = (t.sc[DE2] - me2 * t.ah[n:].sum()) / tt
    # window-edge terms of the pathwise identities; zero mean in stationarity
    fs1 = fs2 = fe1 = fe2 = g1 = g2 = 0.0
    for a, z in est.edges:
        for sgn, (L, re_, rs_) in ((-1.0, a), (1.0, z)):
            up = L > n
            fs1 += sgn * min(rs_, cap) * (not up)
            fs2 += sgn * min(rs_, cap) * up
            fe1 += sgn * min(re_, cap) * (not up)
            fe2 += sgn * min(re_, cap) * up
            g1 -= sgn * min(L, n + 1)
            g2 += sgn * max(L - n - 1, 0)
    # departure-Palm terms weighted by alpha_s, which equals alpha_e in stationarity
    shift = (est.alpha_s - ae) * re1
    res1_cv = abs(ae * d1 + lam1 * shift - mu * cs1 + lam1 * ce1 + (mu * fs1 - lam1 * fe1 - g1) / tt
                  - (-r * b1 * mu_l * p_le + params.c1 * mu * pmf[0])) / r
    res2_cv = abs(ae * d2 + lam2 * shift + mu * cs2 - lam2 * ce2 - (mu * fs2 - lam2 * fe2 + g2) / tt
                  - r * mu_l * b2 * p_gt) / r
    return DeltaE(d1, d2, E1, E2, res1, res2, res1_cv, res2_cv)


# ------------------------------------------------------------------- replications


@dataclass
class Replicated:
    runs: list
    pooled: SimEstimates
    ci: dict

    def __getitem__(self, key):
        return self.ci[key]


SUMMARY = {
    "p_zero": lambda e: e.p_zero,
    "mean_L": lambda e: e.mean_L,
    "p_at_or_below": lambda e: e.p_at_or_below,
    "alpha_e": lambda e: e.alpha_e,
}


def replicate(params: QueueParams, n_reps: int, seed: int, horizon: int,
              warmup: int | None = None, cap: float = math.inf, r: float | None = None,
              n_batches: int = 4, level: float = 0.95) -> Replicated:
    """Independent replications on disjoint streams; CIs from the replication spread."""
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    runs = [run(params, horizon, warmup, seed, cap, n_batches, rep=i, r=r) for i in range(n_reps)]
    pooled = SimEstimates(params, runs[0].r, horizon * n_reps, runs[0].warmup * n_reps, seed,
                          [b for e in runs for b in e.batches], runs[0].overflow_level, cap,
                          [g for e in runs for g in e.edges])
    tq = stats.t.ppf(0.5 + level / 2, n_reps - 1)
    ci = {}
    for key, fn in SUMMARY.items():
        v = np.array([fn(e) for e in runs])
        ci[key] = (float(v.mean()), float(tq * v.std(ddof=1) / math.sqrt(n_reps)))
    return Replicated(runs, pooled, ci)
