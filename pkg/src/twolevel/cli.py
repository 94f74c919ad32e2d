"""Experiment runner: r-sweeps over the exact chain, simulator, diffusion and limit formulas."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bar, des, limits, metrics, mm1exact, sde
from .model import HeavyTrafficFamily, instantiate

log = logging.getLogger("twolevel")

ENGINES = ("exact", "sim", "sde", "limits", "bar")
CSV_HEADER = ["r", "engine", "ks", "tv", "w1", "p0_over_r", "mean_scaled", "A1_hat",
              "alpha_e", "runtime_s"]
TOP_FIELDS = {"family", "r_values", "engines", "sim", "sde", "output"}
SIM_FIELDS = {"events", "warmup", "reps", "seed"}
SDE_FIELDS = {"h", "samples", "burn_in"}
SDE_THINNING = 100
BAR_THETAS = (-2.0, -1.0, 0.0, 1.0, 2.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimSettings:
    events: int = 10**6
    warmup: int | None = None
    reps: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SdeSettings:
    h: float | None = None
    samples: int = 10**5
    burn_in: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    family: HeavyTrafficFamily
    r_values: tuple[float, ...]
    engines: tuple[str, ...]
    sim: SimSettings = SimSettings()
    sde: SdeSettings = SdeSettings()
    output: str = "results"


def _check_fields(d, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}")


def parse_engines(val, where: str = "engines") -> tuple[str, ...]:
    if isinstance(val, str):
        val = [v.strip() for v in val.split(",") if v.strip()]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{where}: must be a non-empty list")
    bad = [e for e in val if e not in ENGINES]
    if bad:
        raise ConfigError(f"{where}: unknown engine(s) {bad}; choose from {list(ENGINES)}")
    return tuple(dict.fromkeys(val))


def parse_config(text: str) -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _check_fields(d, TOP_FIELDS, "config")
    for key in ("family", "r_values", "engines"):
        if key not in d:
            raise ConfigError(f"config: missing field '{key}'")
    try:
        fam = HeavyTrafficFamily.from_dict(d["family"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"family: {exc}") from None
    rv = d["r_values"]
    if not isinstance(rv, list) or not rv:
        raise ConfigError("r_values: must be a non-empty list")
    if not all(isinstance(x, (int, float)) and 0 < x <= 1 for x in rv):
        raise ConfigError("r_values: every value must lie in (0, 1]")
    if any(a <= b for a, b in zip(rv, rv[1:])):
        raise ConfigError("r_values: must be strictly decreasing")
    engines = parse_engines(d["engines"])
    s = d.get("sim", {})
    _check_fields(s, SIM_FIELDS, "sim")
    sim = SimSettings(**{k: (None if v is None else int(v)) for k, v in s.items()})
    if sim.events < 1 or sim.reps < 1:
        raise ConfigError("sim: events and reps must be positive")
    q = d.get("sde", {})
    _check_fields(q, SDE_FIELDS, "sde")
    sd = SdeSettings(**{k: (None if v is None else (int(v) if k == "samples" else float(v)))
                        for k, v in q.items()})
    out = d.get("output", "results")
    if not isinstance(out, str) or not out:
        raise ConfigError("output: must be a non-empty string prefix")
    return ExperimentConfig(fam, tuple(float(x) for x in rv), engines, sim, sd, out)


# ----------------------------------------------------------------------------- rows


@dataclass
class Row:
    r: float
    engine: str
    ks: float | None = None
    tv: float | None = None
    w1: float | None = None
    p0_over_r: float | None = None
    mean_scaled: float | None = None
    A1_hat: float | None = None
    alpha_e: float | None = None
    runtime_s: float = 0.0
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def cells(self, with_runtime: bool = True) -> list[str]:
        vals = [self.r, self.engine, self.ks, self.tv, self.w1, self.p0_over_r,
                self.mean_scaled, self.A1_hat, self.alpha_e,
                self.runtime_s if with_runtime else None]
        return [v if isinstance(v, str) else ("" if v is None else f"{v:.12g}") for v in vals]


def _w1_lattice(pmf, r, cdf) -> float:
    x_max = r * len(pmf)
    grid = metrics.lattice_grid(r, x_max)
    law = mm1exact.LatticeLaw(r, np.asarray(pmf))
    return metrics.wasserstein1(law.cdf, cdf, grid)


def _exact_alpha(sol: mm1exact.ChainSolution) -> float:
    tail = sol.p3 / (1 - sol.rho22)
    return sol.lam1 * math.fsum(sol.p1) + sol.lam2 * (math.fsum(sol.p2) + tail)


def _exact(cfg: ExperimentConfig, r: float, ld, cache: dict) -> Row:
    p = instantiate(cfg.family, r)
    sol = mm1exact.solve_dense(p)
    rec = mm1exact.solve_recursive(p)
    cache[r] = sol
    law = mm1exact.scaled_distribution(sol, r)
    cdf = lambda x: limits.mixture_cdf(ld, x)
    m = min(len(rec.p1), len(sol.p1))
    gap = float(max(np.max(np.abs(rec.p1[:m] - sol.p1[:m])), np.max(np.abs(rec.p2 - sol.p2)),
                    abs(rec.p3 - sol.p3)))
    checks = {
        "mass": abs(sol.total_mass() - 1) < 1e-10,
        "balance": float(np.max(np.abs(mm1exact.balance_residuals(sol)))) < 1e-10,
        "recursive_vs_dense": gap < 1e-10,
    }
    return Row(r, "exact", ks=metrics.ks_lattice(law.pmf, r, cdf), w1=_w1_lattice(law.pmf, r, cdf),
               p0_over_r=sol.p_zero() / r, mean_scaled=sol.p_zero() * sol.mean_L(),
               A1_hat=sol.p_at_or_below(), alpha_e=_exact_alpha(sol), checks=checks)


def _sim(cfg: ExperimentConfig, r: float, ld, exact_law) -> Row:
    p = instantiate(cfg.family, r)
    s = cfg.sim
    if s.reps >= 2:
        est = des.replicate(p, s.reps, s.seed, s.events, s.warmup, cap=1 / r, r=r).pooled
    else:
        est = des.run(p, s.events, s.warmup, s.seed, cap=1 / r, r=r)
    pmf = est.time_pmf[:-1]
    cdf = lambda x: limits.mixture_cdf(ld, x)
    lam1, lam2 = 1 / des.dists.mean(p.arrival_below), 1 / des.dists.mean(p.arrival_above)
    tol = 0.02 * max(lam1, lam2)
    checks = {
        "mass": abs(est.time_pmf.sum() - 1) < 1e-12,
        "overflow": est.overflow_mass < 1e-6,
        "alpha_bounds": min(lam1, lam2) - tol <= est.alpha_e <= max(lam1, lam2) + tol,
    }
    tv = None
    if exact_law is not None:
        tv = metrics.tv_distance(est.time_pmf, exact_law, tol=1e-8)
    hist = {"r": r, "time_pmf": pmf.tolist(), "palm_arrival": est.palm_arrival.tolist(),
            "palm_departure": est.palm_departure.tolist(), "overflow": est.overflow_mass}
    return Row(r, "sim", ks=metrics.ks_lattice(pmf, r, cdf), tv=tv,
               w1=_w1_lattice(pmf, r, cdf), p0_over_r=est.p_zero / r,
               mean_scaled=est.p_zero * est.mean_L, A1_hat=est.p_at_or_below,
               alpha_e=est.alpha_e, checks=checks, extra={"hist": hist})


def _sde(cfg: ExperimentConfig, ld, seed: int) -> Row:
    spec = sde.DiffusionSpec.from_limit(ld, h=cfg.sde.h, seed=seed)
    emp = sde.simulate_stationary(spec, cfg.sde.burn_in, cfg.sde.samples, SDE_THINNING)
    cdf = lambda x: limits.mixture_cdf(ld, x)
    hi = float(emp.samples[-1])
    grid = np.linspace(0.0, hi, 4001)
    return Row(0.0, "sde", ks=emp.ks_to(cdf), w1=metrics.wasserstein1(emp.cdf, cdf, grid),
               A1_hat=float(emp.cdf(ld.ell1)),
               checks={"nonnegative": bool(emp.samples[0] >= 0)},
               extra={"cdf_rows": emp.to_rows(), "dkw": emp.dkw_band()})


def _limits(cfg: ExperimentConfig, ld) -> Row:
    a1, a2 = ld.A
    lam1, lam2 = ld.lam
    mean = limits.mean_L_limit(ld.b1, ld.b2, ld.c1, ld.c2, ld.sigma1_sq, ld.sigma2_sq, ld.ell1)
    prod = limits.p0_over_r_limit(ld) * limits.mixture_mean(ld)
    return Row(0.0, "limits", ks=0.0, w1=0.0, p0_over_r=limits.p0_over_r_limit(ld),
               mean_scaled=mean, A1_hat=a1, alpha_e=limits.alpha_limit(lam1, lam2, a1, a2),
               checks={"weights": abs(a1 + a2 - 1) < 1e-14,
                       "mean_product": abs(mean - prod) <= 1e-10 * max(1.0, abs(mean))})


def _bar(cfg: ExperimentConfig, ld) -> tuple[list[dict], dict]:
    fam = cfg.family
    table = []
    ok_roots = True
    for r in cfg.r_values:
        p = instantiate(fam, r)
        for th in (-1.0, 1.0):
            ex = bar.exponents(p.arrival_below, p.arrival_above, p.workload, th, r)
            u = r * th
            res = max(
                abs(math.exp(u) * des.dists.truncated_laplace(p.arrival_below, ex.eta1, ex.cap) - 1),
                abs(math.exp(u) * des.dists.truncated_laplace(p.arrival_above, ex.eta2, ex.cap) - 1),
                abs(math.exp(-u) * des.dists.truncated_laplace(p.workload, ex.zeta, ex.cap) - 1))
            ok_roots &= res <= 1e-12
            table.append({"r": r, "theta": th, "eta1": ex.eta1, "eta2": ex.eta2, "zeta": ex.zeta,
                          "err_eta1": bar.expansion_error(p.arrival_below, "arrival", th, r),
                          "err_zeta": bar.expansion_error(p.workload, "service", th, r),
                          "root_residual": res})
    grid = [bar.limit_bar_residual(ld, t1, t2) for t1 in BAR_THETAS for t2 in BAR_THETAS if t2 <= 0]
    tol = 1e-8 if ld.b1 != 0 else 1e-6
    return table, {"roots": ok_roots, "limit_bar": max(grid) <= tol}


# -------------------------------------------------------------------------- driver


@dataclass
class Result:
    rows: list
    bar_table: list
    checks: dict
    errors: list

    @property
    def ok(self) -> bool:
        return not self.errors and all(self.checks.values())


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> Result:
    ld = cfg.family.limit_distribution()
    errors: list[str] = []
    checks: dict[str, bool] = {}
    exact_cache: dict = {}

    def timed(key, fn, *args):
        t0 = time.perf_counter()
        try:
            row = fn(*args)
        except Exception as exc:  # reported per row; the run continues
            errors.append(f"{key[1]} at r={key[0]:.12g}: {type(exc).__name__}: {exc}")
            log.error(errors[-1])
            return None
        if isinstance(row, Row):
            row.runtime_s = time.perf_counter() - t0
        return row

    rows: dict = {}
    if "exact" in cfg.engines:
        with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
            futs = {r: pool.submit(timed, (r, "exact"), _exact, cfg, r, ld, exact_cache)
                    for r in cfg.r_values}
            for r, f in futs.items():
                rows[(r, "exact")] = f.result()
    jobs = []
    if "sim" in cfg.engines:
        for r in cfg.r_values:
            law = None
            if r in exact_cache:
                law = mm1exact.scaled_distribution(exact_cache[r], r).pmf
            elif _is_exp(cfg.family):
                law = mm1exact.scaled_distribution(
                    mm1exact.solve_dense(instantiate(cfg.family, r)), r).pmf
            jobs.append(((r, "sim"), _sim, cfg, r, ld, law))
    if "sde" in cfg.engines:
        jobs.append(((0.0, "sde"), _sde, cfg, ld, cfg.sim.seed))
    if "limits" in cfg.engines:
        jobs.append(((0.0, "limits"), _limits, cfg, ld))
    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        futs = [(j[0], pool.submit(timed, *j)) for j in jobs]
        for key, f in futs:
            rows[key] = f.result()
    bar_table: list = []
    if "bar" in cfg.engines:
        t0 = time.perf_counter()
        try:
            bar_table, bchecks = _bar(cfg, ld)
            checks.update({f"bar.{k}": v for k, v in bchecks.items()})
        except Exception as exc:
            errors.append(f"bar: {type(exc).__name__}: {exc}")
        log.info("bar engine %.3fs", time.perf_counter() - t0)
    order = {e: i for i, e in enumerate(ENGINES)}
    r_rank = {r: i for i, r in enumerate(cfg.r_values)}
    keys = sorted((k for k, v in rows.items() if v is not None),
                  key=lambda k: (r_rank.get(k[0], len(r_rank)), order[k[1]]))
    out = [rows[k] for k in keys]
    for row in out:
        for name, val in row.checks.items():
            checks[f"{row.engine}.r={row.r:.12g}.{name}"] = bool(val)
        bad = [v for v in (row.ks, row.tv, row.w1, row.p0_over_r, row.mean_scaled, row.A1_hat,
                           row.alpha_e) if v is not None and not math.isfinite(v)]
        checks[f"{row.engine}.r={row.r:.12g}.finite"] = not bad
        for v in (row.ks, row.tv):
            if v is not None:
                checks[f"{row.engine}.r={row.r:.12g}.distance_range"] = 0 <= v <= 1
    return Result(out, bar_table, checks, errors)


def _is_exp(fam: HeavyTrafficFamily) -> bool:
    return all(d.family == "exponential" for d in (fam.arrival_below, fam.arrival_above, fam.workload))


def write_outputs(res: Result, cfg: ExperimentConfig, out_dir: Path,
                  timings: bool = False) -> list[Path]:
    """Write artifacts. runtime_s stays empty unless timings is set, so reruns are byte-identical."""
    out_dir.mkdir(parents=True, exist_ok=True)
    base = out_dir / cfg.output
    paths = []
    p = base.with_name(base.name + ".csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in res.rows:
            w.writerow(row.cells(with_runtime=timings))
    paths.append(p)
    if res.bar_table:
        p = base.with_name(base.name + "_bar.csv")
        cols = list(res.bar_table[0])
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for rec in res.bar_table:
                w.writerow([f"{rec[c]:.12g}" for c in cols])
        paths.append(p)
    hists = [row.extra["hist"] for row in res.rows if "hist" in row.extra]
    if hists:
        p = base.with_name(base.name + "_hist.json")
        p.write_text(json.dumps(hists, indent=1), encoding="utf-8")
        paths.append(p)
    for row in res.rows:
        if "cdf_rows" in row.extra:
            p = base.with_name(base.name + "_sde_cdf.csv")
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["x", "F_hat"])
                for x, f in row.extra["cdf_rows"]:
                    w.writerow([f"{x:.12g}", f"{f:.12g}"])
            paths.append(p)
    p = base.with_name(base.name + "_checks.json")
    p.write_text(json.dumps({"ok": res.ok, "errors": res.errors,
                             "checks": dict(sorted(res.checks.items()))}, indent=1),
                 encoding="utf-8")
    paths.append(p)
    return paths


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twolevel", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--out-dir", type=Path, default=Path("."))
    run.add_argument("--seed-override", type=int, default=None)
    run.add_argument("--engines", default=None, help="comma-separated subset of " + ",".join(ENGINES))
    run.add_argument("--verbose", "-v", action="store_true",
                     help="log progress and fill the runtime_s column")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8")
        cfg = parse_config(text)
        if args.engines is not None:
            cfg = replace(cfg, engines=parse_engines(args.engines, "--engines"))
        if args.seed_override is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed_override))
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    res = run_experiment(cfg)
    paths = write_outputs(res, cfg, args.out_dir, timings=args.verbose)
    for p in paths:
        log.info("wrote %s", p)
    failed = [k for k, v in res.checks.items() if not v]
    for k in failed:
        print(f"invariant failed: {k}", file=sys.stderr)
    for e in res.errors:
        print(f"engine error: {e}", file=sys.stderr)
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
