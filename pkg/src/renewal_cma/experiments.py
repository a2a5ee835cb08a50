"""Monte Carlo studies and tables driven by an :class:`ExperimentConfig`.

Each ``run_*`` returns a :class:`Result` (a JSON report plus CSV tables) without
touching the disk; :func:`write_result` persists it. Replication ``r`` draws from
``SeedSequence(seed, spawn_key=(0, r))`` and auxiliary computations from
``spawn_key=(1, j)``, so the worker count never changes any number.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import (
    NoRootInBracket,
    autocovariances,
    efficiency_csv,
    efficiency_threshold,
    estimator_variances,
    sigma2_mean,
    w_matrix,
    z_matrix,
)
from .config import ConfigError, Experiment, ExperimentConfig
from .estimators import RhoOutOfRange, acf, estimate_a_eq, estimate_a_hat, estimate_a_star
from .kernel import OU, ZeroKernel
from .renewal import Deterministic, Exponential
from .simulate import SampledPath, simulate_cma_grid, simulate_ou

__all__ = [
    "Result",
    "child_rng",
    "aux_rng",
    "run",
    "run_clt_mean",
    "run_clt_acf",
    "run_estimator_study",
    "run_efficiency_table",
    "run_efficiency_curves",
    "run_path_dump",
    "write_result",
]


@dataclass
class Result:
    report: dict[str, Any]
    tables: dict[str, str] = field(default_factory=dict)
    paths: dict[str, SampledPath] = field(default_factory=dict)
    failed: bool = False


def child_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, r)))


def aux_rng(seed: int, j: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, j)))


# ---------------------------------------------------------------------------
# helpers


def _clean(x):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _report(cfg: ExperimentConfig, results: dict[str, Any]) -> dict[str, Any]:
    return {"experiment": cfg.experiment.value, "version": __version__, "config": cfg.resolved(), "results": results}


def _map_replications(fn: Callable, cfg: ExperimentConfig) -> list:
    """Run ``fn(config_dict, base_dir, r)`` for every replication, in index order."""
    data = cfg.resolved()
    base = str(cfg._base_dir) if cfg._base_dir is not None else None
    args = [(data, base, r) for r in range(cfg.replications)]
    if cfg.threads == 1 or cfg.replications == 1:
        return [fn(a) for a in args]
    chunk = max(1, cfg.replications // (4 * cfg.threads))
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, args, chunksize=chunk))


def _rebuild(data: dict, base: str | None) -> ExperimentConfig:
    return ExperimentConfig.from_dict(data, base)


def _simulate(cfg: ExperimentConfig, n: int, rng, h_max: int = 0, scheme=None) -> SampledPath:
    kernel, driver = cfg.build_kernel(), cfg.build_driver()
    scheme = scheme if scheme is not None else cfg.build_scheme()
    use_exact = isinstance(kernel, OU) and cfg.simulation != "grid"
    if cfg.simulation == "exact_ou" and not isinstance(kernel, OU):
        raise ConfigError("simulation 'exact_ou' needs an OU kernel")
    if use_exact:
        return simulate_ou(kernel.a, driver, scheme, n, rng, h_max=h_max)
    if cfg.grid_step is None or cfg.truncation_m is None:
        raise ConfigError("grid simulation needs grid_step and truncation_m")
    return simulate_cma_grid(kernel, driver, scheme, n, cfg.grid_step, cfg.truncation_m, rng, h_max=h_max)


def _variance(x: np.ndarray) -> float | None:
    x = x[np.isfinite(x)]
    return float(np.var(x, ddof=1)) if x.size > 1 else None


def _ks_normal(x: np.ndarray) -> float | None:
    """KS p-value against the normal with fitted mean and standard deviation."""
    x = x[np.isfinite(x)]
    if x.size < 3:
        return None
    sd = x.std(ddof=1)
    if not sd > 0:
        return None
    return float(stats.kstest(x, "norm", args=(x.mean(), sd)).pvalue)


def _ratio(num, den):
    if num is None or den is None or den == 0:
        return None
    return num / den


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CLT for the sample mean


def _mean_replication(args) -> float:
    data, base, r = args
    cfg = _rebuild(data, base)
    path = _simulate(cfg, cfg.n, child_rng(cfg.seed, r))
    return math.sqrt(cfg.n) * float(path.values.mean())


def run_clt_mean(cfg: ExperimentConfig) -> Result:
    stat = np.array(_map_replications(_mean_replication, cfg), dtype=float)
    kernel, driver, scheme = cfg.build_kernel(), cfg.build_driver(), cfg.build_scheme()
    pred = sigma2_mean(kernel, scheme, driver, tail_K=cfg.tail_K, mc_samples=cfg.mc_samples, rng=aux_rng(cfg.seed))
    degenerate = isinstance(kernel, ZeroKernel) or bool(np.all(stat == 0))
    emp = _variance(stat)
    results = {
        "degenerate": degenerate,
        "variance_estimable": emp is not None,
        "empirical_variance": emp,
        "mean_of_statistic": float(stat.mean()),
        "predicted_variance": pred.value,
        "predicted_std_error": pred.std_error,
        "prediction_tail_K": pred.tail_K,
        "prediction_truncation_bound": pred.truncation_bound,
        "variance_ratio": None if degenerate else _ratio(emp, pred.value),
        "ks_pvalue": None if degenerate else _ks_normal(stat),
    }
    table = _csv(["replication", "sqrt_n_mean"], ((r, float(v)) for r, v in enumerate(stat)))
    return Result(_report(cfg, _clean(results)), {"replications.csv": table})


# ---------------------------------------------------------------------------
# CLT for autocovariances and autocorrelations


def _acf_replication(args):
    data, base, r = args
    cfg = _rebuild(data, base)
    path = _simulate(cfg, cfg.n, child_rng(cfg.seed, r), h_max=cfg.h_max)
    est = acf(path, cfg.h_max, n=cfg.n)
    rho = est.rho_star[1:] if est.rho_star is not None else np.full(cfg.h_max, np.nan)
    return est.gamma_star, rho


def run_clt_acf(cfg: ExperimentConfig) -> Result:
    h = cfg.h_max
    out = _map_replications(_acf_replication, cfg)
    gam = np.array([g for g, _ in out])
    rho_hat = np.array([r for _, r in out])
    kernel, driver, scheme = cfg.build_kernel(), cfg.build_driver(), cfg.build_scheme()

    cov = z_matrix(kernel, driver, scheme, h, mc_samples=cfg.mc_samples, tail_K=cfg.tail_K, rng=aux_rng(cfg.seed))
    gamma = autocovariances(kernel, driver, scheme, h)
    gamma_source = "exact"
    if gamma is None:
        gamma, gamma_source = cov.gamma, "monte_carlo"
    degenerate = not gamma[0] > 0
    results: dict[str, Any] = {
        "degenerate": degenerate,
        "gamma": gamma,
        "gamma_source": gamma_source,
        "Z": cov.Z,
        "Z_error": cov.Z_error,
        "Z_method": cov.method.value,
        "tail_K": cov.tail_K,
        "truncation_bound": cov.truncation_bound,
    }
    sg = math.sqrt(cfg.n) * (gam - gamma)
    rows_rho: np.ndarray | None = None
    if not degenerate:
        rho = gamma[1:] / gamma[0]
        cov = w_matrix(cov, gamma[0], rho)
        rows_rho = math.sqrt(cfg.n) * (rho_hat - rho)
        results.update(rho=rho, W=cov.W, W_error=cov.W_error)

    estimable = cfg.replications > 1
    results["variance_estimable"] = estimable
    if estimable and not degenerate:
        emp_Z = np.cov(sg, rowvar=False, ddof=1).reshape(h + 1, h + 1)
        finite = np.all(np.isfinite(rows_rho), axis=1)
        emp_W = np.cov(rows_rho[finite], rowvar=False, ddof=1).reshape(h, h)
        with np.errstate(divide="ignore", invalid="ignore"):
            results.update(
                empirical_Z=emp_Z,
                empirical_W=emp_W,
                Z_ratio=np.where(cov.Z != 0, emp_Z / cov.Z, np.nan),
                W_ratio=np.where(cov.W != 0, emp_W / cov.W, np.nan),
                undefined_rho_replications=int((~finite).sum()),
            )
        results["ks_pvalue_gamma"] = [_ks_normal(sg[:, p]) for p in range(h + 1)]
        results["ks_pvalue_rho"] = [_ks_normal(rows_rho[:, p]) for p in range(h)]

    header = ["replication"] + [f"gamma_{p}" for p in range(h + 1)] + [f"rho_{p}" for p in range(1, h + 1)]
    rows = (
        [r] + [float(v) for v in sg[r]] + [float(v) for v in (rows_rho[r] if rows_rho is not None else [math.nan] * h)]
        for r in range(cfg.replications)
    )
    return Result(_report(cfg, _clean(results)), {"replications.csv": _csv(header, rows)})


# ---------------------------------------------------------------------------
# mean-reversion estimators


def _estimator_replication(args):
    data, base, r = args
    cfg = _rebuild(data, base)
    scheme = cfg.build_scheme()
    lam = 1.0 / scheme.mean_waiting()
    rng = child_rng(cfg.seed, r)
    path = _simulate(cfg, cfg.n, rng, h_max=1)
    lattice = _simulate(cfg, cfg.n, rng, h_max=1, scheme=Deterministic(1.0 / lam))
    est, est_eq = acf(path, 1, n=cfg.n), acf(lattice, 1, n=cfg.n)
    out = []
    for fn in (
        lambda: estimate_a_star(est, lam),
        lambda: estimate_a_hat(est, path.waiting_times[: cfg.n + 1]),
        lambda: estimate_a_eq(est_eq, 1.0 / lam),
    ):
        try:
            out.append(fn())
        except RhoOutOfRange:
            out.append(math.nan)
    return out


def run_estimator_study(cfg: ExperimentConfig) -> Result:
    est = np.array(_map_replications(_estimator_replication, cfg), dtype=float)
    kernel, driver, scheme = cfg.build_kernel(), cfg.build_driver(), cfg.build_scheme()
    a = kernel.a
    lam = 1.0 / scheme.mean_waiting()
    _, eta = driver.moments()
    root_n = math.sqrt(cfg.n)
    names = ("a_star", "a_hat", "a_eq")
    theory = estimator_variances(a, lam, eta)
    predicted = {"a_star": theory.var_a_star, "a_hat": theory.var_a_hat, "a_eq": theory.var_a_eq}
    closed_form_applies = isinstance(scheme, Exponential)
    results: dict[str, Any] = {
        "a": a,
        "lambda": lam,
        "eta": eta,
        "closed_form_applies": closed_form_applies,
        "variance_estimable": cfg.replications > 1,
        "sigma2_eff": theory.sigma2_eff if closed_form_applies else None,
    }
    emp = {}
    for j, name in enumerate(names):
        x = est[:, j]
        ok = np.isfinite(x)
        v = _variance(root_n * (x - a))
        emp[name] = v
        pred = predicted[name] if (closed_form_applies or name == "a_eq") else None
        results[name] = {
            "failures": int((~ok).sum()),
            "mean": float(x[ok].mean()) if ok.any() else None,
            "mean_std_error": float(x[ok].std(ddof=1) / math.sqrt(ok.sum())) if ok.sum() > 1 else None,
            "empirical_variance": v,
            "predicted_variance": pred,
            "variance_ratio": _ratio(v, pred),
        }
    if all(emp[k] is not None for k in names):
        results["ordering_eq_hat_star"] = bool(emp["a_eq"] < emp["a_hat"] < emp["a_star"])
    table = _csv(["replication", *names], ([r, *map(float, est[r])] for r in range(cfg.replications)))
    return Result(_report(cfg, _clean(results)), {"replications.csv": table})


# ---------------------------------------------------------------------------
# efficiency tables and curves


def run_efficiency_table(cfg: ExperimentConfig) -> Result:
    points, cells, failed = [], [], False
    for lam in cfg.lambdas:
        for eta in cfg.etas:
            try:
                a = efficiency_threshold(lam, eta, a_max=cfg.a_max)
            except NoRootInBracket as exc:
                cells.append({"lambda": lam, "eta": eta, "threshold": None, "error": str(exc)})
                failed = True
                continue
            points.append(estimator_variances(a, lam, eta))
            cells.append({"lambda": lam, "eta": eta, "threshold": a, "error": None})
    report = _report(cfg, _clean({"cells": cells, "all_cells_solved": not failed}))
    return Result(report, {"thresholds.csv": efficiency_csv(points)}, failed=failed)


def run_efficiency_curves(cfg: ExperimentConfig) -> Result:
    grid = np.geomspace(cfg.a_grid.min, cfg.a_grid.max, cfg.a_grid.points)
    points = [estimator_variances(float(a), 1.0 / d, eta) for d in cfg.deltas for eta in cfg.etas for a in grid]
    non_finite = sum(not math.isfinite(p.sigma2_eff) for p in points)
    summary = {"points": len(points), "non_finite_points": non_finite, "deltas": cfg.deltas, "etas": cfg.etas}
    return Result(_report(cfg, _clean(summary)), {"curves.csv": efficiency_csv(points)}, failed=non_finite > 0)


# ---------------------------------------------------------------------------
# raw paths


def _path_replication(args) -> SampledPath:
    data, base, r = args
    cfg = _rebuild(data, base)
    path = _simulate(cfg, cfg.n, child_rng(cfg.seed, r))
    return replace(path, meta=replace(path.meta, seed=cfg.seed, replication=r))


def run_path_dump(cfg: ExperimentConfig) -> Result:
    paths = _map_replications(_path_replication, cfg)
    names = {f"path_{r:04d}.csv": p for r, p in enumerate(paths)}
    report = _report(cfg, {"files": sorted(names), "n": cfg.n, "paths": len(paths)})
    return Result(report, paths=names)


RUNNERS = {
    Experiment.CLT_MEAN: run_clt_mean,
    Experiment.CLT_ACF: run_clt_acf,
    Experiment.ESTIMATOR_STUDY: run_estimator_study,
    Experiment.EFFICIENCY_TABLE: run_efficiency_table,
    Experiment.EFFICIENCY_CURVES: run_efficiency_curves,
    Experiment.PATH_DUMP: run_path_dump,
}


def run(cfg: ExperimentConfig) -> Result:
    return RUNNERS[cfg.experiment](cfg)


def write_result(result: Result, out_dir: str | Path) -> list[Path]:
    """Write ``report.json``, the CSV tables and any paths; returns the files written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    written = []
    report = out / "report.json"
    report.write_text(json.dumps(result.report, indent=2, sort_keys=True, allow_nan=False) + "\n")
    written.append(report)
    for name, text in sorted(result.tables.items()):
        (out / name).write_text(text)
        written.append(out / name)
    for name, path in sorted(result.paths.items()):
        path.to_csv(out / name)
        written += [out / name, (out / name).with_suffix(".meta.json")]
    return written
