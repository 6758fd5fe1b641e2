"""Level schedules and multilevel Monte Carlo estimators.

The telescoping estimator draws, per level, independent realizations and
evaluates each at the level and its coarser neighbour (shared realization,
nested field restriction).  The coupled variant reuses one realization per
index across consecutive corrections, so level ``l`` needs only ``M_l``
solves instead of ``M_l + M_{l+1}``.  All sampling is keyed by
``(level-of-origin, index)`` sub-streams, which makes estimator output
bitwise independent of the worker count.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from .fem import PathEvaluator
from .streams import RandomStream

__all__ = [
    "LevelParams",
    "LevelSchedule",
    "EstimatorResult",
    "StudyRow",
    "StudySummary",
    "StudyResult",
    "build_schedule",
    "mlmc_estimate",
    "coupled_mlmc_estimate",
    "rmse_study",
    "compute_reference",
    "METHOD_IDS",
]

WEIGHT_DECAY = 1.001

# stable stream identifiers per (mesh method, estimator) combination
METHOD_IDS = {
    "adapted-standard": 0,
    "adapted-coupled": 1,
    "nonadapted-standard": 2,
    "nonadapted-coupled": 3,
}


@dataclass(frozen=True)
class LevelParams:
    ell: int
    h_bar: float
    eps: float
    dt: float
    rho: float  # normalized weight (1.0 placeholder on level 0)
    M: int


@dataclass(frozen=True)
class LevelSchedule:
    """Per-level approximation parameters and sample counts."""

    method: str
    L: int
    kappa: float
    c_rho: float
    levels: tuple[LevelParams, ...]

    def __post_init__(self):
        hs = [lv.h_bar for lv in self.levels]
        if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
            raise ValueError("refinement thresholds must decrease strictly")
        ms = [lv.M for lv in self.levels]
        if any(m < 1 for m in ms):
            raise ValueError("sample counts must be >= 1")
        if any(m2 > m1 for m1, m2 in zip(ms, ms[1:])):
            raise ValueError("sample counts must be non-increasing in the level")

    @property
    def sample_counts(self) -> list[int]:
        return [lv.M for lv in self.levels]

    def level_tuples(self) -> list[tuple[float, float, float]]:
        return [(lv.h_bar, lv.eps, lv.dt) for lv in self.levels]

    def check_contract(self, slack: float = 1.0) -> bool:
        """Statistical-error equilibration of Thm-style schedules:
        ``M_l^{-1/2} h_l^p <= (1 + slack) rho_l h_L^p`` per level."""
        p = 2.0 * self.kappa if self.method == "adapted" else 1.0
        h_l_ref = self.levels[-1].h_bar
        for lv in self.levels[1:]:
            lhs = lv.h_bar**p / math.sqrt(lv.M)
            rhs = (1.0 + slack) * lv.rho * h_l_ref**p
            if lhs > rhs * (1.0 + 1e-12):
                return False
        return True


def _ceil(x: float) -> int:
    return int(math.ceil(x - 1e-9))


def build_schedule(L: int, method: str, kappa: float = 1.0, c_rho: float | None = None) -> LevelSchedule:
    """Level parameters and sample counts for the two discretization methods.

    adapted:     h_l = (1/4) 2^(-l/2),  eps_l = dt_l = h_l^(2 kappa)
    nonadapted:  h_l = (1/4) 2^(-l),    eps_l = dt_l = h_l

    Sample counts follow the error-equilibrated allocation
    ``M_0 = ceil(h_L^(-2p))`` and ``M_l = ceil((h_l/h_L)^(2p) rho_l^(-2) / c_rho^2)``
    with ``p = 2 kappa`` (adapted) or ``p = 1`` (nonadapted) and weights
    ``rho_l ∝ (l+1)^(-1.001)`` normalized over l = 1..L.  The field spacing is
    snapped to powers of two so that lattices stay nested for any kappa.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    if method not in ("adapted", "nonadapted"):
        raise ValueError(f"unknown method {method!r}")
    if not (0.5 < kappa <= 1.0):
        raise ValueError("kappa must lie in (1/2, 1]")
    if c_rho is None:
        c_rho = 2.0 if method == "adapted" else 1.0
    if c_rho <= 0.0:
        raise ValueError("c_rho must be positive")
    raw_w = [(ell + 1) ** (-WEIGHT_DECAY) for ell in range(1, L + 1)]
    total_w = sum(raw_w)
    levels = []
    for ell in range(L + 1):
        if method == "adapted":
            h_bar = 0.25 * 2.0 ** (-0.5 * ell)
            eps = 2.0 ** (-math.ceil(2.0 * kappa * (2.0 + 0.5 * ell) - 1e-9))
            dt = h_bar ** (2.0 * kappa)
            p2 = 4.0 * kappa
        else:
            h_bar = 0.25 * 2.0 ** (-ell)
            eps = h_bar
            dt = h_bar
            p2 = 2.0
        if ell == 0:
            rho = 1.0
            h_last = 0.25 * 2.0 ** (-0.5 * L) if method == "adapted" else 0.25 * 2.0 ** (-L)
            m = _ceil(h_last**-p2)
        else:
            rho = raw_w[ell - 1] / total_w
            ratio = 2.0 ** (0.5 * (L - ell)) if method == "adapted" else 2.0 ** (L - ell)
            m = _ceil(ratio**p2 / (rho**2 * c_rho**2))
        levels.append(LevelParams(ell=ell, h_bar=h_bar, eps=eps, dt=dt, rho=rho, M=m))
    return LevelSchedule(method=method, L=L, kappa=kappa, c_rho=c_rho, levels=tuple(levels))


@dataclass(frozen=True)
class EstimatorResult:
    """Estimate with per-level correction statistics."""

    value: float
    level_counts: tuple[int, ...]
    level_means: np.ndarray
    level_variances: np.ndarray
    level_times: np.ndarray
    total_time: float
    covariances: np.ndarray | None = None  # C[j, k] for j < k, coupled runs only

    def __post_init__(self):
        if abs(self.value - float(self.level_means.sum())) > 1e-12 * max(1.0, abs(self.value)):
            raise ValueError("estimator value must equal the sum of level means")


def _as_sampler(problem, schedule: LevelSchedule):
    if hasattr(problem, "evaluate"):
        return problem
    return PathEvaluator(problem, schedule.level_tuples(), schedule.method)


# -- deterministic task pool -------------------------------------------------

_WORKER_SAMPLER = None
_WORKER_ROOT = None


def _init_worker(sampler, root):
    global _WORKER_SAMPLER, _WORKER_ROOT
    _WORKER_SAMPLER = sampler
    _WORKER_ROOT = root


def _run_task(task):
    origin, index, levels = task
    stream = _WORKER_ROOT.child(origin, index)
    t0 = time.perf_counter()
    values = _WORKER_SAMPLER.evaluate(levels, stream)
    return values, time.perf_counter() - t0


def _map_tasks(sampler, root: RandomStream, tasks: list, workers: int) -> list:
    """Evaluate tasks; output order is task order regardless of workers."""
    if workers <= 1 or len(tasks) < 2:
        _init_worker(sampler, root)
        return [_run_task(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(tasks) // (workers * 16))
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=workers, mp_context=ctx,
        initializer=_init_worker, initargs=(sampler, root),
    ) as pool:
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def mlmc_estimate(schedule: LevelSchedule, problem, root_stream: RandomStream,
                  workers: int = 1) -> EstimatorResult:
    """Standard telescoping estimator, Psi_{-1} := 0.

    Each level-l correction draws one realization per index and evaluates it
    at levels l and l-1; the coarse evaluation reuses the same realization
    with the coarse discretization and the restricted field.
    """
    sampler = _as_sampler(problem, schedule)
    lcount = schedule.sample_counts
    tasks = []
    for ell, m in enumerate(lcount):
        levels = [ell] if ell == 0 else [ell, ell - 1]
        tasks.extend((ell, i, levels) for i in range(m))
    t_start = time.perf_counter()
    results = _map_tasks(sampler, root_stream, tasks, workers)
    corrections = [np.empty(m) for m in lcount]
    times = np.zeros(len(lcount))
    pos = 0
    for ell, m in enumerate(lcount):
        for i in range(m):
            values, elapsed = results[pos]
            pos += 1
            corrections[ell][i] = values[0] if ell == 0 else values[0] - values[1]
            times[ell] += elapsed
    means = np.array([c.mean() for c in corrections])
    variances = np.array([c.var(ddof=1) if len(c) > 1 else 0.0 for c in corrections])
    return EstimatorResult(
        value=float(means.sum()),
        level_counts=tuple(lcount),
        level_means=means,
        level_variances=variances,
        level_times=times,
        total_time=time.perf_counter() - t_start,
    )


def coupled_mlmc_estimate(schedule: LevelSchedule, problem, root_stream: RandomStream,
                          workers: int = 1) -> EstimatorResult:
    """Coupled estimator: realization i serves every level l with M_l >= i+1.

    Realization i is drawn once (field sampled at the finest level it
    reaches) and evaluated at levels ell_max(i)..0, so consecutive
    corrections share the middle evaluation.  Requires non-increasing M_l.
    At L = 0 this reduces bitwise to the standard estimator.
    """
    sampler = _as_sampler(problem, schedule)
    lcount = schedule.sample_counts
    if any(m2 > m1 for m1, m2 in zip(lcount, lcount[1:])):
        raise ValueError("coupled estimator requires non-increasing sample counts")
    n_levels = len(lcount)
    tasks = []
    for i in range(lcount[0]):
        ell_max = max(ell for ell, m in enumerate(lcount) if m >= i + 1)
        tasks.append((0, i, list(range(ell_max, -1, -1))))
    t_start = time.perf_counter()
    results = _map_tasks(sampler, root_stream, tasks, workers)
    psi = np.full((n_levels, lcount[0]), np.nan)
    times = np.zeros(n_levels)
    for (_, i, levels), (values, elapsed) in zip(tasks, results):
        for ell, v in zip(levels, values):
            psi[ell, i] = v
        times[levels[0]] += elapsed
    corrections = []
    for ell, m in enumerate(lcount):
        d = psi[ell, :m] if ell == 0 else psi[ell, :m] - psi[ell - 1, :m]
        corrections.append(d)
    means = np.array([c.mean() for c in corrections])
    variances = np.array([c.var(ddof=1) if len(c) > 1 else 0.0 for c in corrections])
    cov = np.full((n_levels, n_levels), np.nan)
    for k in range(n_levels):
        for j in range(k):
            m = lcount[k]
            if m >= 2:
                dj = corrections[j][:m]
                dk = corrections[k][:m]
                cov[j, k] = float(np.dot(dj - dj.mean(), dk - dk.mean()) / (m - 1))
    return EstimatorResult(
        value=float(means.sum()),
        level_counts=tuple(lcount),
        level_means=means,
        level_variances=variances,
        level_times=times,
        total_time=time.perf_counter() - t_start,
        covariances=cov,
    )


# -- study driver ------------------------------------------------------------


@dataclass(frozen=True)
class StudyRow:
    method: str
    L: int
    h_L: float
    rep: int
    estimate: float
    reference: float

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.reference) / abs(self.reference)


@dataclass(frozen=True)
class StudySummary:
    method: str
    L: int
    h_L: float
    reps: int
    rmse_rel: float
    mean_time: float


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[StudyRow, ...]
    summary: tuple[StudySummary, ...]
    slopes: dict[str, float]
    reference: float


def _method_label(method: str, estimator: str) -> str:
    return method if estimator == "standard" else f"{method}-{estimator}"


def _parse_method(label: str) -> tuple[str, str]:
    if label.endswith("-coupled"):
        return label[: -len("-coupled")], "coupled"
    if label.endswith("-standard"):
        return label[: -len("-standard")], "standard"
    return label, "standard"


def fit_loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    a = np.vstack([lx, np.ones_like(lx)]).T
    slope, _ = np.linalg.lstsq(a, ly, rcond=None)[0]
    return float(slope)


def rmse_study(L_values, reps: int, reference: float, problem, methods,
               root_stream: RandomStream, kappa: float = 1.0,
               workers: int = 1) -> StudyResult:
    """Relative RMSE of estimator replications against a reference value.

    For each method label and max level the estimator is replicated ``reps``
    times on independent streams; the summary carries
    ``sqrt(mean((E - ref)^2)) / ref`` and per-method log-log slopes of the
    RMSE against the finest refinement threshold.
    """
    if reference == 0.0:
        raise ValueError("reference value must be nonzero")
    rows: list[StudyRow] = []
    summaries: list[StudySummary] = []
    slopes: dict[str, float] = {}
    for label in methods:
        method, estimator = _parse_method(label)
        mid = METHOD_IDS[f"{method}-{estimator}"]
        estimate_fn = mlmc_estimate if estimator == "standard" else coupled_mlmc_estimate
        h_values = []
        rmse_values = []
        for L in L_values:
            schedule = build_schedule(L, method, kappa=kappa)
            errs = []
            times = []
            for rep in range(reps):
                stream = root_stream.child(mid, L, rep)
                result = estimate_fn(schedule, problem, stream, workers=workers)
                rows.append(StudyRow(method=label, L=L, h_L=schedule.levels[-1].h_bar,
                                     rep=rep, estimate=result.value, reference=reference))
                errs.append((result.value - reference) ** 2)
                times.append(result.total_time)
            rmse = math.sqrt(sum(errs) / len(errs)) / abs(reference)
            summaries.append(StudySummary(method=label, L=L, h_L=schedule.levels[-1].h_bar,
                                          reps=reps, rmse_rel=rmse,
                                          mean_time=float(np.mean(times))))
            h_values.append(schedule.levels[-1].h_bar)
            rmse_values.append(rmse)
        if len(h_values) >= 2 and min(rmse_values) > 0.0:
            slopes[label] = fit_loglog_slope(np.array(h_values), np.array(rmse_values))
    return StudyResult(rows=tuple(rows), summary=tuple(summaries), slopes=slopes,
                       reference=reference)


# -- reference value ---------------------------------------------------------


def reference_fingerprint(problem, L_ref: int, stream: RandomStream, kappa: float) -> str:
    from .config import dumps_config  # local import to avoid a cycle

    payload = "\n".join([
        dumps_config(problem) if hasattr(problem, "covariance") else repr(problem),
        f"L_ref={L_ref}",
        f"kappa={kappa}",
        stream.describe(),
    ])
    return hashlib.sha256(payload.encode()).hexdigest()


def compute_reference(problem, L_ref: int, stream: RandomStream,
                      cache_path: str | os.PathLike | None = None,
                      kappa: float = 1.0, workers: int = 1) -> float:
    """Reference QoI: one adapted standard-MLMC run at level ``L_ref``.

    The value is cached to disk together with a fingerprint of the full
    configuration; any parameter change invalidates the cache.
    """
    fp = reference_fingerprint(problem, L_ref, stream, kappa)
    if cache_path is not None and os.path.exists(cache_path):
        with open(cache_path) as fh:
            data = json.load(fh)
        if data.get("fingerprint") == fp:
            return float(data["value"])
    schedule = build_schedule(L_ref, "adapted", kappa=kappa)
    result = mlmc_estimate(schedule, problem, stream, workers=workers)
    if cache_path is not None:
        payload = {"fingerprint": fp, "value": result.value, "L_ref": L_ref}
        tmp = str(cache_path) + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=1)
        os.replace(tmp, cache_path)
    return result.value
