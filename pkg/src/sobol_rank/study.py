"""Seeded Monte Carlo experiments on the lagged rank estimators.

Every replication draws from its own stream keyed by
``(base_seed, n, replication)``, writes into a preallocated row, and all
reductions run afterwards in row order. Results therefore do not depend on
how many worker threads were used.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import re

import numpy as np

from sobol_rank.estimators import default_k
from sobol_rank.models import BiasBoundSpec, ModelSpec, TheorySummary, bias_bound
from sobol_rank.models import expected_range, sample_model, theory_summary

THREADS_ENV = "SOBOL_RANK_THREADS"
_CHUNK = 256
_FIXED_RE = re.compile(r"^fixed\((\d+)\)$")


class StudyError(RuntimeError):
    """A replication failed; ``seed`` identifies the offending stream."""

    def __init__(self, message: str, seed: tuple[int, int, int]):
        super().__init__(message)
        self.seed = seed


@dataclass(frozen=True)
class StudyConfig:
    model: ModelSpec
    sample_sizes: tuple[int, ...] = (100, 500, 1000, 2000)
    max_lag: int = 50
    avg_ks: tuple[int, ...] = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    replications: int = 10_000
    base_seed: int = 0
    k_rule: str = "cube_root"

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "avg_ks", tuple(int(k) for k in self.avg_ks))
        if not self.sample_sizes:
            raise ValueError("sample_sizes must not be empty")
        if not 1 <= self.max_lag < min(self.sample_sizes):
            raise ValueError(
                f"max_lag={self.max_lag} must lie in [1, min(sample_sizes) - 1]"
            )
        if self.replications < 2:
            raise ValueError(f"replications must be >= 2, got {self.replications}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be non-negative, got {self.base_seed}")
        bad = [k for k in self.avg_ks if not 1 <= k <= self.max_lag]
        if bad:
            raise ValueError(f"avg_ks {bad} outside [1, max_lag={self.max_lag}]")
        self.k_for(min(self.sample_sizes))

    def k_for(self, n: int) -> int:
        """Number of averaged lags at sample size ``n`` under ``k_rule``."""
        if self.k_rule == "cube_root":
            return default_k(n)
        m = _FIXED_RE.match(self.k_rule)
        if not m:
            raise ValueError(f"k_rule must be 'cube_root' or 'fixed(k)', got {self.k_rule!r}")
        k = int(m.group(1))
        if not 1 <= k < n:
            raise ValueError(f"fixed k={k} outside [1, {n - 1}]")
        return k


@dataclass(frozen=True)
class BoxplotStats:
    q05: float
    q25: float
    median: float
    q75: float
    q95: float
    mean: float
    n_points: int


@dataclass(frozen=True)
class EstimatorStats:
    """Distribution of one estimator (a lag or an average) at one sample size."""

    n: int
    index: int
    box: BoxplotStats
    bias: float
    variance: float
    mse: float
    bias_se: float


@dataclass
class StudyReport:
    lags: list[EstimatorStats]
    avgs: list[EstimatorStats]
    covariances: dict[int, np.ndarray]
    theory: TheorySummary
    lag_values: dict[int, np.ndarray] = field(repr=False, default_factory=dict)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def simulate_lags(
    model: ModelSpec,
    n: int,
    k: int,
    replications: int,
    base_seed: int,
    threads: int | None = None,
) -> np.ndarray:
    """Lagged estimates for lags 1..k, one row per replication.

    Row ``r`` is bit-identical to ``eta_lags(order_by_input(sample_model(
    model, n, (base_seed, n, r))), k).values``.
    """
    out = np.empty((replications, k))

    def work(start: int):
        stop = min(start + _CHUNK, replications)
        xs = np.empty((stop - start, n))
        ys = np.empty((stop - start, n))
        for j, r in enumerate(range(start, stop)):
            seed = (base_seed, n, r)
            try:
                s = sample_model(model, n, seed)
            except Exception as exc:
                raise StudyError(f"replication failed for seed {seed}: {exc}", seed) from exc
            xs[j], ys[j] = s.xs, s.ys
        order = np.argsort(xs, axis=1, kind="stable")
        ys = np.take_along_axis(ys, order, axis=1)
        for lag in range(1, k + 1):
            out[start:stop, lag - 1] = (ys[:, :-lag] * ys[:, lag:]).sum(axis=1) / (n - lag)

    starts = range(0, replications, _CHUNK)
    nthreads = resolve_threads(threads)
    if nthreads == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            list(pool.map(work, starts))
    return out


def boxplot_stats(values: np.ndarray) -> BoxplotStats:
    q = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95], method="linear")
    return BoxplotStats(*(float(v) for v in q), mean=float(np.mean(values)), n_points=values.size)


def estimator_stats(values: np.ndarray, truth: float, n: int, index: int) -> EstimatorStats:
    """Bias, variance (divisor N) and MSE of ``values`` against ``truth``."""
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    return EstimatorStats(
        n=n,
        index=index,
        box=boxplot_stats(values),
        bias=mean - truth,
        variance=float(np.mean((values - mean) ** 2)),
        mse=float(np.mean((values - truth) ** 2)),
        bias_se=float(np.std(values, ddof=1) / np.sqrt(values.size)),
    )


def averages(lag_values: np.ndarray, k: int) -> np.ndarray:
    """Equal-weight averages of the first ``k`` lag columns, per row."""
    return lag_values[:, :k].mean(axis=1)


def lag_covariance(lag_values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` times the sample covariance (divisor N-1) and its standard errors.

    The standard error of entry (l, m) is the spread of the centred products
    ``(a_l - mean_l)(a_m - mean_m)`` divided by sqrt(N).
    """
    N = lag_values.shape[0]
    if N < 2:
        raise ValueError(f"need at least 2 replications, got {N}")
    centred = lag_values - lag_values.mean(axis=0)
    cov = n * (centred.T @ centred) / (N - 1)
    cov = (cov + cov.T) / 2.0
    k = lag_values.shape[1]
    se = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            prod = centred[:, a] * centred[:, b]
            se[a, b] = se[b, a] = n * np.std(prod, ddof=1) / np.sqrt(N)
    return cov, se


def run_study(config: StudyConfig, threads: int | None = None) -> StudyReport:
    """Per-lag and per-average statistics for every sample size in ``config``."""
    theory = theory_summary(config.model)
    lags, avgs, covs, raw = [], [], {}, {}
    for n in config.sample_sizes:
        values = simulate_lags(
            config.model, n, config.max_lag, config.replications, config.base_seed, threads
        )
        raw[n] = values
        for lag in range(1, config.max_lag + 1):
            lags.append(estimator_stats(values[:, lag - 1], theory.eta, n, lag))
        for k in config.avg_ks:
            avgs.append(estimator_stats(averages(values, k), theory.eta, n, k))
        covs[n] = lag_covariance(values, n)[0]
    return StudyReport(lags=lags, avgs=avgs, covariances=covs, theory=theory, lag_values=raw)


@dataclass(frozen=True)
class MseRow:
    n: int
    estimator: str
    k: int
    n_mse: float
    n_bias2: float
    n_var: float
    reference: float
    sigma2_rank: float


def mse_curve(config: StudyConfig, threads: int | None = None) -> list[MseRow]:
    """Scaled MSE of the lag-1, lag-k and averaged estimators for each n.

    ``reference`` is the first-order prediction for the average,
    ``sigma2_opt + E[v^2] / k``; ``sigma2_rank`` is the single-lag limit.
    """
    theory = theory_summary(config.model)
    rows = []
    for n in config.sample_sizes:
        k = config.k_for(n)
        values = simulate_lags(
            config.model, n, k, config.replications, config.base_seed, threads
        )
        reference = theory.sigma2_opt + theory.e_v2 / k
        for name, est in (
            ("lag1", values[:, 0]),
            ("lagk", values[:, k - 1]),
            ("avg", averages(values, k)),
        ):
            st = estimator_stats(est, theory.eta, n, k)
            rows.append(
                MseRow(
                    n=n,
                    estimator=name,
                    k=k,
                    n_mse=n * st.mse,
                    n_bias2=n * st.bias**2,
                    n_var=n * st.variance,
                    reference=reference,
                    sigma2_rank=theory.sigma2_rank,
                )
            )
    return rows


def empirical_lag_cov(
    config: StudyConfig,
    n: int,
    k: int,
    threads: int | None = None,
    return_se: bool = False,
):
    """``n`` times the empirical covariance of the first ``k`` lag estimators."""
    if n not in config.sample_sizes:
        raise ValueError(f"n={n} not in config sample sizes {config.sample_sizes}")
    if not 1 <= k <= config.max_lag:
        raise ValueError(f"k={k} outside [1, max_lag={config.max_lag}]")
    values = simulate_lags(config.model, n, k, config.replications, config.base_seed, threads)
    cov, se = lag_covariance(values, n)
    return (cov, se) if return_se else cov


@dataclass(frozen=True)
class BiasCheckRow:
    n: int
    lag: int
    abs_bias: float
    bias_se: float
    bound: float
    satisfied: bool


def bias_bound_check(
    config: StudyConfig,
    constants: BiasBoundSpec,
    threads: int | None = None,
    range_replicates: int = 10_000,
) -> list[BiasCheckRow]:
    """Compare Monte Carlo bias of every lag with the theoretical bound.

    A cell passes when ``|bias| - 3 * se <= bound``. The mean input range is
    re-estimated for each sample size; other constants come from ``constants``.
    """
    from dataclasses import replace

    theory = theory_summary(config.model)
    rows = []
    for n in config.sample_sizes:
        spec = replace(
            constants,
            e_delta_n=expected_range(
                config.model.input_law, n, range_replicates, config.base_seed
            ),
        )
        values = simulate_lags(
            config.model, n, config.max_lag, config.replications, config.base_seed, threads
        )
        for lag in range(1, config.max_lag + 1):
            st = estimator_stats(values[:, lag - 1], theory.eta, n, lag)
            bound = bias_bound(spec, n, lag)
            rows.append(
                BiasCheckRow(
                    n=n,
                    lag=lag,
                    abs_bias=abs(st.bias),
                    bias_se=st.bias_se,
                    bound=bound,
                    satisfied=abs(st.bias) - 3.0 * st.bias_se <= bound,
                )
            )
    return rows
