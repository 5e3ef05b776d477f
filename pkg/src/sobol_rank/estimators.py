"""Rank-based estimators of the second conditional moment eta = E[E(Y|X)^2].

The sample is sorted by input value and the outputs are multiplied with
their neighbour ``lag`` positions further along. Averaging the lagged
estimates with equal weights gives the efficient combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidSampleError(ValueError):
    """Raised when (x, y) data do not form a usable paired sample."""


class LagRangeError(ValueError):
    """Raised when a lag or lag count falls outside ``[1, n - 1]``."""


class DegenerateOutputError(ValueError):
    """Raised when the outputs have zero variance."""


@dataclass(frozen=True)
class PairedSample:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or ys.ndim != 1:
            raise InvalidSampleError("xs and ys must be one-dimensional")
        if xs.shape != ys.shape:
            raise InvalidSampleError(
                f"length mismatch: {xs.size} inputs vs {ys.size} outputs"
            )
        if xs.size < 2:
            raise InvalidSampleError(f"need at least 2 observations, got {xs.size}")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise InvalidSampleError("sample contains NaN or infinite values")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return self.xs.size


@dataclass(frozen=True)
class OrderedSample:
    xs_sorted: np.ndarray
    ys_sorted: np.ndarray
    range: float

    @property
    def n(self) -> int:
        return self.ys_sorted.size


@dataclass(frozen=True)
class LagEstimates:
    """``values[l - 1]`` holds the lag-``l`` estimate, for l = 1..k."""

    values: np.ndarray
    n: int
    k: int


@dataclass(frozen=True)
class SobolEstimate:
    eta_hat: float
    mean_hat: float
    var_hat: float
    s_hat: float
    s_clamped: float
    n: int
    k: int


def order_by_input(sample: PairedSample) -> OrderedSample:
    """Sort the pairs by increasing input; ties keep their original order."""
    idx = np.argsort(sample.xs, kind="stable")
    xs = sample.xs[idx]
    return OrderedSample(xs_sorted=xs, ys_sorted=sample.ys[idx], range=float(xs[-1] - xs[0]))


def _lag_sum(ys: np.ndarray, lag: int) -> float:
    # Shared by the scalar and batched paths; both must reduce identically.
    return np.sum(ys[:-lag] * ys[lag:])


def _check_lag(lag, n: int, what: str = "lag") -> int:
    if isinstance(lag, (bool, np.bool_)) or int(lag) != lag:
        raise LagRangeError(f"{what} must be an integer, got {lag!r}")
    lag = int(lag)
    if not 1 <= lag <= n - 1:
        raise LagRangeError(f"{what}={lag} outside [1, {n - 1}] for n={n}")
    return lag


def eta_lag(ordered: OrderedSample, lag: int) -> float:
    """Lagged rank estimate ``sum_i Y_(i) Y_(i+lag) / (n - lag)``."""
    n = ordered.n
    lag = _check_lag(lag, n)
    return float(_lag_sum(ordered.ys_sorted, lag) / (n - lag))


def eta_lags(ordered: OrderedSample, k: int) -> LagEstimates:
    """All lagged estimates for lags 1..k."""
    n = ordered.n
    k = _check_lag(k, n, "k")
    ys = ordered.ys_sorted
    values = np.array([_lag_sum(ys, lag) / (n - lag) for lag in range(1, k + 1)])
    return LagEstimates(values=values, n=n, k=k)


def eta_avg(estimates: LagEstimates) -> float:
    """Equal-weight average of the lagged estimates."""
    values = np.asarray(estimates.values, dtype=float)
    if values.size == 0:
        raise LagRangeError("cannot average an empty set of lag estimates")
    return float(np.mean(values))


def _icbrt(n: int) -> int:
    r = int(round(n ** (1.0 / 3.0)))
    while r**3 > n:
        r -= 1
    while (r + 1) ** 3 <= n:
        r += 1
    return r


def default_k(n: int) -> int:
    """Cube-root rule ``floor(n^(1/3))`` clamped to ``[1, n - 1]``."""
    if n < 2:
        raise LagRangeError(f"default_k needs n >= 2, got {n}")
    return max(1, min(n - 1, _icbrt(n)))


def adaptive_k(ordered: OrderedSample) -> int:
    """Range-aware rule ``floor(n^(1/3) / range)``, clamped to ``[1, n - 1]``.

    Falls back to :func:`default_k` when all inputs are equal.
    """
    n = ordered.n
    if ordered.range <= 0:
        return default_k(n)
    k = int(np.floor(np.cbrt(n) / ordered.range))
    return max(1, min(n - 1, k))


def sobol_from_sample(sample: PairedSample, k: int | str | None = None) -> SobolEstimate:
    """Estimate the first-order Sobol index of ``y`` with respect to ``x``.

    Args:
        sample: paired observations, n >= 3.
        k: number of averaged lags. ``None`` or ``"auto"`` uses the cube-root
            rule; ``"adaptive"`` divides it by the input range.

    Returns:
        SobolEstimate with the raw index and a copy clamped to [0, 1].
    """
    n = sample.n
    if n < 3:
        raise InvalidSampleError(f"need at least 3 observations, got {n}")
    ordered = order_by_input(sample)
    if k is None or k == "auto":
        k = default_k(n)
    elif k == "adaptive":
        k = adaptive_k(ordered)
    ys = sample.ys
    if np.ptp(ys) == 0:
        raise DegenerateOutputError("outputs are constant; Sobol index undefined")
    var_hat = float(np.var(ys, ddof=1))
    if not var_hat > 0:
        raise DegenerateOutputError("outputs have zero sample variance")
    eta_hat = eta_avg(eta_lags(ordered, k))
    mean_hat = float(np.mean(ys))
    s_hat = (eta_hat - mean_hat**2) / var_hat
    return SobolEstimate(
        eta_hat=eta_hat,
        mean_hat=mean_hat,
        var_hat=var_hat,
        s_hat=s_hat,
        s_clamped=min(1.0, max(0.0, s_hat)),
        n=n,
        k=int(k),
    )
