"""Synthetic heteroscedastic models ``Y = phi(X) + sqrt(v(X)) * eps`` and their
theoretical constants.

Moments against the input law are computed by composite Gauss-Legendre
quadrature, evaluated twice (base rule and a doubled one) so that a
disagreement can be reported instead of silently returned.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from sobol_rank.estimators import LagRangeError, PairedSample

QUAD_RTOL = 1e-8
# Exponential law: the integration domain stops where the tail mass is e^-70.
_EXP_CUTOFF = 70.0


class ModelSpecError(ValueError):
    """Raised for malformed models, e.g. a negative conditional variance."""


class QuadratureAccuracyError(RuntimeError):
    """Raised when the base and refined quadrature rules disagree."""


@dataclass(frozen=True)
class Uniform:
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ModelSpecError(f"uniform law needs a < b, got ({self.a}, {self.b})")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=size)

    def quantile(self, p):
        return self.a + (self.b - self.a) * np.asarray(p, dtype=float)

    def panels(self, level: int) -> np.ndarray:
        return np.linspace(self.a, self.b, 8 * level + 1)

    def density(self, x):
        return np.full_like(x, 1.0 / (self.b - self.a))

    def __str__(self):
        return f"uniform({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ModelSpecError(f"exponential rate must be positive, got {self.rate}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size=size)

    def quantile(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate

    def panels(self, level: int) -> np.ndarray:
        # unit-mean-width panels; the refined level also doubles the cutoff
        m = int(_EXP_CUTOFF) * level
        return np.linspace(0.0, level * _EXP_CUTOFF / self.rate, m + 1)

    def density(self, x):
        return self.rate * np.exp(-self.rate * x)

    def __str__(self):
        return f"exponential({self.rate:g})"


InputLaw = Uniform | Exponential


@dataclass(frozen=True)
class ModelSpec:
    phi: Callable[[np.ndarray], np.ndarray]
    v: Callable[[np.ndarray], np.ndarray]
    input_law: InputLaw = field(default_factory=Uniform)
    label: str = ""


@dataclass(frozen=True)
class TheorySummary:
    eta: float
    var_y: float
    sobol: float
    e_phi2_v: float
    e_v2: float
    var_phi2: float
    sigma2_opt: float
    sigma2_rank: float
    sigma2_nn: float
    sigma2_ker: float
    improvement: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class BiasBoundSpec:
    """Sup and Lipschitz constants of phi and v, plus the mean input range."""

    m_phi: float
    l_phi: float
    m_v: float
    l_v: float
    e_delta_n: float = math.nan
    phi_violation: bool = False
    v_violation: bool = False

    @property
    def violated(self) -> bool:
        return self.phi_violation or self.v_violation


PHI_CATALOG: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin5": lambda x: np.sin(5.0 * x),
    "quad": lambda x: x**2 - 3.0 * x,
    "identity": lambda x: x,
    "zero": lambda x: np.zeros_like(x),
}
V_CATALOG: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "vquad": lambda x: 4.0 * x**2,
    "zero": lambda x: np.zeros_like(x),
}

_LAW_RE = re.compile(r"^\s*(uniform|unif|exponential|exp)\s*(?:\(([^)]*)\))?\s*$", re.I)


def parse_law(text: str) -> InputLaw:
    """Parse ``uniform(a,b)``, ``exponential(rate)`` or the bare names."""
    m = _LAW_RE.match(text)
    if not m:
        raise ModelSpecError(
            f"unknown input law {text!r}; expected uniform(a,b) or exponential(rate)"
        )
    kind = m.group(1).lower()
    args = [s.strip() for s in m.group(2).split(",")] if m.group(2) else []
    try:
        params = [float(s) for s in args if s]
    except ValueError as exc:
        raise ModelSpecError(f"non-numeric law parameter in {text!r}") from exc
    if kind.startswith("unif"):
        if len(params) not in (0, 2):
            raise ModelSpecError(f"uniform law takes 0 or 2 parameters: {text!r}")
        return Uniform(*params)
    if len(params) not in (0, 1):
        raise ModelSpecError(f"exponential law takes 0 or 1 parameter: {text!r}")
    return Exponential(*params)


def make_model(name: str, law: str | InputLaw = "uniform(0,1)") -> ModelSpec:
    """Build a catalog model from ``"<phi>/<v>"``, e.g. ``"sin5/vquad"``.

    A bare ``"<phi>"`` pairs it with ``vquad``.
    """
    phi_name, _, v_name = name.strip().partition("/")
    v_name = v_name or "vquad"
    if phi_name not in PHI_CATALOG or v_name not in V_CATALOG:
        raise ModelSpecError(
            f"unknown model {name!r}; phi in {sorted(PHI_CATALOG)}, v in {sorted(V_CATALOG)}"
        )
    if isinstance(law, str):
        law = parse_law(law)
    return ModelSpec(
        phi=PHI_CATALOG[phi_name],
        v=V_CATALOG[v_name],
        input_law=law,
        label=f"{phi_name}/{v_name}/{law}",
    )


def _evaluate(f, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)


def sample_model(spec: ModelSpec, n: int, seed: int | Sequence[int]) -> PairedSample:
    """Draw ``n`` iid pairs. ``seed`` may be an int or a sequence of ints."""
    if n < 2:
        raise ModelSpecError(f"need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    xs = spec.input_law.sample(rng, n)
    v = _evaluate(spec.v, xs)
    if (v < 0).any():
        bad = xs[np.argmax(v < 0)]
        raise ModelSpecError(f"negative conditional variance at x={bad!r}")
    eps = rng.standard_normal(n)
    ys = _evaluate(spec.phi, xs) + np.sqrt(v) * eps
    return PairedSample(xs, ys)


def _rule(law: InputLaw, points: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = leggauss(points * level)
    edges = law.panels(level)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2.0
    x = (lo + half * (t + 1.0)).ravel()
    weights = (half * w).ravel()
    return x, weights * law.density(x)


class _Integrator:
    """Base and refined node sets for one law, reused across integrands."""

    def __init__(self, law: InputLaw, points: int):
        if points < 2:
            raise ValueError(f"quadrature_points must be >= 2, got {points}")
        self.rules = [_rule(law, points, 1), _rule(law, points, 2)]

    def nodes(self):
        return [x for x, _ in self.rules]

    def integrate(self, values: Sequence[np.ndarray], name: str) -> float:
        (_, w1), (_, w2) = self.rules
        f1, f2 = values
        i1, i2 = float(w1 @ f1), float(w2 @ f2)
        scale = float(w2 @ np.abs(f2))
        if not (math.isfinite(i1) and math.isfinite(i2)):
            raise QuadratureAccuracyError(f"{name}: non-finite quadrature value")
        if abs(i1 - i2) > QUAD_RTOL * max(scale, 1e-300):
            raise QuadratureAccuracyError(
                f"{name}: base rule {i1!r} vs refined {i2!r} "
                f"(relative gap {abs(i1 - i2) / max(scale, 1e-300):.2e} > {QUAD_RTOL:g})"
            )
        return i2


def expectation(f, law: InputLaw, quadrature_points: int = 32) -> float:
    """E[f(X)] under ``law`` by checked composite Gauss-Legendre quadrature."""
    q = _Integrator(law, quadrature_points)
    return q.integrate([_evaluate(f, x) for x in q.nodes()], "E[f(X)]")


def theory_summary(spec: ModelSpec, quadrature_points: int = 32) -> TheorySummary:
    """Asymptotic variance constants of the competing estimators of eta."""
    q = _Integrator(spec.input_law, quadrature_points)
    phis, vs = [], []
    for x in q.nodes():
        phis.append(_evaluate(spec.phi, x))
        v = _evaluate(spec.v, x)
        if (v < 0).any():
            raise ModelSpecError(f"negative conditional variance at x={x[np.argmax(v < 0)]!r}")
        vs.append(v)

    def E(fn, name):
        return q.integrate([fn(p, v) for p, v in zip(phis, vs)], name)

    eta = E(lambda p, v: p**2, "E[phi^2]")
    e_phi = E(lambda p, v: p, "E[phi]")
    var_phi = E(lambda p, v: (p - e_phi) ** 2, "var[phi]")
    e_v = E(lambda p, v: v, "E[v]")
    e_phi2_v = E(lambda p, v: p**2 * v, "E[phi^2 v]")
    e_v2 = E(lambda p, v: v**2, "E[v^2]")
    var_phi2 = E(lambda p, v: (p**2 - eta) ** 2, "var[phi^2]")

    var_y = var_phi + e_v
    sigma2_opt = 4.0 * e_phi2_v + var_phi2
    sigma2_rank = sigma2_opt + e_v2
    return TheorySummary(
        eta=eta,
        var_y=var_y,
        sobol=var_phi / var_y if var_y > 0 else math.nan,
        e_phi2_v=e_phi2_v,
        e_v2=e_v2,
        var_phi2=var_phi2,
        sigma2_opt=sigma2_opt,
        sigma2_rank=sigma2_rank,
        sigma2_nn=5.0 * e_phi2_v + 2.0 * e_v2 + 2.0 * var_phi2,
        sigma2_ker=4.0 * e_phi2_v + 4.0 * var_phi2,
        improvement=(sigma2_rank - sigma2_opt) / sigma2_rank if sigma2_rank > 0 else 0.0,
    )


def asymptotic_cov(summary: TheorySummary, k: int) -> np.ndarray:
    """Limit of ``n * cov`` for the first ``k`` lagged estimators."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return np.full((k, k), summary.sigma2_opt) + summary.e_v2 * np.eye(k)


def bias_bound(spec: BiasBoundSpec, n: int, lag: int) -> float:
    """Upper bound on ``|E[eta_hat_lag] - eta|`` for regular models."""
    if lag == 0:
        return 0.0
    if not 1 <= lag < n:
        raise LagRangeError(f"lag={lag} outside [1, {n - 1}] for n={n}")
    if not math.isfinite(spec.e_delta_n):
        raise ValueError("bias bound needs a finite expected input range e_delta_n")
    return lag / (n - lag) * (spec.l_phi * spec.m_phi + 2.0 * spec.m_phi**2 * spec.e_delta_n)


def expected_range(law: InputLaw, n: int, replicates: int = 10_000, seed: int = 0) -> float:
    """Monte Carlo mean of ``max(X) - min(X)`` over samples of size ``n``."""
    rng = np.random.default_rng([seed, n])
    total = 0.0
    chunk = max(1, 2_000_000 // n)
    done = 0
    while done < replicates:
        m = min(chunk, replicates - done)
        x = law.sample(rng, (m, n))
        total += float(np.sum(x.max(axis=1) - x.min(axis=1)))
        done += m
    return total / replicates


def _sup_and_slope(f, lo: float, hi: float, grid_points: int) -> tuple[float, float]:
    x = np.linspace(lo, hi, grid_points)
    y = _evaluate(f, x)
    slope = np.abs(np.diff(y)) / np.diff(x)
    return float(np.max(np.abs(y))), float(np.max(slope, initial=0.0))


def estimate_regularity_constants(
    spec: ModelSpec,
    grid_points: int = 100_001,
    n: int | None = None,
    replicates: int = 10_000,
    seed: int = 0,
) -> BiasBoundSpec:
    """Grid estimates of the bound/Lipschitz constants of phi and v.

    Constants are taken over the central ``1 - 1e-6`` mass of the input law.
    They are recomputed on the central ``1 - 1e-3`` mass; growth by more than
    10% between the two supports flags an unbounded or non-Lipschitz function.
    ``e_delta_n`` is filled in by Monte Carlo when ``n`` is given.
    """
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    law = spec.input_law
    wide = law.quantile([0.5e-6, 1 - 0.5e-6])
    narrow = law.quantile([0.5e-3, 1 - 0.5e-3])

    def grows(f):
        big = _sup_and_slope(f, *wide, grid_points)
        small = _sup_and_slope(f, *narrow, grid_points)
        flag = any(b > 1.1 * s + 1e-12 for b, s in zip(big, small))
        return big, flag

    (m_phi, l_phi), phi_flag = grows(spec.phi)
    (m_v, l_v), v_flag = grows(spec.v)
    e_delta = expected_range(law, n, replicates, seed) if n is not None else math.nan
    return BiasBoundSpec(
        m_phi=m_phi,
        l_phi=l_phi,
        m_v=m_v,
        l_v=l_v,
        e_delta_n=e_delta,
        phi_violation=phi_flag,
        v_violation=v_flag,
    )
