"""
Heavy-traffic estimates for the law of L and the sweeps that check them.

All logarithms are natural. The range of l is split at l0 = lambda - sqrt(lambda):
below it the "body" estimate applies, above it the "tail" bound.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln  # type: ignore
from tqdm import tqdm  # type: ignore

from ..errors import DomainError, ParameterError
from .analytic_core import (
    ModelParams,
    _check_index,
    build_survival_table,
    certified_weighted_sum,
    exact_moment,
    exact_variance,
    scaled_eps,
)

logger = logging.getLogger(__name__)

# e^7 is the constant produced by bounding D_l from below with the terms
# k in [lambda - 2s, lambda - s] and n! <= e sqrt(n) e^{-n} n^n.
TAIL_LOG_CONSTANT = 7.0
# The tail bound needs floor(lambda - 2 sqrt(lambda)) >= 0 with room to spare.
TAIL_MIN_LAMBDA = 9.0
UNIFORM_MIN_LAMBDA = 4.0
MAX_T_ORDER = 5


@dataclass(frozen=True)
class BodyTailSplit:
    lam: float
    s: float
    l0: float

    def to_dict(self):
        return {"lambda": self.lam, "s": self.s, "l0": self.l0}


@dataclass(frozen=True)
class AsymptoticMoment:
    m: int
    leading: float
    second: float
    value: float

    def to_dict(self):
        return {
            "m": self.m,
            "leading": self.leading,
            "second": self.second,
            "value": self.value,
        }


@dataclass(frozen=True)
class ResidualSweep:
    """
    Normalised residuals (exact - expansion) / lambda^p over a lambda grid.

    ``statistic`` is "moment" (p = m - 1) or "t_sum" (p = n).
    """

    m: int
    grid: tuple
    residuals: tuple
    exact: tuple = field(default=())
    expansion: tuple = field(default=())
    statistic: str = "moment"

    @property
    def width(self):
        return max(self.residuals) - min(self.residuals)

    def rows(self):
        for lam, exact, expansion, residual in zip(
            self.grid, self.exact, self.expansion, self.residuals
        ):
            yield {
                "lambda": lam,
                "exact": exact,
                "expansion": expansion,
                "residual": residual,
            }

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "m": self.m,
            "grid": list(self.grid),
            "residuals": list(self.residuals),
            "rows": list(self.rows()),
            "width": self.width,
        }


@dataclass(frozen=True)
class TSumSplit:
    n: int
    l0: float
    body: float
    tail: float
    truncation_bound: float

    @property
    def total(self):
        return self.body + self.tail


@dataclass(frozen=True)
class TailScan:
    lam: float
    l_from: int
    l_to: int
    violations: tuple
    max_ratio: float

    def to_dict(self):
        return {
            "lambda": self.lam,
            "l_from": self.l_from,
            "l_to": self.l_to,
            "violations": list(self.violations),
            "violation_count": len(self.violations),
            "max_ratio": self.max_ratio,
        }


def body_tail_split(params):
    s = math.sqrt(params.lam)
    return BodyTailSplit(lam=params.lam, s=s, l0=params.lam - s)


# --- Pointwise estimates ---


def newell_approximation(params, l):
    """Pr[L > l] ~ max(0, 1 - l / lambda); the kink at l = lambda belongs to the zero branch."""
    l = _check_index("l", l)
    return max(0.0, 1.0 - l / params.lam)


def body_estimate(params, l):
    """
    Pr[L > l] ~ (1 - l/lambda) + 1 / (lambda (1 - l/lambda)) for l <= l0.

    The error is O(1/lambda) + O(1 / (lambda^2 (1 - l/lambda)^3)); see
    ``body_error_scale``. The second term blows up as l approaches lambda, so
    arguments above l0 = lambda - sqrt(lambda) are rejected.
    """
    l = _check_index("l", l)
    split = body_tail_split(params)
    if l > split.l0:
        raise DomainError(
            f"l={l} is outside the body region l <= l0 = {split.l0:.6g}.",
            boundary=split.l0,
        )
    x = 1.0 - l / params.lam
    return x + 1.0 / (params.lam * x)


def body_error_scale(params, l):
    x = 1.0 - l / params.lam
    return 1.0 / params.lam + 1.0 / (params.lam**2 * x**3)


def _log_tail_bound(lam, ls):
    ls = np.asarray(ls, dtype=np.float64)
    return TAIL_LOG_CONSTANT - lam + ls * math.log(lam) - gammaln(ls + 1.0)


def tail_bound(params, l):
    """
    Pr[L > l] <= min(1, e^7 e^{-lambda} lambda^l / l!) for l >= lambda - sqrt(lambda).

    Evaluated in log space through log-gamma. Certified for lambda >= 9 only.
    """
    l = _check_index("l", l)
    if params.lam < TAIL_MIN_LAMBDA:
        raise DomainError(
            f"the tail bound is certified for lambda >= {TAIL_MIN_LAMBDA:g}, got {params.lam:g}.",
            boundary=TAIL_MIN_LAMBDA,
        )
    split = body_tail_split(params)
    if l < split.l0:
        raise DomainError(
            f"l={l} is outside the tail region l >= l0 = {split.l0:.6g}.",
            boundary=split.l0,
        )
    log_bound = float(_log_tail_bound(params.lam, [l])[0])
    return 1.0 if log_bound >= 0.0 else math.exp(log_bound)


def tail_violations(params, window=20):
    """Every integer l in [l0, lambda + window sqrt(lambda)] where the exact survival beats the tail bound."""
    if params.lam < TAIL_MIN_LAMBDA:
        raise DomainError(
            f"the tail bound is certified for lambda >= {TAIL_MIN_LAMBDA:g}, got {params.lam:g}.",
            boundary=TAIL_MIN_LAMBDA,
        )
    split = body_tail_split(params)
    l_from = math.ceil(split.l0)
    l_to = math.floor(params.lam + window * split.s)
    table = build_survival_table(params, l_to)
    ls = np.arange(l_from, l_to + 1)
    bounds = np.exp(np.minimum(_log_tail_bound(params.lam, ls), 0.0))
    exact = table.survival[l_from:]
    violations = tuple(int(l) for l in ls[exact > bounds])
    max_ratio = float(np.max(exact / bounds))
    if violations:
        logger.warning(f"Tail bound violated at {len(violations)} points for lambda={params.lam}")
    return TailScan(
        lam=params.lam,
        l_from=l_from,
        l_to=l_to,
        violations=violations,
        max_ratio=max_ratio,
    )


def max_body_error(params):
    """max over 0 <= l <= l0 of |body_estimate - exact|, with the maximising l."""
    split = body_tail_split(params)
    if split.l0 < 0:
        raise DomainError(
            f"the body region is empty for lambda={params.lam:g} (l0 = {split.l0:.6g}).",
            boundary=split.l0,
        )
    l_top = math.floor(split.l0)
    table = build_survival_table(params, l_top)
    ls = np.arange(l_top + 1, dtype=np.float64)
    x = 1.0 - ls / params.lam
    errors = np.abs(x + 1.0 / (params.lam * x) - table.survival)
    index = int(np.argmax(errors))
    return float(errors[index]), index


# --- Moments and T_n ---


def moment_expansion(params, m):
    """Ex[L^m] = lambda^m / (m+1) + m lambda^{m-1} log(lambda) / 2 + O(lambda^{m-1})."""
    m = _check_index("m", m, minimum=1)
    lam = params.lam
    leading = lam**m / (m + 1)
    second = m * lam ** (m - 1) * math.log(lam) / 2
    return AsymptoticMoment(m=m, leading=leading, second=second, value=leading + second)


def variance_expansion(params):
    """Var[L] = lambda^2 / 12 + lambda log(lambda) / 2 + O(lambda)."""
    lam = params.lam
    return lam**2 / 12 + lam * math.log(lam) / 2


def t_sum_exact(params, n, eps=1e-10):
    """T_n = sum_{l>=0} l^n Pr[L > l], truncated with the moment certificate."""
    n = _check_index("n", n)
    if n > MAX_T_ORDER:
        raise ParameterError(f"T_n order n={n} exceeds the supported maximum {MAX_T_ORDER}.")
    value, _, _ = certified_weighted_sum(
        params, lambda ls: np.power(ls.astype(np.float64), n), n, eps
    )
    return value


def t_sum_expansion(params, n):
    """T_n = lambda^{n+1} / ((n+1)(n+2)) + lambda^n log(lambda) / 2 + O(lambda^n)."""
    n = _check_index("n", n)
    lam = params.lam
    return lam ** (n + 1) / ((n + 1) * (n + 2)) + lam**n * math.log(lam) / 2


def t_sum_split(params, n, eps=1e-10):
    """Exact T_n split into the body part (l <= l0) and the tail part (l > l0)."""
    n = _check_index("n", n)
    if n > MAX_T_ORDER:
        raise ParameterError(f"T_n order n={n} exceeds the supported maximum {MAX_T_ORDER}.")
    _, l_cut, bound = certified_weighted_sum(
        params, lambda ls: np.power(ls.astype(np.float64), n), n, eps
    )
    split = body_tail_split(params)
    table = build_survival_table(params, l_cut)
    terms = np.power(np.arange(l_cut + 1, dtype=np.float64), n) * table.survival
    n_body = max(0, math.floor(split.l0) + 1)
    return TSumSplit(
        n=n,
        l0=split.l0,
        body=float(np.sum(terms[:n_body])),
        tail=float(np.sum(terms[n_body:])),
        truncation_bound=bound,
    )


def variance_residual(params):
    """(exact Var[L] - variance expansion) / lambda."""
    return (exact_variance(params) - variance_expansion(params)) / params.lam


# --- Uniform limit ---


def uniform_limit_distance(params):
    """sup_l |Pr[L > l] - max(0, 1 - l/lambda)|: Kolmogorov distance of L/lambda to U[0, 1]."""
    return uniform_limit_scan(params)[0]


def uniform_limit_scan(params):
    if params.lam < UNIFORM_MIN_LAMBDA:
        raise DomainError(
            f"uniform_limit_distance needs lambda >= {UNIFORM_MIN_LAMBDA:g}, got {params.lam:g}.",
            boundary=UNIFORM_MIN_LAMBDA,
        )
    table = build_survival_table(params)
    ls = np.arange(table.l_max + 1, dtype=np.float64)
    approx = np.maximum(0.0, 1.0 - ls / params.lam)
    gaps = np.abs(table.survival - approx)
    index = int(np.argmax(gaps))
    return float(gaps[index]), index


# --- Residual sweeps ---


def _validate_grid(grid):
    grid = tuple(float(lam) for lam in grid)
    if not grid:
        raise ParameterError("the lambda grid is empty.")
    if any(lam < TAIL_MIN_LAMBDA for lam in grid):
        raise ParameterError(f"grid values must be >= {TAIL_MIN_LAMBDA:g}, got {list(grid)}.")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError(f"the lambda grid must be strictly increasing, got {list(grid)}.")
    return grid


def _sweep(grid, order, statistic, exact_fn, expansion_fn, power, progress):
    grid = _validate_grid(grid)
    exact_values, expansions, residuals = [], [], []
    for lam in tqdm(grid, desc=f"{statistic} sweep", disable=not progress, leave=False):
        params = ModelParams(lam)
        exact = exact_fn(params)
        expansion = expansion_fn(params)
        exact_values.append(exact)
        expansions.append(expansion)
        residuals.append((exact - expansion) / lam**power)
        logger.info(f"{statistic} order={order} lambda={lam:g} residual={residuals[-1]:.6f}")
    return ResidualSweep(
        m=order,
        grid=grid,
        residuals=tuple(residuals),
        exact=tuple(exact_values),
        expansion=tuple(expansions),
        statistic=statistic,
    )


def residual_sweep(grid, m, progress=False):
    """(Ex[L^m] - moment_expansion) / lambda^{m-1} over the grid."""
    m = _check_index("m", m, minimum=1)
    return _sweep(
        grid,
        m,
        "moment",
        lambda params: exact_moment(params, m, scaled_eps(params, m)).exact,
        lambda params: moment_expansion(params, m).value,
        m - 1,
        progress,
    )


def t_sum_residual_sweep(grid, n, progress=False):
    """(T_n - t_sum_expansion) / lambda^n over the grid."""
    n = _check_index("n", n)
    return _sweep(
        grid,
        n,
        "t_sum",
        lambda params: t_sum_exact(params, n, scaled_eps(params, n + 1)),
        lambda params: t_sum_expansion(params, n),
        n,
        progress,
    )
