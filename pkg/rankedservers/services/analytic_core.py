"""
Exact equilibrium law of L, the index of the server taken by an arriving
customer in the ranked-server M/M/inf system.

Pr[L > l] is the Erlang loss probability of the first l servers,

    Pr[L > l] = 1 / D_l,    D_l = sum_{k=0..l} l! / ((l-k)! lambda^k),

and every routine here evaluates that quantity (or sums over it) to full double
precision. Three independent evaluations of D_l are provided so they can be
checked against each other: the forward recursion (the production path), the
literal sum, and Gauss-Laguerre quadrature of the integral representation.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import comb, logsumexp, roots_laguerre  # type: ignore
from scipy.stats import poisson  # type: ignore

from ..errors import (
    NumericalCapacityError,
    ParameterError,
    PreconditionError,
    TableIndexError,
)

logger = logging.getLogger(__name__)

# lambda**m stops being integer-exact in double precision above m = 6 at
# lambda = 1e6, so moments are capped there.
MAX_MOMENT_ORDER = 6
INT64_MAX = np.iinfo(np.int64).max
DOUBLE_EPS = float(np.finfo(float).eps)


class MomentMethod(str, Enum):
    PARTIAL_SUMMATION = "partial_summation"
    DIRECT_PMF = "direct_pmf"


@dataclass(frozen=True)
class ModelParams:
    """Offered load lambda (arrival rate over service rate; service rate is 1)."""

    lam: float

    def __post_init__(self):
        try:
            value = float(self.lam)
        except (TypeError, ValueError):
            raise ParameterError(f"lambda must be a real number, got {self.lam!r}.")
        if not math.isfinite(value) or value <= 0:
            raise ParameterError(
                f"lambda must be positive and finite, got {self.lam!r}.", lam=value
            )
        object.__setattr__(self, "lam", value)


@dataclass(frozen=True, eq=False)
class SurvivalTable:
    """
    D_l and Pr[L > l] for l = 0..l_max.

    ``overflow_index`` is the first l at which D_l exceeded the largest double;
    from there on ``d`` holds +inf and ``survival`` holds exact zeros.
    """

    lam: float
    l_max: int
    d: np.ndarray = field(repr=False)
    survival: np.ndarray = field(repr=False)
    overflow_index: int | None = None

    def __post_init__(self):
        self.d.setflags(write=False)
        self.survival.setflags(write=False)


@dataclass(frozen=True)
class MomentReport:
    m: int
    exact: float
    l_cut: int
    truncation_bound: float
    method: MomentMethod

    def to_dict(self):
        return {
            "m": self.m,
            "exact": self.exact,
            "l_cut": self.l_cut,
            "truncation_bound": self.truncation_bound,
            "method": self.method.value,
        }


def default_l_max(params):
    """ceil(lambda + 10 sqrt(lambda) + 50): survival beyond it is negligible."""
    lam = params.lam
    return math.ceil(lam + 10.0 * math.sqrt(lam) + 50.0)


def _check_index(name, value, minimum=0):
    try:
        integral = not isinstance(value, bool) and int(value) == value
    except (TypeError, ValueError, OverflowError):
        integral = False
    if not integral:
        raise ParameterError(f"{name} must be an integer, got {value!r}.")
    value = int(value)
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}.")
    return value


# --- Survival table ---


@lru_cache(maxsize=8)
def _cached_table(lam, l_max):
    d = np.empty(l_max + 1, dtype=np.float64)
    survival = np.zeros(l_max + 1, dtype=np.float64)
    d[0] = 1.0
    survival[0] = 1.0
    overflow_index = None
    current = 1.0
    # All terms are positive: no cancellation, relative error grows at most linearly in l.
    for l in range(1, l_max + 1):
        current = 1.0 + (l / lam) * current
        if math.isinf(current):
            overflow_index = l
            d[l:] = math.inf
            break
        d[l] = current
        survival[l] = 1.0 / current
    if overflow_index is not None:
        logger.warning(
            f"D_l overflowed double precision at l={overflow_index} for lambda={lam}; "
            "survival recorded as exact zero from there on."
        )
    logger.debug(f"Built survival table lambda={lam} l_max={l_max}")
    return SurvivalTable(
        lam=lam, l_max=l_max, d=d, survival=survival, overflow_index=overflow_index
    )


def build_survival_table(params, l_max=None):
    """Exact D_l and Pr[L > l] for l = 0..l_max by D_l = 1 + (l / lambda) D_{l-1}."""
    if l_max is None:
        l_max = default_l_max(params)
    l_max = _check_index("l_max", l_max)
    return _cached_table(params.lam, l_max)


def survival_direct(params, l):
    """
    Reference oracle: 1 / D_l with D_l summed term by term.

    Term k is l (l-1) ... (l-k+1) / lambda^k. The terms are added smallest
    first (correctly rounded with ``math.fsum``), independently of the
    recursion used by ``build_survival_table``.
    """
    l = _check_index("l", l)
    if l == 0:
        return 1.0
    ratios = (l - np.arange(l, dtype=np.float64)) / params.lam
    terms = np.concatenate(([1.0], np.cumprod(ratios)))
    d_l = math.fsum(np.sort(terms))
    if math.isinf(d_l):
        return 0.0
    return 1.0 / d_l


def survival_integral(params, l, n_nodes=None):
    """
    Reference oracle: 1 / D_l with D_l = int_0^inf (1 + x/lambda)^l e^{-x} dx.

    Gauss-Laguerre with n nodes integrates polynomials of degree 2n - 1
    exactly, so the result is exact up to rounding whenever n >= l/2 + 1/2.
    The sum is formed in log space so large l does not overflow.
    """
    l = _check_index("l", l)
    if n_nodes is None:
        n_nodes = l // 2 + 1
    n_nodes = _check_index("n_nodes", n_nodes, minimum=1)
    if 2 * n_nodes - 1 < l:
        raise PreconditionError(
            f"{n_nodes} Gauss-Laguerre nodes integrate degree <= {2 * n_nodes - 1}; "
            f"the integrand for l={l} needs at least {l // 2 + 1} nodes.",
            required=l // 2 + 1,
        )
    nodes, weights = roots_laguerre(n_nodes)
    with np.errstate(divide="ignore"):
        log_terms = np.log(weights) + l * np.log1p(nodes / params.lam)
    log_d = float(logsumexp(log_terms))
    return math.exp(-log_d)


def survival_poisson_ratio(params, l):
    """
    Reference oracle: Pr[L > l] = Poisson(lambda).pmf(l) / Poisson(lambda).cdf(l).

    This is the Erlang loss quotient (lambda^l / l!) / sum_{k<=l} lambda^k / k!
    with both sides multiplied by e^{-lambda}.
    """
    l = _check_index("l", l)
    return math.exp(poisson.logpmf(l, params.lam) - poisson.logcdf(l, params.lam))


def pmf(table, l):
    """Pr[L = l] = Pr[L > l-1] - Pr[L > l] for 1 <= l <= l_max."""
    if isinstance(l, bool) or int(l) != l or not 1 <= l <= table.l_max:
        raise TableIndexError(
            f"pmf index must be in 1..{table.l_max}, got {l!r}.", l_max=table.l_max
        )
    l = int(l)
    return float(table.survival[l - 1] - table.survival[l])


# --- Backward differences ---


def backward_difference(m, l):
    """
    Delta_m(l) = l^m - (l-1)^m, exact.

    Values that do not fit a signed 64-bit integer are returned as floats (the
    caller can test ``isinstance(result, float)``) and logged.
    """
    m = _check_index("m", m, minimum=1)
    l = _check_index("l", l, minimum=1)
    value = l**m - (l - 1) ** m
    if value > INT64_MAX:
        logger.warning(
            f"Delta_{m}({l}) exceeds the signed 64-bit range; returning it as a float."
        )
        return float(value)
    return value


def backward_differences(m, ls):
    """
    Vectorised Delta_m over an integer array, as float64.

    Evaluated from sum_{n<m} C(m, n) (-1)^{m-1-n} l^n by Horner's rule, which
    keeps the relative error at a few ulps where l^m - (l-1)^m would cancel.
    """
    m = _check_index("m", m, minimum=1)
    ls = np.asarray(ls, dtype=np.float64)
    coefficients = [
        comb(m, n, exact=True) * (-1) ** (m - 1 - n) for n in range(m)
    ]
    return np.polynomial.polynomial.polyval(ls, np.asarray(coefficients, dtype=np.float64))


# --- Certified sums ---


def tail_certificate(survival_value, l_cut, lam, order):
    """
    Bound on sum_{l > l_cut} w(l) Pr[L > l] for weights w(l) <= (l + 1)^order.

    Past l_cut, Pr[L > l + 1] <= (lambda / (l + 1)) Pr[L > l], so the tail is
    dominated by a geometric series with ratio q = lambda / (l_cut + 1) times
    exp(order / (l_cut + 1)) (the growth of the weights). Returns +inf while
    q >= 1.
    """
    return float(
        _tail_certificates(
            np.asarray([survival_value]), np.asarray([l_cut]), lam, order
        )[0]
    )


def _tail_certificates(survival, ls, lam, order):
    ls = np.asarray(ls, dtype=np.float64)
    q = (lam / (ls + 1.0)) * np.exp(order / (ls + 1.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bounds = survival * np.power(ls + 1.0, order) / (1.0 - q)
    bounds = np.where(q < 1.0, bounds, np.inf)
    return np.where(survival == 0.0, 0.0, bounds)


def _certify(params, order, eps):
    """Smallest l_cut >= lambda + 10 sqrt(lambda) whose tail certificate is below eps."""
    lam = params.lam
    start = math.ceil(lam + 10.0 * math.sqrt(lam))
    l_max = max(default_l_max(params), start)
    while True:
        table = build_survival_table(params, l_max)
        ls = np.arange(start, l_max + 1)
        bounds = _tail_certificates(table.survival[start:], ls, lam, order)
        hits = np.flatnonzero(bounds < eps)
        if hits.size:
            l_cut = int(ls[hits[0]])
            bound = float(bounds[hits[0]])
            logger.debug(
                f"Truncation lambda={lam} order={order}: l_cut={l_cut} bound={bound:.3g}"
            )
            return table, l_cut, bound
        l_max *= 2
        logger.debug(f"Truncation not certified below l_max; extending table to {l_max}")


def _check_capacity(params, terms, l_cut, eps):
    floor = DOUBLE_EPS * float(np.sum(np.abs(terms))) * max(1.0, math.log2(l_cut + 1))
    if eps < floor:
        raise NumericalCapacityError(
            f"eps={eps:g} is below the rounding floor {floor:.3g} of this sum "
            f"in double precision (lambda={params.lam:g}).",
            achievable=floor,
        )


def certified_weighted_sum(params, weight, order, eps):
    """
    sum_{l>=0} weight(l) Pr[L > l] truncated with a certified remainder.

    ``weight`` maps an integer array of l to float weights bounded by
    (l + 1)^order. Returns ``(value, l_cut, bound)`` where ``bound < eps``
    dominates everything omitted past ``l_cut``.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps!r}.")
    table, l_cut, bound = _certify(params, order, eps)
    ls = np.arange(l_cut + 1)
    terms = weight(ls) * table.survival[: l_cut + 1]
    _check_capacity(params, terms, l_cut, eps)
    return float(np.sum(terms)), l_cut, bound


def exact_moment(params, m, eps=1e-10, method=MomentMethod.PARTIAL_SUMMATION):
    """
    Ex[L^m] with a certified truncation error below ``eps``.

    partial_summation: sum_{l>=0} Delta_m(l + 1) Pr[L > l]
    direct_pmf:        sum_{l>=1} l^m Pr[L = l]

    Pr[L > 0] = 1 because L >= 1, which is why the backward difference is taken
    at l + 1. Both methods share one truncation point and certificate.
    """
    m = _check_index("m", m)
    if m > MAX_MOMENT_ORDER:
        raise ParameterError(
            f"moment order m={m} exceeds the supported maximum {MAX_MOMENT_ORDER}."
        )
    try:
        method = MomentMethod(method)
    except ValueError:
        raise ParameterError(f"unknown moment method {method!r}.")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps!r}.")
    if m == 0:
        return MomentReport(m=0, exact=1.0, l_cut=0, truncation_bound=0.0, method=method)

    if method is MomentMethod.PARTIAL_SUMMATION:
        value, l_cut, bound = certified_weighted_sum(
            params, lambda ls: backward_differences(m, ls + 1), m, eps
        )
    else:
        table, l_cut, bound = _certify(params, m, eps)
        survival = table.survival[: l_cut + 1]
        ls = np.arange(1, l_cut + 1, dtype=np.float64)
        terms = np.power(ls, m) * (survival[:-1] - survival[1:])
        _check_capacity(params, terms, l_cut, eps)
        value = float(np.sum(terms))
    return MomentReport(
        m=m, exact=value, l_cut=l_cut, truncation_bound=bound, method=method
    )


def scaled_eps(params, m, relative=1e-12):
    """An absolute tolerance of ``relative * max(1, lambda)^m`` for order-m sums."""
    return relative * max(1.0, params.lam) ** m


def exact_variance(params, relative=1e-12):
    """Var[L] = Ex[L^2] - Ex[L]^2, both moments by partial summation."""
    first = exact_moment(params, 1, scaled_eps(params, 1, relative)).exact
    second = exact_moment(params, 2, scaled_eps(params, 2, relative)).exact
    return second - first * first
