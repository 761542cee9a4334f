import math

import pytest  # type: ignore

from rankedservers.errors import DomainError, ParameterError
from rankedservers.services.analytic_core import (
    ModelParams,
    build_survival_table,
    exact_moment,
    scaled_eps,
)
from rankedservers.services.asymptotics import (
    body_error_scale,
    body_estimate,
    body_tail_split,
    max_body_error,
    moment_expansion,
    newell_approximation,
    residual_sweep,
    t_sum_exact,
    t_sum_expansion,
    t_sum_residual_sweep,
    t_sum_split,
    tail_bound,
    tail_violations,
    uniform_limit_distance,
    uniform_limit_scan,
    variance_expansion,
    variance_residual,
)

HEAVY_GRID = [1e3, 1e4, 1e5, 1e6]


def test_body_tail_split():
    split = body_tail_split(ModelParams(100.0))
    assert split.s == 10.0
    assert split.l0 == 90.0


def test_body_estimate_at_half_load():
    params = ModelParams(1e4)
    assert body_estimate(params, 5000) == pytest.approx(0.5002, rel=1e-12)
    exact = build_survival_table(params, 5000).survival[5000]
    assert exact == pytest.approx(0.5000999201277001, rel=1e-11)
    assert abs(body_estimate(params, 5000) - exact) < 2 * body_error_scale(params, 5000)


def test_body_estimate_at_zero():
    params = ModelParams(100.0)
    assert body_estimate(params, 0) == pytest.approx(1.01)


def test_body_estimate_outside_region():
    with pytest.raises(DomainError) as excinfo:
        body_estimate(ModelParams(100.0), 91)
    assert excinfo.value.boundary == 90.0
    assert body_estimate(ModelParams(100.0), 90) == pytest.approx(0.1 + 1 / (100 * 0.1))


def test_tail_bound_values():
    params = ModelParams(100.0)
    assert tail_bound(params, 150) == pytest.approx(7.140354e-4, rel=1e-5)
    assert tail_bound(params, 100) == 1.0


def test_tail_bound_is_monotone_past_lambda():
    params = ModelParams(100.0)
    values = [tail_bound(params, l) for l in range(101, 300)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_tail_bound_domain():
    with pytest.raises(DomainError) as excinfo:
        tail_bound(ModelParams(4.0), 10)
    assert excinfo.value.boundary == 9.0
    with pytest.raises(DomainError):
        tail_bound(ModelParams(100.0), 89)


@pytest.mark.parametrize("lam", [25.0, 100.0, 400.0])
def test_tail_dominance(lam):
    scan = tail_violations(ModelParams(lam), window=20)
    assert scan.violations == ()
    assert scan.l_from == math.ceil(lam - math.sqrt(lam))
    assert scan.l_to == math.floor(lam + 20 * math.sqrt(lam))
    assert scan.max_ratio <= 1.0


def test_body_error_shrinks_with_lambda():
    errors = [max_body_error(ModelParams(lam))[0] for lam in (400.0, 1600.0, 6400.0)]
    assert errors[0] == pytest.approx(2.5364e-2, rel=1e-3)
    assert errors[1] <= 0.75 * errors[0]
    assert errors[2] <= 0.75 * errors[1]


def test_max_body_error_needs_a_body_region():
    with pytest.raises(DomainError):
        max_body_error(ModelParams(0.5))


def test_newell_approximation():
    params = ModelParams(10.0)
    assert newell_approximation(params, 0) == 1.0
    assert newell_approximation(params, 5) == 0.5
    assert newell_approximation(params, 10) == 0.0
    assert newell_approximation(params, 30) == 0.0


def test_uniform_limit_distance_decreases():
    distances = [uniform_limit_distance(ModelParams(lam)) for lam in (1e2, 1e3, 1e4)]
    assert distances[0] > distances[1] > distances[2]
    assert distances[2] < 0.02
    assert distances[0] == pytest.approx(0.07570, abs=1e-4)


def test_uniform_limit_scan_reports_the_worst_l():
    distance, argmax_l = uniform_limit_scan(ModelParams(100.0))
    table = build_survival_table(ModelParams(100.0))
    assert abs(table.survival[argmax_l] - max(0.0, 1 - argmax_l / 100)) == distance


def test_uniform_limit_distance_at_smallest_lambda():
    assert 0.0 < uniform_limit_distance(ModelParams(4.0)) < 1.0
    assert uniform_limit_distance(ModelParams(4.0)) == pytest.approx(0.3107, abs=1e-3)


def test_uniform_limit_domain():
    with pytest.raises(DomainError):
        uniform_limit_distance(ModelParams(3.0))


def test_moment_expansion_values():
    assert moment_expansion(ModelParams(100.0), 1).value == pytest.approx(
        52.30258509299404, rel=1e-14
    )
    assert moment_expansion(ModelParams(10.0), 2).value == pytest.approx(
        56.3591842632738, rel=1e-14
    )
    assert moment_expansion(ModelParams(math.e**2), 1).value == pytest.approx(
        4.694528049465324, rel=1e-14
    )
    with pytest.raises(ParameterError):
        moment_expansion(ModelParams(10.0), 0)


def test_variance_expansion():
    assert variance_expansion(ModelParams(1.0)) == pytest.approx(1 / 12, rel=1e-15)
    assert variance_expansion(ModelParams(100.0)) == pytest.approx(
        1063.591842632738, rel=1e-14
    )


def test_t_sum_expansion():
    assert t_sum_expansion(ModelParams(100.0), 1) == pytest.approx(
        1896.9251759660713, rel=1e-14
    )
    assert t_sum_expansion(ModelParams(10.0), 2) == pytest.approx(
        198.46258798303563, rel=1e-14
    )


def test_t_sum_zero_is_the_mean():
    params = ModelParams(100.0)
    assert t_sum_expansion(params, 0) == moment_expansion(params, 1).value
    assert t_sum_exact(params, 0) == pytest.approx(exact_moment(params, 1).exact, rel=1e-11)


def test_t_sum_order_limits():
    with pytest.raises(ParameterError):
        t_sum_exact(ModelParams(10.0), 6)
    with pytest.raises(ParameterError):
        t_sum_exact(ModelParams(10.0), -1)


def test_t_sum_split_adds_up():
    params = ModelParams(400.0)
    eps = scaled_eps(params, 2)
    split = t_sum_split(params, 1, eps)
    assert split.total == pytest.approx(t_sum_exact(params, 1, eps), rel=1e-12)
    assert split.l0 == 380.0
    assert 0 < split.tail < split.body


def test_residual_sweep_of_the_mean_is_bounded():
    sweep = residual_sweep(HEAVY_GRID, 1)
    assert sweep.width < 0.5
    assert sweep.residuals[0] == pytest.approx(0.4550, abs=1e-3)
    assert sweep.residuals[-1] == pytest.approx(0.4201, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m", [2, 3])
def test_residual_sweep_of_higher_moments_is_bounded(m):
    sweep = residual_sweep(HEAVY_GRID, m)
    assert sweep.width < 0.5
    assert all(math.isfinite(r) for r in sweep.residuals)


@pytest.mark.slow
@pytest.mark.parametrize("n", [0, 1, 2])
def test_t_sum_residual_sweep_is_bounded(n):
    sweep = t_sum_residual_sweep(HEAVY_GRID, n)
    assert sweep.width < 0.5
    assert sweep.statistic == "t_sum"


def test_variance_residual_is_order_one():
    assert variance_residual(ModelParams(1e3)) == pytest.approx(-0.9258, abs=1e-3)


def test_sweep_single_point():
    sweep = residual_sweep([1e3], 1)
    assert sweep.width == 0.0
    assert len(list(sweep.rows())) == 1


@pytest.mark.parametrize(
    "grid",
    [[], [1e3, 1e3], [1e4, 1e3], [5.0, 100.0]],
)
def test_sweep_rejects_bad_grids(grid):
    with pytest.raises(ParameterError):
        residual_sweep(grid, 1)


def test_sweep_rejects_order_zero():
    with pytest.raises(ParameterError):
        residual_sweep([1e3, 1e4], 0)
