import logging
import math

import click  # type: ignore

from ..errors import EXIT_OK, ParameterError
from ..reports import OutputFormat, Subcommand
from ..services.analytic_core import ModelParams
from ..services.asymptotics import (
    body_error_scale,
    body_tail_split,
    max_body_error,
    moment_expansion,
    residual_sweep,
    t_sum_expansion,
    t_sum_residual_sweep,
    tail_violations,
    uniform_limit_scan,
    variance_expansion,
    variance_residual,
)
from . import (
    check_exit_code,
    output_options,
    parse_lambda_list,
    plot_option,
    run_spec,
    write_plot,
    write_report,
)

logger = logging.getLogger(__name__)

NATURAL_LOG_NOTE = "All logarithms are natural (base e)."


@click.command("asym", epilog=NATURAL_LOG_NOTE)
@click.option("--lambda", "lam", type=float, required=True, help="Arrival rate.")
@click.option("--m", "m", type=int, required=True, help="Moment order, m >= 1.")
@output_options(OutputFormat.JSON)
def asym(lam, m, output_format, output_path):
    """Two-term heavy-traffic expansion of Ex[L^m]: lambda^m/(m+1) + m lambda^(m-1) ln(lambda)/2."""
    spec = run_spec(Subcommand.ASYM, output_format, output_path, **{"lambda": lam, "m": m})
    params = ModelParams(lam)
    expansion = moment_expansion(params, m)
    payload = {
        "lambda": params.lam,
        "expansion": expansion.to_dict(),
        "value": expansion.value,
        "t_sum_expansion": t_sum_expansion(params, m - 1),
        "variance_expansion": variance_expansion(params),
        "split": body_tail_split(params).to_dict(),
        "log": "natural",
    }
    row = {"lambda": params.lam, **expansion.to_dict()}
    write_report(spec, payload, rows=[row])
    return EXIT_OK


@click.command("tail-check")
@click.option("--lambda", "lam", type=float, required=True, help="Arrival rate, >= 9.")
@click.option("--window", type=float, default=None, help="Scan l up to lambda + window sqrt(lambda) [default: 20].")
@output_options(OutputFormat.JSON)
@click.pass_obj
def tail_check(config, lam, window, output_format, output_path):
    """Exact survival against the tail bound e^7 e^-lambda lambda^l / l! on [l0, lambda + window sqrt(lambda)]."""
    if window is None:
        window = config["TAIL_WINDOW"]
    spec = run_spec(
        Subcommand.TAIL_CHECK, output_format, output_path, **{"lambda": lam, "window": window}
    )
    scan = tail_violations(ModelParams(lam), window)
    passed = not scan.violations
    rows = [{"l": l} for l in scan.violations]
    write_report(spec, {**scan.to_dict(), "passed": passed}, rows=rows, columns=["l"])
    return check_exit_code(spec, passed)


@click.command("body-check")
@click.option("--lambda", "lam", type=float, required=True, help="Arrival rate.")
@output_options(OutputFormat.JSON)
@click.pass_obj
def body_check(config, lam, output_format, output_path):
    """
    Max body-estimate error at lambda and at 4 lambda.

    Passes when quadrupling lambda shrinks the error by the configured ratio
    (0.75 by default; the expected rate is about one half).
    """
    limit = config["BODY_RATIO_LIMIT"]
    spec = run_spec(
        Subcommand.BODY_CHECK, output_format, output_path, **{"lambda": lam, "ratio_limit": limit}
    )
    rows = []
    for value in (lam, 4.0 * lam):
        params = ModelParams(value)
        error, argmax_l = max_body_error(params)
        rows.append(
            {
                "lambda": params.lam,
                "max_error": error,
                "argmax_l": argmax_l,
                "error_scale": body_error_scale(params, argmax_l),
            }
        )
    ratio = rows[1]["max_error"] / rows[0]["max_error"] if rows[0]["max_error"] else math.inf
    passed = ratio <= limit
    logger.info(f"Body error ratio lambda={lam:g} -> {4 * lam:g}: {ratio:.4f}")
    write_report(spec, {"rows": rows, "ratio": ratio, "passed": passed}, rows=rows)
    return check_exit_code(spec, passed)


@click.command("sweep", epilog=NATURAL_LOG_NOTE)
@click.option("--lambdas", required=True, help="Comma-separated increasing lambda grid, each >= 9.")
@click.option("--m", "m", type=int, required=True, help="Moment order (or n for --statistic t-sum).")
@click.option(
    "--statistic",
    type=click.Choice(["moment", "t-sum", "variance"]),
    default="moment",
    show_default=True,
)
@output_options(OutputFormat.CSV)
@plot_option
@click.pass_obj
def sweep(config, lambdas, m, statistic, output_format, output_path, plot_path):
    """Normalised residuals of an expansion over a lambda grid; fails if they spread by 0.5 or more."""
    limit = config["RESIDUAL_WIDTH_LIMIT"]
    grid = parse_lambda_list(lambdas)
    spec = run_spec(
        Subcommand.SWEEP,
        output_format,
        output_path,
        lambdas=grid,
        m=m,
        statistic=statistic,
        width_limit=limit,
    )
    progress = config["SHOW_PROGRESS"]
    if statistic == "moment":
        result = residual_sweep(grid, m, progress=progress)
        rows = list(result.rows())
        residuals = list(result.residuals)
    elif statistic == "t-sum":
        result = t_sum_residual_sweep(grid, m, progress=progress)
        rows = list(result.rows())
        residuals = list(result.residuals)
    else:
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParameterError(f"the lambda grid must be strictly increasing, got {grid}.")
        residuals = [variance_residual(ModelParams(value)) for value in grid]
        rows = [{"lambda": value, "residual": r} for value, r in zip(grid, residuals)]

    width = max(residuals) - min(residuals)
    passed = width < limit
    logger.info(f"{statistic} sweep order={m}: width {width:.4f} (limit {limit})")
    write_report(spec, {"rows": rows, "width": width, "passed": passed}, rows=rows)
    write_plot(plot_path, {"lambda": grid, "residual": residuals})
    return check_exit_code(spec, passed)


@click.command("uniform-check")
@click.option("--lambdas", required=True, help="Comma-separated lambda list, each >= 4.")
@output_options(OutputFormat.JSON)
@plot_option
@click.pass_obj
def uniform_check(config, lambdas, output_format, output_path, plot_path):
    """
    Distance from Pr[L > l] to max(0, 1 - l/lambda).

    Passes when the distance decreases strictly along the list and stays
    below envelope / sqrt(lambda) at every point.
    """
    envelope = config["UNIFORM_ENVELOPE"]
    grid = parse_lambda_list(lambdas)
    spec = run_spec(
        Subcommand.UNIFORM_CHECK, output_format, output_path, lambdas=grid, envelope=envelope
    )
    rows = []
    for value in grid:
        params = ModelParams(value)
        distance, argmax_l = uniform_limit_scan(params)
        rows.append(
            {
                "lambda": params.lam,
                "distance": distance,
                "argmax_l": argmax_l,
                "envelope": envelope / math.sqrt(params.lam),
            }
        )
    distances = [row["distance"] for row in rows]
    decreasing = all(b < a for a, b in zip(distances, distances[1:]))
    enveloped = all(row["distance"] < row["envelope"] for row in rows)
    passed = decreasing and enveloped
    write_report(
        spec,
        {"rows": rows, "decreasing": decreasing, "within_envelope": enveloped, "passed": passed},
        rows=rows,
    )
    write_plot(plot_path, {"lambda": grid, "distance": distances})
    return check_exit_code(spec, passed)
