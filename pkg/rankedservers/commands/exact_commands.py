import logging

import click  # type: ignore
import numpy as np

from ..reports import OutputFormat, Subcommand, emit_survival_csv
from ..services.analytic_core import (
    MomentMethod,
    ModelParams,
    build_survival_table,
    exact_moment,
)
from . import output_options, plot_option, run_spec, write_plot, write_report

logger = logging.getLogger(__name__)


@click.command("exact-survival")
@click.option("--lambda", "lam", type=float, required=True, help="Arrival rate (mean busy servers).")
@click.option("--lmax", "l_max", type=int, required=True, help="Largest l to tabulate.")
@output_options(OutputFormat.CSV)
@plot_option
def exact_survival(lam, l_max, output_format, output_path, plot_path):
    """Tabulate D_l and Pr[L > l] for l = 0..lmax."""
    spec = run_spec(
        Subcommand.EXACT_SURVIVAL, output_format, output_path, **{"lambda": lam, "lmax": l_max}
    )
    table = build_survival_table(ModelParams(lam), l_max)

    if spec.output_format is OutputFormat.CSV:
        with click.open_file(output_path or "-", "w") as sink:
            emit_survival_csv(table, sink)
    else:
        write_report(
            spec,
            {
                "lambda": table.lam,
                "l_max": table.l_max,
                "overflow_index": table.overflow_index,
                "d": table.d,
                "survival": table.survival,
            },
        )

    ls = np.arange(table.l_max + 1)
    write_plot(
        plot_path,
        {
            "l": ls.tolist(),
            "survival": table.survival.tolist(),
            "newell": np.maximum(0.0, 1.0 - ls / table.lam).tolist(),
        },
    )
    return 0


@click.command("exact-moments")
@click.option("--lambda", "lam", type=float, required=True, help="Arrival rate.")
@click.option("--m", "m", type=int, required=True, help="Moment order (0..6).")
@click.option(
    "--eps",
    type=float,
    default=None,
    help="Absolute truncation tolerance [default: 1e-10].",
)
@click.option(
    "--method",
    type=click.Choice([method.value for method in MomentMethod]),
    default=MomentMethod.PARTIAL_SUMMATION.value,
    show_default=True,
)
@output_options(OutputFormat.JSON)
@click.pass_obj
def exact_moments(config, lam, m, eps, method, output_format, output_path):
    """Ex[L^m] with a certified truncation bound."""
    if eps is None:
        eps = config["DEFAULT_EPS"]
    spec = run_spec(
        Subcommand.EXACT_MOMENTS,
        output_format,
        output_path,
        **{"lambda": lam, "m": m, "eps": eps, "method": method},
    )
    report = exact_moment(ModelParams(lam), m, eps, MomentMethod(method))
    logger.info(f"Ex[L^{m}] at lambda={lam:g}: {report.exact!r} (l_cut={report.l_cut})")
    row = {"lambda": lam, **report.to_dict()}
    write_report(spec, {"moment": report.to_dict()}, rows=[row])
    return 0
