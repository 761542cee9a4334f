"""Subcommands of the ``rankedservers`` command line, grouped by service."""

import click  # type: ignore

from ..errors import EXIT_CHECK_FAILED, EXIT_OK, ParameterError
from ..reports import (
    OutputFormat,
    RunSpec,
    emit_json,
    emit_plot_data,
    emit_rows_csv,
)


def output_options(default_format):
    """``--format`` and ``--out`` for a subcommand."""

    def decorator(command):
        command = click.option(
            "--out",
            "output_path",
            type=click.Path(dir_okay=False, writable=True),
            default=None,
            help="Write the report here instead of standard output.",
        )(command)
        return click.option(
            "--format",
            "output_format",
            type=click.Choice([f.value for f in OutputFormat]),
            default=default_format.value,
            show_default=True,
            help="Report format.",
        )(command)

    return decorator


def plot_option(command):
    return click.option(
        "--plot",
        "plot_path",
        type=click.Path(dir_okay=False, writable=True),
        default=None,
        help="Also write gnuplot-ready columns to this file.",
    )(command)


def run_spec(subcommand, output_format, output_path, **parameters):
    return RunSpec(
        subcommand=subcommand,
        parameters=parameters,
        output_format=OutputFormat(output_format),
        output_path=output_path,
    )


def parse_lambda_list(text):
    """``"1000,1e4"`` -> ``[1000.0, 10000.0]``."""
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ParameterError(f"--lambdas needs a comma-separated list, got {text!r}.")
    try:
        return [float(item) for item in items]
    except ValueError:
        raise ParameterError(f"--lambdas is not a list of reals: {text!r}.") from None


def write_report(spec, payload, rows=(), columns=None):
    """JSON gets the run spec and ``payload``; CSV gets ``rows``."""
    with click.open_file(spec.output_path or "-", "w") as sink:
        if spec.output_format is OutputFormat.JSON:
            report = {"run": spec.to_dict()}
            report.update(payload)
            emit_json(report, sink)
        else:
            emit_rows_csv(rows, sink, columns)


def write_plot(path, columns):
    if path:
        with click.open_file(path, "w") as sink:
            emit_plot_data(columns, sink)


def check_exit_code(spec, passed):
    """0 or 3 for a check subcommand; the others never report a failed check."""
    if not spec.subcommand.is_check:
        raise ValueError(f"{spec.subcommand.value} does not run a check.")
    return EXIT_OK if passed else EXIT_CHECK_FAILED
