import json
import logging
import sys

import click  # type: ignore

from . import __version__
from .commands.asym_commands import asym, body_check, sweep, tail_check, uniform_check
from .commands.exact_commands import exact_moments, exact_survival
from .commands.sim_commands import compare, simulate
from .config import load_config
from .errors import (
    EXIT_OK,
    EXIT_USAGE,
    NumericalCapacityError,
    RankedServersError,
)

logger = logging.getLogger("rankedservers")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ClickEchoHandler(logging.Handler):
    """Log records to the error stream that is current at emit time."""

    def emit(self, record):
        try:
            click.echo(self.format(record), err=True)
        except Exception:
            self.handleError(record)


def configure_logging(level):
    logger.setLevel(level)
    if not any(isinstance(h, ClickEchoHandler) for h in logger.handlers):
        handler = ClickEchoHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)


class RankedServersCLI(click.Group):
    """
    A click group that turns exceptions into exit codes.

    Handlers are registered per exception class with ``errorhandler`` and
    looked up along the exception's MRO, most specific first. A handler
    reports the error on the error stream and returns the exit code.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.error_handlers = {}

    def errorhandler(self, exc_class):
        def decorator(handler):
            self.error_handlers[exc_class] = handler
            return handler

        return decorator

    def handle_error(self, error):
        for klass in type(error).__mro__:
            handler = self.error_handlers.get(klass)
            if handler is not None:
                return handler(error)
        raise error

    def main(self, args=None, prog_name=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, standalone_mode=False, **extra)
        except Exception as error:
            code = self.handle_error(error)
        else:
            code = rv if isinstance(rv, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


def _report_error(payload):
    click.echo(json.dumps(payload, sort_keys=True, default=str), err=True)


def create_cli(config_overrides=None):
    config = load_config(config_overrides)

    @click.group(cls=RankedServersCLI, context_settings={"help_option_names": ["-h", "--help"]})
    @click.version_option(__version__, prog_name="rankedservers")
    @click.option("--debug", is_flag=True, help="Verbose logging and simulator consistency checks.")
    @click.option(
        "--log-level",
        type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
        default=None,
        help="Logging level [default: INFO].",
    )
    @click.pass_context
    def cli(ctx, debug, log_level):
        """
        Ranked servers in an M/M/infinity system: the index L of the server an
        arrival takes when it picks the lowest-numbered idle one.

        Exit codes: 0 success, 1 usage or parameter error, 2 tolerance below
        double-precision capacity, 3 failed check.
        """
        ctx.obj = dict(config)
        ctx.obj["DEBUG"] = debug
        level = "DEBUG" if debug else (log_level or config["LOG_LEVEL"]).upper()
        configure_logging(level)
        logger.info(f"rankedservers {__version__} starting {ctx.invoked_subcommand}")
        logger.debug(f"config={ctx.obj}")

    # --- Commands ---
    for command in (
        exact_survival,
        exact_moments,
        asym,
        tail_check,
        body_check,
        simulate,
        compare,
        sweep,
        uniform_check,
    ):
        cli.add_command(command)

    # --- Error Handling ---
    @cli.errorhandler(click.ClickException)
    def usage_error(error):
        error.show()
        return EXIT_USAGE

    @cli.errorhandler(click.exceptions.Abort)
    def aborted(error):
        click.echo("Aborted!", err=True)
        return EXIT_USAGE

    @cli.errorhandler(NumericalCapacityError)
    def capacity_error(error):
        logger.error(f"Numerical capacity exceeded: {error.message}")
        _report_error(error.to_dict())
        return error.exit_code

    @cli.errorhandler(RankedServersError)
    def package_error(error):
        _report_error(error.to_dict())
        return error.exit_code

    @cli.errorhandler(OSError)
    def io_error(error):
        _report_error({"error": "I/O Error", "message": str(error)})
        return EXIT_USAGE

    @cli.errorhandler(Exception)
    def internal_error(error):
        logger.error(f"Unexpected error: {error}", exc_info=True)
        _report_error(
            {"error": "Internal Error", "message": "An unexpected error occurred."}
        )
        return EXIT_USAGE

    return cli


def main(argv=None):
    """Run one subcommand and return its exit code."""
    return create_cli().main(args=argv, prog_name="rankedservers", standalone_mode=False)
