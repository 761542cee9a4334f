import click  # type: ignore

from ..errors import EXIT_OK
from ..reports import OutputFormat, Subcommand
from ..services.analytic_core import ModelParams, build_survival_table
from ..services.simulator import SimConfig
from ..tasks import run_comparison, run_simulation
from . import check_exit_code, output_options, plot_option, run_spec, write_plot, write_report


def simulation_options(command):
    """Flags shared by ``simulate`` and ``compare``; unset values come from the config."""
    for decorator in reversed(
        (
            click.option("--lambda", "lam", type=float, required=True, help="Arrival rate."),
            click.option("--samples", type=int, required=True, help="Arrivals to record per replication."),
            click.option("--warmup", type=float, default=None, help="Warm-up time in mean service times [default: 50]."),
            click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Unsigned 64-bit seed [default: 0]."),
            click.option("--reps", type=int, default=None, help="Independent replications [default: 1]."),
            click.option("--record-every", type=int, default=None, help="Record every k-th post-warm-up arrival [default: 1]."),
            click.option("--jobs", type=int, default=None, help="Worker processes for replications; results do not depend on it."),
        )
    ):
        command = decorator(command)
    return command


def _sim_config(config, lam, samples, warmup, seed, reps, record_every, debug):
    return SimConfig(
        lam=ModelParams(lam).lam,
        seed=config["DEFAULT_SEED"] if seed is None else seed,
        warmup_time=config["DEFAULT_WARMUP"] if warmup is None else warmup,
        n_samples=samples,
        n_replications=config["DEFAULT_REPS"] if reps is None else reps,
        record_every=config["DEFAULT_RECORD_EVERY"] if record_every is None else record_every,
        debug=debug,
    )


def _echoed(sim_config, n_jobs):
    """Run parameters for the report, including the flags that leave results unchanged."""
    return {**sim_config.to_dict(), "jobs": n_jobs, "debug": sim_config.debug}


@click.command("simulate")
@simulation_options
@output_options(OutputFormat.JSON)
@click.pass_context
def simulate(ctx, lam, samples, warmup, seed, reps, record_every, jobs, output_format, output_path):
    """Simulate the ranked system and record L at arrival epochs."""
    config = ctx.obj
    sim_config = _sim_config(config, lam, samples, warmup, seed, reps, record_every, config["DEBUG"])
    n_jobs = config["N_JOBS"] if jobs is None else jobs
    spec = run_spec(
        Subcommand.SIMULATE, output_format, output_path, **_echoed(sim_config, n_jobs)
    )
    result = run_simulation(
        sim_config, n_jobs, config["SHOW_PROGRESS"], config["BATCH_COUNT"]
    )
    rows = [
        {"l": l, "survival": s} for l, s in enumerate(result.empirical_survival)
    ]
    write_report(spec, {"simulation": result.to_dict()}, rows=rows)
    return EXIT_OK


@click.command("compare")
@simulation_options
@click.option("--alpha", type=float, default=None, help="DKW significance level [default: 0.001].")
@output_options(OutputFormat.JSON)
@plot_option
@click.pass_context
def compare(
    ctx, lam, samples, warmup, seed, reps, record_every, jobs, alpha, output_format, output_path, plot_path
):
    """
    Simulated law of L against the exact one.

    Fails (exit 3) on the DKW sup-distance test, the PASTA busy-count check or
    the split-half stationarity check.
    """
    config = ctx.obj
    if alpha is None:
        alpha = config["DEFAULT_ALPHA"]
    sim_config = _sim_config(config, lam, samples, warmup, seed, reps, record_every, config["DEBUG"])
    n_jobs = config["N_JOBS"] if jobs is None else jobs
    spec = run_spec(
        Subcommand.COMPARE, output_format, output_path, alpha=alpha, **_echoed(sim_config, n_jobs)
    )
    outcome = run_comparison(
        sim_config, alpha, n_jobs, config["SHOW_PROGRESS"], config["BATCH_COUNT"]
    )
    exact = build_survival_table(ModelParams(lam), len(outcome.result.empirical_survival) - 1)
    rows = [
        {"l": l, "empirical": s, "exact": float(exact.survival[l])}
        for l, s in enumerate(outcome.result.empirical_survival)
    ]
    write_report(spec, outcome.to_dict(), rows=rows)
    write_plot(
        plot_path,
        {
            "l": [row["l"] for row in rows],
            "empirical": [row["empirical"] for row in rows],
            "exact": [row["exact"] for row in rows],
        },
    )
    return check_exit_code(spec, outcome.passed)
