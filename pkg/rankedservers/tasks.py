import logging
import math
from dataclasses import dataclass, field

from joblib import Parallel, delayed  # type: ignore
from tqdm import tqdm  # type: ignore

from .services.analytic_core import (
    ModelParams,
    build_survival_table,
    default_l_max,
    exact_moment,
)
from .services.simulator import compare, run_replication, summarize

logger = logging.getLogger(__name__)

MEAN_CHECK_SIGMAS = 3.0


@dataclass(frozen=True)
class ComparisonOutcome:
    result: object
    report: object
    exact_mean: float
    mean_z_score: float
    errors_list: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.errors_list

    def to_dict(self):
        payload = {
            "simulation": self.result.to_dict(),
            "comparison": self.report.to_dict(),
            "exact_mean_L": self.exact_mean,
            "mean_z_score": self.mean_z_score,
            "mean_within_3_stderr": abs(self.mean_z_score) <= MEAN_CHECK_SIGMAS,
            "errors": list(self.errors_list),
            "passed": self.passed,
        }
        return payload


def run_replications(config, n_jobs=1, progress=False):
    """
    Run every replication of ``config``, possibly in worker processes.

    Results come back ordered by replication index whatever ``n_jobs`` is, and
    each replication owns its random stream, so the output never depends on
    the degree of parallelism.
    """
    indices = range(config.n_replications)
    if n_jobs == 1 or config.n_replications == 1:
        iterator = (run_replication(config, r) for r in indices)
    else:
        iterator = Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(run_replication)(config, r) for r in indices
        )
    results = list(
        tqdm(
            iterator,
            total=config.n_replications,
            desc="replications",
            disable=not progress,
            leave=False,
        )
    )
    logger.info(
        f"Finished {len(results)} replication(s) at lambda={config.lam}: "
        f"{sum(r.samples.size for r in results)} samples, {sum(r.events for r in results)} events"
    )
    return sorted(results, key=lambda r: r.replication)


def run_simulation(config, n_jobs=1, progress=False, n_batches=64):
    return summarize(config, run_replications(config, n_jobs, progress), n_batches)


def run_comparison(config, alpha, n_jobs=1, progress=False, n_batches=64):
    """
    Simulation against the exact law: simulate, build the exact table, DKW
    test, PASTA check, split-half check. Every failed check is collected in
    ``errors_list`` rather than stopping the pipeline.
    """
    errors_list = []

    result = run_simulation(config, n_jobs, progress, n_batches)
    params = ModelParams(config.lam)
    l_max = max(len(result.empirical_survival) - 1, default_l_max(params))
    table = build_survival_table(params, l_max)

    report = compare(result.empirical_survival, table, alpha, result.samples_recorded)
    if not report.verdict:
        errors_list.append(
            f"DKW check failed: sup distance {report.statistic:.6g} > threshold "
            f"{report.threshold:.6g} at l={report.argmax_l}"
        )
    if not result.pasta_ok:
        errors_list.append(
            f"PASTA check failed: arrival-epoch busy mean {result.arrival_epoch_busy_mean:.6g} "
            f"and variance {result.arrival_epoch_busy_var:.6g} vs lambda={config.lam:g}"
        )
    if not result.stationary_ok:
        errors_list.append(
            f"Stationarity check failed: half means {result.first_half_mean_L:.6g} "
            f"and {result.second_half_mean_L:.6g}"
        )

    exact_mean = exact_moment(params, 1).exact
    stderr = result.mean_L_stderr
    z = (result.sample_mean_L - exact_mean) / stderr if stderr and math.isfinite(stderr) else math.nan

    for message in errors_list:
        logger.warning(message)
    return ComparisonOutcome(
        result=result,
        report=report,
        exact_mean=exact_mean,
        mean_z_score=z,
        errors_list=errors_list,
    )
