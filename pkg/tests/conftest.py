import io

import pytest  # type: ignore
from click.testing import CliRunner  # type: ignore

from rankedservers.cli import create_cli
from rankedservers.config import load_config
from rankedservers.services.analytic_core import ModelParams
from rankedservers.services.simulator import SimConfig


@pytest.fixture(scope="session")
def cli_config():
    """Config shared by the CLI tests: quiet logs, no progress bars, one worker."""
    return load_config(
        {
            "LOG_LEVEL": "WARNING",
            "SHOW_PROGRESS": False,
            "N_JOBS": 1,
        }
    )


@pytest.fixture()
def cli(cli_config):
    """A fresh command group built by the factory."""
    return create_cli(cli_config)


@pytest.fixture()
def runner():
    """A click test runner; read ``result.stdout`` for the report alone."""
    return CliRunner()


@pytest.fixture(params=[0.5, 1.0, 3.0, 10.0, 100.0], ids=lambda lam: f"lambda={lam:g}")
def oracle_params(request):
    return ModelParams(request.param)


@pytest.fixture()
def sink():
    return io.StringIO()


@pytest.fixture()
def small_sim_config():
    """A simulation that finishes in well under a second."""
    return SimConfig(lam=10.0, seed=9, n_samples=3000, n_replications=3, warmup_time=5.0)
