import math

import numpy as np
import pytest  # type: ignore

from rankedservers.errors import ParameterError, SimulationStateError
from rankedservers.services.analytic_core import ModelParams, build_survival_table, exact_moment
from rankedservers.services.simulator import (
    EventKind,
    EventStream,
    SimConfig,
    SimState,
    batch_means_stderr,
    compare,
    empirical_survival,
    initial_capacity,
    lowest_idle,
    run,
    run_replication,
    step,
)
from rankedservers.tasks import run_comparison, run_replications, run_simulation


class ForcedEvents:
    """Event source returning fixed (holding, uniform) pairs."""

    def __init__(self, *pairs):
        self.pairs = list(pairs)

    def draw(self):
        return self.pairs.pop(0)


ARRIVAL = (1.0, 0.0)
DEPARTURE = (1.0, 0.999999)


def _state_with(busy, lam=5.0):
    state = SimState(lam)
    for _ in range(max(busy, default=0)):
        state.occupy()
    for server in set(range(1, max(busy, default=0) + 1)) - set(busy):
        state.release_server(server)
    return state


@pytest.mark.parametrize(
    "busy, expected",
    [((), 1), ((1, 2, 3), 4), ((1, 3), 2)],
)
def test_lowest_idle(busy, expected):
    state = _state_with(busy)
    before = list(state.busy_list)
    assert lowest_idle(state) == expected
    assert state.busy_list == before


def test_lowest_idle_extends_past_capacity():
    state = SimState(1.0, capacity=1)
    for _ in range(state.busy_bits.capacity):
        state.occupy()
    assert lowest_idle(state) == state.busy_bits.capacity + 1
    state.occupy()
    state.check_invariants()


def test_forced_arrival_then_departure():
    state = SimState(5.0)
    event = step(state, ForcedEvents(ARRIVAL))
    assert event.kind is EventKind.ARRIVAL
    assert event.L == 1
    assert state.busy_list == [1]
    assert state.clock == pytest.approx(1.0 / 5.0)

    event = step(state, ForcedEvents(DEPARTURE))
    assert event.kind is EventKind.DEPARTURE
    assert event.server == 1
    assert event.L is None
    assert state.busy_count == 0
    assert state.clock == pytest.approx(1.0 / 5.0 + 1.0 / 6.0)


def test_departure_swap_removes():
    state = _state_with((1, 2, 3, 4))
    state.release_server(2)
    assert sorted(state.busy_list) == [1, 3, 4]
    assert state.lowest_idle() == 2
    state.check_invariants()


def test_invariant_check_detects_corruption():
    state = _state_with((1, 2))
    state.busy_bits.clear(0)
    with pytest.raises(SimulationStateError):
        state.check_invariants()


def test_random_steps_keep_state_consistent():
    state = SimState(20.0)
    events = EventStream(seed=3)
    for _ in range(5000):
        step(state, events)
        state.check_invariants()
        assert state.busy_count == state.busy_bits.popcount()


def test_step_drives_the_same_chain_as_run_replication():
    config = SimConfig(lam=6.0, seed=4, warmup_time=0.0, n_samples=300)
    recorded = run_replication(config)

    state = SimState(config.lam)
    events = EventStream(config.seed, 0)
    servers, seen = [], []
    n_events = 0
    while len(servers) < config.n_samples:
        n = state.busy_count
        event = step(state, events)
        n_events += 1
        if event.kind is EventKind.ARRIVAL:
            servers.append(event.L)
            seen.append(n)

    assert recorded.samples.tolist() == servers
    assert recorded.busy_at_arrival.tolist() == seen
    assert recorded.events == n_events
    assert recorded.clock == state.clock


def test_arrivals_are_half_of_events_at_large_lambda():
    state = SimState(200.0)
    events = EventStream(seed=8)
    for _ in range(20_000):
        step(state, events)
    n_steps = 100_000
    arrivals = sum(step(state, events).kind is EventKind.ARRIVAL for _ in range(n_steps))
    assert arrivals / n_steps == pytest.approx(0.5, abs=0.01)


def test_event_stream_is_reproducible():
    a, b = EventStream(11, 2), EventStream(11, 2)
    assert [a.draw() for _ in range(10)] == [b.draw() for _ in range(10)]
    assert EventStream(11, 3).draw() != EventStream(11, 2).draw()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lam": 0.0},
        {"lam": 5.0, "seed": -1},
        {"lam": 5.0, "seed": 2**64},
        {"lam": 5.0, "warmup_time": -1.0},
        {"lam": 5.0, "n_samples": 0},
        {"lam": 5.0, "n_replications": 0},
        {"lam": 5.0, "record_every": 0},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ParameterError):
        SimConfig(**kwargs)


def test_first_arrival_from_empty_takes_server_one():
    result = run(SimConfig(lam=5.0, warmup_time=0.0, n_samples=1))
    assert result.samples.tolist() == [1]
    assert result.empirical_survival == (1.0, 0.0)


def test_run_is_deterministic():
    config = SimConfig(lam=10.0, seed=42, n_samples=2000, warmup_time=10.0)
    first, second = run(config), run(config)
    assert first.samples.tolist() == second.samples.tolist()
    assert first.to_dict() == second.to_dict()


def test_replications_use_distinct_streams():
    config = SimConfig(lam=10.0, seed=1, n_samples=500, n_replications=2)
    reps = [run_replication(config, r) for r in range(2)]
    assert reps[0].samples.tolist() != reps[1].samples.tolist()


def test_parallel_replications_match_serial(small_sim_config):
    config = small_sim_config
    serial = run(config)
    parallel = run_simulation(config, n_jobs=2)
    assert parallel.samples.tolist() == serial.samples.tolist()
    assert parallel.to_dict() == serial.to_dict()
    assert [r.replication for r in run_replications(config, n_jobs=2)] == [0, 1, 2]


def test_record_every_thins_arrivals():
    dense = run(SimConfig(lam=10.0, seed=5, n_samples=400, warmup_time=5.0))
    thin = run(SimConfig(lam=10.0, seed=5, n_samples=100, warmup_time=5.0, record_every=4))
    assert thin.samples.tolist() == dense.samples.tolist()[3::4]


def test_debug_mode_runs_invariant_checks(mocker):
    spy = mocker.spy(SimState, "check_invariants")
    run(SimConfig(lam=5.0, n_samples=20, warmup_time=1.0, debug=True))
    assert spy.call_count >= 19


def test_empirical_survival():
    assert empirical_survival([1, 1, 2]).tolist() == pytest.approx([1.0, 1 / 3, 0.0])
    assert empirical_survival([3, 3, 3]).tolist() == [1.0, 1.0, 1.0, 0.0]
    with pytest.raises(ParameterError):
        empirical_survival([])


def test_batch_means_stderr():
    values = np.repeat([0.0, 1.0], 50)
    assert batch_means_stderr(values, 2) == pytest.approx(0.5)
    assert math.isnan(batch_means_stderr([1.0]))
    iid = np.random.default_rng(0).standard_normal(64_000)
    assert batch_means_stderr(iid) == pytest.approx(1 / math.sqrt(64_000), rel=0.3)


def test_compare_identical_law_passes():
    table = build_survival_table(ModelParams(10.0))
    report = compare(table.survival, table, 0.001, 1000)
    assert report.statistic == 0.0
    assert report.verdict


def test_compare_shifted_plateau_fails():
    table = build_survival_table(ModelParams(2.0), 10)
    shifted = np.minimum(1.0, table.survival + 0.1)
    report = compare(shifted, table, 0.001, 500)
    assert report.statistic >= 0.1 - 1e-12
    assert not report.verdict
    assert report.threshold < 0.1


def test_compare_threshold_and_length_mismatch():
    table = build_survival_table(ModelParams(50.0))
    report = compare([1.0, 0.0], table, 0.001, 10**6)
    assert report.threshold == pytest.approx(0.00195, rel=1e-2)
    assert report.argmax_l == 1
    with pytest.raises(ParameterError):
        compare([1.0], table, 1.5, 10)
    with pytest.raises(ParameterError):
        compare([1.0], table, 0.01, 0)


def test_moderate_run_is_close_to_exact_law():
    config = SimConfig(lam=20.0, seed=2, n_samples=50_000, warmup_time=20.0, record_every=2)
    outcome = run_comparison(config, alpha=0.001)
    assert outcome.report.n == 50_000
    assert outcome.exact_mean == pytest.approx(exact_moment(ModelParams(20.0), 1).exact)
    assert abs(outcome.mean_z_score) < 5
    assert outcome.result.arrival_epoch_busy_mean == pytest.approx(20.0, rel=0.05)


@pytest.mark.slow
def test_simulation_matches_exact_law_at_lambda_50():
    config = SimConfig(lam=50.0, seed=0, warmup_time=50.0, n_samples=10**6)
    assert config.record_every == 1
    outcome = run_comparison(config, alpha=0.001)
    assert outcome.report.n == 10**6
    assert outcome.report.threshold == pytest.approx(0.00195, rel=1e-2)
    assert outcome.report.verdict, outcome.errors_list
    assert outcome.result.pasta_ok
    assert outcome.result.stationary_ok
    assert outcome.passed


@pytest.mark.slow
def test_thinned_simulation_matches_exact_law_at_lambda_50():
    config = SimConfig(lam=50.0, seed=0, warmup_time=50.0, n_samples=10**6, record_every=4)
    outcome = run_comparison(config, alpha=0.001)
    assert outcome.report.threshold == pytest.approx(0.00195, rel=1e-2)
    assert outcome.report.verdict, outcome.errors_list
    assert outcome.result.pasta_ok
    assert outcome.result.stationary_ok
    assert outcome.passed
    assert abs(outcome.mean_z_score) < 4


def test_initial_capacity():
    assert initial_capacity(100.0) == 200
    assert initial_capacity(0.01) == 2


def test_single_worker_skips_joblib(small_sim_config, mocker):
    parallel = mocker.patch("rankedservers.tasks.Parallel")
    results = run_replications(small_sim_config, n_jobs=1)
    parallel.assert_not_called()
    assert [r.samples.size for r in results] == [3000, 3000, 3000]


def test_workers_are_requested_from_joblib(small_sim_config, mocker):
    fake = [run_replication(small_sim_config, r) for r in (2, 0, 1)]
    parallel = mocker.patch("rankedservers.tasks.Parallel")
    parallel.return_value.return_value = iter(fake)
    results = run_replications(small_sim_config, n_jobs=4)
    assert parallel.call_args.kwargs == {"n_jobs": 4, "return_as": "generator"}
    assert [r.replication for r in results] == [0, 1, 2]
