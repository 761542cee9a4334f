"""
Discrete-event simulation of the ranked M/M/infinity system.

Arrivals are Poisson(lambda), services are unit-rate exponential and every
arrival takes the lowest-indexed idle server. By memorylessness the chain only
needs the set of busy servers: the next event comes after Exp(lambda + n) time,
is an arrival with probability lambda / (lambda + n) and otherwise the
departure of a uniformly chosen busy server.

Random numbers: replication r of seed s uses
``Generator(PCG64(SeedSequence(s, spawn_key=(r,))))`` and draws, per block,
first ``EVENT_BLOCK`` standard exponentials and then ``EVENT_BLOCK`` uniforms.
Event i consumes the i-th exponential (holding time) and the i-th uniform
(event choice). This layout is part of the reproducibility contract.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ParameterError, SimulationStateError
from ..reports import ComparisonReport
from ..utils.bitset import BusyBitset
from .analytic_core import ModelParams

logger = logging.getLogger(__name__)

EVENT_BLOCK = 1 << 16
SEED_LIMIT = 1 << 64
DEFAULT_BATCHES = 64
# PASTA and split-half checks accept within this many standard errors.
CHECK_SIGMAS = 4.0


@dataclass(frozen=True)
class SimConfig:
    lam: float
    seed: int = 0
    warmup_time: float = 50.0
    n_samples: int = 1
    n_replications: int = 1
    record_every: int = 1
    debug: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lam", ModelParams(self.lam).lam)
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < SEED_LIMIT:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}.")
        if not math.isfinite(self.warmup_time) or self.warmup_time < 0:
            raise ParameterError(f"warmup_time must be >= 0, got {self.warmup_time!r}.")
        for name in ("n_samples", "n_replications", "record_every"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}.")

    def to_dict(self):
        return {
            "lambda": self.lam,
            "seed": int(self.seed),
            "warmup_time": self.warmup_time,
            "n_samples": int(self.n_samples),
            "n_replications": int(self.n_replications),
            "record_every": int(self.record_every),
        }


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    DEPARTURE = "departure"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    server: int
    clock: float

    @property
    def L(self):
        return self.server if self.kind is EventKind.ARRIVAL else None


class EventStream:
    """Pairs (standard exponential, uniform) for one replication, drawn in blocks."""

    def __init__(self, seed, replication=0, block=EVENT_BLOCK):
        sequence = np.random.SeedSequence(int(seed), spawn_key=(int(replication),))
        self._rng = np.random.Generator(np.random.PCG64(sequence))
        self._block = block
        self._pairs = self._generate()

    def _generate(self):
        while True:
            holding = self._rng.standard_exponential(self._block).tolist()
            uniform = self._rng.random(self._block).tolist()
            yield from zip(holding, uniform)

    def __iter__(self):
        return self._pairs

    def draw(self):
        return next(self._pairs)


class SimState:
    """
    Busy servers of the ranked system.

    Server l is bit l - 1 of ``busy_bits``. ``busy_list`` is a dense list of the
    busy servers and ``_slot`` maps each of them to its position there, so a
    uniformly random departure is one list lookup plus a swap-remove.
    """

    def __init__(self, lam, capacity=None):
        self.lam = float(lam)
        if capacity is None:
            capacity = initial_capacity(self.lam)
        self.clock = 0.0
        self.busy_bits = BusyBitset(capacity)
        self.busy_list = []
        self._slot = {}

    @property
    def busy_count(self):
        return len(self.busy_list)

    def lowest_idle(self):
        return self.busy_bits.first_clear() + 1

    def occupy(self):
        server = self.busy_bits.first_clear() + 1
        self.busy_bits.set(server - 1)
        self._slot[server] = len(self.busy_list)
        self.busy_list.append(server)
        return server

    def release(self, position):
        busy = self.busy_list
        server = busy[position]
        last = busy.pop()
        if last != server:
            busy[position] = last
            self._slot[last] = position
        del self._slot[server]
        self.busy_bits.clear(server - 1)
        return server

    def release_server(self, server):
        return self.release(self._slot[server])

    def check_invariants(self):
        n = len(self.busy_list)
        if len(self.busy_bits) != n or self.busy_bits.popcount() != n:
            raise SimulationStateError(
                f"busy count {n} disagrees with the bitset ({self.busy_bits.popcount()} set bits).",
                clock=self.clock,
            )
        for position, server in enumerate(self.busy_list):
            if self._slot.get(server) != position or not self.busy_bits.test(server - 1):
                raise SimulationStateError(
                    f"server {server} at position {position} is not tracked consistently.",
                    clock=self.clock,
                )
        if len(self._slot) != n:
            raise SimulationStateError("reverse map has stale entries.", clock=self.clock)


def initial_capacity(lam):
    return max(1, math.ceil(lam + 10.0 * math.sqrt(lam)))


def lowest_idle(state):
    """Smallest server index whose bit is clear; the state is not modified."""
    return state.lowest_idle()


def _advance(state, holding, u):
    """
    Apply one (holding, uniform) pair to ``state``.

    Returns ``(server, arrived, n)`` where ``n`` is the busy count just before
    the event.
    """
    n = len(state.busy_list)
    rate = state.lam + n
    state.clock += holding / rate
    x = u * rate
    if x < state.lam:
        return state.occupy(), True, n
    return state.release(min(int(x - state.lam), n - 1)), False, n


def step(state, events):
    """Advance ``state`` by one event drawn from ``events`` (anything with ``draw()``)."""
    server, arrived, _ = _advance(state, *events.draw())
    kind = EventKind.ARRIVAL if arrived else EventKind.DEPARTURE
    return Event(kind, server, state.clock)


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    samples: np.ndarray = field(repr=False)
    busy_at_arrival: np.ndarray = field(repr=False)
    events: int
    clock: float


def run_replication(config, replication=0):
    """
    One replication: warm up from the empty system until the clock reaches
    ``warmup_time``, then record L (and the busy count the arrival sees) at
    every ``record_every``-th arrival until ``n_samples`` are recorded.
    """
    state = SimState(config.lam)
    events = iter(EventStream(config.seed, replication))
    n_events = 0

    if state.clock < config.warmup_time:
        for holding, u in events:
            _advance(state, holding, u)
            n_events += 1
            if config.debug:
                state.check_invariants()
            if state.clock >= config.warmup_time:
                break
    logger.debug(
        f"Replication {replication}: warm-up done after {n_events} events, "
        f"{state.busy_count} busy, capacity {state.busy_bits.capacity}"
    )

    samples, seen = [], []
    target = config.n_samples
    every = config.record_every
    countdown = every
    for holding, u in events:
        server, arrived, n = _advance(state, holding, u)
        n_events += 1
        if arrived:
            countdown -= 1
            if countdown == 0:
                countdown = every
                samples.append(server)
                seen.append(n)
                if len(samples) == target:
                    break
        if config.debug:
            state.check_invariants()

    return ReplicationResult(
        replication=replication,
        samples=np.array(samples, dtype=np.int64),
        busy_at_arrival=np.array(seen, dtype=np.int64),
        events=n_events,
        clock=state.clock,
    )


def empirical_survival(samples):
    """entry[l] = fraction of samples strictly greater than l, for l = 0..max(samples)."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ParameterError("empirical_survival needs at least one sample.")
    if not np.issubdtype(samples.dtype, np.integer) or samples.min() < 0:
        raise ParameterError("samples must be nonnegative integers.")
    counts = np.bincount(samples)
    n = samples.size
    return (n - np.cumsum(counts)) / n


def batch_means_stderr(values, n_batches=DEFAULT_BATCHES):
    """
    Standard error of the mean of ``values`` from non-overlapping batch means.

    Returns NaN when fewer than two batches can be formed.
    """
    values = np.asarray(values, dtype=np.float64)
    n_batches = min(n_batches, values.size)
    if n_batches < 2:
        return math.nan
    means = np.array([chunk.mean() for chunk in np.array_split(values, n_batches)])
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def _extend(values, length):
    values = np.asarray(values, dtype=np.float64)
    if values.size >= length:
        return values
    return np.concatenate([values, np.full(length - values.size, values[-1])])


def compare(empirical, exact, alpha, n):
    """DKW test of an empirical survival function against a ``SurvivalTable``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}.")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}.")
    empirical = np.asarray(empirical, dtype=np.float64)
    if empirical.size == 0:
        raise ParameterError("the empirical survival function is empty.")
    length = max(empirical.size, exact.survival.size)
    gaps = np.abs(_extend(empirical, length) - _extend(exact.survival, length))
    argmax_l = int(np.argmax(gaps))
    statistic = float(gaps[argmax_l])
    threshold = math.sqrt(math.log(2.0 / alpha) / (2.0 * n))
    return ComparisonReport(
        statistic=statistic,
        threshold=threshold,
        alpha=alpha,
        n=int(n),
        argmax_l=argmax_l,
        verdict=statistic <= threshold,
    )


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    samples_recorded: int
    empirical_survival: tuple = field(repr=False)
    sample_mean_L: float
    sample_var_L: float
    arrival_epoch_busy_mean: float
    arrival_epoch_busy_var: float
    first_half_mean_L: float
    second_half_mean_L: float
    mean_L_stderr: float
    busy_mean_stderr: float
    busy_var_stderr: float
    half_diff_stderr: float
    effective_sample_size: float
    pasta_ok: bool
    stationary_ok: bool
    events: int
    samples: np.ndarray = field(repr=False, compare=False)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "samples_recorded": self.samples_recorded,
            "empirical_survival": list(self.empirical_survival),
            "sample_mean_L": self.sample_mean_L,
            "sample_var_L": self.sample_var_L,
            "arrival_epoch_busy_mean": self.arrival_epoch_busy_mean,
            "arrival_epoch_busy_var": self.arrival_epoch_busy_var,
            "first_half_mean_L": self.first_half_mean_L,
            "second_half_mean_L": self.second_half_mean_L,
            "mean_L_stderr": self.mean_L_stderr,
            "busy_mean_stderr": self.busy_mean_stderr,
            "busy_var_stderr": self.busy_var_stderr,
            "half_diff_stderr": self.half_diff_stderr,
            "effective_sample_size": self.effective_sample_size,
            "pasta_ok": self.pasta_ok,
            "stationary_ok": self.stationary_ok,
            "events": self.events,
        }


def _within(value, target, stderr):
    return bool(math.isfinite(stderr) and abs(value - target) <= CHECK_SIGMAS * stderr)


def summarize(config, replications, n_batches=DEFAULT_BATCHES):
    """Aggregate replications (in replication order) into a ``SimResult``."""
    replications = sorted(replications, key=lambda r: r.replication)
    samples = np.concatenate([r.samples for r in replications])
    busy = np.concatenate([r.busy_at_arrival for r in replications]).astype(np.float64)
    values = samples.astype(np.float64)
    n = samples.size
    ddof = 1 if n > 1 else 0

    mean_L = float(values.mean())
    var_L = float(values.var(ddof=ddof))
    busy_mean = float(busy.mean())
    busy_var = float(busy.var(ddof=ddof))

    half = n // 2
    first, second = values[:half], values[half:]
    first_mean = float(first.mean()) if half else math.nan
    second_mean = float(second.mean())

    mean_stderr = batch_means_stderr(values, n_batches)
    busy_mean_stderr = batch_means_stderr(busy, n_batches)
    busy_var_stderr = batch_means_stderr((busy - busy_mean) ** 2, n_batches)
    half_stderr = math.hypot(
        batch_means_stderr(first, n_batches), batch_means_stderr(second, n_batches)
    )
    ess = var_L / mean_stderr**2 if mean_stderr and math.isfinite(mean_stderr) else math.nan

    pasta_ok = _within(busy_mean, config.lam, busy_mean_stderr) and _within(
        busy_var, config.lam, busy_var_stderr
    )
    stationary_ok = _within(first_mean, second_mean, half_stderr)
    if not pasta_ok:
        logger.warning(
            f"PASTA check failed: busy mean {busy_mean:.4f}, var {busy_var:.4f}, lambda {config.lam}"
        )
    if not stationary_ok:
        logger.warning(
            f"Split-half check failed: {first_mean:.4f} vs {second_mean:.4f} (se {half_stderr:.4g})"
        )

    return SimResult(
        config=config,
        samples_recorded=int(n),
        empirical_survival=tuple(empirical_survival(samples).tolist()),
        sample_mean_L=mean_L,
        sample_var_L=var_L,
        arrival_epoch_busy_mean=busy_mean,
        arrival_epoch_busy_var=busy_var,
        first_half_mean_L=first_mean,
        second_half_mean_L=second_mean,
        mean_L_stderr=mean_stderr,
        busy_mean_stderr=busy_mean_stderr,
        busy_var_stderr=busy_var_stderr,
        half_diff_stderr=half_stderr,
        effective_sample_size=ess,
        pasta_ok=pasta_ok,
        stationary_ok=stationary_ok,
        events=sum(r.events for r in replications),
        samples=samples,
    )


def run(config, n_batches=DEFAULT_BATCHES):
    """All replications in-process, one after another. See ``tasks.run_simulation`` for the parallel path."""
    replications = [run_replication(config, r) for r in range(config.n_replications)]
    return summarize(config, replications, n_batches)
