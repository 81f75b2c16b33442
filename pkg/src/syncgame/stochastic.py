"""Finite-population agent simulation with Poisson revision clocks.

Every owner carries a rate-``clock_rate`` exponential clock. When it rings,
an owner on strategy ``m`` switches to ``i`` with probability
``rho_{m,i} / rate_bound`` and otherwise stays. The expected motion of the
proportions is therefore the mean dynamics slowed by
``clock_rate / rate_bound``; with ``clock_rate == rate_bound`` the two time
axes coincide.

Runs in an ensemble use independent generators seeded with
``SeedSequence([seed, run_index])`` (PCG64).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import RevisionProtocol, switch_matrix
from .errors import RateBoundError, ValidationError
from .game import Scenario, check_state, payoff_vector, population_averages
from .integrator import Trajectory


@dataclass(frozen=True)
class StochasticConfig:
    seed: int = 0
    clock_rate: float = 1.0
    rate_bound: float = 10.0
    horizon: float = 10.0
    record_interval: float = 0.1

    def __post_init__(self):
        if not self.clock_rate > 0:
            raise ValidationError("clock_rate must be > 0")
        if not self.rate_bound > 0:
            raise ValidationError("rate_bound must be > 0")
        if not self.horizon >= 0:
            raise ValidationError("horizon must be >= 0")
        if not self.record_interval > 0:
            raise ValidationError("record_interval must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def time_scale(self) -> float:
        """Mean-dynamics time elapsed per unit of simulated time."""
        return self.clock_rate / self.rate_bound

    def record_times(self) -> np.ndarray:
        n = int(np.floor(self.horizon / self.record_interval + 1e-9))
        return np.arange(n + 1) * self.record_interval


@dataclass(frozen=True)
class AgentPopulationState:
    """Integer strategy counts, flat in the same order as a social state."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.intp)
        if np.any(c < 0):
            raise ValidationError("counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_state(cls, scenario: Scenario, state):
        """Round a social state to counts (largest remainder per population)."""
        x = check_state(scenario, state)
        counts = np.zeros(x.size, dtype=np.intp)
        for p, pop in enumerate(scenario.populations):
            blk = scenario.block(p)
            raw = x[blk] * pop.size
            base = np.floor(raw).astype(np.intp)
            short = pop.size - base.sum()
            order = np.argsort(-(raw - base), kind="stable")
            base[order[:short]] += 1
            counts[blk] = base
        return cls(counts)

    def validate(self, scenario: Scenario):
        if self.counts.shape != (scenario.num_strategies,):
            raise ValidationError(
                f"counts have shape {self.counts.shape}, expected ({scenario.num_strategies},)")
        for p, pop in enumerate(scenario.populations):
            total = int(self.counts[scenario.block(p)].sum())
            if total != pop.size:
                raise ValidationError(f"population {p} counts sum to {total}, size is {pop.size}")
        return self

    def proportions(self, scenario: Scenario) -> np.ndarray:
        return self.counts / scenario.layout.size


def make_rng(seed: int, run: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(run)])))


def simulate(scenario: Scenario, protocol: RevisionProtocol, initial,
             config: StochasticConfig | None = None, *, rng: np.random.Generator | None = None,
             backend: str | None = None) -> Trajectory:
    """Run one continuous-time agent simulation.

    ``initial`` is an :class:`AgentPopulationState` or a count array. The
    returned trajectory samples the state every ``record_interval`` from 0
    to ``horizon`` (simulated time) and carries the integer counts.
    """
    config = config or StochasticConfig()
    if not isinstance(initial, AgentPopulationState):
        initial = AgentPopulationState(initial)
    initial.validate(scenario)
    core = kernels.core if backend is None else kernels.load(backend)
    rng = make_rng(config.seed) if rng is None else rng
    ws, wi = protocol.mixing(scenario.num_populations)
    counts = initial.counts.copy()
    times = config.record_times()
    out = np.zeros((times.size, counts.size), dtype=np.intp)
    events, switches, status, max_rate = core.simulate_agents(
        scenario.layout, counts, ws, wi, rng, float(config.clock_rate),
        float(config.rate_bound), float(config.horizon), times, out)
    if status:
        raise RateBoundError(
            f"observed total switch rate {max_rate:.6g} exceeds rate_bound "
            f"{config.rate_bound:.6g}; raise rate_bound to at least this value",
            observed=max_rate, bound=config.rate_bound)
    states = out / scenario.layout.size
    payoffs = np.array([payoff_vector(scenario, s) for s in states])
    averages = np.array([population_averages(scenario, s, p) for s, p in zip(states, payoffs)])
    return Trajectory(
        steps=np.arange(times.size, dtype=np.int64),
        times=times,
        states=states,
        payoffs=payoffs,
        averages=averages,
        counts=out,
        events=int(events),
        switches=int(switches),
    )


def ensemble(scenario: Scenario, protocol: RevisionProtocol, initial,
             config: StochasticConfig | None = None, runs: int = 20,
             backend: str | None = None) -> list[Trajectory]:
    """Independent runs; run ``k`` uses ``make_rng(config.seed, k)``."""
    config = config or StochasticConfig()
    return [simulate(scenario, protocol, initial, config, rng=make_rng(config.seed, k),
                     backend=backend)
            for k in range(runs)]


def mean_states(trajectories: list[Trajectory]) -> np.ndarray:
    """Seed-averaged proportions, shape (K, S)."""
    return np.mean([t.states for t in trajectories], axis=0)


def revision_probabilities(protocol: RevisionProtocol, payoffs, proportions, population: int,
                           current: int, rate_bound: float) -> np.ndarray:
    """Probability of each target strategy on one clock ring (stay included)."""
    rho = switch_matrix(protocol, payoffs, proportions, population)[current]
    total = rho.sum()
    if total > rate_bound:
        raise RateBoundError(
            f"total switch rate {total:.6g} exceeds rate_bound {rate_bound:.6g}",
            observed=total, bound=rate_bound)
    probs = rho / rate_bound
    probs[current] = 1.0 - total / rate_bound
    return probs


def sample_revision(protocol: RevisionProtocol, payoffs, proportions, population: int,
                    current: int, rng: np.random.Generator, rate_bound: float) -> int:
    """Draw the strategy a revising owner ends up on (``current`` if no switch).

    Uses one uniform draw: the first target whose cumulative rate exceeds
    ``u * rate_bound`` wins.
    """
    rho = switch_matrix(protocol, payoffs, proportions, population)[current]
    total = rho.sum()
    if total > rate_bound:
        raise RateBoundError(
            f"total switch rate {total:.6g} exceeds rate_bound {rate_bound:.6g}",
            observed=total, bound=rate_bound)
    r = rng.random() * rate_bound
    cum = 0.0
    for i, rate in enumerate(rho):
        if i == current:
            continue
        cum += rate
        if r < cum:
            return i
    return current


def sample_revisions(protocol: RevisionProtocol, payoffs, proportions, population: int,
                     current: int, rng: np.random.Generator, rate_bound: float,
                     size: int) -> np.ndarray:
    """Vectorised :func:`sample_revision` for ``size`` independent rings."""
    probs = revision_probabilities(protocol, payoffs, proportions, population, current, rate_bound)
    targets = [i for i in range(probs.size) if i != current]
    edges = np.cumsum(probs[targets]) * rate_bound
    r = rng.random(size) * rate_bound
    idx = np.searchsorted(edges, r, side="right")
    out = np.full(size, current)
    hit = idx < len(targets)
    out[hit] = np.asarray(targets)[idx[hit]]
    return out
