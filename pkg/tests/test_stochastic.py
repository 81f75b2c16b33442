import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_protocol, random_scenario, random_state, seeds, two_pop_symmetric
from syncgame import kernels
from syncgame.dynamics import RevisionProtocol, switch_matrix
from syncgame.errors import RateBoundError, ValidationError
from syncgame.game import PopulationSpec, RegionSpec, Scenario
from syncgame.stochastic import (
    AgentPopulationState,
    StochasticConfig,
    ensemble,
    make_rng,
    revision_probabilities,
    sample_revision,
    sample_revisions,
    simulate,
)


def one_population(N, n_strategies=2, reward=(1000.0, 1000.0, 1000.0), quality=None):
    regions = tuple(RegionSpec(m, 1000.0, reward[m]) for m in range(n_strategies))
    pop = PopulationSpec(0, N, tuple(range(n_strategies)), (500.0,) * n_strategies,
                         quality or (1.0,) * n_strategies, 16.0, 16.0, 4.0, 4.0)
    return Scenario(regions, (pop,))


# -- sample_revision -------------------------------------------------------------


@pytest.mark.parametrize("kind", ["imitation", "comparison"])
def test_no_switch_when_rates_vanish(kind):
    proto = RevisionProtocol.pure(kind, 1)
    rng = make_rng(1)
    pi, x = [3.0, 3.0, 3.0], [0.2, 0.3, 0.5]
    assert all(sample_revision(proto, pi, x, 0, 1, rng, 5.0) == 1 for _ in range(1000))
    assert np.all(sample_revisions(proto, pi, x, 0, 1, rng, 5.0, 10_000) == 1)


def test_certain_switch_at_rate_bound():
    proto = RevisionProtocol.pure("comparison", 1)
    pi, x = [0.0, 4.0, 0.0], [0.4, 0.3, 0.3]
    rng = make_rng(2)
    assert all(sample_revision(proto, pi, x, 0, 0, rng, 4.0) == 1 for _ in range(1000))
    assert np.all(sample_revisions(proto, pi, x, 0, 0, rng, 4.0, 10_000) == 1)


def test_switch_frequencies_match_rates():
    proto = RevisionProtocol.hybrid([0.6])
    pi, x = [1.0, 2.5, 4.0, 1.5], [0.4, 0.3, 0.2, 0.1]
    bound = 6.0
    probs = revision_probabilities(proto, pi, x, 0, 0, bound)
    rho = switch_matrix(proto, pi, x, 0)[0]
    np.testing.assert_allclose(probs[1:], rho[1:] / bound)
    n = 10**6
    draws = sample_revisions(proto, pi, x, 0, 0, make_rng(3), bound, n)
    freq = np.bincount(draws, minlength=4) / n
    sigma = np.sqrt(probs * (1 - probs) / n)
    assert np.all(np.abs(freq - probs) <= 3 * sigma + 1e-12)


def test_scalar_and_vector_samplers_agree():
    proto = RevisionProtocol.hybrid([0.3])
    pi, x = [1.0, 2.0, 3.0], [0.5, 0.3, 0.2]
    a, b = make_rng(9), make_rng(9)
    scalar = [sample_revision(proto, pi, x, 0, 0, a, 5.0) for _ in range(500)]
    np.testing.assert_array_equal(scalar, sample_revisions(proto, pi, x, 0, 0, b, 5.0, 500))


def test_sampler_checks_rate_bound():
    proto = RevisionProtocol.pure("comparison", 1)
    with pytest.raises(RateBoundError) as info:
        sample_revision(proto, [0.0, 5.0, 5.0], [0.4, 0.3, 0.3], 0, 0, make_rng(0), 4.0)
    assert info.value.observed == pytest.approx(10.0)
    assert "rate_bound" in str(info.value)


# -- simulate ----------------------------------------------------------------------


def test_config_validation():
    for kw in (dict(clock_rate=0.0), dict(rate_bound=-1.0), dict(horizon=-1.0),
               dict(record_interval=0.0), dict(seed=-1)):
        with pytest.raises(ValidationError):
            StochasticConfig(**kw)


def test_counts_validation(default):
    with pytest.raises(ValidationError):
        AgentPopulationState([-1, 2])
    with pytest.raises(ValidationError):
        simulate(default, RevisionProtocol.from_scenario(default), [1] * 9)


def test_from_state_rounds_to_sizes(default, x0):
    counts = AgentPopulationState.from_state(default, x0).validate(default).counts
    np.testing.assert_array_equal(counts, [36, 36, 48, 72, 72, 36, 70, 70, 60])


@settings(max_examples=40)
@given(seeds)
def test_count_conservation(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, max_pops=3, max_regions=3)
    proto = random_protocol(rng, sc.num_populations)
    start = AgentPopulationState.from_state(sc, random_state(rng, sc))
    cfg = StochasticConfig(seed=seed, clock_rate=1.0, rate_bound=1e9, horizon=0.5,
                           record_interval=0.05)
    traj = simulate(sc, proto, start, cfg)
    assert np.all(traj.counts >= 0)
    for p, pop in enumerate(sc.populations):
        assert np.all(traj.counts[:, sc.block(p)].sum(axis=1) == pop.size)
    np.testing.assert_array_equal(traj.counts[0], start.counts)


def test_seed_determinism(default, x0):
    proto = RevisionProtocol.from_scenario(default)
    start = AgentPopulationState.from_state(default, x0)
    cfg = StochasticConfig(seed=11, clock_rate=5.0, rate_bound=20.0, horizon=1.0)
    a = simulate(default, proto, start, cfg)
    b = simulate(default, proto, start, cfg)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert (a.events, a.switches) == (b.events, b.switches)
    c = simulate(default, proto, start, dataclasses.replace(cfg, seed=12))
    assert not np.array_equal(a.counts, c.counts)


def test_ensemble_runs_use_split_streams(default, x0):
    proto = RevisionProtocol.from_scenario(default)
    start = AgentPopulationState.from_state(default, x0)
    cfg = StochasticConfig(seed=5, clock_rate=5.0, rate_bound=20.0, horizon=0.5)
    runs = ensemble(default, proto, start, cfg, runs=3)
    again = simulate(default, proto, start, cfg, rng=make_rng(5, 2))
    np.testing.assert_array_equal(runs[2].counts, again.counts)
    assert not np.array_equal(runs[0].counts, runs[1].counts)


@pytest.mark.parametrize("kind", ["imitation", "comparison"])
def test_ties_never_switch(kind):
    sc = two_pop_symmetric()
    start = AgentPopulationState.from_state(sc, sc.uniform_state())
    cfg = StochasticConfig(seed=3, clock_rate=2.0, rate_bound=5.0, horizon=5.0)
    traj = simulate(sc, RevisionProtocol.pure(kind, 2), start, cfg)
    assert traj.events > 0 and traj.switches == 0
    assert np.all(traj.counts == start.counts)


def test_single_imitator_never_switches():
    sc = one_population(1, reward=(1000.0, 5000.0))
    cfg = StochasticConfig(seed=0, clock_rate=10.0, rate_bound=1e12, horizon=10.0)
    traj = simulate(sc, RevisionProtocol.pure("imitation", 1), [1, 0], cfg)
    assert traj.events > 0 and traj.switches == 0
    # The comparison protocol sees the better region and moves.
    traj = simulate(sc, RevisionProtocol.pure("comparison", 1), [1, 0], cfg)
    assert traj.switches >= 1


def test_imitation_extinction_and_smith_resurrection():
    sc = one_population(50, 3, reward=(1000.0, 1000.0, 3000.0))
    start = [25, 25, 0]
    cfg = StochasticConfig(seed=4, clock_rate=1.0, rate_bound=1e8, horizon=5.0)
    traj = simulate(sc, RevisionProtocol.pure("imitation", 1), start, cfg)
    assert np.all(traj.counts[:, 2] == 0)
    traj = simulate(sc, RevisionProtocol.pure("comparison", 1), start, cfg)
    assert traj.counts[-1, 2] > 0


def test_rate_bound_violation_raises(default, x0):
    proto = RevisionProtocol.from_scenario(default)
    start = AgentPopulationState.from_state(default, x0)
    for backend in kernels.available():
        with pytest.raises(RateBoundError) as info:
            simulate(default, proto, start, StochasticConfig(rate_bound=0.5, horizon=1.0),
                     backend=backend)
        assert info.value.observed > 0.5


def test_trajectory_shape(default, x0):
    proto = RevisionProtocol.from_scenario(default)
    start = AgentPopulationState.from_state(default, x0)
    cfg = StochasticConfig(seed=1, clock_rate=2.0, rate_bound=20.0, horizon=1.0,
                           record_interval=0.25)
    traj = simulate(default, proto, start, cfg)
    np.testing.assert_allclose(traj.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert traj.states.shape == traj.payoffs.shape == (5, 9)
    assert traj.averages.shape == (5, 3)
    np.testing.assert_allclose(traj.states, traj.counts / default.layout.size)


def test_event_rate_is_clock_rate_times_agents():
    sc = two_pop_symmetric()
    start = AgentPopulationState.from_state(sc, sc.uniform_state())
    cfg = StochasticConfig(seed=8, clock_rate=3.0, rate_bound=5.0, horizon=20.0)
    events = simulate(sc, RevisionProtocol.hybrid([0.5, 0.5]), start, cfg).events
    mean = 200 * 3.0 * 20.0
    assert abs(events - mean) <= 4 * np.sqrt(mean)


@pytest.mark.skipif(len(kernels.available()) < 2, reason="compiled kernel not built")
def test_backends_bit_identical(default, x0):
    proto = RevisionProtocol.from_scenario(default)
    start = AgentPopulationState.from_state(default, x0)
    cfg = StochasticConfig(seed=21, clock_rate=5.0, rate_bound=20.0, horizon=1.0)
    a, b = (simulate(default, proto, start, cfg, backend=n) for n in kernels.available())
    np.testing.assert_array_equal(a.counts, b.counts)
    assert (a.events, a.switches) == (b.events, b.switches)
