import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from syncgame.dynamics import RevisionProtocol  # noqa: E402
from syncgame.game import PopulationSpec, RegionSpec, Scenario  # noqa: E402
from syncgame.presets import default_scenario, initial_state  # noqa: E402

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_ACCEPTANCE] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    text = getattr(item, "acceptance_detail", {}).get("text")
    if report.failed and text is None:
        text = call.excinfo.exconly().splitlines()[0] if call.excinfo else "failed"
    item.config.stash[_ACCEPTANCE][number] = (report.passed, title, text or "")


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title, text = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {number:>2}  {title}: {text}")


@pytest.fixture
def detail(request):
    """Dict whose ``text`` entry becomes the criterion's summary line."""
    request.node.acceptance_detail = {}
    return request.node.acceptance_detail


def random_scenario(rng, max_pops=4, max_regions=4, subsets=True, alpha=None):
    """Scenario with parameters drawn from the experimental ranges."""
    M = int(rng.integers(1, max_regions + 1))
    P = int(rng.integers(1, max_pops + 1))
    regions = tuple(RegionSpec(m, float(rng.uniform(1000, 1800)), float(rng.uniform(1000, 2000)))
                    for m in range(M))
    pops = []
    for p in range(P):
        if subsets and M > 1:
            k = int(rng.integers(1, M + 1))
            strat = tuple(int(s) for s in rng.choice(M, size=k, replace=False))
        else:
            strat = tuple(range(M))
        pops.append(PopulationSpec(
            p, size=int(rng.integers(50, 251)), strategies=strat,
            traversal_distance=tuple(rng.uniform(300, 1000, len(strat))),
            data_quality=tuple(rng.uniform(1, 5, len(strat))),
            propulsion_power=float(rng.uniform(16, 20)), hover_power=float(rng.uniform(16, 20)),
            traversal_speed=float(rng.uniform(3, 5)), sensing_speed=float(rng.uniform(3, 5)),
            unit_energy_cost=0.001,
            smith_probability=float(rng.uniform()) if alpha is None else alpha))
    return Scenario(regions, tuple(pops))


def random_state(rng, scenario, boundary=0.2):
    """Random point of the product of simplices; some entries are exactly 0."""
    blocks = []
    for pop in scenario.populations:
        w = rng.exponential(size=pop.num_strategies)
        if pop.num_strategies > 1:
            w[rng.uniform(size=w.size) < boundary] = 0.0
            if not w.any():
                w[rng.integers(w.size)] = 1.0
        blocks.append(w / w.sum())
    return np.concatenate(blocks)


def random_protocol(rng, P):
    a = rng.uniform(size=P)
    a[rng.uniform(size=P) < 0.2] = 0.0
    a[rng.uniform(size=P) < 0.2] = 1.0
    return RevisionProtocol.hybrid(a)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def default():
    return default_scenario()


@pytest.fixture
def x0(default):
    return initial_state(default)


def two_pop_symmetric():
    """Two identical populations over two identical regions."""
    regions = (RegionSpec(0, 1000.0, 1500.0), RegionSpec(1, 1000.0, 1500.0))
    pops = tuple(PopulationSpec(p, size=100, strategies=(0, 1), traversal_distance=(500.0, 500.0),
                                data_quality=(2.0, 2.0), propulsion_power=18.0, hover_power=18.0,
                                traversal_speed=4.0, sensing_speed=4.0, smith_probability=0.5)
                 for p in range(2))
    return Scenario(regions, pops)
