"""Reference scenario used throughout the tests and the CLI.

Three populations choose among three regions. Sizes, distances, speeds,
powers and qualities lie inside the experimental ranges (N in [50, 250],
l in [300, 1000] m, D in [1000, 1800] m, R in [1000, 2000], v, u in [3, 5]
m/s, eta in [16, 20] W, b in [1, 5], zeta = 0.001). Traversal distances were
chosen so that every population has an interior rest point where all of its
strategies pay the same; population 3 carries the highest data quality.
"""

import numpy as np

from .game import PopulationSpec, RegionSpec, Scenario

INITIAL_STATE = ((0.3, 0.3, 0.4), (0.4, 0.4, 0.2), (0.35, 0.35, 0.3))
SMITH_PROBABILITIES = (0.2, 0.3, 0.0)
UNIT_ENERGY_COST = 0.001


def default_scenario(smith_probabilities=SMITH_PROBABILITIES) -> Scenario:
    a = smith_probabilities
    regions = (
        RegionSpec(0, route_length=1200.0, reward_pool=1500.0),
        RegionSpec(1, route_length=1500.0, reward_pool=1800.0),
        RegionSpec(2, route_length=1000.0, reward_pool=1200.0),
    )
    pops = (
        PopulationSpec(0, size=120, strategies=(0, 1, 2),
                       traversal_distance=(790.0, 718.0, 441.0), data_quality=(1.5, 1.7, 1.3),
                       propulsion_power=18.0, hover_power=17.0,
                       traversal_speed=4.0, sensing_speed=4.5,
                       unit_energy_cost=UNIT_ENERGY_COST, smith_probability=a[0]),
        PopulationSpec(1, size=180, strategies=(0, 1, 2),
                       traversal_distance=(897.0, 376.0, 677.0), data_quality=(2.2, 2.0, 2.4),
                       propulsion_power=17.0, hover_power=19.0,
                       traversal_speed=4.5, sensing_speed=3.5,
                       unit_energy_cost=UNIT_ENERGY_COST, smith_probability=a[1]),
        PopulationSpec(2, size=200, strategies=(0, 1, 2),
                       traversal_distance=(961.0, 617.0, 372.0), data_quality=(4.0, 4.2, 3.8),
                       propulsion_power=19.0, hover_power=16.0,
                       traversal_speed=3.5, sensing_speed=4.0,
                       unit_energy_cost=UNIT_ENERGY_COST, smith_probability=a[2]),
    )
    return Scenario(regions, pops)


def initial_state(scenario: Scenario | None = None) -> np.ndarray:
    scenario = scenario or default_scenario()
    return scenario.state(INITIAL_STATE[: scenario.num_populations])
