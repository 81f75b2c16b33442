"""Game instance and payoff evaluation.

A :class:`Scenario` holds the regions (one VSP sensing task each) and the
device-owner populations. A social state is a flat ``float64`` array of
length ``S`` formed by concatenating every population's strategy
distribution in population order; :meth:`Scenario.split` gives per-population
views.

Payoffs follow the sensing/energy/reward model:

* selector mass of region ``m``: ``sum_q x^q_m N^q``
* sensing distance: ``D_m / mass_m`` (even split of the route)
* energy: ``eta1 * l / v + eta2 * d_m / u``
* reward share: ``b^p_m R_m / sum_q x^q_m N^q b^q_m``
* payoff: ``reward_share - zeta * energy``

Both denominators are floored at ``delta * N_total`` (times the smallest
selector quality for the quality-weighted one) so unused regions still have
finite payoffs.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import StructuralError, ValidationError

SIMPLEX_TOL = 1e-9
DEFAULT_DELTA = 1e-6


@dataclass(frozen=True)
class RegionSpec:
    region_id: int
    route_length: float  # D_m, meters
    reward_pool: float  # R_m, currency

    def __post_init__(self):
        if not self.route_length > 0:
            raise ValidationError(f"route_length must be > 0, got {self.route_length}")
        if not self.reward_pool >= 0:
            raise ValidationError(f"reward_pool must be >= 0, got {self.reward_pool}")


@dataclass(frozen=True)
class PopulationSpec:
    """One population of interchangeable device owners.

    ``traversal_distance`` and ``data_quality`` are aligned with
    ``strategies`` (one entry per selectable region).
    """

    population_id: int
    size: int
    strategies: tuple[int, ...]
    traversal_distance: tuple[float, ...]  # l^p_m, meters
    data_quality: tuple[float, ...]  # b^p_m
    propulsion_power: float  # eta^p_1, W
    hover_power: float  # eta^p_2, W
    traversal_speed: float  # v^p, m/s
    sensing_speed: float  # u^p, m/s
    unit_energy_cost: float = 0.001  # zeta^p, currency / J
    smith_probability: float = 0.0  # alpha^{p,1}

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(int(s) for s in self.strategies))
        object.__setattr__(
            self, "traversal_distance", tuple(float(v) for v in self.traversal_distance)
        )
        object.__setattr__(self, "data_quality", tuple(float(v) for v in self.data_quality))
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"size must be a positive integer, got {self.size}")
        if not self.strategies:
            raise ValidationError("strategies must be non-empty")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValidationError(f"duplicate region in strategies {self.strategies}")
        k = len(self.strategies)
        if len(self.traversal_distance) != k:
            raise ValidationError(
                f"traversal_distance needs {k} entries, got {len(self.traversal_distance)}"
            )
        if len(self.data_quality) != k:
            raise ValidationError(f"data_quality needs {k} entries, got {len(self.data_quality)}")
        if any(not b > 0 for b in self.data_quality):
            raise ValidationError(f"data_quality entries must be > 0, got {self.data_quality}")
        if any(not l >= 0 for l in self.traversal_distance):
            raise ValidationError("traversal_distance entries must be >= 0")
        if not (self.traversal_speed > 0 and self.sensing_speed > 0):
            raise ValidationError("speeds must be > 0")
        if not (self.propulsion_power >= 0 and self.hover_power >= 0):
            raise ValidationError("powers must be >= 0")
        if not self.unit_energy_cost >= 0:
            raise ValidationError("unit_energy_cost must be >= 0")
        if not 0.0 <= self.smith_probability <= 1.0:
            raise ValidationError(
                f"smith_probability must lie in [0, 1], got {self.smith_probability}"
            )

    @property
    def num_strategies(self):
        return len(self.strategies)

    def strategy_index(self, region_id):
        try:
            return self.strategies.index(region_id)
        except ValueError:
            raise StructuralError(
                f"region {region_id} is not a strategy of population {self.population_id}"
            ) from None


@dataclass(frozen=True)
class Layout:
    """Flat per-strategy arrays consumed by the numerical kernels."""

    offsets: np.ndarray  # (P + 1,) intp
    pop_of: np.ndarray  # (S,) intp, owning population
    region_of: np.ndarray  # (S,) intp, position of the region in Scenario.regions
    size: np.ndarray  # (S,) N^p of the owning population
    quality: np.ndarray  # (S,) b^p_m
    trav_cost: np.ndarray  # (S,) zeta * eta1 * l / v
    sens_coef: np.ndarray  # (S,) zeta * eta2 / u
    reward: np.ndarray  # (M,) R_m
    route: np.ndarray  # (M,) D_m
    bmass_floor: np.ndarray  # (M,) delta * N_total * min_q b^q_m
    region_size: np.ndarray  # (M,) sum of N over strategies on the region
    region_bsize: np.ndarray  # (M,) sum of N * b over strategies on the region
    mass_floor: float  # delta * N_total


@dataclass(frozen=True)
class Scenario:
    regions: tuple[RegionSpec, ...]
    populations: tuple[PopulationSpec, ...]
    denominator_floor: float = DEFAULT_DELTA

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "populations", tuple(self.populations))
        if not self.regions:
            raise ValidationError("scenario needs at least one region")
        if not self.populations:
            raise ValidationError("scenario needs at least one population")
        ids = [r.region_id for r in self.regions]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate region ids {ids}")
        pids = [p.population_id for p in self.populations]
        if len(set(pids)) != len(pids):
            raise ValidationError(f"duplicate population ids {pids}")
        known = set(ids)
        for pop in self.populations:
            missing = [s for s in pop.strategies if s not in known]
            if missing:
                raise ValidationError(
                    f"population {pop.population_id} references unknown regions {missing}"
                )
        if not self.denominator_floor > 0:
            raise ValidationError("denominator_floor must be > 0")

    # -- structure -----------------------------------------------------

    @property
    def num_populations(self):
        return len(self.populations)

    @property
    def num_regions(self):
        return len(self.regions)

    @functools.cached_property
    def offsets(self) -> np.ndarray:
        counts = [p.num_strategies for p in self.populations]
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)

    @property
    def num_strategies(self) -> int:
        return int(self.offsets[-1])

    @property
    def total_size(self) -> int:
        return sum(p.size for p in self.populations)

    @functools.cached_property
    def _region_pos(self):
        return {r.region_id: i for i, r in enumerate(self.regions)}

    def region_position(self, region_id):
        try:
            return self._region_pos[region_id]
        except KeyError:
            raise StructuralError(f"unknown region {region_id}") from None

    def population(self, index) -> PopulationSpec:
        if not 0 <= index < len(self.populations):
            raise StructuralError(f"unknown population index {index}")
        return self.populations[index]

    def block(self, index) -> slice:
        self.population(index)
        return slice(int(self.offsets[index]), int(self.offsets[index + 1]))

    def split(self, x) -> list[np.ndarray]:
        x = np.asarray(x)
        return [x[self.block(p)] for p in range(self.num_populations)]

    def strategy_labels(self) -> list[tuple[int, int]]:
        """(population_id, region_id) for every flat strategy slot."""
        return [(p.population_id, r) for p in self.populations for r in p.strategies]

    @functools.cached_property
    def layout(self) -> Layout:
        S = self.num_strategies
        n_total = float(self.total_size)
        region_of = np.empty(S, dtype=np.intp)
        size = np.empty(S)
        quality = np.empty(S)
        trav = np.empty(S)
        sens = np.empty(S)
        min_b = np.full(self.num_regions, np.inf)
        k = 0
        for pop in self.populations:
            zeta = pop.unit_energy_cost
            for rid, l, b in zip(pop.strategies, pop.traversal_distance, pop.data_quality):
                m = self.region_position(rid)
                region_of[k] = m
                size[k] = pop.size
                quality[k] = b
                trav[k] = zeta * (pop.propulsion_power * l / pop.traversal_speed)
                sens[k] = zeta * pop.hover_power / pop.sensing_speed
                min_b[m] = min(min_b[m], b)
                k += 1
        # regions nobody may select never enter a payoff; any positive floor works
        min_b[~np.isfinite(min_b)] = 1.0
        delta = self.denominator_floor
        M = self.num_regions
        arrays = dict(
            offsets=self.offsets,
            pop_of=np.repeat(np.arange(self.num_populations), np.diff(self.offsets)).astype(np.intp),
            region_of=region_of,
            size=size,
            quality=quality,
            trav_cost=trav,
            sens_coef=sens,
            reward=np.array([r.reward_pool for r in self.regions], dtype=float),
            route=np.array([r.route_length for r in self.regions], dtype=float),
            bmass_floor=delta * n_total * min_b,
            region_size=np.bincount(region_of, weights=size, minlength=M),
            region_bsize=np.bincount(region_of, weights=size * quality, minlength=M),
        )
        for a in arrays.values():
            a.setflags(write=False)
        return Layout(mass_floor=delta * n_total, **arrays)

    # -- derived scenarios -----------------------------------------------

    def smith_probabilities(self) -> np.ndarray:
        return np.array([p.smith_probability for p in self.populations])

    def with_smith_probability(self, population, alpha) -> "Scenario":
        pops = list(self.populations)
        pops[population] = dataclasses.replace(self.population(population), smith_probability=alpha)
        return dataclasses.replace(self, populations=tuple(pops))

    def restrict(self, populations: Sequence[int]) -> "Scenario":
        """Keep only the given population indices (regions are unchanged)."""
        return dataclasses.replace(
            self, populations=tuple(self.population(i) for i in populations)
        )

    def scaled(self, factor: float) -> "Scenario":
        """Multiply every N^p, R_m and D_m by ``factor``.

        Payoffs as functions of the social state are unchanged, so the mean
        dynamics are identical while the finite population grows.
        """
        pops = []
        for p in self.populations:
            n = p.size * factor
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                raise ValidationError(f"size {p.size} * {factor} is not a positive integer")
            pops.append(dataclasses.replace(p, size=int(round(n))))
        regions = [
            dataclasses.replace(r, route_length=r.route_length * factor,
                                reward_pool=r.reward_pool * factor)
            for r in self.regions
        ]
        return dataclasses.replace(self, regions=tuple(regions), populations=tuple(pops))

    # -- states ----------------------------------------------------------

    def state(self, blocks) -> np.ndarray:
        """Build a validated flat social state from per-population sequences."""
        blocks = list(blocks)
        if len(blocks) != self.num_populations:
            raise ValidationError(
                f"expected {self.num_populations} population blocks, got {len(blocks)}"
            )
        x = np.concatenate([np.asarray(b, dtype=float).ravel() for b in blocks])
        return check_state(self, x)

    def uniform_state(self) -> np.ndarray:
        return np.concatenate(
            [np.full(p.num_strategies, 1.0 / p.num_strategies) for p in self.populations]
        )


@dataclass(frozen=True)
class PayoffTable:
    payoffs: np.ndarray  # (S,) pi^p_m, flat like the state
    averages: np.ndarray  # (P,) pi-bar^p
    offsets: np.ndarray = field(repr=False)

    def block(self, population) -> np.ndarray:
        return self.payoffs[self.offsets[population]:self.offsets[population + 1]]


def check_state(scenario: Scenario, x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``x`` as a float array after checking it lies on the product of simplices."""
    x = np.asarray(x, dtype=float)
    if x.shape != (scenario.num_strategies,):
        raise ValidationError(
            f"state has shape {x.shape}, scenario needs ({scenario.num_strategies},)"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("state contains non-finite entries")
    if np.any(x < 0):
        raise ValidationError(f"state has negative entries: {x[x < 0]}")
    for p, blk in enumerate(scenario.split(x)):
        if abs(blk.sum() - 1.0) > tol:
            raise ValidationError(f"population {p} block sums to {blk.sum()!r}, expected 1")
    return x


# -- scalar operations ---------------------------------------------------------


def _selectors(scenario, region_id):
    """(x-index, population) pairs for every population that may select the region."""
    scenario.region_position(region_id)
    out = []
    for p, pop in enumerate(scenario.populations):
        if region_id in pop.strategies:
            out.append((int(scenario.offsets[p]) + pop.strategies.index(region_id), pop))
    return out


def effective_selector_mass(scenario: Scenario, state, region: int) -> float:
    """Floored number of owners on ``region``: ``max(sum_q x^q_m N^q, delta * N)``."""
    x = np.asarray(state, dtype=float)
    mass = math.fsum(x[k] * pop.size for k, pop in _selectors(scenario, region))
    return max(mass, scenario.denominator_floor * scenario.total_size)


def _check_strategy(scenario, population, region):
    scenario.region_position(region)
    scenario.population(population).strategy_index(region)


def sensing_distance(scenario: Scenario, state, population: int, region: int) -> float:
    _check_strategy(scenario, population, region)
    D = scenario.regions[scenario.region_position(region)].route_length
    return D / effective_selector_mass(scenario, state, region)


def total_energy(scenario: Scenario, state, population: int, region: int) -> float:
    """Traversal plus sensing energy in Joules."""
    pop = scenario.population(population)
    k = pop.strategy_index(region)
    d = sensing_distance(scenario, state, population, region)
    return (pop.propulsion_power * pop.traversal_distance[k] / pop.traversal_speed
            + pop.hover_power * d / pop.sensing_speed)


def reward_share(scenario: Scenario, state, population: int, region: int) -> float:
    _check_strategy(scenario, population, region)
    x = np.asarray(state, dtype=float)
    sel = _selectors(scenario, region)
    weighted = math.fsum(x[k] * pop.size * pop.data_quality[pop.strategies.index(region)]
                         for k, pop in sel)
    min_b = min(pop.data_quality[pop.strategies.index(region)] for _, pop in sel)
    floor = scenario.denominator_floor * scenario.total_size * min_b
    pop = scenario.population(population)
    b = pop.data_quality[pop.strategy_index(region)]
    R = scenario.regions[scenario.region_position(region)].reward_pool
    return b * R / max(weighted, floor)


def payoff(scenario: Scenario, state, population: int, region: int) -> float:
    pop = scenario.population(population)
    return (reward_share(scenario, state, population, region)
            - pop.unit_energy_cost * total_energy(scenario, state, population, region))


def payoff_vector(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Flat payoff vector F(x), vectorised over all strategies."""
    g = scenario.layout
    M = scenario.num_regions
    xs = x * g.size
    mass = np.maximum(np.bincount(g.region_of, weights=xs, minlength=M), g.mass_floor)
    bmass = np.maximum(np.bincount(g.region_of, weights=xs * g.quality, minlength=M),
                       g.bmass_floor)
    r = g.region_of
    return g.quality * g.reward[r] / bmass[r] - g.trav_cost - g.sens_coef * g.route[r] / mass[r]


def population_averages(scenario: Scenario, x: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return np.add.reduceat(x * pi, scenario.offsets[:-1])


def payoff_table(scenario: Scenario, state) -> PayoffTable:
    x = check_state(scenario, state)
    pi = payoff_vector(scenario, x)
    return PayoffTable(pi, population_averages(scenario, x, pi), scenario.offsets)
