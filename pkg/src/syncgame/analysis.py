"""Direction fields, equilibrium search and convergence-time sweeps."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import RevisionProtocol
from .errors import ValidationError
from .game import Scenario, check_state
from .integrator import IntegratorConfig, integrate

EQUILIBRIUM_TOL = 1e-6
CLUSTER_TOL = 1e-3


# -- grids -------------------------------------------------------------------


def _axis_index(scenario, axis):
    p, k = axis
    blk = scenario.block(p)
    n = blk.stop - blk.start
    if not 0 <= k < n:
        raise ValidationError(f"strategy {k} out of range for population {p}")
    if k == n - 1:
        raise ValidationError(
            f"strategy {k} of population {p} is the implicit coordinate and cannot be a free axis")
    return blk.start + k


def grid_states(scenario: Scenario, axes, base_state, values_a, values_b):
    """States for every (a, b) pair with the two axes set and the rest taken from ``base_state``.

    In each population that owns a free axis the last strategy absorbs the
    remainder. Returns ``(points, states, valid)``; invalid states are NaN.
    """
    base = np.array(base_state, dtype=float)
    if base.shape != (scenario.num_strategies,):
        raise ValidationError(f"base state needs shape ({scenario.num_strategies},)")
    ia, ib = (_axis_index(scenario, ax) for ax in axes)
    if ia == ib:
        raise ValidationError("the two free axes must differ")
    varied = sorted({axes[0][0], axes[1][0]})
    free = {ia, ib}
    for p in varied:
        blk = scenario.block(p)
        fixed = [j for j in range(blk.start, blk.stop - 1) if j not in free]
        if base[fixed].sum() > 1 + 1e-12 or np.any(base[fixed] < 0):
            raise ValidationError(f"fixed coordinates of population {p} leave no room on the simplex")
    fixed_pops = [p for p in range(scenario.num_populations) if p not in varied]
    if fixed_pops:
        sub = np.concatenate([base[scenario.block(p)] for p in fixed_pops])
        if np.any(sub < 0) or any(abs(base[scenario.block(p)].sum() - 1) > 1e-9 for p in fixed_pops):
            raise ValidationError("fixed populations in the base state must lie on their simplex")

    A, B = np.meshgrid(np.asarray(values_a, float), np.asarray(values_b, float), indexing="ij")
    points = np.column_stack([A.ravel(), B.ravel()])
    states = np.tile(base, (len(points), 1))
    states[:, ia] = points[:, 0]
    states[:, ib] = points[:, 1]
    valid = np.ones(len(points), dtype=bool)
    for p in varied:
        blk = scenario.block(p)
        last = blk.stop - 1
        rest = 1.0 - states[:, blk.start:last].sum(axis=1)
        rest[np.abs(rest) < 1e-12] = 0.0
        states[:, last] = rest
        valid &= rest >= 0
        valid &= np.all(states[:, blk] >= 0, axis=1)
    states[~valid] = np.nan
    if not valid.any():
        raise ValidationError("no grid point forms a valid social state")
    return points, states, valid


@dataclass(frozen=True)
class DirectionFieldSpec:
    """Two free coordinates, each ``(population index, strategy position)``."""

    axes: tuple
    base_state: np.ndarray
    resolution: tuple = (20, 20)
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))

    def axis_values(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.resolution)]


@dataclass
class DirectionField:
    points: np.ndarray  # (n, 2) free-coordinate values
    components: np.ndarray  # (n, 2) field along the two axes, NaN when skipped
    skipped: np.ndarray  # (n,) bool
    states: np.ndarray  # (n, S), NaN when skipped


def direction_field(scenario: Scenario, protocol: RevisionProtocol,
                    spec: DirectionFieldSpec) -> DirectionField:
    va, vb = spec.axis_values()
    points, states, valid = grid_states(scenario, spec.axes, spec.base_state, va, vb)
    ia, ib = (_axis_index(scenario, ax) for ax in spec.axes)
    ws, wi = protocol.mixing(scenario.num_populations)
    core = kernels.core
    comps = np.full((len(points), 2), np.nan)
    pi = np.empty(scenario.num_strategies)
    out = np.empty(scenario.num_strategies)
    for n in np.flatnonzero(valid):
        x = np.ascontiguousarray(states[n])
        core.payoffs(scenario.layout, x, pi)
        core.field(scenario.layout, x, pi, ws, wi, out)
        comps[n] = out[ia], out[ib]
    return DirectionField(points, comps, ~valid, states)


def simplex_seeds(scenario: Scenario, population: int, base_state, n: int = 10) -> np.ndarray:
    """``n x n`` grid over the first two strategies of ``population`` (valid points only)."""
    vals = np.linspace(0.0, 1.0, n)
    _, states, valid = grid_states(scenario, ((population, 0), (population, 1)), base_state,
                                   vals, vals)
    return states[valid]


# -- equilibria ----------------------------------------------------------------


@dataclass
class EquilibriumReport:
    state: np.ndarray
    residual: float
    classification: str  # "interior" or "extinct"
    extinct: list = field(default_factory=list)  # (population_id, region_id) pairs
    basin_count: int = 0
    seeds: list = field(default_factory=list)


@dataclass
class EquilibriumSearch:
    equilibria: list
    nonconverged: list  # seed indices that did not reach the residual tolerance

    def __iter__(self):
        return iter(self.equilibria)

    def __len__(self):
        return len(self.equilibria)


def field_residual(scenario: Scenario, protocol: RevisionProtocol, state) -> float:
    x = np.ascontiguousarray(check_state(scenario, state, tol=1e-6))
    ws, wi = protocol.mixing(scenario.num_populations)
    pi = np.empty_like(x)
    out = np.empty_like(x)
    kernels.core.payoffs(scenario.layout, x, pi)
    return float(kernels.core.field(scenario.layout, x, pi, ws, wi, out))


def classify(scenario: Scenario, protocol: RevisionProtocol, state, threshold: float):
    """Strategies of non-frozen populations whose share is at or below ``threshold``."""
    extinct = []
    for p, pop in enumerate(scenario.populations):
        if p in protocol.frozen:
            continue
        blk = scenario.block(p)
        for k, share in enumerate(np.asarray(state)[blk]):
            if share <= threshold:
                extinct.append((pop.population_id, pop.strategies[k]))
    return ("extinct" if extinct else "interior"), extinct


def find_equilibria(scenario: Scenario, protocol: RevisionProtocol, seeds,
                    config: IntegratorConfig | None = None, *,
                    residual_tol: float = EQUILIBRIUM_TOL,
                    cluster_tol: float = CLUSTER_TOL) -> EquilibriumSearch:
    """Integrate from every seed until the field vanishes, then cluster endpoints.

    Seeds are integrated until the L-inf field norm drops to a tenth of
    ``residual_tol``; those that do not within ``config.max_time`` are
    listed as non-converged. Endpoints within ``cluster_tol`` (L-inf) of an
    existing cluster representative join it.
    """
    config = config or IntegratorConfig()
    target = residual_tol / 10
    ends, residuals, failed = [], [], []
    for k, seed in enumerate(seeds):
        traj = integrate(scenario, protocol, seed, config, stop="residual", residual_tol=target)
        if not traj.final_residual <= target:
            failed.append(k)
            continue
        ends.append((k, traj.final_state))
        residuals.append(traj.final_residual)

    clusters = []  # [representative, residual, seed indices]
    for (k, x), res in zip(ends, residuals):
        for c in clusters:
            if np.max(np.abs(c[0] - x)) <= cluster_tol:
                c[2].append(k)
                if res < c[1]:
                    c[0], c[1] = x, res
                break
        else:
            clusters.append([x, res, [k]])

    reports = []
    for x, _, members in clusters:
        residual = field_residual(scenario, protocol, x)
        kind, extinct = classify(scenario, protocol, x, config.extinction_threshold)
        reports.append(EquilibriumReport(x.copy(), residual, kind, extinct, len(members), members))
    return EquilibriumSearch(reports, failed)


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    steps: int | None
    converged: bool


def _sweep_one(args):
    scenario, population, alpha, initial, config = args
    sc = scenario.with_smith_probability(population, float(alpha))
    traj = integrate(sc, RevisionProtocol.from_scenario(sc), initial, config, stop="converged")
    return SweepPoint(float(alpha), traj.convergence_step, traj.converged)


def alpha_sweep(scenario: Scenario, population: int, alpha_values, initial,
                config: IntegratorConfig | None = None, *, workers: int | None = None):
    """Convergence step count for each Smith probability of ``population``.

    Results come back in input order; ``workers > 1`` runs them in separate
    processes.
    """
    config = config or IntegratorConfig()
    scenario.population(population)
    alphas = [float(a) for a in alpha_values]
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValidationError(f"alpha values must lie in [0, 1]: {alphas}")
    jobs = [(scenario, population, a, initial, config) for a in alphas]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]
