"""Revision protocols and the mean dynamics they induce.

Two base protocols are supported:

``comparison``
    pairwise comparison, ``rho_{m,i} = [pi_i - pi_m]_+``; mean dynamics are
    the Smith dynamics.
``imitation``
    pairwise proportional imitation, ``rho_{m,i} = x_i [pi_i - pi_m]_+``;
    mean dynamics are the replicator dynamics.

A :class:`RevisionProtocol` mixes them per population with weights that sum
to one. Mean dynamics are linear in switch rates, so the mixed field is the
same mixture of the closed-form fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError, ValidationError
from .game import PayoffTable, Scenario, check_state, payoff_table

COMPARISON = "comparison"
IMITATION = "imitation"
KINDS = (COMPARISON, IMITATION)


@dataclass(frozen=True)
class RevisionProtocol:
    """Per-population mixture over base protocols.

    ``weights[p, k]`` is the probability that a revising owner of population
    ``p`` uses ``kinds[k]``. Populations listed in ``frozen`` never revise;
    their field block is zero (used to hold a population fixed while others
    move).
    """

    weights: np.ndarray
    kinds: tuple[str, ...] = KINDS
    frozen: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        if w.ndim != 2 or w.shape[1] != len(self.kinds):
            raise ValidationError(f"weights must have shape (P, {len(self.kinds)}), got {w.shape}")
        unknown = set(self.kinds) - set(KINDS)
        if unknown:
            raise ValidationError(f"unknown protocol kinds {sorted(unknown)}")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise ValidationError("protocol weights must lie in [0, 1]")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
            raise ValidationError(f"protocol weights must sum to 1 per population: {w.sum(axis=1)}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "frozen", frozenset(int(p) for p in self.frozen))

    @classmethod
    def hybrid(cls, smith_probabilities, frozen=()):
        """Smith/replicator mixture from per-population Smith probabilities."""
        a = np.asarray(smith_probabilities, dtype=float).ravel()
        if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
            raise ValidationError(f"Smith probabilities must lie in [0, 1]: {a}")
        return cls(np.column_stack([a, 1.0 - a]), KINDS, frozenset(frozen))

    @classmethod
    def pure(cls, kind, num_populations, frozen=()):
        if kind not in KINDS:
            raise ValidationError(f"unknown protocol kind {kind!r}")
        w = np.zeros((num_populations, len(KINDS)))
        w[:, KINDS.index(kind)] = 1.0
        return cls(w, KINDS, frozenset(frozen))

    @classmethod
    def from_scenario(cls, scenario: Scenario, frozen=()):
        return cls.hybrid(scenario.smith_probabilities(), frozen)

    @property
    def num_populations(self):
        return self.weights.shape[0]

    def freeze(self, *populations):
        return RevisionProtocol(self.weights, self.kinds, self.frozen | set(populations))

    def mixing(self, num_populations=None):
        """(smith_weight, imitation_weight) arrays per population, zero when frozen."""
        P = self.num_populations
        if num_populations is not None and num_populations != P:
            raise ValidationError(f"protocol covers {P} populations, scenario has {num_populations}")
        ws = np.zeros(P)
        wi = np.zeros(P)
        for k, kind in enumerate(self.kinds):
            if kind == COMPARISON:
                ws += self.weights[:, k]
            else:
                wi += self.weights[:, k]
        for p in self.frozen:
            if 0 <= p < P:
                ws[p] = wi[p] = 0.0
        return ws, wi


# -- switch rates ----------------------------------------------------------


def _base_rates(kind, pi, x):
    """Matrix ``rho[m, i]`` for one base protocol; the diagonal is zero."""
    excess = np.maximum(pi[None, :] - pi[:, None], 0.0)
    if kind == IMITATION:
        excess = excess * x[None, :]
    np.fill_diagonal(excess, 0.0)
    return excess


def switch_matrix(protocol: RevisionProtocol, pi, x, population: int) -> np.ndarray:
    """Conditional switch rates ``rho[m, i]`` of one population."""
    pi = np.asarray(pi, dtype=float)
    x = np.asarray(x, dtype=float)
    rho = np.zeros((pi.size, pi.size))
    if population in protocol.frozen:
        return rho
    for k, kind in enumerate(protocol.kinds):
        w = protocol.weights[population, k]
        if w:
            rho += w * _base_rates(kind, pi, x)
    return rho


def switch_rate(protocol: RevisionProtocol, payoffs: PayoffTable, state, population: int,
                frm: int, to: int) -> float:
    """Rate at which a ``population`` owner on strategy ``frm`` moves to ``to``.

    Strategies are positions within the population's strategy set.
    """
    if frm == to:
        raise StructuralError("self-switch rate is undefined")
    pi = payoffs.block(population)
    n = pi.size
    if not (0 <= frm < n and 0 <= to < n):
        raise StructuralError(f"strategy index out of range for population {population}")
    x = np.asarray(state, dtype=float)[payoffs.offsets[population]:payoffs.offsets[population + 1]]
    if population in protocol.frozen:
        return 0.0
    gain = max(pi[to] - pi[frm], 0.0)
    rate = 0.0
    for k, kind in enumerate(protocol.kinds):
        w = protocol.weights[population, k]
        rate += w * (x[to] * gain if kind == IMITATION else gain)
    return rate


# -- fields ------------------------------------------------------------------


def _payoffs(scenario, state, payoffs):
    x = check_state(scenario, state)
    return x, (payoffs if payoffs is not None else payoff_table(scenario, x))


def mean_dynamics(protocol: RevisionProtocol, scenario: Scenario, state,
                  payoffs: PayoffTable | None = None) -> np.ndarray:
    """Inflow minus outflow over the protocol's switch rates (generic form)."""
    x, table = _payoffs(scenario, state, payoffs)
    out = np.zeros_like(x)
    for p in range(scenario.num_populations):
        blk = scenario.block(p)
        xb = x[blk]
        rho = switch_matrix(protocol, table.payoffs[blk], xb, p)
        out[blk] = xb @ rho - xb * rho.sum(axis=1)
    return out


def replicator_field(scenario: Scenario, state, payoffs: PayoffTable | None = None) -> np.ndarray:
    """``x_m (pi_m - pi_bar)`` per population."""
    x, table = _payoffs(scenario, state, payoffs)
    avg = np.repeat(table.averages, np.diff(scenario.offsets))
    return x * (table.payoffs - avg)


def smith_field(scenario: Scenario, state, payoffs: PayoffTable | None = None) -> np.ndarray:
    x, table = _payoffs(scenario, state, payoffs)
    out = np.empty_like(x)
    for p in range(scenario.num_populations):
        blk = scenario.block(p)
        pi, xb = table.payoffs[blk], x[blk]
        diff = pi[:, None] - pi[None, :]  # diff[m, j] = pi_m - pi_j
        out[blk] = np.maximum(diff, 0.0) @ xb - xb * np.maximum(-diff, 0.0).sum(axis=1)
    return out


def _alpha(scenario, alpha):
    a = np.asarray(alpha, dtype=float)
    P = scenario.num_populations
    if a.ndim == 2:
        # (P, 2) weights over (comparison, imitation)
        if a.shape != (P, 2) or np.any(a < 0) or np.any(a > 1):
            raise ValidationError(f"invalid hybrid weights {a.tolist()}")
        if np.any(np.abs(a.sum(axis=1) - 1) > 1e-12):
            raise ValidationError("hybrid weights must sum to 1 per population")
        return a[:, 0]
    a = np.broadcast_to(a, (P,))
    if not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise ValidationError(f"Smith probabilities must lie in [0, 1]: {a.tolist()}")
    return a


def hybrid_field(scenario: Scenario, state, payoffs: PayoffTable | None = None,
                 alpha=None) -> np.ndarray:
    """``alpha * smith + (1 - alpha) * replicator`` per population.

    ``alpha`` defaults to the scenario's Smith probabilities.
    """
    a = _alpha(scenario, scenario.smith_probabilities() if alpha is None else alpha)
    x, table = _payoffs(scenario, state, payoffs)
    reps = np.diff(scenario.offsets)
    ws = np.repeat(a, reps)
    return ws * smith_field(scenario, x, table) + (1.0 - ws) * replicator_field(scenario, x, table)


def vector_field(protocol: RevisionProtocol, scenario: Scenario, state,
                 payoffs: PayoffTable | None = None) -> np.ndarray:
    """Closed-form field of an arbitrary mixture, honouring frozen populations."""
    ws, wi = protocol.mixing(scenario.num_populations)
    x, table = _payoffs(scenario, state, payoffs)
    reps = np.diff(scenario.offsets)
    return (np.repeat(ws, reps) * smith_field(scenario, x, table)
            + np.repeat(wi, reps) * replicator_field(scenario, x, table))
