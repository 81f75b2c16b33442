"""Fixed-step RK4 integration of the mean dynamics on the product of simplices.

Time advances on the grid ``t = k h``. Payoffs grow like ``1 / mass`` as a
region empties, which makes the field stiff near faces; steps there are
split into stability-limited RK4 sub-steps (see :func:`step`) so the
scheme stays explicit and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import RevisionProtocol
from .errors import IntegrationError, ValidationError
from .game import Scenario, check_state, population_averages

_STOP_MODES = {"never": 0, "converged": 1, "residual": 2}
_STATUS_MESSAGES = {
    1: "vector field is not finite",
    3: "step needs more stability sub-steps than the kernel allows",
}


@dataclass(frozen=True)
class IntegratorConfig:
    step_size: float = 0.01
    max_time: float = 10_000.0
    convergence_tau: float = 0.05
    extinction_threshold: float = 1e-3
    record_stride: int = 10
    stop_at_convergence: bool = True

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValidationError("step_size must be > 0")
        if not self.max_time >= 0:
            raise ValidationError("max_time must be >= 0")
        if not self.convergence_tau > 0:
            raise ValidationError("convergence_tau must be > 0")
        if not 0 <= self.extinction_threshold < 1:
            raise ValidationError("extinction_threshold must lie in [0, 1)")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValidationError("record_stride must be a positive integer")

    @property
    def max_steps(self) -> int:
        return int(round(self.max_time / self.step_size))


@dataclass
class Trajectory:
    """Recorded samples of a run.

    For deterministic runs ``steps`` are RK4 step indices and
    ``times = steps * h``. Stochastic runs leave ``steps`` as sample indices
    and fill ``counts`` with the integer strategy counts.
    """

    steps: np.ndarray
    times: np.ndarray
    states: np.ndarray  # (K, S)
    payoffs: np.ndarray  # (K, S)
    averages: np.ndarray  # (K, P)
    converged: bool = False
    convergence_step: int | None = None
    convergence_time: float | None = None
    max_repair: float = 0.0
    final_residual: float = float("nan")
    counts: np.ndarray | None = field(default=None, repr=False)
    events: int | None = None
    switches: int | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_payoffs(self) -> np.ndarray:
        return self.payoffs[-1]

    def __len__(self):
        return len(self.times)


def _backend(backend):
    return kernels.core if backend is None else kernels.load(backend)


def step(scenario: Scenario, protocol: RevisionProtocol, state, h: float,
         backend: str | None = None) -> np.ndarray:
    """Advance ``state`` by time ``h``: RK4 followed by simplex repair.

    When ``h`` times the field's local Lipschitz bound exceeds the RK4
    stability margin the step is split into shorter RK4 sub-steps, each
    followed by repair; otherwise it is a single classical step.
    """
    if not h > 0:
        raise ValidationError("step size must be > 0")
    core = _backend(backend)
    x = check_state(scenario, state).copy()
    ws, wi = protocol.mixing(scenario.num_populations)
    pi = np.empty_like(x)
    _, _, _, _, status = core.rk4_chunk(scenario.layout, x, pi, ws, wi, 1, h, np.inf, 0.0, 0, 0.0)
    if status:
        raise IntegrationError(_STATUS_MESSAGES[status], state=np.asarray(state, float).copy(),
                               step=0)
    return x


def payoff_spread(scenario: Scenario, x, pi, threshold: float) -> np.ndarray:
    """Per-population max minus min payoff over strategies with share above ``threshold``."""
    x = np.asarray(x)
    pi = np.asarray(pi)
    out = np.zeros(scenario.num_populations)
    for p in range(scenario.num_populations):
        blk = scenario.block(p)
        vals = pi[blk][x[blk] > threshold]
        if vals.size:
            out[p] = vals.max() - vals.min()
    return out


def converged_at(scenario: Scenario, trajectory: Trajectory, config: IntegratorConfig | None = None,
                 *, tau: float | None = None, threshold: float | None = None):
    """Time of the first recorded sample whose spreads are all within ``tau``.

    Only the recorded samples are inspected; returns ``None`` if no sample
    qualifies. ``integrate`` itself tests every step and stores the result
    in ``Trajectory.convergence_time``.
    """
    config = config or IntegratorConfig()
    tau = config.convergence_tau if tau is None else tau
    threshold = config.extinction_threshold if threshold is None else threshold
    for t, x, pi in zip(trajectory.times, trajectory.states, trajectory.payoffs):
        if np.all(payoff_spread(scenario, x, pi, threshold) <= tau):
            return float(t)
    return None


def integrate(scenario: Scenario, protocol: RevisionProtocol, initial,
              config: IntegratorConfig | None = None, *, stop: str | None = None,
              residual_tol: float = 0.0, backend: str | None = None) -> Trajectory:
    """Integrate the protocol's mean dynamics from ``initial``.

    ``stop`` is ``"converged"`` (payoff spreads within tau), ``"residual"``
    (L-inf field norm at most ``residual_tol``) or ``"never"``; it defaults
    from ``config.stop_at_convergence``. Convergence is tested at every step
    regardless of the stop rule.
    """
    config = config or IntegratorConfig()
    if stop is None:
        stop = "converged" if config.stop_at_convergence else "never"
    try:
        mode = _STOP_MODES[stop]
    except KeyError:
        raise ValidationError(f"unknown stop rule {stop!r}") from None
    core = _backend(backend)
    g = scenario.layout
    x = check_state(scenario, initial).copy()
    ws, wi = protocol.mixing(scenario.num_populations)
    h = config.step_size
    max_steps = config.max_steps
    stride = int(config.record_stride)

    pi = np.empty_like(x)
    core.payoffs(g, x, pi)
    steps, states, payoffs = [0], [x.copy()], [pi.copy()]
    conv_step = None
    max_repair = 0.0
    residual = float("nan")
    done = 0
    while True:
        n = min(stride, max_steps - done)
        taken, conv, rep, residual, status = core.rk4_chunk(
            g, x, pi, ws, wi, n, h, config.convergence_tau, config.extinction_threshold,
            mode, residual_tol)
        if status:
            raise IntegrationError(f"{_STATUS_MESSAGES[status]} near step {done + taken}",
                                   state=x.copy(), step=done + taken)
        max_repair = max(max_repair, rep)
        if conv >= 0 and conv_step is None:
            conv_step = done + conv
        done += taken
        stopped = (mode == 1 and conv >= 0) or (mode == 2 and residual <= residual_tol)
        if taken:
            steps.append(done)
            states.append(x.copy())
            payoffs.append(pi.copy())
        if stopped or done >= max_steps:
            break

    states = np.array(states)
    payoffs = np.array(payoffs)
    averages = np.array([population_averages(scenario, s, p) for s, p in zip(states, payoffs)])
    steps = np.array(steps, dtype=np.int64)
    return Trajectory(
        steps=steps,
        times=steps * h,
        states=states,
        payoffs=payoffs,
        averages=averages,
        converged=conv_step is not None,
        convergence_step=conv_step,
        convergence_time=None if conv_step is None else conv_step * h,
        max_repair=max_repair,
        final_residual=residual,
    )
