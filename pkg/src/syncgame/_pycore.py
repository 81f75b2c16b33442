"""Pure-Python kernels, used when the compiled ``_core`` extension is absent.

Signatures and semantics match ``_core.pyx`` exactly; the agent simulator
draws the same doubles from the generator in the same order, so both
backends produce identical event sequences for a given seed.
"""

import math

import numpy as np

NAME = "python"

OK = 0
NONFINITE = 1
RATE_EXCEEDED = 2
STIFF = 3

# Sub-step length times the local Lipschitz bound; RK4 is stable on the
# negative real axis up to about 2.78.
STABILITY = 2.0
MAX_SUBSTEPS = 1_000_000

# Non-finite values are detected and reported, so numpy's warnings are noise.
_quiet = np.errstate(over="ignore", invalid="ignore", divide="ignore")


def _masses(g, x):
    xs = x * g.size
    M = g.reward.shape[0]
    mass = np.maximum(np.bincount(g.region_of, weights=xs, minlength=M), g.mass_floor)
    bmass = np.maximum(np.bincount(g.region_of, weights=xs * g.quality, minlength=M),
                       g.bmass_floor)
    return mass, bmass


@_quiet
def payoffs(g, x, out):
    mass, bmass = _masses(g, x)
    r = g.region_of
    out[:] = g.quality * g.reward[r] / bmass[r] - g.trav_cost - g.sens_coef * g.route[r] / mass[r]
    return out


@_quiet
def stiffness(g, x, pi, ws, wi):
    """Upper bound on the field's local Lipschitz constant (L-inf row sums).

    Payoff rows are bounded through the region masses; the Smith part
    contributes ``2 n spread + 2 max J`` and the replicator part
    ``2 spread + 2 sum x J``, each scaled by its weight. Without a Smith
    part exact zeros stay zero, so the spread runs over the support only.
    """
    mass, bmass = _masses(g, x)
    r = g.region_of
    J = (g.quality * g.reward[r] * g.region_bsize[r] / bmass[r] ** 2
         + g.sens_coef * g.route[r] * g.region_size[r] / mass[r] ** 2)
    offs = g.offsets[:-1]
    live = (x > 0.0) | (ws[g.pop_of] > 0.0)
    hi = np.maximum.reduceat(np.where(live, pi, -np.inf), offs)
    lo = np.minimum.reduceat(np.where(live, pi, np.inf), offs)
    spread = np.where(hi >= lo, hi - lo, 0.0)
    jmax = np.maximum.reduceat(J, offs)
    xj = np.add.reduceat(x * J, offs)
    n = np.diff(g.offsets)
    L = ws * (2.0 * n * spread + 2.0 * jmax) + wi * (2.0 * spread + 2.0 * xj)
    return float(L.max())


def _same_block(g):
    return g.pop_of[:, None] == g.pop_of[None, :]


def _field(g, mask, x, pi, ws_s, wi_s, out):
    avg = np.add.reduceat(x * pi, g.offsets[:-1])[g.pop_of]
    diff = pi[:, None] - pi[None, :]
    inflow = np.where(mask, np.maximum(diff, 0.0), 0.0) @ x
    outflow = x * np.where(mask, np.maximum(-diff, 0.0), 0.0).sum(axis=1)
    out[:] = ws_s * (inflow - outflow) + wi_s * (x * (pi - avg))
    return out


@_quiet
def field(g, x, pi, ws, wi, out):
    """Hybrid field at ``x`` given its payoffs; returns the L-inf residual."""
    _field(g, _same_block(g), x, pi, ws[g.pop_of], wi[g.pop_of], out)
    return float(np.max(np.abs(out)))


def _converged(g, x, pi, tau, thr):
    live = x > thr
    for p in range(g.offsets.shape[0] - 1):
        a, b = g.offsets[p], g.offsets[p + 1]
        vals = pi[a:b][live[a:b]]
        if vals.size and vals.max() - vals.min() > tau:
            return False
    return True


def _repair(g, x):
    raw = x.copy()
    np.maximum(x, 0.0, out=x)
    sums = np.add.reduceat(x, g.offsets[:-1])
    x /= sums[g.pop_of]
    return float(np.abs(x - raw).sum())


@_quiet
def rk4_chunk(g, x, pi, ws, wi, nsteps, h, tau, thr, stop_mode, residual_tol):
    """Advance ``x`` in place by up to ``nsteps`` steps of length ``h``.

    Each step is one or more RK4 sub-steps followed by simplex
    repair; a sub-step is shortened to ``STABILITY / L`` when the local
    Lipschitz bound ``L`` requires it, so well-conditioned steps are a single
    classical RK4 step.

    Returns ``(taken, conv, max_repair, residual, status)``. ``conv`` is the
    offset of the first state in this chunk meeting the payoff-spread
    criterion (``-1`` if none). ``pi`` and ``residual`` describe the final
    state. ``max_repair`` is the largest L1 repair summed over one step.
    ``stop_mode`` 1 stops at the spread criterion, 2 at
    ``residual <= residual_tol``, 0 never.
    """
    mask = _same_block(g)
    ws_s = ws[g.pop_of]
    wi_s = wi[g.pop_of]
    S = x.shape[0]
    k1 = np.empty(S)
    k2 = np.empty(S)
    k3 = np.empty(S)
    k4 = np.empty(S)
    pis = np.empty(S)
    taken = 0
    conv = -1
    max_repair = 0.0
    residual = 0.0
    while True:
        payoffs(g, x, pi)
        _field(g, mask, x, pi, ws_s, wi_s, k1)
        if not (np.all(np.isfinite(pi)) and np.all(np.isfinite(k1))):
            return taken, conv, max_repair, math.nan, NONFINITE
        residual = float(np.max(np.abs(k1)))
        converged = _converged(g, x, pi, tau, thr)
        if converged and conv < 0:
            conv = taken
        if (stop_mode == 1 and converged) or (stop_mode == 2 and residual <= residual_tol):
            break
        if taken >= nsteps:
            break
        remaining = h
        repaired = 0.0
        for _ in range(MAX_SUBSTEPS):
            L = stiffness(g, x, pi, ws, wi)
            if not math.isfinite(L):
                return taken, conv, max_repair, math.nan, NONFINITE
            hs = remaining if L * remaining <= STABILITY else STABILITY / L
            half = 0.5 * hs
            y = x + half * k1
            _field(g, mask, y, payoffs(g, y, pis), ws_s, wi_s, k2)
            y = x + half * k2
            _field(g, mask, y, payoffs(g, y, pis), ws_s, wi_s, k3)
            y = x + hs * k3
            _field(g, mask, y, payoffs(g, y, pis), ws_s, wi_s, k4)
            y = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                return taken, conv, max_repair, math.nan, NONFINITE
            x[:] = y
            repaired += _repair(g, x)
            remaining -= hs
            if remaining <= 1e-12 * h:
                break
            payoffs(g, x, pi)
            _field(g, mask, x, pi, ws_s, wi_s, k1)
            if not (np.all(np.isfinite(pi)) and np.all(np.isfinite(k1))):
                return taken, conv, max_repair, math.nan, NONFINITE
        else:
            return taken, conv, max_repair, math.nan, STIFF
        max_repair = max(max_repair, repaired)
        taken += 1
    return taken, conv, max_repair, residual, OK


def _block_payoffs(g, counts, mass, bmass, p, pi):
    M = len(mass)
    for m in range(M):
        mass[m] = 0.0
        bmass[m] = 0.0
    for s in range(len(counts)):
        m = g.region_of[s]
        c = float(counts[s])
        mass[m] += c
        bmass[m] += c * g.quality[s]
    for m in range(M):
        if mass[m] < g.mass_floor:
            mass[m] = g.mass_floor
        if bmass[m] < g.bmass_floor[m]:
            bmass[m] = g.bmass_floor[m]
    for j in range(g.offsets[p], g.offsets[p + 1]):
        m = g.region_of[j]
        pi[j] = (g.quality[j] * g.reward[m] / bmass[m] - g.trav_cost[j]
                 - g.sens_coef[j] * g.route[m] / mass[m])


def simulate_agents(g, counts, ws, wi, rng, clock_rate, rate_bound, horizon,
                    record_times, out_counts):
    """Event-driven Poisson-clock simulation; mutates ``counts``.

    Returns ``(events, switches, status, max_rate)``.
    """
    g = _Plain(g)
    S = counts.shape[0]
    n_total = 0
    for s in range(S):
        n_total += counts[s]
    total_rate = n_total * clock_rate
    K = record_times.shape[0]
    mass = [0.0] * len(g.reward)
    bmass = [0.0] * len(g.reward)
    pi = [0.0] * S
    rho = [0.0] * S
    cnt = [int(c) for c in counts]
    k_rec = 0
    t = 0.0
    events = 0
    switches = 0
    max_rate = 0.0
    status = OK
    draw = rng.random
    while True:
        t += -math.log1p(-draw()) / total_rate
        while k_rec < K and record_times[k_rec] < t:
            out_counts[k_rec, :] = cnt
            k_rec += 1
        if t > horizon:
            break
        a = int(draw() * n_total)
        if a >= n_total:
            a = n_total - 1
        cum = 0
        s = 0
        for s in range(S):
            cum += cnt[s]
            if a < cum:
                break
        p = g.pop_of[s]
        _block_payoffs(g, cnt, mass, bmass, p, pi)
        total = 0.0
        lo, hi = g.offsets[p], g.offsets[p + 1]
        gain_base = pi[s]
        for j in range(lo, hi):
            if j == s:
                rho[j] = 0.0
                continue
            gain = pi[j] - gain_base
            if gain > 0.0:
                rho[j] = ws[p] * gain + wi[p] * (cnt[j] / g.size[j]) * gain
            else:
                rho[j] = 0.0
            total += rho[j]
        if total > max_rate:
            max_rate = total
        if total > rate_bound:
            status = RATE_EXCEEDED
            break
        events += 1
        r = draw() * rate_bound
        cum_r = 0.0
        for j in range(lo, hi):
            if j == s:
                continue
            cum_r += rho[j]
            if r < cum_r:
                cnt[s] -= 1
                cnt[j] += 1
                switches += 1
                break
    if status == OK:
        while k_rec < K:
            out_counts[k_rec, :] = cnt
            k_rec += 1
    counts[:] = cnt
    return events, switches, status, max_rate


class _Plain:
    """Layout with arrays converted to Python lists for scalar loops."""

    def __init__(self, g):
        self.offsets = [int(v) for v in g.offsets]
        self.pop_of = [int(v) for v in g.pop_of]
        self.region_of = [int(v) for v in g.region_of]
        for name in ("size", "quality", "trav_cost", "sens_coef", "reward", "route", "bmass_floor"):
            setattr(self, name, [float(v) for v in getattr(g, name)])
        self.mass_floor = float(g.mass_floor)
