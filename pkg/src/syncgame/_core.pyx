# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_pycore``; see there for the contracts."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs, isfinite, log1p, NAN
from numpy.random cimport bitgen_t

import numpy as np

NAME = "cython"

OK = 0
NONFINITE = 1
RATE_EXCEEDED = 2
STIFF = 3
STABILITY = 2.0
MAX_SUBSTEPS = 1_000_000

cdef enum:
    C_OK = 0
    C_NONFINITE = 1
    C_RATE_EXCEEDED = 2
    C_STIFF = 3

cdef double C_STABILITY = STABILITY
cdef Py_ssize_t C_MAX_SUBSTEPS = MAX_SUBSTEPS


cdef struct Game:
    Py_ssize_t P, S, M
    const Py_ssize_t* offsets
    const Py_ssize_t* pop_of
    const Py_ssize_t* region_of
    const double* size
    const double* quality
    const double* trav_cost
    const double* sens_coef
    const double* reward
    const double* route
    const double* bmass_floor
    const double* region_size
    const double* region_bsize
    double mass_floor
    double* mass  # scratch (M,)
    double* bmass  # scratch (M,)


cdef class _Bound:
    """Keeps the layout arrays alive while a Game points into them."""
    cdef Game g
    cdef object refs
    cdef double[::1] scratch

    def __init__(self, layout):
        cdef const Py_ssize_t[::1] offsets = np.ascontiguousarray(layout.offsets, dtype=np.intp)
        cdef const Py_ssize_t[::1] pop_of = np.ascontiguousarray(layout.pop_of, dtype=np.intp)
        cdef const Py_ssize_t[::1] region_of = np.ascontiguousarray(layout.region_of, dtype=np.intp)
        cdef const double[::1] size = np.ascontiguousarray(layout.size, dtype=np.float64)
        cdef const double[::1] quality = np.ascontiguousarray(layout.quality, dtype=np.float64)
        cdef const double[::1] trav = np.ascontiguousarray(layout.trav_cost, dtype=np.float64)
        cdef const double[::1] sens = np.ascontiguousarray(layout.sens_coef, dtype=np.float64)
        cdef const double[::1] reward = np.ascontiguousarray(layout.reward, dtype=np.float64)
        cdef const double[::1] route = np.ascontiguousarray(layout.route, dtype=np.float64)
        cdef const double[::1] bfloor = np.ascontiguousarray(layout.bmass_floor, dtype=np.float64)
        cdef const double[::1] rsize = np.ascontiguousarray(layout.region_size, dtype=np.float64)
        cdef const double[::1] rbsize = np.ascontiguousarray(layout.region_bsize, dtype=np.float64)
        self.refs = (offsets, pop_of, region_of, size, quality, trav, sens, reward, route, bfloor,
                     rsize, rbsize)
        self.scratch = np.zeros(2 * reward.shape[0])
        self.g.P = offsets.shape[0] - 1
        self.g.S = size.shape[0]
        self.g.M = reward.shape[0]
        self.g.offsets = &offsets[0]
        self.g.pop_of = &pop_of[0]
        self.g.region_of = &region_of[0]
        self.g.size = &size[0]
        self.g.quality = &quality[0]
        self.g.trav_cost = &trav[0]
        self.g.sens_coef = &sens[0]
        self.g.reward = &reward[0]
        self.g.route = &route[0]
        self.g.bmass_floor = &bfloor[0]
        self.g.region_size = &rsize[0]
        self.g.region_bsize = &rbsize[0]
        self.g.mass_floor = layout.mass_floor
        self.g.mass = &self.scratch[0]
        self.g.bmass = &self.scratch[self.g.M]


cdef inline void _masses(Game* g, const double* x) noexcept nogil:
    cdef Py_ssize_t s, m
    cdef double xs
    for m in range(g.M):
        g.mass[m] = 0.0
        g.bmass[m] = 0.0
    for s in range(g.S):
        m = g.region_of[s]
        xs = x[s] * g.size[s]
        g.mass[m] += xs
        g.bmass[m] += xs * g.quality[s]
    for m in range(g.M):
        if g.mass[m] < g.mass_floor:
            g.mass[m] = g.mass_floor
        if g.bmass[m] < g.bmass_floor[m]:
            g.bmass[m] = g.bmass_floor[m]


cdef inline void _payoffs(Game* g, const double* x, double* pi) noexcept nogil:
    cdef Py_ssize_t s, m
    _masses(g, x)
    for s in range(g.S):
        m = g.region_of[s]
        pi[s] = (g.quality[s] * g.reward[m] / g.bmass[m] - g.trav_cost[s]
                 - g.sens_coef[s] * g.route[m] / g.mass[m])


cdef inline double _field(Game* g, const double* x, const double* pi, const double* ws,
                          const double* wi, double* out) noexcept nogil:
    """Hybrid field; returns the L-inf norm."""
    cdef Py_ssize_t p, m, j, a, b
    cdef double avg, inflow, outflow, d, res = 0.0
    for p in range(g.P):
        a = g.offsets[p]
        b = g.offsets[p + 1]
        avg = 0.0
        for m in range(a, b):
            avg += x[m] * pi[m]
        for m in range(a, b):
            inflow = 0.0
            outflow = 0.0
            for j in range(a, b):
                d = pi[m] - pi[j]
                if d > 0.0:
                    inflow += x[j] * d
                elif d < 0.0:
                    outflow -= d
            out[m] = ws[p] * (inflow - x[m] * outflow) + wi[p] * (x[m] * (pi[m] - avg))
            if fabs(out[m]) > res or not isfinite(out[m]):
                res = fabs(out[m])
    return res


cdef inline double _stiffness(Game* g, const double* x, const double* pi, const double* ws,
                              const double* wi) noexcept nogil:
    """Lipschitz bound of ``_pycore.stiffness``; needs ``_masses`` at ``x`` first."""
    cdef Py_ssize_t p, s, m, n
    cdef double J, lo, hi, jmax, xj, L, best = 0.0
    cdef bint seen
    for p in range(g.P):
        n = g.offsets[p + 1] - g.offsets[p]
        seen = False
        lo = 0.0
        hi = 0.0
        jmax = 0.0
        xj = 0.0
        for s in range(g.offsets[p], g.offsets[p + 1]):
            m = g.region_of[s]
            J = (g.quality[s] * g.reward[m] * g.region_bsize[m] / (g.bmass[m] * g.bmass[m])
                 + g.sens_coef[s] * g.route[m] * g.region_size[m] / (g.mass[m] * g.mass[m]))
            if x[s] > 0.0 or ws[p] > 0.0:
                if not seen:
                    lo = pi[s]
                    hi = pi[s]
                    seen = True
                elif pi[s] < lo:
                    lo = pi[s]
                elif pi[s] > hi:
                    hi = pi[s]
            if J > jmax:
                jmax = J
            xj += x[s] * J
        L = (ws[p] * (2.0 * n * (hi - lo) + 2.0 * jmax)
             + wi[p] * (2.0 * (hi - lo) + 2.0 * xj))
        if L > best or not isfinite(L):
            best = L
    return best


cdef inline bint _converged(Game* g, const double* x, const double* pi, double tau,
                            double thr) noexcept nogil:
    cdef Py_ssize_t p, m
    cdef double lo, hi
    cdef bint seen
    for p in range(g.P):
        seen = False
        lo = 0.0
        hi = 0.0
        for m in range(g.offsets[p], g.offsets[p + 1]):
            if x[m] > thr:
                if not seen:
                    lo = pi[m]
                    hi = pi[m]
                    seen = True
                elif pi[m] < lo:
                    lo = pi[m]
                elif pi[m] > hi:
                    hi = pi[m]
        if seen and hi - lo > tau:
            return False
    return True


cdef inline double _repair(Game* g, double* x) noexcept nogil:
    cdef Py_ssize_t p, m
    cdef double total, moved = 0.0, old
    for m in range(g.S):
        if x[m] < 0.0:
            moved -= x[m]
            x[m] = 0.0
    for p in range(g.P):
        total = 0.0
        for m in range(g.offsets[p], g.offsets[p + 1]):
            total += x[m]
        for m in range(g.offsets[p], g.offsets[p + 1]):
            old = x[m]
            x[m] = x[m] / total
            moved += fabs(x[m] - old)
    return moved


cdef inline bint _all_finite(const double* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        if not isfinite(v[i]):
            return False
    return True


def payoffs(layout, double[::1] x, double[::1] out):
    cdef _Bound b = _Bound(layout)
    _payoffs(&b.g, &x[0], &out[0])
    return np.asarray(out)


def field(layout, const double[::1] x, const double[::1] pi, const double[::1] ws,
          const double[::1] wi, double[::1] out):
    cdef _Bound b = _Bound(layout)
    return _field(&b.g, &x[0], &pi[0], &ws[0], &wi[0], &out[0])


def stiffness(layout, const double[::1] x, const double[::1] pi, const double[::1] ws,
              const double[::1] wi):
    cdef _Bound b = _Bound(layout)
    _masses(&b.g, &x[0])
    return _stiffness(&b.g, &x[0], &pi[0], &ws[0], &wi[0])


def rk4_chunk(layout, double[::1] x, double[::1] pi, const double[::1] ws,
              const double[::1] wi, Py_ssize_t nsteps, double h, double tau, double thr,
              int stop_mode, double residual_tol):
    cdef _Bound bound = _Bound(layout)
    cdef Game* g = &bound.g
    cdef Py_ssize_t S = g.S, i, sub
    cdef double[::1] work = np.empty(6 * S)
    cdef double* k1 = &work[0]
    cdef double* k2 = &work[S]
    cdef double* k3 = &work[2 * S]
    cdef double* k4 = &work[3 * S]
    cdef double* y = &work[4 * S]
    cdef double* pis = &work[5 * S]
    cdef double* xp = &x[0]
    cdef double* pp = &pi[0]
    cdef const double* wsp = &ws[0]
    cdef const double* wip = &wi[0]
    cdef Py_ssize_t taken = 0, conv = -1
    cdef double max_repair = 0.0, residual = 0.0, repaired, remaining, hs, half, L
    cdef bint converged
    cdef int status = C_OK
    with nogil:
        while True:
            _payoffs(g, xp, pp)
            residual = _field(g, xp, pp, wsp, wip, k1)
            if not (_all_finite(pp, S) and _all_finite(k1, S)):
                residual = NAN
                status = C_NONFINITE
                break
            converged = _converged(g, xp, pp, tau, thr)
            if converged and conv < 0:
                conv = taken
            if (stop_mode == 1 and converged) or (stop_mode == 2 and residual <= residual_tol):
                break
            if taken >= nsteps:
                break
            remaining = h
            repaired = 0.0
            sub = 0
            while True:
                # masses in scratch belong to xp: _payoffs(xp) ran last
                L = _stiffness(g, xp, pp, wsp, wip)
                if not isfinite(L):
                    status = C_NONFINITE
                    break
                hs = remaining if L * remaining <= C_STABILITY else C_STABILITY / L
                half = 0.5 * hs
                for i in range(S):
                    y[i] = xp[i] + half * k1[i]
                _payoffs(g, y, pis)
                _field(g, y, pis, wsp, wip, k2)
                for i in range(S):
                    y[i] = xp[i] + half * k2[i]
                _payoffs(g, y, pis)
                _field(g, y, pis, wsp, wip, k3)
                for i in range(S):
                    y[i] = xp[i] + hs * k3[i]
                _payoffs(g, y, pis)
                _field(g, y, pis, wsp, wip, k4)
                for i in range(S):
                    y[i] = xp[i] + (hs / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not _all_finite(y, S):
                    status = C_NONFINITE
                    break
                for i in range(S):
                    xp[i] = y[i]
                repaired += _repair(g, xp)
                remaining -= hs
                if remaining <= 1e-12 * h:
                    break
                sub += 1
                if sub >= C_MAX_SUBSTEPS:
                    status = C_STIFF
                    break
                _payoffs(g, xp, pp)
                _field(g, xp, pp, wsp, wip, k1)
                if not (_all_finite(pp, S) and _all_finite(k1, S)):
                    status = C_NONFINITE
                    break
            if status != C_OK:
                residual = NAN
                break
            if repaired > max_repair:
                max_repair = repaired
            taken += 1
    return taken, conv, max_repair, residual, status


def simulate_agents(layout, Py_ssize_t[::1] counts, const double[::1] ws,
                    const double[::1] wi, rng, double clock_rate, double rate_bound,
                    double horizon, const double[::1] record_times,
                    Py_ssize_t[:, ::1] out_counts):
    cdef _Bound bound = _Bound(layout)
    cdef Game* g = &bound.g
    cdef Py_ssize_t S = g.S, M = g.M, K = record_times.shape[0]
    cdef Py_ssize_t n_total = 0, k_rec = 0, s, j, m, p, a, cum, lo, hi
    cdef long long events = 0, switches = 0
    cdef double t = 0.0, total, total_rate, gain, r, cum_r, c, max_rate = 0.0
    cdef int status = C_OK
    cdef double[::1] work = np.zeros(2 * S)
    cdef double* pi = &work[0]
    cdef double* rho = &work[S]
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule
    cdef bitgen_t* bg = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")
    for s in range(S):
        n_total += counts[s]
    total_rate = n_total * clock_rate
    with bit_generator.lock:
      with nogil:
        while True:
            t += -log1p(-bg.next_double(bg.state)) / total_rate
            while k_rec < K and record_times[k_rec] < t:
                for j in range(S):
                    out_counts[k_rec, j] = counts[j]
                k_rec += 1
            if t > horizon:
                break
            a = <Py_ssize_t>(bg.next_double(bg.state) * n_total)
            if a >= n_total:
                a = n_total - 1
            cum = 0
            s = 0
            for s in range(S):
                cum += counts[s]
                if a < cum:
                    break
            p = g.pop_of[s]
            # payoffs of population p from integer selector counts
            for m in range(M):
                g.mass[m] = 0.0
                g.bmass[m] = 0.0
            for j in range(S):
                m = g.region_of[j]
                c = <double> counts[j]
                g.mass[m] += c
                g.bmass[m] += c * g.quality[j]
            for m in range(M):
                if g.mass[m] < g.mass_floor:
                    g.mass[m] = g.mass_floor
                if g.bmass[m] < g.bmass_floor[m]:
                    g.bmass[m] = g.bmass_floor[m]
            lo = g.offsets[p]
            hi = g.offsets[p + 1]
            for j in range(lo, hi):
                m = g.region_of[j]
                pi[j] = (g.quality[j] * g.reward[m] / g.bmass[m] - g.trav_cost[j]
                         - g.sens_coef[j] * g.route[m] / g.mass[m])
            total = 0.0
            for j in range(lo, hi):
                if j == s:
                    rho[j] = 0.0
                    continue
                gain = pi[j] - pi[s]
                if gain > 0.0:
                    rho[j] = ws[p] * gain + wi[p] * (<double> counts[j] / g.size[j]) * gain
                else:
                    rho[j] = 0.0
                total += rho[j]
            if total > max_rate:
                max_rate = total
            if total > rate_bound:
                status = C_RATE_EXCEEDED
                break
            events += 1
            r = bg.next_double(bg.state) * rate_bound
            cum_r = 0.0
            for j in range(lo, hi):
                if j == s:
                    continue
                cum_r += rho[j]
                if r < cum_r:
                    counts[s] -= 1
                    counts[j] += 1
                    switches += 1
                    break
        if status == C_OK:
            while k_rec < K:
                for j in range(S):
                    out_counts[k_rec, j] = counts[j]
                k_rec += 1
    return events, switches, status, max_rate
