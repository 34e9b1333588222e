"""Jump-adapted integrator shared by the forward and Siegmund simulators.

Noise for one trajectory is a pure function of its Philox stream.  Time is cut
into segments; inside a segment the stream yields, in order, the Poisson event
count, event times, source choices, marks, uniforms and finally the Gaussian
increments of every substep.  Substep boundaries are the dt-grid, requested
query times and event times.  The per-substep arithmetic runs in a compiled
kernel, one trajectory at a time, so a trajectory never depends on its
neighbours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .rng import stream

SEGMENT = 1.0

# jump map ids understood by the kernel
J_N, J_S, J_M, J_MEDIAN, J_ENV = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class Scheme:
    dt: float | None = None
    eps_trunc: float = 1e-3

    def check(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not 0 < self.eps_trunc < 1:
            raise ValueError("eps_trunc must lie in (0,1)")
        return self

    def resolved_dt(self, kingman: float) -> float:
        if self.dt is not None:
            return float(self.dt)
        return 1e-3 * min(1.0, 1.0 / (1.0 + kingman))


class Dynamics:
    """Polynomial drift (numpy.polyval order, may be empty), Wright-Fisher
    noise of size ``diff`` and a list of (MarkSource, jump map id) pairs."""

    def __init__(self, drift_poly, diff, sources):
        self.drift = np.asarray(drift_poly, dtype=float)
        self.diff = float(diff)
        self.sources = [s for s in sources if s[0].total > 0]
        self.jump_ids = np.array([j for _, j in self.sources], dtype=np.int64)
        rates = np.array([s[0].total for s in self.sources])
        self.rate = float(rates.sum())
        self.cum = np.cumsum(rates) / self.rate if self.rate > 0 else np.zeros(0)


@njit(cache=True)
def _jump(jid, x, r, u):
    if jid == J_N:
        if u <= x:
            return x + r * (1.0 - x)
        return (1.0 - r) * x
    if jid == J_S:
        return x + r * x * (1.0 - x)
    if jid == J_M:
        if r >= 0:
            return x + r * (1.0 - x)
        return x + r * x
    if jid == J_MEDIAN:
        a = (x - r) / (1.0 - r)
        b = x / (1.0 - r)
        return max(min(a, b), min(max(a, b), u))
    # environment map of the Siegmund dual, rationalised form
    d = (1.0 + r) ** 2 - 4.0 * r * x
    if d < 0.0:
        d = 0.0
    return 2.0 * x / (1.0 + r + math.sqrt(d))


@njit(cache=True)
def wf_noise_step(x, a, g):
    """Monotone substep for dX = sqrt(diff X(1-X)) dW with a = sqrt(diff) dW.

    With y = arcsin(2x-1) the noise is additive, y -> y + a; the shifted
    angle is clipped to [-pi/2, pi/2], which keeps the map monotone in x, and
    the spurious drift diff(1-2x)/4 of the transformed motion is undone by its
    exact linear flow g = exp(diff h / 2).  Both endpoints are fixed.
    """
    if x <= 0.0 or x >= 1.0:
        return x
    c = 2.0 * x - 1.0
    s = 2.0 * math.sqrt(x * (1.0 - x))
    ca = math.cos(a)
    sa = math.sin(a)
    # cos(y + a) < 0 means the shifted angle left [-pi/2, pi/2]
    if s * ca - c * sa < 0.0:
        w = 1.0 if sa > 0 else -1.0
    else:
        w = c * ca + s * sa
    z = 0.5 + 0.5 * w * g
    return min(1.0, max(0.0, z))


@njit(cache=True)
def _advance(x, h, dw, diff, drift, ev_pos, ev_jid, ev_r, ev_u, out):
    nd = drift.shape[0]
    sq = math.sqrt(diff)
    j = 0
    n_ev = ev_pos.shape[0]
    for s in range(h.shape[0]):
        if nd > 0:
            d = 0.0
            for c in drift:
                d = d * x + c
            x = min(1.0, max(0.0, x + h[s] * d))
        if diff > 0.0:
            x = wf_noise_step(x, sq * dw[s], math.exp(0.5 * diff * h[s]))
        while j < n_ev and ev_pos[j] == s:
            x = min(1.0, max(0.0, _jump(ev_jid[j], x, ev_r[j], ev_u[j])))
            j += 1
        out[s] = x
    return x


_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_F = np.zeros(0)


@lru_cache(maxsize=64)
def _segment_grid(t0, t1, dt, extra):
    """Substep boundaries of (t0, t1] and their lengths (read-only)."""
    k0 = math.floor(t0 / dt + 1e-9) + 1
    k1 = math.floor(t1 / dt - 1e-9)
    g = np.arange(k0, k1 + 1) * dt if k1 >= k0 else np.zeros(0)
    extra = [q for q in extra if t0 < q < t1]
    if extra:
        g = np.concatenate([g, extra])
    g = np.unique(np.concatenate([g, [t1]]))
    h = np.diff(g, prepend=t0)
    sqh = np.sqrt(h)
    for a in (g, h, sqh):
        a.flags.writeable = False
    return g, h, sqh


def _draw_segment(rng, dyn: Dynamics, t0, t1, grid_info):
    """Noise of one segment: (times, h, dw, event positions, jump ids, r, u)."""
    grid, h_grid, sqh = grid_info
    L = t1 - t0
    n_ev = int(rng.poisson(dyn.rate * L)) if dyn.rate > 0 else 0
    if n_ev == 0:
        dw = rng.standard_normal(len(grid)) * sqh if dyn.diff > 0 else h_grid
        return grid, h_grid, dw, _EMPTY_I, _EMPTY_I, _EMPTY_F, _EMPTY_F
    ev_t = t0 + np.sort(rng.random(n_ev)) * L
    kind = np.searchsorted(dyn.cum, rng.random(n_ev), side="right")
    kind = np.minimum(kind, len(dyn.sources) - 1)
    r = np.zeros(n_ev)
    for j, (src, _) in enumerate(dyn.sources):
        sel = kind == j
        if sel.any():
            r[sel] = src.sample(rng, int(sel.sum()))
    u = rng.random(n_ev)
    times = np.concatenate([grid, ev_t])
    order = np.argsort(times, kind="stable")
    times = times[order]
    pos = np.nonzero(order >= len(grid))[0].astype(np.int64)
    h = np.diff(times, prepend=t0)
    dw = rng.standard_normal(len(times)) * np.sqrt(h) if dyn.diff > 0 else h
    return times, h, dw, pos, dyn.jump_ids[kind], r, u


def run_trajectory(dyn: Dynamics, x0, seed, index, T, dt, query_times=(), record=False):
    """Advance the start values ``x0`` (scalar or 1-d) to T, all driven by
    the noise of stream ``index``.

    Returns (values at the sorted query times, shape (K, Q), list of recorded
    paths (times, values, event_times) or None).
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    K = len(x)
    q = np.asarray(sorted(set(float(t) for t in query_times)), dtype=float)
    out = np.full((K, len(q)), np.nan)
    if len(q) and q[0] == 0.0:
        out[:, 0] = x
    rng = stream(seed, index)
    rec = [([np.zeros(1)], [x[k:k + 1].copy()], []) for k in range(K)] if record else None
    n_seg = max(1, math.ceil(T / SEGMENT - 1e-12))
    for sgi in range(n_seg):
        t0 = sgi * SEGMENT
        t1 = min(T, (sgi + 1) * SEGMENT)
        info = _segment_grid(t0, t1, dt, tuple(q))
        times, h, dw, pos, jid, r, u = _draw_segment(rng, dyn, t0, t1, info)
        qi = [(j, int(np.searchsorted(times, t))) for j, t in enumerate(q) if t0 < t <= t1]
        buf = np.empty(len(times))
        for k in range(K):
            x[k] = _advance(x[k], h, dw, dyn.diff, dyn.drift, pos, jid, r, u, buf)
            for j, p in qi:
                out[k, j] = buf[p]
            if record:
                rec[k][0].append(times)
                rec[k][1].append(buf.copy())
                rec[k][2].append(times[pos])
    paths = None
    if record:
        paths = [(np.concatenate(a), np.concatenate(b), np.concatenate(c) if c else np.zeros(0))
                 for a, b, c in rec]
    return out, paths


def sample_many(dyn, x0, seed, N, T, dt, query_times, first_index=0):
    """Values at query times for N trajectories with stream ids
    first_index..first_index+N-1; x0 may hold several shared-noise starts,
    giving shape (N, K, Q), else (N, Q)."""
    K = np.size(x0)
    res = np.empty((N, K, len(set(query_times))))
    for i in range(N):
        res[i], _ = run_trajectory(dyn, x0, seed, first_index + i, T, dt, query_times)
    return res[:, 0, :] if np.ndim(x0) == 0 else res


def sample_starts(dyn, starts, seed, T, dt, query_times, first_index=0):
    """Like sample_many with one start value per trajectory; shape (N, Q)."""
    starts = np.asarray(starts, dtype=float)
    res = np.empty((starts.size, len(set(query_times))))
    for i, x0 in enumerate(starts):
        res[i] = run_trajectory(dyn, x0, seed, first_index + i, T, dt, query_times)[0][0]
    return res
