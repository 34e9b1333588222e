"""Marked Poisson sources shared by the forward and Siegmund simulators.

A source is the intensity ``|r|^{-q} m(dr)`` restricted to ``|r| > eps``.
Atoms are sampled exactly; the Beta part through a tabulated inverse CDF on a
grid that is geometric towards both ends of (eps, 1).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate

from .model_config import JumpMeasure, SIGNED, QUAD_ATOL, QUAD_RTOL


class MarkSource:
    def __init__(self, m: JumpMeasure, q: int, eps: float, keep_zero=False):
        locs, rates = [], []
        for z, w in m.atoms:
            if w <= 0 or abs(z) <= eps:
                continue
            locs.append(z)
            rates.append(w / abs(z) ** q)
        self.atom_loc = np.array(locs, dtype=float)
        self.atom_rate = np.array(rates, dtype=float)
        self.cont_rate = 0.0
        self.side = m.beta_side
        if m.beta is not None and m.beta[0] > 0:
            c, a, b = m.beta
            f = lambda s: c * s ** (a - 1 - q) * (1 - s) ** (b - 1)
            lo = np.geomspace(eps, 0.5, 300)
            hi = 1 - np.geomspace(0.5, 1e-12, 300)[1:]
            nodes = np.concatenate([lo, hi])
            masses = np.array([
                integrate.quad(f, x0, x1, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=100)[0]
                for x0, x1 in zip(nodes[:-1], nodes[1:])
            ])
            # remaining sliver next to 1
            masses[-1] += integrate.quad(f, nodes[-1], 1.0, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=100)[0]
            self.nodes = nodes
            self.cum = np.concatenate([[0.0], np.cumsum(masses)])
            self.cont_rate = float(self.cum[-1])
        self.total = float(self.atom_rate.sum() + self.cont_rate)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.empty(0)
        u = rng.random(size) * self.total
        out = np.empty(size)
        n_atom = len(self.atom_rate)
        if n_atom:
            acum = np.cumsum(self.atom_rate)
            is_atom = u < acum[-1]
            idx = np.minimum(np.searchsorted(acum, u[is_atom], side="right"), n_atom - 1)
            out[is_atom] = self.atom_loc[idx]
            rest = ~is_atom
            u_c = u[rest] - acum[-1]
        else:
            rest = np.ones(size, dtype=bool)
            u_c = u
        if rest.any():
            j = np.clip(np.searchsorted(self.cum, u_c, side="right") - 1, 0, len(self.nodes) - 2)
            frac = (u_c - self.cum[j]) / np.maximum(self.cum[j + 1] - self.cum[j], 1e-300)
            s = self.nodes[j] + frac * (self.nodes[j + 1] - self.nodes[j])
            out[rest] = self.side * s
        return out


@lru_cache(maxsize=256)
def mark_source(m: JumpMeasure, q: int, eps: float) -> MarkSource:
    return MarkSource(m, q, eps)


def small_signed_mass(m: JumpMeasure, eps: float) -> float:
    """int_{0<|r|<=eps} sign(r) m(dr); drift left behind by dropped
    uncompensated jumps of the S and M sources."""
    if m.domain != SIGNED:
        raise ValueError("signed measure expected")
    tot = 0.0
    for z, w in m.atoms:
        if 0 < abs(z) <= eps:
            tot += np.sign(z) * w
    if m.beta is not None and m.beta[0] > 0:
        c, a, b = m.beta
        val = integrate.quad(lambda s: c * s ** (a - 1) * (1 - s) ** (b - 1), 0, eps,
                             epsabs=QUAD_ATOL, epsrel=QUAD_RTOL)[0]
        tot += m.beta_side * val
    return float(tot)
