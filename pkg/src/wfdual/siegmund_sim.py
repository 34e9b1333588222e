"""Siegmund dual of the mutation-free process.

    dY = int m(Y-, r, u) N(dt, dr, du) + int g(Y-, r) S(dt, dr) - sigma(Y) Y (1-Y) dt

with m the median map and g the environment map.  Y has no Brownian part and
0, 1 are absorbing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from ._engine import Scheme
from ._poisson import mark_source, small_signed_mass
from .forward_sim import Path, drift_coeffs, sample_law
from .rng import derive_seed
from .model_config import ModelConfig, validate, dust_integral, integrate_measure, _sel_poly

__all__ = ["AbsorptionStats", "median_jump", "env_jump", "simulate_siegmund",
           "absorption_stats", "siegmund_duality_gap", "sample_siegmund",
           "sample_siegmund_starts"]


def median_jump(y, r, u):
    """Median{(y-r)/(1-r), y/(1-r), u} - y."""
    a = (y - r) / (1 - r)
    b = y / (1 - r)
    out = np.maximum(a, np.minimum(b, u)) - y
    return out if np.ndim(out) else float(out)


def env_jump(y, r):
    """g(y, r) = (1 + r - sqrt((1+r)^2 - 4ry)) / (2r) - y.

    Rationalising twice gives -4 r y (1-y) / ((1 + r + sqrt(D)) (1 - r + sqrt(D)))
    with D = (1+r)^2 - 4ry, which has no cancellation at small |r| or near
    y = 0, 1 and tends to -y(1-y) r as r -> 0.  D is floored at 0.
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    sd = np.sqrt(np.maximum((1 + r) ** 2 - 4 * r * y, 0.0))
    out = -4 * r * y * (1 - y) / ((1 + r + sd) * (1 - r + sd))
    out = np.clip(y + out, 0.0, 1.0) - y
    return out if out.ndim else float(out)


@dataclass
class AbsorptionStats:
    p_low: float
    p_mid: float
    p_high: float
    a: float
    t: float
    n_traj: int
    se_low: float
    se_mid: float
    se_high: float
    seed: int = 0

    CSV_HEADER = "t,a,p_low,p_mid,p_high,se_low,se_mid,se_high,n_traj,seed"

    def csv_row(self):
        return (f"{self.t!r},{self.a!r},{self.p_low!r},{self.p_mid!r},{self.p_high!r},"
                f"{self.se_low!r},{self.se_mid!r},{self.se_high!r},{self.n_traj},{self.seed}")


def check_regime(cfg: ModelConfig):
    errs = list(validate(cfg))
    if not cfg.no_mutation:
        errs.append("Siegmund dual needs nu = 0 and theta_a = theta_A = 0")
    if cfg.kingman > 0 or not math.isfinite(dust_integral(cfg.lam)):
        errs.append("Siegmund dual needs int r^-1 Lambda(dr) < inf (so Lambda({0}) = 0)")
    if any(z == 1.0 and w > 0 for z, w in cfg.lam.atoms):
        errs.append("Siegmund dual needs Lambda({1}) = 0")
    if errs:
        raise ValueError("; ".join(errs))


def siegmund_dynamics(cfg: ModelConfig, scheme: Scheme) -> _engine.Dynamics:
    eps = scheme.eps_trunc
    P = np.polynomial.polynomial
    # dropped small S jumps have mean -y(1-y) r; dropped small N jumps
    # have mean (1-2y) r^2 / (2(1-r)^2), integrated against r^-2 Lambda
    s_small = small_signed_mass(cfg.mu, eps)
    n_small = integrate_measure(cfg.lam, lambda r: 1.0 / (1 - r) ** 2, 1, 0.0, eps, True, False)
    poly = P.polyadd(-np.asarray(_sel_poly(cfg.selection)), -s_small * np.array([0.0, 1.0, -1.0]))
    poly = P.polyadd(poly, 0.5 * n_small * np.array([1.0, -2.0]))
    sources = [
        (mark_source(cfg.lam, 2, eps), _engine.J_MEDIAN),
        (mark_source(cfg.mu, 1, eps), _engine.J_ENV),
    ]
    return _engine.Dynamics(drift_coeffs(poly), 0.0, sources)


def _prepare(cfg, scheme):
    check_regime(cfg)
    scheme = (scheme or Scheme()).check()
    return scheme, scheme.resolved_dt(0.0)


def simulate_siegmund(cfg: ModelConfig, y0: float, T: float, scheme: Scheme | None = None,
                      seed: int = 0, index: int = 0) -> Path:
    if not 0 <= y0 <= 1:
        raise ValueError("y0 must lie in [0,1]")
    scheme, dt = _prepare(cfg, scheme)
    dyn = siegmund_dynamics(cfg, scheme)
    _, paths = _engine.run_trajectory(dyn, y0, seed, index, T, dt, record=True)
    t, v, _ = paths[0]
    return Path(t, v, seed, scheme)


def sample_siegmund(cfg: ModelConfig, y0, t, N: int, seed: int = 0,
                    scheme: Scheme | None = None, first_index: int = 0):
    """Endpoints Y_t, shaped like forward_sim.sample_law."""
    scheme, dt = _prepare(cfg, scheme)
    dyn = siegmund_dynamics(cfg, scheme)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    T = float(times.max())
    if T == 0:
        out = np.broadcast_to(np.asarray(y0, dtype=float)[..., None],
                              (N,) + np.shape(y0) + (1,)).copy()
    else:
        out = _engine.sample_many(dyn, y0, seed, N, T, dt, times, first_index)
    return out[..., 0] if np.ndim(t) == 0 else out


def sample_siegmund_starts(cfg: ModelConfig, starts, t, seed: int = 0,
                           scheme: Scheme | None = None, first_index: int = 0):
    """Y_t for one trajectory per start value; shape (len(starts), Q), or
    (len(starts),) for scalar t."""
    scheme, dt = _prepare(cfg, scheme)
    dyn = siegmund_dynamics(cfg, scheme)
    starts = np.asarray(starts, dtype=float)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if times.max() == 0:
        out = np.repeat(starts[:, None], 1, axis=1)
    else:
        out = _engine.sample_starts(dyn, starts, seed, float(times.max()), dt, times, first_index)
    return out[:, 0] if np.ndim(t) == 0 else out


def _binom_se(p, n):
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def absorption_stats(cfg: ModelConfig, y0: float, t: float, a: float, N: int, seed: int = 0,
                     scheme: Scheme | None = None) -> AbsorptionStats:
    """Masses of Y_t in [0,a), [a,1-a] and (1-a,1]."""
    if not 0 < a < 0.5:
        raise ValueError("a must lie in (0, 1/2)")
    y = sample_siegmund(cfg, y0, t, N, seed, scheme)
    lo = float(np.mean(y < a))
    hi = float(np.mean(y > 1 - a))
    mid = float(np.mean((y >= a) & (y <= 1 - a)))
    return AbsorptionStats(lo, mid, hi, a, t, N, _binom_se(lo, N), _binom_se(mid, N),
                           _binom_se(hi, N), seed)


def siegmund_duality_gap(cfg: ModelConfig, x: float, y: float, t: float, N: int, seed: int = 0,
                         scheme: Scheme | None = None):
    """(P_x(X_t >= y), P_y(x >= Y_t), joint standard error)."""
    check_regime(cfg)
    if t == 0:
        v = float(x >= y)
        return v, v, 0.0
    X = sample_law(cfg, x, t, N, seed, scheme)
    Y = sample_siegmund(cfg, y, t, N, derive_seed(seed, "siegmund"), scheme)
    lhs = float(np.mean(X >= y))
    rhs = float(np.mean(x >= Y))
    return lhs, rhs, math.hypot(_binom_se(lhs, N), _binom_se(rhs, N))
