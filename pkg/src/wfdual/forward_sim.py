"""Forward Lambda-Wright-Fisher jump diffusion.

    dX = sigma(X) X(1-X) dt + (theta_a (1-X) - theta_A X) dt
         + sqrt(Lambda({0}) X(1-X)) dW
         + int r (1{u<=X}(1-X) - 1{u>X} X) Ntilde(dt, dr, du)     intensity r^-2 Lambda(dr) du
         + int r X(1-X) S(dt, dr)                                 intensity |r|^-1 mu(dr)
         + int |r| (1{r>=0}(1-X) - 1{r<0} X) M(dt, dr)            intensity |r|^-1 nu(dr)
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

import numpy as np

from . import _engine
from ._engine import Scheme
from ._poisson import mark_source, small_signed_mass
from .model_config import ModelConfig, measure_mass, validate, _sel_poly

__all__ = ["Path", "Scheme", "simulate_forward", "sample_law", "simulate_monotone_pair",
           "forward_dynamics", "config_hash", "write_endpoints"]


@dataclass
class Path:
    times: np.ndarray
    values: np.ndarray
    seed: int
    scheme: Scheme

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time,value\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")


def write_endpoints(values, path, cfg: ModelConfig, t: float, seed: int, x0=None):
    """One endpoint per line after a comment line naming the config hash, t and seed."""
    tag = f"# cfg_hash={config_hash(cfg)} t={float(t)!r} seed={seed}"
    if x0 is not None:
        tag += f" x0={float(x0)!r}"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(tag + "\nvalue\n")
        for v in np.asarray(values, dtype=float).ravel():
            fh.write(f"{float(v)!r}\n")


def config_hash(cfg: ModelConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def forward_dynamics(cfg: ModelConfig, scheme: Scheme) -> _engine.Dynamics:
    eps = scheme.eps_trunc
    P = np.polynomial.polynomial
    # mean of the dropped small S and M jumps goes back into the drift
    s_small = small_signed_mass(cfg.mu, eps)
    nu_pos = _small_side_mass(cfg.nu, 1, eps)
    nu_neg = _small_side_mass(cfg.nu, -1, eps)
    poly = P.polyadd(_sel_poly(cfg.selection), s_small * np.array([0.0, 1.0, -1.0]))
    poly = P.polyadd(poly, [cfg.theta_a + nu_pos, -(cfg.theta_a + cfg.theta_A + nu_pos + nu_neg)])
    sources = [
        (mark_source(cfg.lam, 2, eps), _engine.J_N),
        (mark_source(cfg.mu, 1, eps), _engine.J_S),
        (mark_source(cfg.nu, 1, eps), _engine.J_M),
    ]
    return _engine.Dynamics(drift_coeffs(poly), cfg.kingman, sources)


def drift_coeffs(poly):
    """Power-basis coefficients to the highest-first order of the kernel;
    an identically zero drift becomes an empty array."""
    poly = np.trim_zeros(np.asarray(poly, dtype=float), "b")
    return poly[::-1].copy()


def _small_side_mass(m, sign, eps):
    part = m.side(sign)
    tot = sum(w for z, w in part.atoms if 0 < z <= eps)
    if part.beta is not None:
        tot += measure_mass(part, 0.0, eps, False, True)
    return float(tot)


def _prepare(cfg, scheme):
    errs = validate(cfg)
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    scheme = (scheme or Scheme()).check()
    return scheme, scheme.resolved_dt(cfg.kingman)


def simulate_forward(cfg: ModelConfig, x0: float, T: float, scheme: Scheme | None = None,
                     seed: int = 0, index: int = 0) -> Path:
    """One trajectory on [0, T], recorded at every substep boundary."""
    if not 0 <= x0 <= 1:
        raise ValueError("x0 must lie in [0,1]")
    scheme, dt = _prepare(cfg, scheme)
    dyn = forward_dynamics(cfg, scheme)
    _, paths = _engine.run_trajectory(dyn, x0, seed, index, T, dt, record=True)
    t, v, _ = paths[0]
    return Path(t, v, seed, scheme)


def sample_law(cfg: ModelConfig, x0, t, N: int, seed: int = 0, scheme: Scheme | None = None,
               first_index: int = 0):
    """Endpoints X_t of N independent trajectories (stream ids
    first_index..first_index+N-1).

    ``t`` may be a scalar (returns shape (N,)) or a sequence of times
    (returns shape (N, len(t)) in sorted time order).  A sequence of start
    values runs them on shared noise and adds a middle axis.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    scheme, dt = _prepare(cfg, scheme)
    dyn = forward_dynamics(cfg, scheme)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    T = float(times.max())
    if T == 0:
        out = np.broadcast_to(np.asarray(x0, dtype=float)[..., None],
                              (N,) + np.shape(x0) + (1,)).copy()
    else:
        out = _engine.sample_many(dyn, x0, seed, N, T, dt, times, first_index)
    return out[..., 0] if np.ndim(t) == 0 else out


def simulate_monotone_pair(cfg: ModelConfig, x1: float, x2: float, T: float,
                           scheme: Scheme | None = None, seed: int = 0, index: int = 0):
    """Two trajectories from x1 <= x2 driven by the same W, N, S and M."""
    if x1 > x2:
        raise ValueError("need x1 <= x2")
    scheme, dt = _prepare(cfg, scheme)
    dyn = forward_dynamics(cfg, scheme)
    _, paths = _engine.run_trajectory(dyn, [x1, x2], seed, index, T, dt, record=True)
    return tuple(Path(t, v, seed, scheme) for t, v, _ in paths)


def pair_endpoints(cfg, x1, x2, t, N, seed=0, scheme=None):
    """Endpoints of N shared-noise pairs, shape (N, 2, Q)."""
    return sample_law(cfg, [x1, x2], np.atleast_1d(t), N, seed, scheme)
