"""Empirical probability metrics for samples on [0,1] and Bernstein polynomials."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EmpiricalSample", "wp_empirical", "radon_binned", "binned_w1", "lp_empirical",
           "bernstein_coeffs", "bernstein_eval", "discretize"]


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("empty sample")
        if np.any(~np.isfinite(v)) or v.min() < 0 or v.max() > 1:
            raise ValueError("sample values must lie in [0,1]")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def _values(A):
    if isinstance(A, EmpiricalSample):
        return A.values
    v = np.asarray(A, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty sample")
    return v


def _equalize(a, b, seed):
    """Resample the larger sample down (without replacement) to the smaller size."""
    if a.size == b.size:
        return a, b
    rng = np.random.default_rng(seed)
    if a.size > b.size:
        return rng.choice(a, b.size, replace=False), b
    return a, rng.choice(b, a.size, replace=False)


def wp_empirical(A, B, p: float = 1.0, seed: int = 0) -> float:
    """Wasserstein-p distance by sorted-order pairing (optimal in one dimension)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    a, b = _equalize(_values(A), _values(B), seed)
    d = np.abs(np.sort(a) - np.sort(b))
    if p == 1:
        return float(d.mean())
    return float(np.mean(d ** p) ** (1.0 / p))


def _hist(v, bins):
    idx = np.minimum((np.clip(v, 0.0, 1.0) * bins).astype(np.int64), bins - 1)
    return np.bincount(idx, minlength=bins) / v.size


def radon_binned(A, B, bins: int = 32) -> float:
    """Radon distance of the two samples pushed onto ``bins`` equal cells of [0,1]
    (twice the total variation of the histograms)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    return float(np.abs(_hist(_values(A), bins) - _hist(_values(B), bins)).sum())


def discretize(A, bins: int = 32) -> np.ndarray:
    """Move every point to the centre of its cell."""
    v = _values(A)
    idx = np.minimum((np.clip(v, 0.0, 1.0) * bins).astype(np.int64), bins - 1)
    return (idx + 0.5) / bins


def binned_w1(A, B, bins: int = 32) -> float:
    """W1 between the cell-centre discretisations, from the CDF difference."""
    d = np.cumsum(_hist(_values(A), bins) - _hist(_values(B), bins))[:-1]
    return float(np.abs(d).sum() / bins)


def _max_matching(a, b, eps):
    """Size of a maximum matching of sorted a, b with |a_i - b_j| <= eps."""
    i = j = m = 0
    na, nb = a.size, b.size
    while i < na and j < nb:
        if abs(a[i] - b[j]) <= eps:
            m += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return m


def _levy_ok(a, b, eps):
    # F_a(x - eps) - eps <= F_b(x) <= F_a(x + eps) + eps, checked at the jumps
    pts = np.concatenate([a, b, a - eps, a + eps])
    n_a, n_b = a.size, b.size
    Fb = np.searchsorted(b, pts, side="right") / n_b
    lo = np.searchsorted(a, pts - eps, side="right") / n_a - eps
    hi = np.searchsorted(a, pts + eps, side="right") / n_a + eps
    ok = np.all(Fb >= lo - 1e-15) and np.all(Fb <= hi + 1e-15)
    Fa = np.searchsorted(a, pts, side="right") / n_a
    lo = np.searchsorted(b, pts - eps, side="right") / n_b - eps
    hi = np.searchsorted(b, pts + eps, side="right") / n_b + eps
    return ok and np.all(Fa >= lo - 1e-15) and np.all(Fa <= hi + 1e-15)


def lp_empirical(A, B, method: str = "coupling", seed: int = 0, iters: int = 60) -> float:
    """Levy-Prokhorov distance between two empirical measures.

    ``coupling`` bisects on eps using the coupling characterisation: the
    distance is the least eps admitting a coupling with P(|X - Y| > eps) <= eps,
    and on equal-size samples the best coupling is a maximum matching of pairs
    within eps.  ``band`` bisects the Levy CDF-band criterion instead, which
    gives a lower bound.  The upper end of the final bracket is returned.
    """
    a, b = _equalize(_values(A), _values(B), seed)
    a, b = np.sort(a), np.sort(b)
    n = a.size
    if method == "coupling":
        ok = lambda e: (n - _max_matching(a, b, e)) <= e * n
    elif method == "band":
        ok = lambda e: _levy_ok(a, b, e)
    else:
        raise ValueError(f"unknown method {method!r}")
    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def bernstein_coeffs(f, n: int) -> np.ndarray:
    """v_{f,n}(i) = f(i/n), i = 0..n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.array([float(f(i / n)) for i in range(n + 1)])


def bernstein_eval(v, x):
    """sum_i v_i C(n,i) x^i (1-x)^(n-i) by de Casteljau; x may be an array."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    b = np.broadcast_to(v, x.shape + v.shape).copy()
    xe = x[..., None]
    for k in range(v.size - 1, 0, -1):
        b[..., :k] = (1 - xe) * b[..., :k] + xe * b[..., 1:k + 1]
    out = b[..., 0]
    return float(out) if out.ndim == 0 else out
