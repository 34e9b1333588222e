"""Model parameters, finite jump measures and the rate functionals built on them.

A measure is a finite list of atoms plus at most one scaled Beta density
``c z^(a-1) (1-z)^(b-1)``.  On the signed domain (-1, 1) the density lives on
(0, 1) by default; ``beta_side = -1`` mirrors it onto (-1, 0) with ``|z|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

UNIT = "unit"      # [0, 1]
SIGNED = "signed"  # (-1, 1)

QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-14


@dataclass(frozen=True)
class JumpMeasure:
    atoms: tuple = ()              # ((location, mass), ...)
    beta: tuple | None = None      # (c, a, b)
    domain: str = UNIT
    beta_side: int = 1

    @staticmethod
    def make(atoms=(), beta=None, domain=UNIT, beta_side=1):
        atoms = tuple((float(z), float(w)) for z, w in atoms)
        if beta is not None:
            beta = tuple(float(v) for v in beta)
        return JumpMeasure(atoms, beta, domain, int(beta_side))

    def density(self, z):
        """Beta density at |z| on its side (0 elsewhere)."""
        if self.beta is None:
            return np.zeros_like(np.asarray(z, dtype=float))
        c, a, b = self.beta
        z = np.asarray(z, dtype=float)
        s = z * self.beta_side
        out = np.zeros_like(z)
        inside = (s > 0) & (s < 1)
        out[inside] = c * s[inside] ** (a - 1) * (1 - s[inside]) ** (b - 1)
        return out

    def is_zero(self):
        return all(w == 0 for _, w in self.atoms) and (self.beta is None or self.beta[0] == 0)

    def side(self, sign):
        """Restriction to (0,1) (sign=+1) or (-1,0) (sign=-1) as a unit-domain
        measure in |z|."""
        atoms = tuple((abs(z), w) for z, w in self.atoms if z * sign > 0 and w > 0)
        beta = self.beta if (self.beta is not None and self.beta_side == sign and self.beta[0] > 0) else None
        return JumpMeasure(atoms, beta, UNIT, 1)

    def total(self):
        return measure_mass(self, *_closure(self.domain), True, True)


def _closure(domain):
    return (0.0, 1.0) if domain == UNIT else (-1.0, 1.0)


@dataclass(frozen=True)
class SelectionRepr:
    kappa: int = 2
    beta: tuple = ()   # beta[l] for l = 0..kappa (entries 0, 1 unused)
    p: tuple = ()      # p[l][i] for i = 0..l

    @staticmethod
    def make(kappa=2, beta=None, p=None):
        """beta: {l: rate}; p: {(l, i): value}.  Unset p_i^(l) default to
        the neutral value i/l (so p_0 = 0 and p_l = 1)."""
        kappa = int(kappa)
        beta = dict(beta or {})
        p = dict(p or {})
        b = tuple(float(beta.get(l, 0.0)) for l in range(kappa + 1))
        pt = tuple(
            tuple(float(p.get((l, i), i / l if l > 0 else 0.0)) for i in range(l + 1))
            for l in range(kappa + 1)
        )
        return SelectionRepr(kappa, b, pt)

    def rate(self, l):
        return self.beta[l] if 0 <= l < len(self.beta) else 0.0


@dataclass(frozen=True)
class ModelConfig:
    lam: JumpMeasure = field(default_factory=lambda: JumpMeasure(domain=UNIT))
    mu: JumpMeasure = field(default_factory=lambda: JumpMeasure(domain=SIGNED))
    nu: JumpMeasure = field(default_factory=lambda: JumpMeasure(domain=SIGNED))
    theta_a: float = 0.0
    theta_A: float = 0.0
    selection: SelectionRepr = field(default_factory=SelectionRepr.make)

    @property
    def kingman(self):
        """Lambda({0})."""
        return measure_mass(self.lam, 0.0, 0.0, True, True)

    @property
    def bidirectional_mutation(self):
        return (self.theta_a + measure_mass(self.nu, 0, 1, False, False) > 0
                and self.theta_A + measure_mass(self.nu, -1, 0, False, False) > 0)

    @property
    def no_mutation(self):
        return self.theta_a == 0 and self.theta_A == 0 and self.nu.is_zero()


def make_config(lam=None, mu=None, nu=None, theta=(0.0, 0.0), selection=None):
    """Convenience constructor.  Measures may be given as JumpMeasure or as a
    dict with keys ``atoms``, ``beta`` (and ``side``), or as a plain
    {location: weight} dict of atoms."""
    def conv(m, dom):
        if m is None:
            return JumpMeasure(domain=dom)
        if isinstance(m, JumpMeasure):
            return m
        if m and all(isinstance(k, (int, float)) for k in m):
            return JumpMeasure.make(tuple(m.items()), None, dom)
        bad = set(m) - {"atoms", "beta", "side"}
        if bad:
            raise ValueError(f"unknown measure keys: {sorted(bad)}")
        return JumpMeasure.make(m.get("atoms", ()), m.get("beta"), dom, m.get("side", 1))
    return ModelConfig(conv(lam, UNIT), conv(mu, SIGNED), conv(nu, SIGNED),
                       float(theta[0]), float(theta[1]),
                       selection if selection is not None else SelectionRepr.make())


# ---------------------------------------------------------------------------
# masses and integrals

def _in_interval(z, lo, hi, closed_lo, closed_hi):
    left = z >= lo if closed_lo else z > lo
    right = z <= hi if closed_hi else z < hi
    return left and right


def measure_mass(m: JumpMeasure, lo, hi, closed_lo=True, closed_hi=True):
    """Mass of the (half-)open interval between lo and hi."""
    dlo, dhi = _closure(m.domain)
    if lo < dlo - 1e-15 or hi > dhi + 1e-15 or lo > hi:
        raise ValueError(f"interval [{lo}, {hi}] outside domain {m.domain}")
    total = sum(w for z, w in m.atoms if _in_interval(z, lo, hi, closed_lo, closed_hi))
    if m.beta is not None and m.beta[0] > 0 and hi > lo:
        c, a, b = m.beta
        s_lo, s_hi = (lo, hi) if m.beta_side > 0 else (-hi, -lo)
        s_lo, s_hi = max(s_lo, 0.0), min(s_hi, 1.0)
        if s_hi > s_lo:
            full = c * math.exp(special.betaln(a, b))
            total += full * (special.betainc(a, b, s_hi) - special.betainc(a, b, s_lo))
    return float(total)


def integrate_density(m: JumpMeasure, fn, lo=0.0, hi=1.0):
    """Integral of fn(|z|) against the Beta component over |z| in (lo, hi)."""
    if m.beta is None or m.beta[0] == 0:
        return 0.0
    c, a, b = m.beta
    val, _ = integrate.quad(lambda s: fn(s) * c * s ** (a - 1) * (1 - s) ** (b - 1),
                            lo, hi, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=200)
    return float(val)


def integrate_measure(m: JumpMeasure, fn, sign=1, lo=0.0, hi=1.0, open_lo=True, open_hi=True):
    """Integral of fn(|z|) over the given side of m restricted to |z| in (lo, hi)."""
    part = m.side(sign) if m.domain == SIGNED else m
    tot = 0.0
    for z, w in part.atoms:
        if _in_interval(z, lo, hi, not open_lo, not open_hi):
            tot += w * fn(z)
    return tot + integrate_density(part, fn, lo, hi)


# ---------------------------------------------------------------------------
# dual rates

def lambda_rate(cfg: ModelConfig, n: int, k: int) -> float:
    """lambda_{n,k} = int z^(k-2) (1-z)^(n-k) Lambda(dz), with 0^0 = 1."""
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    tot = sum(w * z ** (k - 2) * (1 - z) ** (n - k) for z, w in cfg.lam.atoms)
    if cfg.lam.beta is not None and cfg.lam.beta[0] > 0:
        c, a, b = cfg.lam.beta
        tot += c * math.exp(special.betaln(a + k - 2, b + n - k))
    return float(tot)


def _signed_rate(m: JumpMeasure, n, l, sign):
    part = m.side(sign)
    tot = sum(w * z ** (l - 1) * (1 - z) ** (n - l) for z, w in part.atoms)
    if part.beta is not None:
        c, a, b = part.beta
        tot += c * math.exp(special.betaln(a + l - 1, b + n - l))
    return float(tot)


def sel_mut_rates(cfg: ModelConfig, n: int, l: int):
    """(sigma_{n,l}, m_{n,l}) summed over both signs."""
    if not 1 <= l <= n:
        raise ValueError("need 1 <= l <= n")
    s = _signed_rate(cfg.mu, n, l, 1) + _signed_rate(cfg.mu, n, l, -1)
    m = _signed_rate(cfg.nu, n, l, 1) + _signed_rate(cfg.nu, n, l, -1)
    return s, m


def _log_binom(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _binom_rates(part: JumpMeasure, n: int, shift: int) -> np.ndarray:
    """Array over k = 0..n of C(n,k) int z^(k-shift) (1-z)^(n-k) part(dz),
    zero for k < shift."""
    out = np.zeros(n + 1)
    if n < shift:
        return out
    k = np.arange(shift, n + 1)
    for z, w in part.atoms:
        if w <= 0:
            continue
        if z == 0.0:
            out[shift] += w * math.comb(n, shift)
        elif z == 1.0:
            out[n] += w
        else:
            logp = _log_binom(n, k) + k * math.log(z) + (n - k) * math.log1p(-z)
            out[shift:] += w * np.exp(logp - shift * math.log(z))
    if part.beta is not None and part.beta[0] > 0:
        c, a, b = part.beta
        out[shift:] += c * np.exp(_log_binom(n, k) + special.betaln(a + k - shift, b + n - k))
    return out


@lru_cache(maxsize=4096)
def coal_rates(cfg: ModelConfig, n: int) -> np.ndarray:
    """C(n,k) lambda_{n,k} for k = 0..n."""
    r = _binom_rates(cfg.lam, n, 2)
    r.flags.writeable = False
    return r


@lru_cache(maxsize=4096)
def branch_rates(cfg: ModelConfig, n: int):
    """(positive, negative) arrays of C(n,k) sigma^{a/A}_{n,k}, k = 0..n."""
    p = _binom_rates(cfg.mu.side(1), n, 1)
    q = _binom_rates(cfg.mu.side(-1), n, 1)
    p.flags.writeable = False
    q.flags.writeable = False
    return p, q


@lru_cache(maxsize=4096)
def cmut_rates(cfg: ModelConfig, n: int):
    """(white, black) arrays of C(n,k) m^{a/A}_{n,k}, k = 0..n."""
    p = _binom_rates(cfg.nu.side(1), n, 1)
    q = _binom_rates(cfg.nu.side(-1), n, 1)
    p.flags.writeable = False
    q.flags.writeable = False
    return p, q


# ---------------------------------------------------------------------------
# selection polynomial

@lru_cache(maxsize=256)
def _sel_poly(s: SelectionRepr):
    """Power-basis coefficients of sigma(x) x (1-x)."""
    P = np.polynomial.polynomial
    acc = np.zeros(1)
    for l in range(2, s.kappa + 1):
        bl = s.rate(l)
        if bl == 0:
            continue
        for i in range(l + 1):
            w = bl * math.comb(l, i) * (s.p[l][i] - i / l)
            if w == 0:
                continue
            term = P.polymul(P.polypow([0.0, 1.0], i), P.polypow([1.0, -1.0], l - i))
            acc = P.polyadd(acc, w * term)
    return np.trim_zeros(np.atleast_1d(acc), "b") if np.any(acc) else np.zeros(1)


@lru_cache(maxsize=256)
def _sigma_poly(s: SelectionRepr):
    """Coefficients of sigma itself (quotient by x(1-x))."""
    P = np.polynomial.polynomial
    num = _sel_poly(s)
    if not np.any(num):
        return np.zeros(1)
    q, _ = P.polydiv(num, [0.0, 1.0, -1.0])
    return np.atleast_1d(q)


def sigma_eval(s: SelectionRepr, x):
    """sigma(x) x (1-x)."""
    return np.polynomial.polynomial.polyval(x, _sel_poly(s))


def sigma_of(s: SelectionRepr, x):
    """sigma(x), continued polynomially to the endpoints."""
    return np.polynomial.polynomial.polyval(x, _sigma_poly(s))


def sigma_c1_norm(s: SelectionRepr, grid=2001):
    """sup|sigma| + sup|sigma'| on [0,1] (dense grid plus critical points)."""
    P = np.polynomial.polynomial
    c = _sigma_poly(s)
    d = P.polyder(c) if len(c) > 1 else np.zeros(1)
    xs = np.linspace(0, 1, grid)
    for poly in (d, P.polyder(d) if len(d) > 1 else np.zeros(1)):
        if len(poly) > 1 and np.any(poly):
            roots = P.polyroots(poly)
            roots = roots[np.isreal(roots)].real
            xs = np.concatenate([xs, roots[(roots >= 0) & (roots <= 1)]])
    return float(np.max(np.abs(P.polyval(xs, c))) + np.max(np.abs(P.polyval(xs, d))))


def branching_excess(s: SelectionRepr) -> float:
    """sum_l beta_l (l - 1)."""
    return float(sum(s.rate(l) * (l - 1) for l in range(2, s.kappa + 1)))


# ---------------------------------------------------------------------------
# validation

def _check_measure(name, m: JumpMeasure, out):
    dlo, dhi = _closure(m.domain)
    for z, w in m.atoms:
        if not (w >= 0 and math.isfinite(w)):
            out.append(f"{name}: atom mass {w} must be finite and >= 0")
        if m.domain == UNIT and not (0 <= z <= 1):
            out.append(f"{name}: atom location {z} outside [0,1]")
        if m.domain == SIGNED:
            if not (-1 < z < 1):
                out.append(f"{name}: atom location {z} outside (-1,1)")
            if z == 0 and w > 0:
                out.append(f"{name}({{0}}) must be 0")
    if m.beta is not None:
        c, a, b = m.beta
        if not (c >= 0 and math.isfinite(c)):
            out.append(f"{name}: beta_density c must be >= 0")
        if not (a > 0 and b > 0):
            out.append(f"{name}: beta_density needs a > 0 and b > 0")
    if m.beta_side not in (1, -1):
        out.append(f"{name}: beta side must be +1 or -1")
    if m.domain == UNIT and m.beta_side != 1:
        out.append(f"{name}: beta side must be +1 on [0,1]")


def validate(cfg: ModelConfig) -> list:
    """Return a list of violated invariants (empty when the config is valid)."""
    out = []
    _check_measure("lambda", cfg.lam, out)
    _check_measure("mu", cfg.mu, out)
    _check_measure("nu", cfg.nu, out)
    for nm, v in (("theta_a", cfg.theta_a), ("theta_A", cfg.theta_A)):
        if not (v >= 0 and math.isfinite(v)):
            out.append(f"{nm} must be finite and >= 0")
    s = cfg.selection
    if s.kappa < 2:
        out.append("selection: kappa must be > 1")
    if len(s.beta) != s.kappa + 1 or len(s.p) != s.kappa + 1:
        out.append("selection: beta/p tables do not match kappa")
        return out
    for l in range(2, s.kappa + 1):
        if not (s.beta[l] >= 0 and math.isfinite(s.beta[l])):
            out.append(f"selection: beta_{l} must be >= 0")
        row = s.p[l]
        if len(row) != l + 1:
            out.append(f"selection: p^({l}) must have {l + 1} entries")
            continue
        if row[0] != 0:
            out.append(f"selection: p_0 must be 0 (l={l})")
        if row[l] != 1:
            out.append(f"selection: p_l must be 1 (l={l})")
        for i, v in enumerate(row):
            if not 0 <= v <= 1:
                out.append(f"selection: p_{i}^({l}) = {v} not in [0,1]")
    return out


def dust_integral(lam: JumpMeasure) -> float:
    """int r^{-1} Lambda(dr) (inf when an atom sits at 0 or the Beta part has a <= 1)."""
    tot = 0.0
    for z, w in lam.atoms:
        if w > 0:
            if z == 0:
                return math.inf
            tot += w / z
    if lam.beta is not None and lam.beta[0] > 0:
        c, a, b = lam.beta
        if a <= 1:
            return math.inf
        tot += c * math.exp(special.betaln(a - 1, b))
    return float(tot)


def tail_exponent(lam: JumpMeasure) -> float:
    """limsup_{x->0} log Lambda([0,x)) / log x on the atom + Beta representation."""
    if any(z == 0 and w > 0 for z, w in lam.atoms):
        return 0.0
    if lam.beta is not None and lam.beta[0] > 0:
        return float(lam.beta[1])
    return math.inf


def rate_C(cfg: ModelConfig) -> float:
    """nu(-1,1) + theta_a + theta_A - mu(-1,1) - sum_l beta_l (l-1)."""
    return (measure_mass(cfg.nu, -1, 1, False, False) + cfg.theta_a + cfg.theta_A
            - measure_mass(cfg.mu, -1, 1, False, False) - branching_excess(cfg.selection))
