"""Closed-form constants, regime predicates and the experiments that turn the
simulators into verdicts on the ergodicity and duality bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from ._engine import Scheme
from .asg_dual import coeff_process, simulate_asg
from .forward_sim import forward_dynamics, sample_law, _prepare as _forward_prepare
from .line_dual import sup_EL1_scan
from .metrics import wp_empirical, radon_binned, lp_empirical
from .model_config import (ModelConfig, integrate_measure, measure_mass, rate_C, sigma_of,
                           sigma_c1_norm, tail_exponent, validate)
from .rng import derive_seed, stream
from ._poisson import mark_source
from .siegmund_sim import check_regime, sample_siegmund, sample_siegmund_starts

__all__ = ["rate_C", "tail_exponent", "coexistence_constants", "wh_gamma", "sh_gamma",
           "sh_gamma_sup", "BoundRow", "BoundReport", "stationarity_report", "DecayFit",
           "coexistence_decay", "RelDualsResult", "relduals_gap", "RecurrenceResult",
           "recurrence_scan", "recurrence_predicate", "LevyReport", "levy_drift_check",
           "levy_mean", "psi_b"]


# ---------------------------------------------------------------------------
# coexistence constants and integrability predicates

def _lam_log_term(cfg):
    """int_(0,1) log(1/(1-r)) r^-2 Lambda(dr); inf when it diverges."""
    lam = cfg.lam
    if lam.beta is not None and lam.beta[0] > 0 and lam.beta[1] <= 1:
        return math.inf
    f = lambda r: -math.log1p(-r) / r ** 2
    return integrate_measure(lam, f, 1, 0.0, 1.0, True, True)


def _mu_log_term(cfg, at_one):
    """int_(-1,1) log(1/(1 -+ r)) |r|^-1 mu(dr), the sign chosen by the boundary."""
    tot = 0.0
    for side in (1, -1):
        # r = side * s with s = |r| in (0, 1)
        if at_one:
            f = lambda s, sd=side: -math.log1p(-sd * s) / s
        else:
            f = lambda s, sd=side: -math.log1p(sd * s) / s
        tot += integrate_measure(cfg.mu, f, side, 0.0, 1.0, True, True)
    return tot


def coexistence_constants(cfg: ModelConfig):
    """(C0, C1).  The mu integrals carry the |r|^-1 factor of the selective
    jump intensity.  A divergent Lambda integral gives -inf for both."""
    lam_term = _lam_log_term(cfg)
    if cfg.kingman > 0 or not math.isfinite(lam_term):
        return -math.inf, -math.inf
    s0 = float(sigma_of(cfg.selection, 0.0))
    s1 = float(sigma_of(cfg.selection, 1.0))
    C0 = s0 - _mu_log_term(cfg, at_one=False) - lam_term
    C1 = -s1 - _mu_log_term(cfg, at_one=True) - lam_term
    return float(C0), float(C1)


def _big_jump_betas(cfg):
    """Beta exponents b of the densities reaching the boundary in the
    integrability conditions: Lambda near 1, mu near 1 and near -1."""
    out = []
    if cfg.lam.beta is not None and cfg.lam.beta[0] > 0:
        out.append(cfg.lam.beta[2])
    if cfg.mu.beta is not None and cfg.mu.beta[0] > 0:
        out.append(cfg.mu.beta[2])
    return out


def wh_gamma(cfg: ModelConfig, gamma: float) -> bool:
    """Weak integrability: log(1/(1-r))^(1+gamma) against the big jumps.
    Atoms in the open interval and Beta densities with b > 0 always pass."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return all(b > 0 for b in _big_jump_betas(cfg))


def sh_gamma(cfg: ModelConfig, gamma: float) -> bool:
    """Strong integrability: (1-r)^-gamma against the big jumps, finite iff
    gamma < b for every Beta density."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return all(gamma < b for b in _big_jump_betas(cfg))


def sh_gamma_sup(cfg: ModelConfig) -> float:
    """Supremum of the gamma for which the strong condition holds."""
    bs = _big_jump_betas(cfg)
    return min(bs) if bs else math.inf


# ---------------------------------------------------------------------------
# distance to stationarity

METRICS = ("w1", "radon", "lp")


def _parse_metric(metric: str):
    if metric.startswith("wp:"):
        p = float(metric[3:])
        if p < 1:
            raise ValueError("wp needs p >= 1")
        return "wp", p
    if metric in METRICS:
        return metric, 1.0
    raise ValueError(f"unknown metric {metric!r}")


def _distance(kind, p, a, b, bins):
    if kind == "w1":
        return wp_empirical(a, b, 1)
    if kind == "wp":
        return wp_empirical(a, b, p)
    if kind == "radon":
        return radon_binned(a, b, bins)
    return lp_empirical(a, b)


def _bootstrap_se(kind, p, a, b, bins, reps, rng):
    vals = np.empty(reps)
    for r in range(reps):
        ia = rng.integers(0, a.size, a.size)
        ib = rng.integers(0, b.size, b.size)
        vals[r] = _distance(kind, p, a[ia], b[ib], bins)
    return float(vals.std(ddof=1))


@dataclass
class BoundRow:
    x: float
    t: float
    metric: str
    empirical: float
    se: float
    bound: float
    verdict: str

    def csv_row(self):
        return (f"{self.x!r},{self.t!r},{self.metric},{self.empirical!r},{self.se!r},"
                f"{self.bound!r},{self.verdict}")


@dataclass
class BoundReport:
    rows: list
    mode: str
    C: float
    proxy_T: float
    K_hat: float = math.nan
    extras: dict = field(default_factory=dict)

    CSV_HEADER = "x,t,metric,empirical,se,bound,verdict"

    @property
    def passed(self):
        return all(r.verdict != "fail" for r in self.rows)

    def sup_over_x(self):
        """Per (metric, t): the row with the largest empirical distance."""
        best = {}
        for r in self.rows:
            k = (r.metric, r.t)
            if k not in best or r.empirical > best[k].empirical:
                best[k] = r
        return [best[k] for k in sorted(best)]

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for r in self.rows:
                fh.write(r.csv_row() + "\n")


def _verdict(emp, se, bound):
    if not math.isfinite(se):
        return "inconclusive"
    return "pass" if emp <= bound + 3 * se else "fail"


def stationarity_report(cfg: ModelConfig, x_grid, t_grid, N: int, metric: str = "w1",
                        seed: int = 0, mode: str = "bernstein", scheme: Scheme | None = None,
                        bins: int = 32, boot: int = 50, scan_n_max: int = 1024,
                        scan_N: int = 400, eps: float = 0.1, y_grid=None,
                        absorb_T: float | None = None) -> BoundReport:
    """Empirical distance between rho_{x,t} and a stationary proxy, against
    the theoretical bound, at every grid point.

    mode ``bernstein`` needs C > 0 and uses 3 e^{-Ct/3} for W1, its p-th
    root for Wp, its square root for LP and 2 K e^{-Ct} for Radon with
    K = 1.2 e^C max_n E_n[L_1] from a line-count scan.

    mode ``siegmund`` needs the no-mutation coexistence regime and x in
    [eps, 1-eps].  The bound on Wp^p is sup_y P_y(Y_t in [eps, 1-eps]) +
    P_eps(Y_inf = 1) + P_{1-eps}(Y_inf = 0), each term estimated by
    simulating the dual (the sup over y on ``y_grid``, Y_inf read at
    ``absorb_T``), so the bound carries its own standard error, which is
    added to the margin.  Only W1 and Wp are supported in this mode.
    """
    kind, p = _parse_metric(metric)
    x_grid = [float(x) for x in x_grid]
    t_grid = sorted(float(t) for t in t_grid)
    if not x_grid or not t_grid:
        raise ValueError("empty grid")
    if N < 2:
        raise ValueError("N must be >= 2")
    rng = stream(derive_seed(seed, "bootstrap"), 0)
    extras = {}
    if mode == "bernstein":
        C = rate_C(cfg)
        errs = validate(cfg)
        if errs or C <= 0:
            raise ValueError("bound needs a valid config with C > 0 (C = %r)" % C)
        horizon = 10.0 / C
        K_hat = math.nan
        if kind == "radon":
            scan = sup_EL1_scan(cfg, scan_n_max, scan_N, derive_seed(seed, "scan"))
            K_hat = 1.2 * math.exp(C) * scan.max_mean
            extras["scan_max_mean"] = scan.max_mean

        def bound(t):
            w1 = 3 * math.exp(-C * t / 3)
            if kind == "w1":
                return w1
            if kind == "wp":
                return w1 ** (1 / p)
            if kind == "lp":
                return math.sqrt(w1)
            return 2 * K_hat * math.exp(-C * t)

        bound_se = lambda t: 0.0
    elif mode == "siegmund":
        if kind not in ("w1", "wp"):
            raise ValueError("siegmund mode supports w1 and wp only")
        check_regime(cfg)
        C0, C1 = coexistence_constants(cfg)
        if not (C0 > 0 and C1 > 0):
            raise ValueError(f"coexistence regime needs C0, C1 > 0 (got {C0}, {C1})")
        if not 0 < eps < 0.5 or any(not eps <= x <= 1 - eps for x in x_grid):
            raise ValueError("siegmund mode needs 0 < eps < 1/2 and x in [eps, 1-eps]")
        C = min(C0, C1)
        K_hat = math.nan
        horizon = 10.0 / C
        parts = _siegmund_bound_terms(cfg, t_grid, N, derive_seed(seed, "dual"), scheme, eps,
                                      y_grid, absorb_T if absorb_T is not None else horizon)
        extras.update(parts["extras"])

        def bound(t):
            return parts["value"][t] ** (1 / p)

        def bound_se(t):
            v, s = parts["value"][t], parts["se"][t]
            # delta method for the p-th root
            return s if p == 1 else (s * v ** (1 / p - 1) / p if v > 0 else math.inf)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    T_stat = t_grid[-1] + horizon
    proxy = sample_law(cfg, 0.5, T_stat, N, derive_seed(seed, "proxy"), scheme)
    X = sample_law(cfg, x_grid, t_grid, N, derive_seed(seed, "rho"), scheme)  # (N, K, Q)
    rows = []
    for k, x in enumerate(x_grid):
        for q, t in enumerate(t_grid):
            a = X[:, k, q]
            emp = _distance(kind, p, a, proxy, bins)
            se = _bootstrap_se(kind, p, a, proxy, bins, boot, rng)
            b = bound(t)
            se_tot = math.hypot(se, bound_se(t))
            rows.append(BoundRow(x, t, metric, emp, se_tot, b, _verdict(emp, se_tot, b)))
    return BoundReport(rows, mode, C, T_stat, K_hat, extras)


def _siegmund_bound_terms(cfg, t_grid, N, seed, scheme, eps, y_grid, absorb_T):
    y_grid = list(y_grid) if y_grid is not None else [0.1 * i for i in range(1, 10)]
    Y = sample_siegmund(cfg, y_grid, t_grid, N, derive_seed(seed, "mid"), scheme)  # (N, K, Q)
    mid = ((Y >= eps) & (Y <= 1 - eps)).mean(axis=0)  # (K, Q)
    Ye = sample_siegmund(cfg, [eps, 1 - eps], absorb_T, N, derive_seed(seed, "absorb"), scheme)
    up = float(np.mean(Ye[:, 0] > 0.5))
    down = float(np.mean(Ye[:, 1] < 0.5))
    se_b = lambda v: math.sqrt(max(v * (1 - v), 0.0) / N)
    value, se = {}, {}
    for q, t in enumerate(t_grid):
        k = int(np.argmax(mid[:, q]))
        m = float(mid[k, q])
        value[t] = m + up + down
        se[t] = math.sqrt(se_b(m) ** 2 + se_b(up) ** 2 + se_b(down) ** 2)
    extras = {"p_up": up, "p_down": down, "absorb_T": absorb_T}
    return {"value": value, "se": se, "extras": extras}


# ---------------------------------------------------------------------------
# decay shapes in the coexistence regime

@dataclass
class DecayFit:
    t: np.ndarray
    a: np.ndarray
    p_mid: np.ndarray
    t_w1: np.ndarray
    w1: np.ndarray
    slope_p: float
    r2_p: float
    slope_w: float
    r2_w: float


def _loglin(t, v):
    y = np.log(v)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float((resid ** 2).sum()) / ss if ss > 0 else 0.0
    return float(coef[0]), r2


def coexistence_decay(cfg: ModelConfig, t_grid, N: int, seed: int = 0, x_grid=(0.25, 0.5, 0.75),
                      y_grid=None, ell: float | None = None, scheme: Scheme | None = None,
                      t_grid_w1=None):
    """Log-linear fits of sup_y P_y(Y_t in [a_t, 1-a_t]) with a_t = e^{-ell t}
    and of sup_x W1(rho_{x,t}, proxy) against t.  ell defaults to half of
    min(C0, C1); a_t is capped just below 1/2.

    W1 reaches its Monte Carlo floor (about N^-1/2) much earlier than p_mid
    reaches zero, so it may be fitted on its own, shorter grid ``t_grid_w1``.
    """
    check_regime(cfg)
    C0, C1 = coexistence_constants(cfg)
    if not (C0 > 0 and C1 > 0):
        raise ValueError(f"coexistence regime needs C0, C1 > 0 (got {C0}, {C1})")
    ell = ell if ell is not None else 0.5 * min(C0, C1)
    t = np.array(sorted(float(s) for s in t_grid))
    a = np.minimum(np.exp(-ell * t), 0.499)
    y_grid = list(y_grid) if y_grid is not None else [0.1 * i for i in range(1, 10)]
    Y = sample_siegmund(cfg, y_grid, list(t), N, derive_seed(seed, "mid"), scheme)
    p_mid = np.array([((Y[:, :, q] >= a[q]) & (Y[:, :, q] <= 1 - a[q])).mean(axis=0).max()
                      for q in range(len(t))])
    tw = t if t_grid_w1 is None else np.array(sorted(float(s) for s in t_grid_w1))
    proxy = sample_law(cfg, 0.5, tw[-1] + 10.0 / min(C0, C1), N, derive_seed(seed, "proxy"), scheme)
    X = sample_law(cfg, list(x_grid), list(tw), N, derive_seed(seed, "rho"), scheme)
    w1 = np.array([max(wp_empirical(X[:, k, q], proxy) for k in range(len(x_grid)))
                   for q in range(len(tw))])
    sp, rp = _loglin(t, p_mid) if np.all(p_mid > 0) else (math.nan, math.nan)
    sw, rw = _loglin(tw, w1)
    return DecayFit(t, a, p_mid, tw, w1, sp, rp, sw, rw)


# ---------------------------------------------------------------------------
# Siegmund distribution function against randomised Bernstein coefficients

@dataclass
class RelDualsResult:
    sup_gap: float
    bound: float
    rows: list            # (x, t, lhs, rhs, joint_se)
    fprime_sup: float

    CSV_HEADER = "x,t,lhs,rhs,gap,se,bound"

    @property
    def passed(self):
        return all(abs(l - r) <= self.bound + 3 * s for _, _, l, r, s in self.rows)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for x, t, l, r, s in self.rows:
                fh.write(f"{x!r},{t!r},{l!r},{r!r},{abs(l - r)!r},{s!r},{self.bound!r}\n")


def _fprime_sup(F, grid=20001):
    xs = np.linspace(0, 1, grid)
    v = np.array([F(x) for x in xs])
    return float(np.max(np.abs(np.diff(v))) * (grid - 1))


def _inverse_cdf(F, u):
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    Fv = np.vectorize(F)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = Fv(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


def relduals_gap(cfg: ModelConfig, F, n: int, xt_grid, N: int, seed: int = 0,
                 fprime_sup: float | None = None, ppf=None, scheme: Scheme | None = None,
                 labeled: bool = False) -> RelDualsResult:
    """Largest |P_F(Y_t <= x) - E[V_t(beta_x(L_t))]| over the (x, t) pairs and
    the bound ||F'|| / (2 sqrt(n)).

    The left side starts Y from F (inverse CDF ``ppf``, bisection on F when
    absent).  The right side runs graphs from n lines with
    V_0 = (F(i/n))_i and reads V_t at an independent Binomial(L_t, x) index.
    ``labeled`` selects the coefficient mode (the labeled one is limited to
    small graphs).
    """
    check_regime(cfg)
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = [(float(x), float(t)) for x, t in xt_grid]
    if not pts:
        raise ValueError("empty grid")
    fs = fprime_sup if fprime_sup is not None else _fprime_sup(F)
    ts = sorted({t for _, t in pts})
    # left side
    u = stream(derive_seed(seed, "start"), 0).random(N)
    y0 = np.asarray(ppf(u), dtype=float) if ppf is not None else _inverse_cdf(F, u)
    y0 = np.clip(y0, 0.0, 1.0)
    Y = sample_siegmund_starts(cfg, y0, ts, derive_seed(seed, "siegmund"), scheme)  # (N, Q)
    # right side
    v0 = np.array([F(i / n) for i in range(n + 1)], dtype=float)
    xs = sorted({x for x, _ in pts})
    R = np.empty((N, len(ts), len(xs)))
    aseed = derive_seed(seed, "asg")
    for i in range(N):
        rng = stream(aseed, i)
        h = simulate_asg(cfg, n, ts[-1], rng=rng)
        if h.aborted:
            raise RuntimeError(f"graph {i} exceeded the event cap")
        states = coeff_process(h, v0, ts, cfg, labeled)
        for q, st in enumerate(states):
            L = st.dim - 1
            J = rng.binomial(L, xs)
            R[i, q] = st.coeffs[J]
    rows = []
    for x, t in pts:
        q, k = ts.index(t), xs.index(x)
        left = (Y[:, q] <= x).astype(float)
        right = R[:, q, k]
        se = math.hypot(left.std(ddof=1), right.std(ddof=1)) / math.sqrt(N)
        rows.append((x, t, float(left.mean()), float(right.mean()), se))
    sup_gap = max(abs(l - r) for _, _, l, r, _ in rows)
    return RelDualsResult(sup_gap, fs / (2 * math.sqrt(n)), rows, fs)


# ---------------------------------------------------------------------------
# recurrence

def recurrence_predicate(cfg: ModelConfig) -> bool:
    """Lambda([0, 1/2 + e]) > 0 for every e > 0, i.e. Lambda charges [0, 1/2]
    or the Beta part (whose support is all of [0,1]) is present."""
    if measure_mass(cfg.lam, 0.0, 0.5, True, True) > 0:
        return True
    return cfg.lam.beta is not None and cfg.lam.beta[0] > 0


@dataclass
class RecurrenceResult:
    rows: list                # (center, eta, window_start, window_end, frequency, n_traj)
    post_jump_visits: list    # per target: trajectories inside after their first jump
    predicate: bool
    n_traj: int

    CSV_HEADER = "target,eta,window_start,window_end,frequency,n_traj"

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for c, e, a, b, f, n in self.rows:
                fh.write(f"{c!r},{e!r},{a!r},{b!r},{f!r},{n}\n")


def recurrence_scan(cfg: ModelConfig, x0: float, targets, windows, N: int, seed: int = 0,
                    scheme: Scheme | None = None) -> RecurrenceResult:
    """Fraction of trajectories that enter (center - eta, center + eta)
    during each window [start, end], read on the recorded path (substep grid
    and jump times).  Also counts trajectories found inside a target after
    their first jump."""
    targets = [(float(c), float(e)) for c, e in targets]
    windows = [(float(a), float(b)) for a, b in windows]
    if not windows:
        raise ValueError("no windows")
    scheme, dt = _forward_prepare(cfg, scheme)
    dyn = forward_dynamics(cfg, scheme)
    T = max(b for _, b in windows)
    hits = np.zeros((len(targets), len(windows)), dtype=np.int64)
    post = [0] * len(targets)
    for i in range(N):
        _, paths = _engine.run_trajectory(dyn, x0, seed, i, T, dt, record=True)
        tt, vv, ev = paths[0]
        first = ev[0] if len(ev) else math.inf
        for j, (c, e) in enumerate(targets):
            inside = np.abs(vv - c) < e
            for w, (a, b) in enumerate(windows):
                sel = (tt >= a) & (tt <= b)
                if np.any(inside & sel):
                    hits[j, w] += 1
            if np.any(inside & (tt >= first)):
                post[j] += 1
    rows = [(c, e, a, b, float(hits[j, w] / N), N)
            for j, (c, e) in enumerate(targets) for w, (a, b) in enumerate(windows)]
    return RecurrenceResult(rows, post, recurrence_predicate(cfg), N)


# ---------------------------------------------------------------------------
# the Levy process L^b

def _lb_drift(cfg, b):
    return float(sigma_of(cfg.selection, 0.0)) - math.exp(-b) * sigma_c1_norm(cfg.selection)


def _env_log(r, b):
    d = (1 + r) ** 2 - (4 * r * math.exp(-b) if r > 0 else 0.0)
    return 0.5 * math.log(d)


def _mu_integral(cfg, fn):
    """int fn(r) |r|^-1 mu(dr) over (-1, 1)."""
    tot = 0.0
    for side in (1, -1):
        tot += integrate_measure(cfg.mu, lambda s, sd=side: fn(sd * s) / s, side, 0.0, 1.0)
    return tot


def levy_mean(cfg: ModelConfig, b: float) -> float:
    """E[L_1^b] = drift + int log(1-r) r^-2 Lambda(dr) + int jump |r|^-1 mu(dr)."""
    lam_term = _lam_log_term(cfg)
    if not math.isfinite(lam_term):
        return -math.inf
    return _lb_drift(cfg, b) - lam_term + _mu_integral(cfg, lambda r: _env_log(r, b))


def _psi_divergent(cfg, lam):
    if lam >= 0:
        return False
    if cfg.lam.beta is not None and cfg.lam.beta[0] > 0 and cfg.lam.beta[2] + lam <= 0:
        return True
    m = cfg.mu
    return m.beta is not None and m.beta[0] > 0 and m.beta_side < 0 and m.beta[2] + lam <= 0


def psi_b(cfg: ModelConfig, b: float, lam: float) -> float:
    """Laplace exponent log E[exp(lam L_1^b)]; inf where it diverges."""
    if _psi_divergent(cfg, lam):
        return math.inf
    # (1-r)^lam - 1 ~ -lam r near 0, so the integrand stays finite under dust
    f_lam = lambda r: math.expm1(lam * math.log1p(-r)) / r ** 2
    lam_part = integrate_measure(cfg.lam, f_lam, 1, 0.0, 1.0)
    mu_part = _mu_integral(cfg, lambda r: math.expm1(lam * _env_log(r, b)))
    return lam * _lb_drift(cfg, b) + lam_part + mu_part


@dataclass
class LevyReport:
    b: float
    E_L1: float
    psi: dict                 # lambda -> value (inf when divergent)
    inf_quantiles: dict       # q -> empirical q-quantile of inf_{s<=T} L_s
    tail_x: np.ndarray
    tail_prob: np.ndarray     # P(inf <= -x)
    mc_mean_L1: float
    mc_se_L1: float
    T: float
    n_traj: int

    @property
    def divergent(self):
        return [lam for lam, v in self.psi.items() if not math.isfinite(v)]


def _levy_sources(cfg, b, eps):
    """Jump sizes and rates with |r| > eps, plus the mean of what was dropped."""
    lam_src = mark_source(cfg.lam, 2, eps)
    mu_src = mark_source(cfg.mu, 1, eps)
    small = integrate_measure(cfg.lam, lambda r: math.log1p(-r) / r ** 2, 1, 0.0, eps, True, False)
    small += _mu_small(cfg, b, eps)
    return lam_src, mu_src, small


def _mu_small(cfg, b, eps):
    tot = 0.0
    for side in (1, -1):
        tot += integrate_measure(cfg.mu, lambda s, sd=side: _env_log(sd * s, b) / s, side,
                                 0.0, eps, True, False)
    return tot


def levy_drift_check(cfg: ModelConfig, b: float, lambda_grid, N: int, seed: int = 0,
                     T: float = 20.0, x_grid=(0.5, 1.0, 1.5, 2.0, 2.5),
                     quantiles=(0.01, 0.05, 0.1, 0.5), eps_trunc: float = 1e-3) -> LevyReport:
    """E[L_1^b] in closed form, psi_b on ``lambda_grid`` and the law of
    inf_{s<=T} L^b_s from N simulated paths (jumps below eps_trunc replaced
    by their mean)."""
    if b < math.log(2):
        raise ValueError("b must be >= log 2")
    check_regime(cfg)
    E = levy_mean(cfg, b)
    psi = {float(l): psi_b(cfg, b, float(l)) for l in lambda_grid}
    lam_src, mu_src, small = _levy_sources(cfg, b, eps_trunc)
    d = _lb_drift(cfg, b) + small
    r_lam, r_mu = lam_src.total, mu_src.total
    rate = r_lam + r_mu
    infs = np.empty(N)
    L1 = np.empty(N)
    for i in range(N):
        rng = stream(seed, i)
        k = int(rng.poisson(rate * T)) if rate > 0 else 0
        times = np.sort(rng.random(k)) * T
        from_lam = rng.random(k) < (r_lam / rate if rate > 0 else 0.0)
        jumps = np.empty(k)
        nl = int(from_lam.sum())
        jumps[from_lam] = np.log1p(-lam_src.sample(rng, nl))
        r = mu_src.sample(rng, k - nl)
        e_b = math.exp(-b)
        jumps[~from_lam] = 0.5 * np.log((1 + r) ** 2 - 4 * r * e_b * (r > 0))
        after = d * times + np.cumsum(jumps)
        before = after - jumps
        infs[i] = min(0.0, d * T + (after[-1] - d * times[-1] if k else 0.0),
                      before.min() if k else 0.0, after.min() if k else 0.0)
        L1[i] = d + jumps[times <= 1.0].sum()
    qs = {float(q): float(np.quantile(infs, q)) for q in quantiles}
    xg = np.asarray(x_grid, dtype=float)
    tail = np.array([np.mean(infs <= -x) for x in xg])
    return LevyReport(b, E, psi, qs, xg, tail, float(L1.mean()),
                      float(L1.std(ddof=1) / math.sqrt(N)), T, N)
