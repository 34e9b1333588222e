"""Line-counting process L of the Bernstein dual: an N0-valued chain absorbed
at 0, simulated event by event."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model_config import (ModelConfig, coal_rates, branch_rates, cmut_rates,
                           tail_exponent, rate_C)
from .rng import stream

MAX_EVENTS = 1_000_000


@dataclass(frozen=True)
class RateRow:
    from_: int
    entries: tuple      # ((to, rate), ...) sorted by target
    total_rate: float

    @property
    def targets(self):
        return np.array([t for t, _ in self.entries], dtype=np.int64)

    @property
    def rates(self):
        return np.array([r for _, r in self.entries])


def _contributions(cfg: ModelConfig, n: int):
    """All (target, rate) pairs before merging."""
    out = []
    if n <= 0:
        return out
    coal = coal_rates(cfg, n)
    for k in range(2, n + 1):
        out.append((n - k + 1, coal[k]))
    sel = cfg.selection
    for l in range(2, sel.kappa + 1):
        out.append((n + l - 1, n * sel.rate(l)))
    pos, neg = branch_rates(cfg, n)
    white, black = cmut_rates(cfg, n)
    for k in range(1, n + 1):
        out.append((n + k, pos[k] + neg[k]))
        out.append((n - k, white[k] + black[k]))
    out.append((n - 1, n * (cfg.theta_a + cfg.theta_A)))
    return out


@lru_cache(maxsize=8192)
def generator_row(cfg: ModelConfig, n: int) -> RateRow:
    """Row n of the rate matrix, duplicate targets merged, zero rates dropped."""
    merged = {}
    for to, r in _contributions(cfg, n):
        if r > 0:
            merged.setdefault(to, []).append(float(r))
    entries = tuple((to, math.fsum(rs)) for to, rs in sorted(merged.items()))
    return RateRow(n, entries, math.fsum(r for _, r in entries))


def drift_value(cfg: ModelConfig, n: int) -> float:
    """sum over the row of rate * (to - n)."""
    return math.fsum(r * (to - n) for to, r in generator_row(cfg, n).entries)


def drift_slack(cfg: ModelConfig, n: int) -> float:
    """Floating-point scale of drift_value: 1e-10 times the sum of the
    absolute contributions before any cancellation."""
    return 1e-10 * (math.fsum(abs(r * (to - n)) for to, r in _contributions(cfg, n)) + 1.0)


@lru_cache(maxsize=8192)
def _jump_table(cfg: ModelConfig, n: int):
    row = generator_row(cfg, n)
    if row.total_rate == 0:
        return row.targets, np.zeros(0), 0.0
    return row.targets, np.cumsum(row.rates) / row.total_rate, row.total_rate


class Explosion(RuntimeError):
    pass


def run_chain(cfg: ModelConfig, n0: int, times, rng, max_events=MAX_EVENTS):
    """Values of L at the sorted ``times`` for one trajectory."""
    times = np.sort(np.asarray(times, dtype=float))
    out = np.empty(len(times), dtype=np.int64)
    n, t, j, ev = int(n0), 0.0, 0, 0
    while j < len(times):
        targets, cum, total = _jump_table(cfg, n)
        if total == 0:
            out[j:] = n
            break
        t += rng.exponential(1.0 / total)
        while j < len(times) and times[j] < t:
            out[j] = n
            j += 1
        if j == len(times):
            break
        k = int(np.searchsorted(cum, rng.random(), side="right"))
        n = int(targets[min(k, len(targets) - 1)])
        ev += 1
        if ev > max_events:
            raise Explosion(f"more than {max_events} events before t={times[-1]}")
    return out


@dataclass
class SurvivalStats:
    n0: int
    t: float
    p_alive: float
    mean_L: float
    se_alive: float
    se_mean: float
    n_traj: int
    seed: int
    n_aborted: int = 0

    CSV_HEADER = "n0,t,p_alive,mean_L,se_alive,se_mean,n_traj,seed"

    def csv_row(self):
        return (f"{self.n0},{self.t!r},{self.p_alive!r},{self.mean_L!r},{self.se_alive!r},"
                f"{self.se_mean!r},{self.n_traj},{self.seed}")


def sample_L(cfg: ModelConfig, n0: int, times, N: int, seed: int = 0, max_events=MAX_EVENTS):
    """Array (N, len(times)) of L values; aborted runs are rows of -1."""
    out = np.empty((N, len(np.atleast_1d(times))), dtype=np.int64)
    for i in range(N):
        try:
            out[i] = run_chain(cfg, n0, np.atleast_1d(times), stream(seed, i), max_events)
        except Explosion:
            out[i] = -1
    return out


def survival_stats(cfg: ModelConfig, n0: int, t, N: int, seed: int = 0):
    """Monte Carlo P_n0(L_t != 0) and E_n0[L_t]; one SurvivalStats per t
    (a single one for scalar t).  Aborted runs are excluded and counted."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(ts)
    L = sample_L(cfg, n0, ts[order], N, seed)
    ok = L[:, 0] >= 0
    n_ok = int(ok.sum())
    res = [None] * len(ts)
    for col, j in enumerate(order):
        v = L[ok, col].astype(float)
        alive = (v > 0).astype(float)
        se = lambda a: float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
        res[j] = SurvivalStats(n0, float(ts[j]), float(alive.mean()), float(v.mean()),
                               se(alive), se(v), n_ok, seed, N - n_ok)
    return res[0] if np.ndim(t) == 0 else res


@dataclass
class ScanResult:
    rows: list            # (n, mean_L1, se, running_max)
    slope: float          # log-log slope over the upper half of the grid
    trend: str            # "bounded" or "unbounded"
    tail_condition: bool  # tail exponent of Lambda below 1

    @property
    def max_mean(self):
        return max(r[1] for r in self.rows)


def geometric_grid(n_max: int, factor: int = 4):
    grid, n = [], 1
    while n <= n_max:
        grid.append(n)
        n *= factor
    if grid[-1] != n_max:
        grid.append(n_max)
    return grid


def sup_EL1_scan(cfg: ModelConfig, n_max: int, N: int, seed: int = 0, grid=None) -> ScanResult:
    """E_n[L_1] on a geometric n-grid with the running max.

    The trend is called unbounded when E_n[L_1] still grows like n^0.5 or
    faster over the upper half of the grid.
    """
    grid = list(grid) if grid is not None else geometric_grid(n_max)
    rows, run = [], -math.inf
    for n in grid:
        st = survival_stats(cfg, n, 1.0, N, seed)
        run = max(run, st.mean_L)
        rows.append((n, st.mean_L, st.se_mean, run))
    upper = [r for r in rows if r[0] >= math.sqrt(grid[-1]) and r[1] > 0]
    if len(upper) >= 2:
        x = np.log([r[0] for r in upper])
        y = np.log([r[1] for r in upper])
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = 0.0
    return ScanResult(rows, slope, "unbounded" if slope >= 0.5 else "bounded",
                      tail_exponent(cfg.lam) < 1)


def gamma_scan(cfg: ModelConfig, n_hi: int = 1000, n0_max: int | None = None):
    """Largest gamma on a 0.01-grid in (1, 2) with drift_value(n) <= -n^gamma
    for every n in [n0, n_hi], together with the smallest such n0.
    Returns (gamma, n0), or None if even gamma = 1.01 fails."""
    n0_max = n0_max or n_hi // 10
    d = np.array([drift_value(cfg, n) for n in range(1, n_hi + 1)])
    ns = np.arange(1, n_hi + 1, dtype=float)
    for gamma in np.round(np.arange(1.99, 1.0, -0.01), 2):
        bad = np.nonzero(d > -ns ** gamma)[0]
        n0 = 1 if len(bad) == 0 else int(bad[-1]) + 2
        if n0 <= n0_max:
            return float(gamma), n0
    return None


def drift_bound_check(cfg: ModelConfig, n_max: int = 200):
    """List of n in 1..n_max where drift_value(n) > -C n beyond float slack."""
    C = rate_C(cfg)
    return [n for n in range(1, n_max + 1) if drift_value(cfg, n) > -C * n + drift_slack(cfg, n)]


def write_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SurvivalStats.CSV_HEADER + "\n")
        for r in rows:
            fh.write(r.csv_row() + "\n")
