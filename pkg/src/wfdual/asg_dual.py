"""Ancestral selection graph and the Bernstein coefficient process.

Lines carry integer ids.  The current lines form an ordered list; new lines
are appended and erased lines removed, so "smallest index" always refers to
the position in that list.

The coefficient process is computed from a history by pulling the sink score
back through the events.  In the default labeled mode the state is a table
g(mask) over the 2^L type assignments of the current lines, and
V(i) = mean of g over assignments with i lines of type a, which is the
conditional probability given the graph.  The exchangeable mode instead
applies the count-based linear maps of the Markov dual directly to V; both
agree in expectation over the graph, only the labeled mode is pathwise exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .line_dual import MAX_EVENTS
from .model_config import (ModelConfig, coal_rates, branch_rates, cmut_rates, rate_C, validate)
from .rng import stream

LABELED_MAX_LINES = 20

COAL, SEL, CBRANCH, MUT, CMUT = "coal", "sel", "cbranch", "mut", "cmut"


@dataclass(frozen=True)
class AsgEvent:
    time: float
    kind: str
    lines: tuple            # participants, in current-list order
    n_before: int
    n_after: int
    survivor: int = -1      # coalescence
    l: int = 0              # selective branching size
    sign: int = 0           # coordinated branching: +1 / -1
    mtype: str = ""         # mutations: "a" / "A"
    new_lines: tuple = ()   # ids created by the event

    def args(self):
        if self.kind == COAL:
            return f"{' '.join(map(str, self.lines))};survivor={self.survivor}"
        if self.kind == SEL:
            return f"{self.lines[0]};l={self.l};new={' '.join(map(str, self.new_lines))}"
        if self.kind == CBRANCH:
            return (f"{' '.join(map(str, self.lines))};sign={self.sign:+d};"
                    f"new={' '.join(map(str, self.new_lines))}")
        return f"{' '.join(map(str, self.lines))};type={self.mtype}"


@dataclass
class AsgHistory:
    n0: int
    T: float
    events: list
    seed: int = 0
    aborted: bool = False

    def line_count(self, t=None):
        n = self.n0
        for e in self.events:
            if t is not None and e.time > t:
                break
            n = e.n_after
        return n

    def final_lines(self):
        lines = list(range(self.n0))
        for e in self.events:
            lines = apply_event(lines, e)
        return lines

    def check(self):
        """Raise if times, counts or participants are inconsistent."""
        lines, last = list(range(self.n0)), 0.0
        for e in self.events:
            if e.time < last or len(lines) != e.n_before or e.n_before == 0:
                raise ValueError(f"inconsistent event {e}")
            if any(i not in lines for i in e.lines):
                raise ValueError(f"unknown participant in {e}")
            if e.kind == COAL and (len(e.lines) < 2 or e.survivor != e.lines[0]):
                raise ValueError(f"bad coalescence {e}")
            lines = apply_event(lines, e)
            if len(lines) != e.n_after:
                raise ValueError(f"count mismatch at {e}")
            last = e.time
        return True

    def to_text(self):
        out = [f"# n0={self.n0},T={self.T!r},seed={self.seed}", "time,kind,args"]
        out += [f"{e.time!r},{e.kind},{e.args()}" for e in self.events]
        return "\n".join(out) + "\n"


def apply_event(lines, e: AsgEvent):
    """Line list after the event."""
    if e.kind == COAL:
        gone = set(e.lines[1:])
        return [i for i in lines if i not in gone]
    if e.kind in (SEL, CBRANCH):
        return list(lines) + list(e.new_lines)
    gone = set(e.lines)
    return [i for i in lines if i not in gone]


# ---------------------------------------------------------------------------
# simulation

@lru_cache(maxsize=8192)
def _event_table(cfg: ModelConfig, n: int):
    """Categories (kind, size, sign/type) with cumulative probabilities and
    total rate for a graph with n lines."""
    cats, rates = [], []
    if n > 0:
        coal = coal_rates(cfg, n)
        for k in range(2, n + 1):
            cats.append((COAL, k, 0))
            rates.append(coal[k])
        sel = cfg.selection
        for l in range(2, sel.kappa + 1):
            cats.append((SEL, l, 0))
            rates.append(n * sel.rate(l))
        pos, neg = branch_rates(cfg, n)
        white, black = cmut_rates(cfg, n)
        for k in range(1, n + 1):
            cats += [(CBRANCH, k, 1), (CBRANCH, k, -1), (CMUT, k, 1), (CMUT, k, -1)]
            rates += [pos[k], neg[k], white[k], black[k]]
        cats += [(MUT, 1, 1), (MUT, 1, -1)]
        rates += [n * cfg.theta_a, n * cfg.theta_A]
    rates = np.array(rates, dtype=float)
    keep = rates > 0
    cats = [c for c, k in zip(cats, keep) if k]
    rates = rates[keep]
    total = float(rates.sum())
    cum = np.cumsum(rates) / total if total > 0 else np.zeros(0)
    return cats, cum, total


class _Builder:
    """Mutable line list and id counter used while sampling a graph."""

    def __init__(self, n0):
        self.lines = list(range(n0))
        self.next_id = n0

    def fresh(self, k):
        ids = tuple(range(self.next_id, self.next_id + k))
        self.next_id += k
        return ids

    def make(self, t, cat, pos):
        kind, k, s = cat
        lines = self.lines
        n = len(lines)
        part = tuple(lines[i] for i in sorted(pos))
        if kind == COAL:
            e = AsgEvent(t, COAL, part, n, n - k + 1, survivor=part[0])
        elif kind == SEL:
            e = AsgEvent(t, SEL, part, n, n + k - 1, l=k, new_lines=self.fresh(k - 1))
        elif kind == CBRANCH:
            e = AsgEvent(t, CBRANCH, part, n, n + k, sign=s, new_lines=self.fresh(k))
        else:
            e = AsgEvent(t, kind, part, n, n - k, mtype="a" if s > 0 else "A")
        self.lines = apply_event(lines, e)
        return e


def simulate_asg(cfg: ModelConfig, n0: int, T: float, seed: int = 0, index: int = 0,
                 max_events: int = MAX_EVENTS, rng=None) -> AsgHistory:
    """One graph on [0, T] started from n0 lines (stream (seed, index))."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    rng = rng if rng is not None else stream(seed, index)
    b = _Builder(n0)
    events, t = [], 0.0
    while True:
        n = len(b.lines)
        cats, cum, total = _event_table(cfg, n)
        if total == 0:
            break
        t += rng.exponential(1.0 / total)
        if t > T:
            break
        cat = cats[min(int(np.searchsorted(cum, rng.random(), side="right")), len(cats) - 1)]
        k = 1 if cat[0] in (SEL, MUT) else cat[1]
        pos = rng.choice(n, size=k, replace=False)
        events.append(b.make(t, cat, pos))
        if len(events) >= max_events:
            return AsgHistory(n0, T, events, seed, aborted=True)
    return AsgHistory(n0, T, events, seed)


# ---------------------------------------------------------------------------
# coefficient process

@dataclass
class CoeffState:
    dim: int
    coeffs: np.ndarray

    def H(self, x):
        return bernstein_pairing(self.coeffs, x)

    def csv_row(self, t):
        return f"{t!r},{self.dim}," + ",".join(repr(float(c)) for c in self.coeffs)


def bernstein_pairing(v, x):
    """H(x, v) = sum_i v_i C(n,i) x^i (1-x)^(n-i), n = len(v) - 1."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(v) - 1
    i = np.arange(n + 1)
    xe = x[..., None]
    pmf = _binom_row(n) * xe ** i * (1 - xe) ** (n - i)
    out = pmf @ v
    return out if out.ndim else float(out)


@lru_cache(maxsize=256)
def _binom_row(n):
    return np.array([math.comb(n, i) for i in range(n + 1)], dtype=float)


def _popcount(masks):
    m = masks.copy()
    c = np.zeros_like(m)
    while np.any(m):
        c += m & 1
        m >>= 1
    return c


@lru_cache(maxsize=64)
def _popcounts(n):
    pc = _popcount(np.arange(1 << n, dtype=np.int64))
    pc.flags.writeable = False
    return pc


class LabeledState:
    """Table g over assignments of the current lines (bit j = line at
    position j of the list is of type a)."""

    def __init__(self, n0, v0):
        self.lines = list(range(n0))
        self.g = np.asarray(v0, dtype=float)[_popcounts(n0)]

    def coeffs(self):
        n = len(self.lines)
        pc = _popcounts(n)
        sums = np.bincount(pc, weights=self.g, minlength=n + 1)
        return sums / _binom_row(n)

    def apply(self, e: AsgEvent, sel_p):
        post = apply_event(self.lines, e)
        if len(post) > LABELED_MAX_LINES:
            raise OverflowError(f"labeled table needs {len(post)} > {LABELED_MAX_LINES} lines")
        masks = np.arange(1 << len(post), dtype=np.int64)
        ppos = {lid: j for j, lid in enumerate(post)}
        bit = lambda lid: (masks >> ppos[lid]) & 1
        pre_bits = {}
        weights = None
        if e.kind == COAL:
            sb = bit(e.survivor)
            for lid in e.lines:
                pre_bits[lid] = sb
        elif e.kind == SEL:
            parent = e.lines[0]
            i = bit(parent) + sum(bit(q) for q in e.new_lines)
            p = np.asarray(sel_p[e.l])[i]
            pre_bits[parent] = None
            weights = p
        elif e.kind == CBRANCH:
            for c, q in zip(e.lines, e.new_lines):
                pre_bits[c] = (bit(c) | bit(q)) if e.sign > 0 else (bit(c) & bit(q))
        else:
            fixed = np.ones_like(masks) if e.mtype == "a" else np.zeros_like(masks)
            for lid in e.lines:
                pre_bits[lid] = fixed
        idx = np.zeros_like(masks)
        for j, lid in enumerate(self.lines):
            b = pre_bits[lid] if lid in pre_bits else bit(lid)
            if b is not None:
                idx |= b << j
        if weights is None:
            self.g = self.g[idx]
        else:
            j = self.lines.index(e.lines[0])
            self.g = weights * self.g[idx | (1 << j)] + (1 - weights) * self.g[idx]
        self.lines = post


class ExchangeableState:
    """Count-based maps acting on V directly."""

    def __init__(self, n0, v0):
        self.v = np.asarray(v0, dtype=float).copy()
        self.lines = list(range(n0))

    def coeffs(self):
        return self.v.copy()

    def apply(self, e: AsgEvent, sel_p):
        n, v = e.n_before, self.v
        n1 = e.n_after
        j = np.arange(n1 + 1)
        k = len(e.lines)
        if e.kind == COAL:
            w = (j / n1) * v[j + k - 1] + (1 - j / n1) * v[j]
        elif e.kind == SEL:
            l, p = e.l, sel_p[e.l]
            w = np.zeros(n1 + 1)
            for i in range(l + 1):
                h = _hyper_vec(i, n1, j, l)
                ok = h > 0
                jj = j[ok]
                w[ok] += h[ok] * (p[i] * v[jj - i + 1] + (1 - p[i]) * v[jj - i])
        elif e.kind == CBRANCH:
            w = np.zeros(n1 + 1)
            for b2 in range(k + 1):
                for b1 in range(k - b2 + 1):
                    s = j - 2 * b2 - b1
                    ok = (s >= 0) & (s <= n - k)
                    if not ok.any():
                        continue
                    b0 = k - b2 - b1
                    lw = (special.gammaln(k + 1) - special.gammaln(b2 + 1) - special.gammaln(b1 + 1)
                          - special.gammaln(b0 + 1) + b1 * math.log(2.0)
                          + _log_comb(n - k, s[ok]) - _log_comb(n1, j[ok]))
                    old = s[ok] + b2 + (b1 if e.sign > 0 else 0)
                    w[ok] += np.exp(lw) * v[old]
        else:
            shift = k if e.mtype == "a" else 0
            w = v[shift:shift + n1 + 1].copy()
        self.v = w
        self.lines = apply_event(self.lines, e)


def _log_comb(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _hyper_vec(i, N, K, n):
    """P(i successes) when drawing n of N items, K of them successes (K an array)."""
    K = np.asarray(K)
    ok = (i <= K) & (n - i <= N - K) & (i <= n)
    out = np.zeros(K.shape)
    if ok.any():
        Kk = K[ok]
        out[ok] = np.exp(_log_comb(Kk, i) + _log_comb(N - Kk, n - i) - _log_comb(N, n))
    return out


def coeff_process(h: AsgHistory, v0, query_times, cfg: ModelConfig | None = None,
                  labeled: bool = True):
    """CoeffState at each query time (V_t for sorted query times).

    ``cfg`` supplies the selection probabilities p_i^(l); it is required only
    when the history holds selective branchings.
    """
    v0 = np.asarray(v0.coeffs if isinstance(v0, CoeffState) else v0, dtype=float)
    if len(v0) != h.n0 + 1:
        raise ValueError(f"v0 has dimension {len(v0)}, history needs {h.n0 + 1}")
    sel_p = cfg.selection.p if cfg is not None else None
    if sel_p is None and any(e.kind == SEL for e in h.events):
        raise ValueError("selective branching needs cfg for p_i^(l)")
    state = LabeledState(h.n0, v0) if labeled else ExchangeableState(h.n0, v0)
    qs = np.atleast_1d(np.asarray(query_times, dtype=float))
    order = np.argsort(qs)
    out = [None] * len(qs)
    j = 0
    for e in h.events:
        while j < len(qs) and qs[order[j]] < e.time:
            c = state.coeffs()
            out[order[j]] = CoeffState(len(c), c)
            j += 1
        state.apply(e, sel_p)
    c = state.coeffs()
    while j < len(qs):
        out[order[j]] = CoeffState(len(c), c)
        j += 1
    return out


# ---------------------------------------------------------------------------
# brute-force oracle

ORACLE_MAX_LINES = 14


def asg_oracle_poly(h: AsgHistory, v0, x, cfg: ModelConfig | None = None, labeled: bool = True):
    """H(x, V_T) by explicit propagation of types from the sources to the sinks.

    Every type assignment of the L_T sources is enumerated with weight
    x^#a (1-x)^#A; configurations are pushed backwards through the events
    with the propagation rules, the selective-branching coin taken in
    expectation, and each sink configuration is scored by v0(#a).  With
    labeled=False the configuration law is made exchangeable before each
    event, which reproduces the count-based maps.
    """
    v0 = list(map(float, v0))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ids = h.final_lines()
    if len(ids) > ORACLE_MAX_LINES:
        raise ValueError(f"oracle bound exceeded: L_T = {len(ids)} > {ORACLE_MAX_LINES}")
    sel_p = cfg.selection.p if cfg is not None else None
    # a configuration is a frozenset of the ids of type a
    dist = {}
    for bits in range(1 << len(ids)):
        conf = frozenset(lid for j, lid in enumerate(ids) if bits >> j & 1)
        dist[conf] = x ** len(conf) * (1 - x) ** (len(ids) - len(conf))
    cur = list(ids)
    for e in reversed(h.events):
        if not labeled:
            dist = _symmetrize(dist, cur, x)
        new = {}
        pre = _lines_before(cur, e)
        for conf, w in dist.items():
            for pconf, p in _pull(conf, e, sel_p):
                if p:
                    new[pconf] = new.get(pconf, 0.0) + p * w
        dist, cur = new, pre
    if not labeled:
        dist = _symmetrize(dist, cur, x)
    total = sum(w * v0[len(conf)] for conf, w in dist.items())
    return total if np.ndim(total) and len(total) > 1 else float(np.ravel(total)[0])


def _lines_before(post, e):
    if e.kind == COAL:
        # the erased participants sit at their old positions; order is not
        # needed by the oracle, only membership
        return list(post) + [i for i in e.lines[1:]]
    if e.kind in (SEL, CBRANCH):
        gone = set(e.new_lines)
        return [i for i in post if i not in gone]
    return list(post) + list(e.lines)


def _pull(conf, e, sel_p):
    """Pre-event configurations with their probabilities."""
    if e.kind == COAL:
        s_a = e.survivor in conf
        rest = conf - set(e.lines)
        return [(frozenset(rest | set(e.lines)) if s_a else frozenset(rest), 1.0)]
    if e.kind == SEL:
        parent = e.lines[0]
        kids = [parent] + list(e.new_lines)
        i = sum(1 for q in kids if q in conf)
        rest = conf - set(kids)
        p = sel_p[e.l][i]
        return [(frozenset(rest | {parent}), p), (frozenset(rest), 1.0 - p)]
    if e.kind == CBRANCH:
        rest = set(conf) - set(e.lines) - set(e.new_lines)
        for c, q in zip(e.lines, e.new_lines):
            ca, qa = c in conf, q in conf
            if (ca or qa) if e.sign > 0 else (ca and qa):
                rest.add(c)
        return [(frozenset(rest), 1.0)]
    if e.mtype == "a":
        return [(frozenset(conf | set(e.lines)), 1.0)]
    return [(frozenset(conf), 1.0)]


def _symmetrize(dist, lines, x):
    from itertools import combinations
    n = len(lines)
    by = {}
    for conf, w in dist.items():
        by[len(conf)] = by.get(len(conf), 0.0) + w
    out = {}
    for i, w in by.items():
        share = w / math.comb(n, i)
        for c in combinations(lines, i):
            out[frozenset(c)] = share
    return out


# ---------------------------------------------------------------------------
# experiments

def sample_H(cfg: ModelConfig, v0, xs, ts, N: int, seed: int = 0, labeled: bool = True):
    """Array (N, len(ts), len(xs)) of H(x, V_t) over N graphs from n0 = len(v0)-1."""
    v0 = np.asarray(v0, dtype=float)
    n0 = len(v0) - 1
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty((N, len(ts), len(xs)))
    T = float(ts.max())
    for i in range(N):
        h = simulate_asg(cfg, n0, T, seed, i)
        if h.aborted:
            raise RuntimeError(f"graph {i} exceeded {MAX_EVENTS} events")
        states = coeff_process(h, v0, ts, cfg, labeled)
        for j, st in enumerate(states):
            out[i, j] = bernstein_pairing(st.coeffs, xs)
    return out


def bernstein_duality_table(cfg: ModelConfig, xs, v0, ts, N: int, seed: int = 0, scheme=None,
                            labeled: bool = True):
    """lhs, rhs, joint_se arrays of shape (len(ts), len(xs)).

    lhs = mean of H(X_t, v0) over forward paths, rhs = mean of H(x, V_t)
    over graphs; the two sides use unrelated streams.
    """
    from .forward_sim import sample_law
    from .rng import derive_seed
    errs = validate(cfg)
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    v0 = np.asarray(v0, dtype=float)
    lhs = np.empty((len(ts), len(xs)))
    se_l = np.empty_like(lhs)
    order = np.argsort(ts)
    if ts.max() == 0:
        base = bernstein_pairing(v0, xs)
        return np.tile(base, (len(ts), 1)), np.tile(base, (len(ts), 1)), np.zeros_like(lhs)
    X = sample_law(cfg, list(xs), ts[order], N, derive_seed(seed, "forward"), scheme)  # (N, K, Q)
    for q, j in enumerate(order):
        Hx = bernstein_pairing(v0, X[:, :, q])
        lhs[j] = Hx.mean(axis=0)
        se_l[j] = Hx.std(axis=0, ddof=1) / math.sqrt(N)
    R = sample_H(cfg, v0, xs, ts, N, derive_seed(seed, "asg"), labeled)
    rhs = R.mean(axis=0)
    se_r = R.std(axis=0, ddof=1) / math.sqrt(N)
    return lhs, rhs, np.hypot(se_l, se_r)


def bernstein_duality_gap(cfg: ModelConfig, x: float, v0, t: float, N: int, seed: int = 0,
                          scheme=None):
    """(lhs, rhs, joint_se) at one (x, t)."""
    if t == 0:
        v = bernstein_pairing(v0, x)
        return v, v, 0.0
    lhs, rhs, se = bernstein_duality_table(cfg, [x], v0, [t], N, seed, scheme)
    return float(lhs[0, 0]), float(rhs[0, 0]), float(se[0, 0])


# ---------------------------------------------------------------------------
# grey-line coupling

@dataclass
class CoupledPair:
    full: AsgHistory          # graph from m lines
    sub: AsgHistory           # its non-grey part, a graph from n lines
    grey0: tuple              # ids grey at time 0
    sub_ids: dict = field(default_factory=dict)   # full id -> sub id

    def coeffs(self, query_times, cfg=None):
        m, n = self.full.n0, self.sub.n0
        em = np.zeros(m + 1)
        em[m] = 1.0
        en = np.zeros(n + 1)
        en[n] = 1.0
        return (coeff_process(self.full, em, query_times, cfg),
                coeff_process(self.sub, en, query_times, cfg))


def monotone_asg_pair(cfg: ModelConfig, m: int, n: int, T: float, seed: int = 0,
                      index: int = 0) -> CoupledPair:
    """Graph from m lines whose last m - n lines start grey, and the graph
    formed by its non-grey lines.

    Non-grey lines are kept in front of grey ones, so a coalescence mixing
    both kinds has a non-grey survivor, and the non-grey part is itself a
    graph from n lines driven by the same marks.
    """
    if m < n or n < 1:
        raise ValueError("need m >= n >= 1")
    rng = stream(seed, index)
    grey = set(range(n, m))
    b = _Builder(m)
    events, t = [], 0.0
    while True:
        k_lines = len(b.lines)
        cats, cum, total = _event_table(cfg, k_lines)
        if total == 0:
            break
        t += rng.exponential(1.0 / total)
        if t > T:
            break
        cat = cats[min(int(np.searchsorted(cum, rng.random(), side="right")), len(cats) - 1)]
        k = 1 if cat[0] in (SEL, MUT) else cat[1]
        pos = rng.choice(k_lines, size=k, replace=False)
        e = b.make(t, cat, pos)
        if e.kind in (SEL, CBRANCH):
            parents = e.lines if e.kind == CBRANCH else e.lines * len(e.new_lines)
            for par, q in zip(parents, e.new_lines):
                if par in grey:
                    grey.add(q)
        # keep the non-grey block in front
        b.lines = [i for i in b.lines if i not in grey] + [i for i in b.lines if i in grey]
        events.append(e)
        if len(events) >= MAX_EVENTS:
            raise RuntimeError("coupled graph exceeded the event guard")
    full = AsgHistory(m, T, events, seed)
    sub = _restrict(full, n, set(range(n, m)))
    return CoupledPair(full, sub, tuple(range(n, m)))


def _restrict(full: AsgHistory, n: int, grey0: set) -> AsgHistory:
    """Events seen by the non-grey lines."""
    grey = set(grey0)
    lines = [i for i in range(full.n0) if i not in grey]
    out = []
    for e in full.events:
        ng = tuple(i for i in e.lines if i not in grey)
        before = len(lines)
        if e.kind == COAL:
            if len(ng) >= 2:
                ne = AsgEvent(e.time, COAL, ng, before, before - len(ng) + 1, survivor=ng[0])
                out.append(ne)
                lines = apply_event(lines, ne)
            # grey participants vanish; a grey survivor of an all-grey merge stays grey
        elif e.kind == SEL:
            if ng:
                ne = AsgEvent(e.time, SEL, ng, before, before + e.l - 1, l=e.l, new_lines=e.new_lines)
                out.append(ne)
                lines = apply_event(lines, ne)
            else:
                grey.update(e.new_lines)
        elif e.kind == CBRANCH:
            newq = tuple(q for c, q in zip(e.lines, e.new_lines) if c not in grey)
            grey.update(q for c, q in zip(e.lines, e.new_lines) if c in grey)
            if ng:
                ne = AsgEvent(e.time, CBRANCH, ng, before, before + len(ng), sign=e.sign, new_lines=newq)
                out.append(ne)
                lines = apply_event(lines, ne)
        else:
            if ng:
                ne = AsgEvent(e.time, e.kind, ng, before, before - len(ng), mtype=e.mtype)
                out.append(ne)
                lines = apply_event(lines, ne)
    return AsgHistory(n, full.T, out, full.seed)


def u_infinity(cfg: ModelConfig, v0, N: int, seed: int = 0, T_max: float | None = None):
    """U_infinity over N graphs: (values, absorbed flags).  Runs still alive
    at T_max = 50/C are flagged (value nan)."""
    v0 = np.asarray(v0, dtype=float)
    n0 = len(v0) - 1
    if T_max is None:
        C = rate_C(cfg)
        if C <= 0:
            raise ValueError("T_max needed when C <= 0")
        T_max = 50.0 / C
    vals = np.full(N, np.nan)
    ok = np.zeros(N, dtype=bool)
    for i in range(N):
        h = simulate_asg(cfg, n0, T_max, seed, i)
        if h.line_count() == 0 and not h.aborted:
            st = coeff_process(h, v0, [T_max], cfg)[0]
            vals[i] = st.coeffs[0]
            ok[i] = True
    return vals, ok


def coupled_u_infinity(cfg: ModelConfig, m: int, n: int, N: int, seed: int = 0,
                       T_max: float | None = None):
    """(U^m, U^n, absorbed) from N grey-line couplings started at e_m, e_n."""
    if T_max is None:
        T_max = 50.0 / rate_C(cfg)
    um, un = np.full(N, np.nan), np.full(N, np.nan)
    ok = np.zeros(N, dtype=bool)
    for i in range(N):
        pair = monotone_asg_pair(cfg, m, n, T_max, seed, i)
        if pair.full.line_count() == 0:
            a, b = pair.coeffs([T_max], cfg)
            um[i], un[i] = a[0].coeffs[0], b[0].coeffs[0]
            ok[i] = True
    return um, un, ok


def write_coeff_csv(states, times, path):
    width = max(s.dim for s in states)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,dim," + ",".join(f"c{i}" for i in range(width)) + "\n")
        for t, s in zip(times, states):
            fh.write(s.csv_row(t) + "\n")
