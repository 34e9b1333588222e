import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from wfdual.asg_dual import (COAL, MUT, SEL, AsgEvent, AsgHistory, asg_oracle_poly, bernstein_duality_gap,
                             bernstein_pairing, coeff_process, coupled_u_infinity, monotone_asg_pair,
                             simulate_asg, u_infinity, write_coeff_csv)
from wfdual.line_dual import sample_L
from wfdual.model_config import SelectionRepr, make_config

XS = np.linspace(0, 1, 11)


def _random_cfg(rng):
    sel = SelectionRepr.make(3, {2: rng.uniform(0, 1), 3: rng.uniform(0, 0.5)},
                             {(2, 1): rng.uniform(), (3, 1): rng.uniform(), (3, 2): rng.uniform()})
    return make_config({"atoms": [(0.0, rng.uniform()), (0.4, rng.uniform())]},
                       {0.5: rng.uniform(), -0.3: rng.uniform()},
                       {0.6: rng.uniform(0, 0.5), -0.6: rng.uniform(0, 0.5)},
                       (rng.uniform(), rng.uniform()), sel)


def test_no_rates_no_events():
    assert simulate_asg(make_config(), 4, 10.0, seed=1).events == []


def test_mutation_only_kills_each_line_once():
    h = simulate_asg(make_config(theta=(1.0, 1.0)), 3, 100.0, seed=2)
    assert [e.kind for e in h.events] == [MUT] * 3
    assert h.line_count() == 0 and h.check()


def test_line_count_law_matches_line_dual(load):
    cfg = load("selection_k2")
    N, T, n0 = 10_000, 0.5, 3
    asg = np.array([simulate_asg(cfg, n0, T, seed=5, index=i).line_count() for i in range(N)])
    chain = sample_L(cfg, n0, [T], N, seed=6)[:, 0]
    top = int(np.quantile(np.concatenate([asg, chain]), 0.99))
    bins = np.arange(1, top + 2)
    table = np.array([np.bincount(np.minimum(v, top + 1), minlength=top + 2)[1:] for v in (asg, chain)])
    table = table[:, table.sum(axis=0) > 0]
    assert bins.size >= 3
    assert stats.chi2_contingency(table)[1] > 0.01


def test_empty_history_keeps_v0():
    h = AsgHistory(3, 2.0, [])
    v0 = [0.1, 0.5, 0.2, 0.9]
    for s in coeff_process(h, v0, [0.0, 1.0, 2.0]):
        assert np.allclose(s.coeffs, v0, rtol=0, atol=1e-15)
    assert asg_oracle_poly(h, [0, 0, 0, 1], 0.3) == pytest.approx(0.3 ** 3)


def test_single_a_mutation():
    h = AsgHistory(1, 1.0, [AsgEvent(0.5, MUT, (0,), 1, 0, mtype="a")])
    s = coeff_process(h, [0, 1], [1.0])[0]
    assert s.dim == 1 and s.coeffs[0] == 1.0


def test_pairwise_coalescence():
    h = AsgHistory(2, 1.0, [AsgEvent(0.5, COAL, (0, 1), 2, 1, survivor=0)])
    s = coeff_process(h, [0, 0, 1], [1.0])[0]
    assert np.allclose(s.coeffs, [0, 1])
    assert asg_oracle_poly(h, [0, 0, 1], 0.37) == pytest.approx(0.37)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.8])
def test_selective_branching(p):
    cfg = make_config(selection=SelectionRepr.make(2, {2: 1.0}, {(2, 1): p}))
    h = AsgHistory(1, 1.0, [AsgEvent(0.5, SEL, (0,), 1, 2, l=2, new_lines=(1,))])
    for labeled in (True, False):
        s = coeff_process(h, [0, 1], [1.0], cfg, labeled)[0]
        assert np.allclose(s.coeffs, [0, p, 1])
    assert asg_oracle_poly(h, [0, 1], XS, cfg) == pytest.approx(XS ** 2 + 2 * XS * (1 - XS) * p)


def test_selection_requires_cfg():
    h = AsgHistory(1, 1.0, [AsgEvent(0.5, SEL, (0,), 1, 2, l=2, new_lines=(1,))])
    with pytest.raises(ValueError):
        coeff_process(h, [0, 1], [1.0])
    with pytest.raises(ValueError):
        coeff_process(h, [0, 1, 1], [1.0])


@pytest.mark.parametrize("labeled", [True, False])
def test_oracle_agrees_on_random_histories(labeled):
    rng = np.random.default_rng(17)
    done = 0
    while done < 30:
        cfg = _random_cfg(rng)
        n0 = int(rng.integers(1, 5))
        h = simulate_asg(cfg, n0, rng.uniform(0.2, 1.5), seed=int(rng.integers(2 ** 31)))
        if max([n0] + [e.n_after for e in h.events]) > 8:
            continue
        done += 1
        v0 = rng.uniform(size=n0 + 1)
        got = coeff_process(h, v0, [h.T], cfg, labeled)[0].H(XS)
        assert np.max(np.abs(got - asg_oracle_poly(h, v0, XS, cfg, labeled))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n0=st.integers(1, 6), labeled=st.booleans())
def test_contraction_and_freeze(seed, n0, labeled):
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(rng)
    h = simulate_asg(cfg, n0, 3.0, seed=seed)
    assume(not labeled or max([n0] + [e.n_after for e in h.events]) <= 12)
    v0 = rng.uniform(-1, 1, size=n0 + 1)
    times = [e.time for e in h.events] + [3.0]
    states = coeff_process(h, v0, times, cfg, labeled)
    bound = np.max(np.abs(v0)) + 1e-12
    assert all(np.max(np.abs(s.coeffs)) <= bound for s in states)
    pos = coeff_process(h, np.abs(v0), times, cfg, labeled)
    assert all(s.coeffs.min() >= -1e-12 and s.coeffs.max() <= 1 + 1e-12 for s in pos)
    dims = [s.dim for s in states]
    if 1 in dims:
        k = dims.index(1)
        assert all(np.array_equal(s.coeffs, states[k].coeffs) for s in states[k:])


def test_history_text_and_check(load):
    h = simulate_asg(load("full"), 4, 1.0, seed=3)
    assert h.check()
    text = h.to_text().splitlines()
    assert text[1] == "time,kind,args" and len(text) == len(h.events) + 2


def test_coeff_csv(tmp_path, load):
    h = simulate_asg(load("full"), 3, 1.0, seed=3)
    states = coeff_process(h, [0, 0, 0, 1], [0.0, 1.0], load("full"))
    write_coeff_csv(states, [0.0, 1.0], tmp_path / "c.csv")
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0].startswith("t,dim,c0") and rows[1] == "0.0,4,0.0,0.0,0.0,1.0"


def test_duality_gap_at_zero(load):
    lhs, rhs, se = bernstein_duality_gap(load("full"), 0.3, [0, 0, 1], 0.0, 10)
    assert lhs == rhs == pytest.approx(0.09) and se == 0.0


def test_neutral_first_moment(load):
    lhs, rhs, se = bernstein_duality_gap(load("neutral_kingman"), 0.3, [0, 1], 1.0, 20_000, seed=3)
    assert rhs == pytest.approx(0.3)   # a single neutral line never changes
    assert abs(lhs - 0.3) <= 3 * se


def test_monotone_pair_equal_sizes(load):
    pair = monotone_asg_pair(load("full"), 3, 3, 2.0, seed=4)
    assert pair.full.events == pair.sub.events
    a, b = pair.coeffs([0.5, 2.0], load("full"))
    assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        monotone_asg_pair(load("full"), 2, 3, 1.0)


def test_monotone_pair_order(load):
    cfg = load("full")
    xs = np.linspace(0.1, 0.9, 9)
    for seed in range(150):
        pair = monotone_asg_pair(cfg, 4, 2, 1.5, seed=seed)
        pair.sub.check()
        times = sorted({e.time for e in pair.full.events} | {1.5})
        Vm, Vn = pair.coeffs(times, cfg)
        for a, b in zip(Vm, Vn):
            assert np.all(a.H(xs) <= b.H(xs) + 1e-12)


def test_u_infinity_flags_and_order(load):
    cfg = load("mutation_c1")
    vals, ok = u_infinity(cfg, [0, 1], 200, seed=1)
    assert ok.all() and set(np.unique(vals)) <= {0.0, 1.0}
    assert abs(vals.mean() - 0.5) <= 3 * vals.std(ddof=1) / math.sqrt(200)
    um, un, ok = coupled_u_infinity(cfg, 2, 1, 200, seed=2)
    assert ok.all() and np.all(um <= un)
