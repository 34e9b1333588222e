import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wfdual.line_dual import (SurvivalStats, drift_value, gamma_scan, generator_row, drift_bound_check,
                              sample_L, sup_EL1_scan, survival_stats)
from wfdual.model_config import SelectionRepr, make_config, rate_C

MUT = make_config(theta=(1.0, 1.0))
KINGMAN = make_config({0.0: 1.0})
BETA_HALF = make_config({"beta": (1.0, 0.5, 1.5)})


def test_row_examples():
    assert generator_row(MUT, 3).entries == ((2, 6.0),)
    assert generator_row(KINGMAN, 4).entries == ((3, 6.0),)
    cfg = make_config(selection=SelectionRepr.make(3, {3: 2.0}))
    assert generator_row(cfg, 5).entries == ((7, 10.0),)


def test_row_zero_is_empty(load):
    row = generator_row(load("full"), 0)
    assert row.entries == () and row.total_rate == 0.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 60), name=st.sampled_from(["full", "coexistence", "stationarity", "beta_coalescent"]))
def test_row_invariants(load, n, name):
    row = generator_row(load(name), n)
    targets = [t for t, _ in row.entries]
    assert len(set(targets)) == len(targets) and n not in targets
    assert all(r > 0 for _, r in row.entries)
    assert row.total_rate == pytest.approx(sum(r for _, r in row.entries))


def test_drift_value_kingman_mutation(load):
    cfg = load("kingman_mutation")
    for n in range(0, 30):
        assert drift_value(cfg, n) == pytest.approx(-n * (n - 1) / 2 - 2 * n, abs=1e-9)


@pytest.mark.parametrize("name", ["full", "mutation_c1", "kingman_mutation", "counterexample",
                                  "stationarity", "beta_coalescent"])
def test_drift_bound(load, name):
    cfg = load(name)
    assert rate_C(cfg) > 0
    assert drift_bound_check(cfg, 200) == []


@pytest.mark.parametrize("name", ["neutral_kingman", "mutation_c1", "beta_coalescent"])
def test_superlinear_drift_exists(load, name):
    found = gamma_scan(load(name), 1000)
    assert found is not None and found[0] > 1


def test_survival_mutation_only():
    N = 4000
    st_ = survival_stats(MUT, 5, [0.25, 0.5], N, seed=1)
    for s in st_:
        assert abs(s.mean_L - 5 * math.exp(-2 * s.t)) <= 3 * s.se_mean


def test_survival_kingman_single_line():
    s = survival_stats(KINGMAN, 1, 3.0, 50, seed=2)
    assert s.p_alive == 1.0 and s.mean_L == 1.0


def test_survival_deterministic_and_csv(load):
    a = survival_stats(load("full"), 4, 1.0, 200, seed=9)
    b = survival_stats(load("full"), 4, 1.0, 200, seed=9)
    assert a == b
    assert len(a.csv_row().split(",")) == len(SurvivalStats.CSV_HEADER.split(","))
    with pytest.raises(ValueError):
        survival_stats(load("full"), 0, 1.0, 10)


def test_survival_chain(load):
    cfg = load("stationarity")
    C = rate_C(cfg)
    for s in survival_stats(cfg, 5, [1.0, 2.0], 2000, seed=3):
        assert s.p_alive <= s.mean_L
        assert s.mean_L <= 5 * math.exp(-C * s.t) + 3 * s.se_mean


def test_explosion_guard_marks_aborted():
    cfg = make_config(selection=SelectionRepr.make(3, {3: 5.0}))
    L = sample_L(cfg, 5, [10.0], 3, seed=1, max_events=200)
    assert np.all(L == -1)


def test_scan_kingman_bounded():
    res = sup_EL1_scan(KINGMAN, 128, 300, seed=1, grid=[2, 8, 32, 128])
    assert res.trend == "bounded" and res.tail_condition
    assert res.rows[-1][3] < 4


def test_scan_mutation_only_unbounded():
    res = sup_EL1_scan(MUT, 256, 200, seed=1)
    assert res.trend == "unbounded" and not res.tail_condition
    assert res.rows[-1][1] == pytest.approx(256 * math.exp(-2), rel=0.1)


def test_scan_beta_bounded():
    res = sup_EL1_scan(BETA_HALF, 256, 200, seed=1)
    assert res.trend == "bounded" and res.tail_condition
