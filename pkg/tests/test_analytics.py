import math

import numpy as np
import pytest

from wfdual.analytics import (BoundReport, coexistence_constants, coexistence_decay, levy_drift_check,
                              levy_mean, psi_b, rate_C, recurrence_predicate, recurrence_scan,
                              relduals_gap, sh_gamma, sh_gamma_sup, stationarity_report, tail_exponent,
                              wh_gamma)
from wfdual.model_config import SelectionRepr, make_config


def _const_sigma(s0, c, **kw):
    return make_config({0.5: c}, selection=SelectionRepr.make(2, {2: s0}, {(2, 1): 1.0}), **kw)


def test_rate_C_shipped_configs(load):
    assert rate_C(load("kingman_mutation")) == 2.0
    assert rate_C(load("full")) == pytest.approx(0.8, abs=1e-12)
    assert rate_C(load("stationarity")) == 1.0


def test_tail_exponent_cases():
    assert tail_exponent(make_config({0.0: 1.0}).lam) == 0.0
    assert tail_exponent(make_config({"beta": (1.0, 0.5, 1.0)}).lam) == 0.5
    assert tail_exponent(make_config({0.5: 1.0}).lam) == math.inf


def test_coexistence_constants_atom():
    C0, C1 = coexistence_constants(_const_sigma(1.5, 0.25))
    assert C0 == pytest.approx(1.5 - 4 * 0.25 * math.log(2), abs=1e-12)
    assert C1 == pytest.approx(-1.5 - 4 * 0.25 * math.log(2), abs=1e-12)


def test_coexistence_constants_no_jumps(load):
    cfg = make_config(selection=SelectionRepr.make(3, {3: 0.75}, {(3, 1): 1.0, (3, 2): 0.0}))
    C0, C1 = coexistence_constants(cfg)
    assert C0 == pytest.approx(1.5, abs=1e-12) and C1 == pytest.approx(1.5, abs=1e-12)
    C0, C1 = coexistence_constants(load("coexistence"))
    assert C0 == pytest.approx(1.5 - math.log(2), abs=1e-12) and C1 == pytest.approx(C0, abs=1e-12)


def test_coexistence_constants_beta_riemann():
    c, a, b = 0.4, 2.5, 1.5
    cfg = make_config({"beta": (c, a, b)}, {0.3: 0.2, -0.4: 0.1},
                      selection=SelectionRepr.make(2, {2: 1.0}, {(2, 1): 1.0}))
    M = 1_000_000
    r = (np.arange(M) + 0.5) / M
    lam = np.sum(-np.log1p(-r) / r ** 2 * c * r ** (a - 1) * (1 - r) ** (b - 1)) / M
    mu0 = 0.2 * -math.log1p(0.3) / 0.3 + 0.1 * -math.log1p(-0.4) / 0.4
    C0, _ = coexistence_constants(cfg)
    assert C0 == pytest.approx(1.0 - mu0 - lam, rel=1e-6)


def test_coexistence_constants_divergent():
    assert coexistence_constants(make_config({0.0: 1.0})) == (-math.inf, -math.inf)
    assert coexistence_constants(make_config({"beta": (1.0, 0.8, 1.0)}))[0] == -math.inf


def test_integrability_predicates():
    cfg = make_config({"beta": (1.0, 1.5, 0.5)})
    assert wh_gamma(cfg, 3.0) and sh_gamma(cfg, 0.4) and not sh_gamma(cfg, 0.5)
    assert sh_gamma_sup(cfg) == 0.5
    assert sh_gamma_sup(make_config({0.5: 1.0})) == math.inf


def test_bound_report_at_time_zero(load):
    rep = stationarity_report(load("stationarity"), [0.5], [0.0], 2000, seed=1, boot=20)
    row = rep.rows[0]
    assert row.bound == 3.0 and row.verdict == "pass"
    # the stationary law here is uniform, at W1 distance 1/4 from a point mass at 1/2
    assert abs(row.empirical - 0.25) <= 3 * row.se


def test_bound_report_metrics_and_csv(load, tmp_path):
    cfg = load("stationarity")
    for metric, check in [("wp:2", lambda b, t: b == pytest.approx((3 * math.exp(-t / 3)) ** 0.5)),
                          ("lp", lambda b, t: b == pytest.approx((3 * math.exp(-t / 3)) ** 0.5)),
                          ("radon", lambda b, t: b > 2 * math.exp(-t))]:
        rep = stationarity_report(cfg, [0.0, 1.0], [1.0, 3.0], 1000, metric=metric, seed=2, boot=10,
                                  scan_n_max=64, scan_N=100)
        assert len(rep.rows) == 4
        assert all(check(r.bound, r.t) for r in rep.rows)
        assert all(r.verdict in ("pass", "fail", "inconclusive") for r in rep.rows)
    rep.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == BoundReport.CSV_HEADER and len(lines) == 5
    assert len(rep.sup_over_x()) == 2


def test_bound_report_verdict_rule(load):
    rep = stationarity_report(load("stationarity"), [0.0, 0.5, 1.0], [2.0, 4.0], 3000, seed=3, boot=20)
    for r in rep.rows:
        assert (r.verdict == "pass") == (r.empirical <= r.bound + 3 * r.se)
    assert rep.passed


def test_bound_report_regime_errors(load):
    with pytest.raises(ValueError):
        stationarity_report(load("neutral_kingman"), [0.5], [1.0], 100)
    with pytest.raises(ValueError):
        stationarity_report(load("stationarity"), [0.5], [1.0], 100, mode="siegmund")
    with pytest.raises(ValueError):
        stationarity_report(load("stationarity"), [], [1.0], 100)
    with pytest.raises(ValueError):
        stationarity_report(load("stationarity"), [0.5], [1.0], 100, metric="tv")


def test_siegmund_mode_bound(load):
    rep = stationarity_report(load("coexistence"), [0.25, 0.75], [2.0, 6.0], 2000, seed=4,
                              mode="siegmund", boot=10, eps=0.1, absorb_T=20.0)
    assert rep.mode == "siegmund" and rep.C == pytest.approx(1.5 - math.log(2))
    assert rep.rows[0].bound >= rep.rows[1].bound
    assert rep.passed


def test_decay_shapes(load):
    fit = coexistence_decay(load("coexistence"), [2, 4, 6, 8], 1500, seed=5,
                            t_grid_w1=[0.5, 1.0, 2.0, 3.0])
    assert fit.slope_p < 0 and fit.slope_w < 0
    assert np.all(fit.a <= 0.499)


def test_relduals_at_time_zero(load):
    res = relduals_gap(load("relduals"), lambda x: x, 16, [(x, 0.0) for x in (0.25, 0.5, 0.75)], 3000,
                       seed=6, fprime_sup=1.0, ppf=lambda u: u)
    assert res.bound == 1 / 8
    for x, _, lhs, rhs, se in res.rows:
        assert abs(lhs - x) <= 3 * se + 1e-12 and abs(rhs - x) <= 4 * se


def test_relduals_bound_scaling(load):
    grid = [(0.5, 1.0)]
    b = [relduals_gap(load("relduals"), lambda x: x, n, grid, 50, fprime_sup=1.0).bound for n in (4, 16, 64)]
    assert b == [0.25, 0.125, 0.0625]


def test_relduals_estimates_fprime(load):
    F = lambda x: 3 * x ** 2 - 2 * x ** 3
    res = relduals_gap(load("relduals"), F, 9, [(0.5, 0.5)], 200, seed=1)
    assert res.fprime_sup == pytest.approx(1.5, rel=1e-4)
    assert res.bound == pytest.approx(1.5 / 6, rel=1e-4)


def test_relduals_needs_regime(load):
    with pytest.raises(ValueError):
        relduals_gap(load("mutation_c1"), lambda x: x, 4, [(0.5, 1.0)], 10)


def test_recurrence_absorbing():
    cfg = make_config({0.0: 1.0}, theta=(0.0, 0.5))
    res = recurrence_scan(cfg, 0.0, [(0.5, 0.1)], [(0, 1), (1, 2)], 50, seed=1)
    assert all(r[4] == 0.0 for r in res.rows)


def test_recurrence_mixing(load):
    res = recurrence_scan(load("stationarity"), 0.5, [(0.1, 0.05), (0.5, 0.05), (0.9, 0.05)],
                          [(10, 20), (20, 30)], 200, seed=2)
    assert res.predicate
    assert min(r[4] for r in res.rows) >= 0.9


def test_recurrence_counterexample(load, tmp_path):
    res = recurrence_scan(load("counterexample"), 0.5, [(0.5, 0.2)], [(0, 5)], 300, seed=3)
    assert not res.predicate
    assert res.post_jump_visits == [0]
    res.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == \
        "target,eta,window_start,window_end,frequency,n_traj"


def test_recurrence_predicate_cases():
    assert recurrence_predicate(make_config({0.3: 1.0}))
    assert recurrence_predicate(make_config({"beta": (1.0, 2.0, 2.0)}))
    assert not recurrence_predicate(make_config({0.9: 1.0}))


def test_levy_mean_closed_form():
    s0, c, b = 1.2, 0.3, 2.0
    cfg = _const_sigma(s0, c)
    assert levy_mean(cfg, b) == pytest.approx(s0 - math.exp(-b) * s0 - 4 * c * math.log(2), abs=1e-10)


def test_levy_mean_limit_is_C0(load):
    cfg = load("coexistence")
    assert levy_mean(cfg, 60.0) == pytest.approx(coexistence_constants(cfg)[0], abs=1e-8)


def test_psi_basics():
    cfg = _const_sigma(1.2, 0.3)
    assert psi_b(cfg, 2.0, 0.0) == 0.0
    h = 1e-5
    deriv = (psi_b(cfg, 2.0, h) - psi_b(cfg, 2.0, -h)) / (2 * h)
    assert deriv == pytest.approx(levy_mean(cfg, 2.0), rel=1e-6)
    beta = make_config({"beta": (1.0, 2.5, 2.0)})
    assert psi_b(beta, 2.0, -4.0) == math.inf and math.isfinite(psi_b(beta, 2.0, -1.0))


def test_levy_tail_shape(load):
    rep = levy_drift_check(load("coexistence"), 3.0, [-1.0, -0.5, 0.5], 3000, seed=7)
    assert rep.E_L1 > 0 and rep.divergent == []
    assert np.all(np.diff(rep.tail_prob) < 0)
    assert abs(rep.mc_mean_L1 - rep.E_L1) <= 3 * rep.mc_se_L1
    with pytest.raises(ValueError):
        levy_drift_check(load("coexistence"), 0.5, [], 10)
