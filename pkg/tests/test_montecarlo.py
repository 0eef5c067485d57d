import math

import numpy as np
import pytest

from bdqcd.cusum import cusum_path
from bdqcd.distributions import HypothesisSet
from bdqcd.errors import ConfigurationError, EstimationError
from bdqcd.montecarlo import (
    MetricsEstimate, acceptance_time, calibrated_h, estimate_delay, estimate_false_metric,
    estimate_worst_delay, run_trial, run_trials, sweep,
)
from bdqcd.scenario import AttackStrategy, FusionRule, Scenario, TrialStreams

HS1 = HypothesisSet.gaussian_means([0, 1], 1.0)
HS3 = HypothesisSet.gaussian_means([0, 1, 3], 1.0)


def sc1(**kw):
    base = dict(N=1, M=0, hypotheses=HS1, rule=FusionRule("simultaneous", d=1), h=4.0, nu=0,
                master_seed=3, trials=200)
    base.update(kw)
    return Scenario(**base)


def test_degenerate_equals_page_cusum():
    sc = sc1()
    for i in range(20):
        st = TrialStreams(sc.master_seed, i, 1)
        x = HS1[1].ppf(st.uniforms.rows(1, 500)[:, 0])
        path = cusum_path(x - 0.5)
        expect = int(np.argmax(path >= 4.0)) + 1
        assert run_trial(sc, i).first_alarm == expect


def test_huge_threshold_censored():
    sc = sc1(nu=math.inf, h=1e9, T_max=300, attack=AttackStrategy("silent_h0"))
    out = run_trial(sc, 0)
    assert out.censored and out.first_alarm is None


def test_deterministic_per_index():
    sc = sc1()
    assert run_trial(sc, 17) == run_trial(sc, 17)
    assert run_trials(sc, 10, start=5)[2] == run_trial(sc, 7)


def test_worker_count_does_not_change_results():
    sc = Scenario(N=3, M=1, hypotheses=HS3, rule=FusionRule("multishot", d=2), h=3.0, nu=0,
                  q_true=2, attack=AttackStrategy("reverse"), master_seed=8, trials=60)
    a = run_trials(sc, workers=1)
    b = run_trials(sc, workers=3)
    assert a == b


def test_delay_absent_le_silent_matched_seeds():
    base = Scenario(N=3, M=1, hypotheses=HS1, rule=FusionRule("simultaneous", d=2), h=4.0,
                    nu=0, master_seed=2, trials=300)
    absent = estimate_delay(base.with_(attack=AttackStrategy("absent")))
    silent = estimate_delay(base.with_(attack=AttackStrategy("silent_h0")))
    assert absent.mean <= silent.mean


def test_delay_all_censored_raises():
    with pytest.raises(EstimationError):
        estimate_delay(sc1(h=1e9, T_max=50, trials=5))


def test_false_metric_censoring_gives_horizon():
    sc = sc1(h=1e9, T_max=80, trials=5)
    est = estimate_false_metric(sc)
    assert est.mean == 80 and est.censor_fraction == 1.0 and est.lower_bound


def test_false_metric_m0_equals_plain_false_alarm():
    sc = sc1(h=3.0, T_max=100_000, trials=100)
    a = estimate_false_metric(sc)  # default always_alarm, but M=0
    b = estimate_false_metric(sc.with_(attack=AttackStrategy("absent")))
    assert a == b


def test_false_isolation_epochal():
    sc = Scenario(N=3, M=1, hypotheses=HS3, rule=FusionRule("multishot", d=2), h=3.0,
                  q_true=1, master_seed=4, trials=50, T_max=20_000)
    est = estimate_false_metric(sc, target=2)
    assert est.mean > 0 and est.n == 50
    with pytest.raises(ConfigurationError):
        estimate_false_metric(sc, target=1)


def test_worst_delay_picks_slowest_hypothesis():
    sc = Scenario(N=3, M=1, hypotheses=HS3, rule=FusionRule("simultaneous", d=3), h=3.0,
                  master_seed=1, trials=200)
    q, est = estimate_worst_delay(sc)
    assert q == 1  # I^1 = 0.5 < I^2 = 2


def test_sweep_singleton_matches_direct():
    sc = sc1(trials=100)
    rows = sweep(sc, "h", [4.0])
    assert len(rows) == 1
    assert rows[0].delay == estimate_delay(sc.with_(attack=AttackStrategy("silent_h0")))


def test_sweep_gamma_uses_calibration():
    sc = Scenario(N=3, M=1, hypotheses=HS1, rule=FusionRule("simultaneous", d=3), h=1.0,
                  master_seed=1, trials=50)
    rows = sweep(sc, "gamma", [1e2, 1e3])
    assert [r.h for r in rows] == [calibrated_h(sc, 1e2), calibrated_h(sc, 1e3)]
    assert rows[1].theory_delay == pytest.approx(math.log(1e3))
    assert rows[0].ratio == pytest.approx(rows[0].delay.mean / rows[0].theory_delay)


def test_sweep_d_axis_delay_increases():
    sc = Scenario(N=4, M=1, hypotheses=HS1, rule=FusionRule("simultaneous", d=2), h=4.0,
                  master_seed=1, trials=300)
    rows = sweep(sc, "d", [2, 3, 4])
    means = [r.delay.mean for r in rows]
    assert means == sorted(means)


def test_metrics_estimate_ci():
    est = MetricsEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert est.mean == 2.5
    assert est.ci_halfwidth == pytest.approx(1.96 * np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(EstimationError):
        MetricsEstimate.from_samples([])


def test_acceptance_time_full_vs_reduced_same_data():
    sc = Scenario(N=1, M=0, hypotheses=HS3, rule=FusionRule("simultaneous", d=1), h=5.0,
                  master_seed=0, q_true=2)
    t_full = acceptance_time(sc, 0, 2)
    t_red = acceptance_time(sc.with_(mode="reduced"), 0, 2)
    assert t_red <= t_full  # reduced row minima dominate full ones
    assert run_trial(sc, 0).first_alarm <= t_full
