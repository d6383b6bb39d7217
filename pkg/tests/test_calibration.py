import math

import pytest

from cryptosieve.calibration import CalibrationResult, calibrate_threshold, estimate_arl0
from cryptosieve.detectors import DetectorConfig, Direction, Method
from cryptosieve.errors import CalibrationDiverged
from cryptosieve.models import SeededRng, ShiftModel
from cryptosieve.montecarlo import simulate_runs

from oracles import chi2_quantile


def test_bernoulli_shewhart_arl():
    model = ShiftModel(10, 1.2)
    c_low = model.c * chi2_quantile(0.01, model.df)
    cfg = DetectorConfig(Method.SHEWHART, model, c_low, direction=Direction.BELOW)
    est = estimate_arl0(cfg, 40_000, 10_000, SeededRng(11))
    assert est.censored == 0
    assert abs(est.arl0_hat - 100.0) < 3 * est.se


def test_infinite_threshold_censors_everything():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), math.inf)
    est = estimate_arl0(cfg, 500, 200, SeededRng(0))
    assert est.censored == 500
    assert est.arl0_hat == 200.0


def test_estimate_is_deterministic():
    cfg = DetectorConfig(Method.SHIRYAEV_ROBERTS, ShiftModel(10, 1.2), 80.0)
    a = estimate_arl0(cfg, 5000, 10_000, SeededRng(5))
    b = estimate_arl0(cfg, 5000, 10_000, SeededRng(5))
    assert a == b


def test_arl_monotone_in_threshold_under_common_numbers():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 3.0)
    runs = simulate_runs(cfg, 5000, 10_000, SeededRng(2), keep_records=True)
    arls = [runs.records.stopping_times(h)[0].mean() for h in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
    assert all(x <= y for x, y in zip(arls, arls[1:]))


@pytest.fixture(scope="module")
def cusum_pair():
    model = ShiftModel(3, 1.3)
    return [calibrate_threshold(Method.CUSUM, model, replications=40_000, rng=SeededRng(s))
            for s in (101, 202)]


def test_calibration_hits_tolerance(cusum_pair):
    for r in cusum_pair:
        assert 98.0 <= r.arl0_hat <= 102.0
        assert r.threshold_se > 0
        assert r.censored <= 0.01 * r.replications


def test_recalibration_self_consistent(cusum_pair):
    a, b = cusum_pair
    # Each threshold carries its own calibration noise (about one arl0_se of
    # implied ARL0) on top of the fresh re-estimate's sampling error.
    ea = estimate_arl0(a.to_config(), 40_000, 10_000, SeededRng(901))
    eb = estimate_arl0(b.to_config(), 40_000, 10_000, SeededRng(902))
    joint = math.sqrt(ea.se ** 2 + eb.se ** 2 + a.arl0_se ** 2 + b.arl0_se ** 2)
    assert abs(ea.arl0_hat - eb.arl0_hat) <= 3 * joint
    assert abs(a.threshold - b.threshold) <= 3 * math.hypot(a.threshold_se, b.threshold_se)


def test_calibration_is_deterministic():
    kw = dict(replications=8000, rng=SeededRng(3), tolerance=5.0)
    a = calibrate_threshold(Method.SHIRYAEV_BAYES, ShiftModel(10, 1.2), nu=0.05, **kw)
    b = calibrate_threshold(Method.SHIRYAEV_BAYES, ShiftModel(10, 1.2), nu=0.05, **kw)
    assert a == b
    assert a.to_json() == b.to_json()


def test_result_json_round_trip(cusum_pair):
    r = cusum_pair[0]
    back = CalibrationResult.from_json(r.to_json())
    assert back == r
    cfg = back.to_config()
    assert cfg.method is Method.CUSUM and cfg.threshold == r.threshold
    assert r.to_dict()["model"] == {"df": 3, "c": 1.3}


def test_diverges_when_bracket_cannot_grow():
    with pytest.raises(CalibrationDiverged):
        calibrate_threshold(Method.CUSUM, ShiftModel(10, 1.2), target_arl0=1e4,
                            replications=2000, max_expansions=1)


def test_diverges_when_tolerance_unreachable():
    with pytest.raises(CalibrationDiverged):
        calibrate_threshold(Method.CUSUM, ShiftModel(10, 1.2), replications=2000,
                            tolerance=1e-9, max_rounds=1)


def test_rejects_trivial_target():
    with pytest.raises(ValueError):
        calibrate_threshold(Method.CUSUM, ShiftModel(10, 1.2), target_arl0=1.0)
