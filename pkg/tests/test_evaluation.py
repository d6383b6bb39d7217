import math

import pytest

from cryptosieve.detectors import DetectorConfig, Direction, Method
from cryptosieve.evaluation import (CSV_COLUMNS, CurvePoint, MetricCurve, curves_from_json,
                                    curves_to_json, estimate_ced, estimate_pv, export_curves,
                                    parse_curves)
from cryptosieve.models import ChangePointPrior, SeededRng, ShiftModel

from oracles import chi2_cdf, chi2_quantile, shewhart_pv


def _shewhart(df=3, c=1.2):
    model = ShiftModel(df, c)
    return DetectorConfig(Method.SHEWHART, model, c * chi2_quantile(0.01, df),
                          direction=Direction.BELOW)


def test_ced_theta_one_keeps_every_run():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 2.0)
    curve = estimate_ced(cfg, [1], 3000, SeededRng(1))
    assert curve.point(1).n_eff == 3000


def test_ced_drops_early_alarms_and_is_nonnegative():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 2.0)
    curve = estimate_ced(cfg, [1, 20, 60], 3000, SeededRng(1))
    assert [p.t for p in curve.points] == [1, 20, 60]
    assert curve.point(60).n_eff < curve.point(20).n_eff < 3000
    assert all(p.value >= 0 for p in curve.points)


def test_shewhart_ced_matches_geometric_oracle():
    cfg = _shewhart()
    q = chi2_cdf(cfg.threshold, cfg.model.df)
    p = estimate_ced(cfg, [1], 50_000, SeededRng(8)).point(1)
    assert abs(p.value - (1.0 / q - 1.0)) < 3 * p.se


def test_ced_empty_point_is_marked():
    # Threshold so loose every run alarms at t = 1, so nothing survives to t = 5.
    cfg = DetectorConfig(Method.SHEWHART, ShiftModel(10, 1.2), 1e9, direction=Direction.BELOW)
    p = estimate_ced(cfg, [5], 200, SeededRng(0)).point(5)
    assert p.n_eff == 0 and math.isnan(p.value)


def test_pv_is_one_when_change_is_immediate():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 2.0)
    curve = estimate_pv(cfg, ChangePointPrior(1.0), range(1, 21), 5000, SeededRng(2))
    assert all(p.value == 1.0 for p in curve.points if p.n_eff)


@pytest.mark.parametrize("method", [Method.CUSUM, Method.SHIRYAEV_ROBERTS])
def test_pv_is_a_proportion(method):
    threshold = 2.0 if method is Method.CUSUM else 80.0
    cfg = DetectorConfig(method, ShiftModel(10, 1.2), threshold)
    curve = estimate_pv(cfg, ChangePointPrior(0.05), range(1, 51), 20_000, SeededRng(3))
    assert all(0.0 <= p.value <= 1.0 for p in curve.points if p.n_eff)
    assert all(p.n_eff <= 20_000 for p in curve.points)


@pytest.mark.parametrize("nu", [0.05, 0.10])
def test_shewhart_pv_matches_exact_recursion(nu):
    cfg = _shewhart()
    p_pre = chi2_cdf(cfg.threshold / cfg.model.c, cfg.model.df)
    p_post = chi2_cdf(cfg.threshold, cfg.model.df)
    exact = shewhart_pv(p_pre, p_post, nu, 20)
    curve = estimate_pv(cfg, ChangePointPrior(nu), [1, 2, 5, 10, 20], 100_000, SeededRng(4))
    for p in curve.points:
        want = exact[p.t - 1]
        assert abs(p.value - want) <= 3 * math.sqrt(want * (1 - want) / p.n_eff)


def test_se_halves_with_four_times_the_replications():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 2.0)
    small = estimate_ced(cfg, [1], 5000, SeededRng(5)).point(1).se
    large = estimate_ced(cfg, [1], 20_000, SeededRng(6)).point(1).se
    assert 0.5 / 1.5 <= large / small <= 0.5 * 1.5


def test_export_header_only():
    text = export_curves([MetricCurve("CED", "cusum", 255, 1.2)])
    assert text == ",".join(CSV_COLUMNS) + "\n"
    assert parse_curves(text) == []


def test_export_single_point():
    curve = MetricCurve("CED", "cusum", 255, 1.2, points=[CurvePoint(1, 4.2, 0.1, 999000)])
    lines = export_curves([curve]).splitlines()
    assert len(lines) == 2
    assert lines[1] == "CED,cusum,1.2,255,,1,4.2,0.1,999000"


def test_export_round_trip_full_precision():
    curves = [
        MetricCurve("CED", "shewhart", 3, 1.1, points=[CurvePoint(1, 1 / 3, 2 ** -30, 10),
                                                       CurvePoint(2, math.nan, math.nan, 0)]),
        MetricCurve("PV", "shiryaev-bayes", 10, 1.3, nu=0.05,
                    points=[CurvePoint(t, 0.1 * t / 7, 1e-17 * t, t) for t in range(1, 5)]),
    ]
    back = parse_curves(export_curves(curves))
    assert len(back) == 2
    for a, b in zip(curves, back):
        assert (a.metric, a.method, a.df, a.c, a.nu) == (b.metric, b.method, b.df, b.c, b.nu)
        for pa, pb in zip(a.points, b.points):
            assert pa.t == pb.t and pa.n_eff == pb.n_eff
            for x, y in ((pa.value, pb.value), (pa.se, pb.se)):
                assert (math.isnan(x) and math.isnan(y)) or x == y


def test_json_mirror_round_trip():
    cfg = DetectorConfig(Method.CUSUM, ShiftModel(10, 1.2), 2.0)
    curve = estimate_ced(cfg, [1, 2, 3], 500, SeededRng(7))
    back = curves_from_json(curves_to_json([curve]))[0]
    assert back == curve
