"""Delay and predictive value of a calibrated stopping rule.

* conditional expected delay ``CED(t) = E[T - theta | T >= theta = t]``:
  fixed change at ``t``, runs that alarmed before ``t`` are discarded.
* predictive value ``PV(t) = P(theta <= t | T = t)`` with ``theta`` drawn
  from a geometric prior.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence


from .detectors import DetectorConfig
from .models import ChangePointPrior, SeededRng
from .montecarlo import mean_and_se, simulate_runs

CSV_COLUMNS = ("metric", "method", "c", "df", "nu", "t", "value", "se", "n_eff")
DEFAULT_NU_GRID = (0.01, 0.05, 0.10)
DEFAULT_THETA_GRID = tuple(range(1, 51))


@dataclass(frozen=True)
class CurvePoint:
    t: int
    value: float
    se: float
    n_eff: int


@dataclass
class MetricCurve:
    metric: str
    method: str
    df: int
    c: float
    nu: Optional[float] = None
    points: List[CurvePoint] = field(default_factory=list)
    threshold: Optional[float] = None
    replications: Optional[int] = None
    seed: Optional[int] = None
    censored: int = 0

    def point(self, t) -> CurvePoint:
        for p in self.points:
            if p.t == t:
                return p
        raise KeyError(t)

    def to_dict(self):
        d = asdict(self)
        d["points"] = [[p.t, _json_float(p.value), _json_float(p.se), p.n_eff] for p in self.points]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        pts = [CurvePoint(int(t), _unjson(v), _unjson(se), int(n))
               for t, v, se, n in d.pop("points")]
        return cls(points=pts, **d)


def _json_float(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def _unjson(x):
    return math.nan if x is None else float(x)


def estimate_ced(config: DetectorConfig, theta_values: Sequence[int], replications: int,
                 rng: SeededRng, horizon_after: int = 10_000, threads: int = 1) -> MetricCurve:
    """Conditional expected delay at each change point in ``theta_values``.

    Each change point gets its own sub-stream ``rng.child(theta)``.  Runs
    that never alarm within ``theta + horizon_after`` enter at that horizon
    and are tallied in ``censored``.
    """
    curve = MetricCurve("CED", config.method.value, config.model.df, config.model.c,
                        threshold=config.threshold, replications=replications, seed=rng.seed)
    for theta in sorted(int(t) for t in theta_values):
        if theta < 1:
            raise ValueError("change points are 1-indexed")
        runs = simulate_runs(config, replications, theta + horizon_after, rng.child(theta),
                             theta=theta, threads=threads)
        kept = runs.stop >= theta
        delay = runs.stop[kept] - theta
        curve.censored += int(runs.censored[kept].sum())
        value, se = mean_and_se(delay)
        curve.points.append(CurvePoint(theta, value, se, int(kept.sum())))
    return curve


def estimate_pv(config: DetectorConfig, prior: ChangePointPrior, t_values: Sequence[int],
                replications: int, rng: SeededRng, threads: int = 1) -> MetricCurve:
    """Fraction of alarms at ``t`` that come after the change, per ``t``."""
    t_values = sorted(int(t) for t in t_values)
    horizon = max(t_values)
    runs = simulate_runs(config, replications, horizon, rng, prior=prior, threads=threads)
    alarmed = ~runs.censored
    curve = MetricCurve("PV", config.method.value, config.model.df, config.model.c,
                        nu=prior.nu, threshold=config.threshold, replications=replications,
                        seed=rng.seed, censored=runs.n_censored)
    for t in t_values:
        at_t = alarmed & (runs.stop == t)
        n = int(at_t.sum())
        if n == 0:
            curve.points.append(CurvePoint(t, math.nan, math.nan, 0))
            continue
        pv = float((at_t & (runs.theta <= t)).sum()) / n
        curve.points.append(CurvePoint(t, pv, math.sqrt(pv * (1.0 - pv) / n), n))
    return curve


def _fmt(x):
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def export_curves(curves: Sequence[MetricCurve]) -> str:
    """CSV with one row per curve point, curves in the given order."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for curve in curves:
        for p in curve.points:
            writer.writerow([curve.metric, curve.method, _fmt(float(curve.c)), curve.df,
                             _fmt(None if curve.nu is None else float(curve.nu)), p.t,
                             _fmt(float(p.value)), _fmt(float(p.se)), p.n_eff])
    return out.getvalue()


def parse_curves(text: str) -> List[MetricCurve]:
    """Inverse of :func:`export_curves` for the fields the CSV carries."""
    curves: List[MetricCurve] = []
    index = {}
    for row in csv.DictReader(io.StringIO(text)):
        nu = float(row["nu"]) if row["nu"] else None
        key = (row["metric"], row["method"], row["c"], row["df"], row["nu"])
        if key not in index:
            index[key] = MetricCurve(row["metric"], row["method"], int(row["df"]),
                                     float(row["c"]), nu=nu)
            curves.append(index[key])
        index[key].points.append(CurvePoint(int(row["t"]), float(row["value"]),
                                            float(row["se"]), int(row["n_eff"])))
    return curves


def curves_to_json(curves: Sequence[MetricCurve]) -> str:
    return json.dumps([c.to_dict() for c in curves], indent=2) + "\n"


def curves_from_json(text: str) -> List[MetricCurve]:
    return [MetricCurve.from_dict(d) for d in json.loads(text)]
