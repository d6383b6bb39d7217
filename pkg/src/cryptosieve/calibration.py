"""Threshold calibration to a common in-control average run length.

ARL0 here is ``E[T]`` on a stream that never changes (every observation
drawn from the cleartext law).  Runs still going at ``horizon`` are
censored there and counted.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .detectors import DetectorConfig, Direction, Drift, Method
from .errors import CalibrationDiverged
from .models import SeededRng, ShiftModel
from .montecarlo import Records, mean_and_se, simulate_runs

log = logging.getLogger(__name__)

DEFAULT_TARGET = 100.0
DEFAULT_REPLICATIONS = 100_000


class Arl0Estimate(NamedTuple):
    arl0_hat: float
    se: float
    censored: int


@dataclass(frozen=True)
class CalibrationResult:
    method: str
    df: int
    c: float
    drift_convention: str
    direction: str
    nu: Optional[float]
    target_arl0: float
    threshold: float
    threshold_se: float
    arl0_hat: float
    arl0_se: float
    censored: int
    replications: int
    horizon: int
    seed: int
    stream_id: int = 0

    def to_config(self) -> DetectorConfig:
        return DetectorConfig(self.method, ShiftModel(self.df, self.c), self.threshold,
                              nu=self.nu, direction=self.direction, drift=self.drift_convention)

    def to_dict(self):
        d = asdict(self)
        flat = {k: d.pop(k) for k in ("method",)}
        flat["model"] = {"df": d.pop("df"), "c": d.pop("c")}
        flat.update(d)
        return flat

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        model = d.pop("model")
        return cls(df=int(model["df"]), c=float(model["c"]), **d)

    @classmethod
    def from_json(cls, text) -> "CalibrationResult":
        return cls.from_dict(json.loads(text))


def estimate_arl0(config: DetectorConfig, replications: int, horizon: int, rng: SeededRng,
                  threads: int = 1) -> Arl0Estimate:
    """Mean and standard error of the false-alarm run length, plus censored count."""
    runs = simulate_runs(config, replications, horizon, rng, threads=threads)
    mean, se = mean_and_se(runs.stop)
    return Arl0Estimate(mean, se, runs.n_censored)


def _arl_at(records: Records, h):
    stop, _ = records.stopping_times(h)
    return float(stop.mean())


def _solve(records: Records, target, lo, hi, iterations=200):
    """Smallest-gap threshold where the (monotone, stepwise) ARL curve crosses ``target``."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        arl = _arl_at(records, mid)
        if arl < target:
            lo = mid
        else:
            hi = mid
        if abs(arl - target) <= 1e-6 * target:
            return mid
    return hi


def _lower_bound(records: Records):
    if records.values.size == 0:
        return -1.0
    return float(records.values.min()) - 1.0


def _start(config: DetectorConfig, target):
    """Opening guess and step for the bracket search, on the internal scale."""
    df, c = config.model.df, config.model.c
    if config.method is Method.SHEWHART:
        spread = c * math.sqrt(2.0 * df)
        if config.direction is Direction.BELOW:
            return -c * df, spread
        return c * df, spread
    if config.method is Method.CUSUM:
        return 1.0, 1.0
    return math.log(target), 1.0


def calibrate_threshold(method, model: ShiftModel, target_arl0: float = DEFAULT_TARGET,
                        replications: int = DEFAULT_REPLICATIONS,
                        tolerance: Optional[float] = None, rng: Optional[SeededRng] = None,
                        horizon: Optional[int] = None, direction=Direction.BELOW,
                        drift=Drift.EXACT_LLR, nu: Optional[float] = None, threads: int = 1,
                        pilot_replications: int = 4000, max_expansions: int = 60,
                        max_rounds: int = 3) -> CalibrationResult:
    """Find the threshold whose ARL0 is ``target_arl0`` within ``tolerance``.

    Bracketing and bisection run on common random numbers (one recorded
    simulation per stage); the reported ARL0 comes from fresh streams at the
    chosen threshold.  If that estimate misses the tolerance the search is
    repeated with twice the replications, up to ``max_rounds`` times.
    """
    if target_arl0 <= 1.0:
        raise ValueError("target_arl0 must exceed 1")
    rng = SeededRng(0) if rng is None else rng
    tol = 0.02 * target_arl0 if tolerance is None else float(tolerance)
    horizon = int(100 * target_arl0) if horizon is None else int(horizon)
    base = DetectorConfig(method, model, math.inf, nu=nu, direction=direction, drift=drift)

    # Stage 1: expand a cap until a small pilot reaches the target.
    h, step = _start(base, target_arl0)
    pilot_horizon = min(horizon, int(20 * target_arl0))
    n_pilot = min(replications, pilot_replications)
    for _ in range(max_expansions):
        pilot = simulate_runs(base, n_pilot, pilot_horizon, rng.child(0), h_cap=h,
                              keep_records=True, threads=threads)
        if _arl_at(pilot.records, h) >= target_arl0:
            break
        h += step
        step *= 2.0
    else:
        raise CalibrationDiverged(f"no threshold reached ARL0 {target_arl0} for {base.method.value}")
    lo = _lower_bound(pilot.records)
    if _arl_at(pilot.records, h) >= 1.3 * target_arl0:
        cap = _solve(pilot.records, 1.3 * target_arl0, lo, h)
    else:
        cap = h
    pilot_h = _solve(pilot.records, target_arl0, lo, h)
    widen = max(abs(cap - pilot_h), 0.25 * step)

    reps = int(replications)
    for rnd in range(max_rounds):
        # Stage 2: one full-size recorded simulation, solved exactly.
        for _ in range(max_expansions):
            main = simulate_runs(base, reps, horizon, rng.child(1, rnd), h_cap=cap,
                                 keep_records=True, threads=threads)
            if _arl_at(main.records, cap) >= 1.15 * target_arl0:
                break
            cap += widen
            widen *= 2.0
        else:
            raise CalibrationDiverged("could not bracket the target on the main simulation")
        lo = _lower_bound(main.records)
        h_star = _solve(main.records, target_arl0, lo, cap)
        h_low = _solve(main.records, 0.9 * target_arl0, lo, cap)
        h_high = _solve(main.records, 1.1 * target_arl0, lo, cap)
        slope = (_arl_at(main.records, h_high) - _arl_at(main.records, h_low)) / max(h_high - h_low, 1e-300)

        # Stage 3: independent re-estimate at the chosen threshold.
        cfg = base.with_threshold(base.from_internal(h_star))
        est = estimate_arl0(cfg, reps, horizon, rng.child(2, rnd), threads=threads)
        se_internal = est.se / slope if slope > 0 else math.inf
        if base.log_scale:
            threshold_se = cfg.threshold * se_internal
        else:
            threshold_se = se_internal
        log.info("calibration %s c=%g df=%d round %d: threshold=%.6g arl0=%.3f+-%.3f",
                 base.method.value, model.c, model.df, rnd, cfg.threshold, est.arl0_hat, est.se)
        if est.censored > 0.01 * reps:
            log.warning("%d of %d calibration runs censored at horizon %d", est.censored, reps, horizon)
        if abs(est.arl0_hat - target_arl0) <= tol:
            return CalibrationResult(
                method=base.method.value, df=model.df, c=model.c,
                drift_convention=base.drift.value, direction=base.direction.value, nu=nu,
                target_arl0=float(target_arl0), threshold=cfg.threshold,
                threshold_se=float(threshold_se), arl0_hat=est.arl0_hat, arl0_se=est.se,
                censored=est.censored, replications=reps, horizon=horizon,
                seed=rng.seed, stream_id=rng.stream_id,
            )
        reps *= 2
    raise CalibrationDiverged(
        f"ARL0 estimate stayed outside {target_arl0} +- {tol} after {max_rounds} rounds")
