"""Stopping rules fed by the indicator stream.

All rules share one skeleton: update an alarm statistic ``a_t`` with each
observation and stop at the first ``t`` with ``a_t > C``.  The change being
watched for is a *decrease* in scale (cleartext ``c * chi2`` to ciphertext
``chi2``), so the per-observation log-likelihood ratio is::

    llr(u) = w * ln(c) - (c - 1) / (2 c) * u

with ``w = df / 2`` for the exact ratio of the two densities, or ``w = df``
for the ``FULL_DF`` convention.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np

from . import _kernels
from .errors import AlreadyStopped, BadObservation
from .models import ShiftModel


class Method(str, Enum):
    SHEWHART = "shewhart"
    CUSUM = "cusum"
    SHIRYAEV_ROBERTS = "shiryaev-roberts"
    SHIRYAEV_BAYES = "shiryaev-bayes"


class Direction(str, Enum):
    """Which tail of ``U`` a Shewhart chart alarms on."""

    BELOW = "below"
    ABOVE = "above"


class Drift(str, Enum):
    EXACT_LLR = "exact-llr"
    FULL_DF = "full-df"


def _enum(cls, value):
    return value if isinstance(value, cls) else cls(str(value).lower())


def llr_weight(df, drift=Drift.EXACT_LLR):
    return df / 2.0 if _enum(Drift, drift) is Drift.EXACT_LLR else float(df)


def llr_step(u: float, model: ShiftModel, drift=Drift.EXACT_LLR) -> float:
    """Log density ratio of one observation, post-change over pre-change."""
    c = model.c
    return llr_weight(model.df, drift) * math.log(c) - (c - 1.0) / (2.0 * c) * u


@dataclass(frozen=True)
class DetectorConfig:
    method: Method
    model: ShiftModel = field(default_factory=ShiftModel)
    threshold: float = math.inf
    nu: Optional[float] = None
    direction: Direction = Direction.BELOW
    drift: Drift = Drift.EXACT_LLR

    def __post_init__(self):
        object.__setattr__(self, "method", _enum(Method, self.method))
        object.__setattr__(self, "direction", _enum(Direction, self.direction))
        object.__setattr__(self, "drift", _enum(Drift, self.drift))
        object.__setattr__(self, "threshold", float(self.threshold))
        if math.isnan(self.threshold):
            raise ValueError("threshold must not be NaN")
        if self.method is Method.SHIRYAEV_BAYES:
            if self.nu is None or not 0.0 < self.nu < 1.0:
                raise ValueError("shiryaev-bayes needs a hazard nu in (0, 1)")

    def with_threshold(self, threshold: float) -> "DetectorConfig":
        return replace(self, threshold=threshold)

    @property
    def kind(self) -> int:
        if self.method is Method.SHEWHART:
            return _kernels.KIND_STATIC
        if self.method is Method.CUSUM:
            return _kernels.KIND_CUSUM
        return _kernels.KIND_LOGSR

    @property
    def log_scale(self) -> bool:
        return self.kind == _kernels.KIND_LOGSR

    @property
    def linear_map(self):
        """``(alpha, beta)`` with per-observation increment ``alpha + beta * u``."""
        if self.method is Method.SHEWHART:
            return 0.0, (-1.0 if self.direction is Direction.BELOW else 1.0)
        c = self.model.c
        alpha = llr_weight(self.model.df, self.drift) * math.log(c)
        if self.method is Method.SHIRYAEV_BAYES:
            alpha -= math.log1p(-self.nu)
        return alpha, -(c - 1.0) / (2.0 * c)

    def increments(self, u):
        alpha, beta = self.linear_map
        return alpha + beta * np.asarray(u, dtype=np.float64)

    # Thresholds on the scale the kernels compare against.
    def to_internal(self, threshold: float) -> float:
        if self.method is Method.SHEWHART and self.direction is Direction.BELOW:
            return -threshold
        if self.log_scale:
            return math.log(threshold) if threshold > 0 else -math.inf
        return threshold

    def from_internal(self, h: float) -> float:
        if self.method is Method.SHEWHART and self.direction is Direction.BELOW:
            return -h
        if self.log_scale:
            return math.exp(h) if h < 709.0 else math.inf
        return h

    @property
    def internal_threshold(self) -> float:
        return self.to_internal(self.threshold)

    def to_dict(self):
        return {
            "method": self.method.value,
            "model": {"df": self.model.df, "c": self.model.c},
            "threshold": self.threshold,
            "nu": self.nu,
            "direction": self.direction.value,
            "drift": self.drift.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            method=d["method"],
            model=ShiftModel(int(d["model"]["df"]), float(d["model"]["c"])),
            threshold=float(d["threshold"]),
            nu=d.get("nu"),
            direction=d.get("direction", Direction.BELOW),
            drift=d.get("drift", Drift.EXACT_LLR),
        )


@dataclass(frozen=True)
class DetectorState:
    """Alarm statistic after ``t`` observations.

    Shiryaev variants keep ``stat = log a_t`` so long pre-change runs cannot
    overflow; :attr:`a` converts back.
    """

    t: int = 0
    stat: float = 0.0
    alarmed: bool = False
    log_scale: bool = False

    @property
    def a(self) -> float:
        if not self.log_scale:
            return self.stat
        return math.exp(self.stat) if self.stat < 709.0 else math.inf


@dataclass(frozen=True)
class NoAlarm:
    """Returned by :func:`run_until_alarm` when the stream ends first."""

    consumed: int


def initial_state(config: DetectorConfig) -> DetectorState:
    return DetectorState(0, _kernels.initial_state(config.kind), False, config.log_scale)


def _log1pexp(s):
    if s > 0.0:
        return s + math.log1p(math.exp(-s))
    return math.log1p(math.exp(s))


def update(state: DetectorState, config: DetectorConfig, u: float) -> DetectorState:
    if state.alarmed:
        raise AlreadyStopped(f"detector already alarmed at t={state.t}")
    u = float(u)
    if not math.isfinite(u) or u < 0.0:
        raise BadObservation(f"indicator value must be finite and >= 0, got {u}")
    method = config.method
    if method is Method.SHEWHART:
        stat = -u if config.direction is Direction.BELOW else u
    else:
        step = llr_step(u, config.model, config.drift)
        if method is Method.CUSUM:
            stat = max(0.0, state.stat) + step
        else:
            if method is Method.SHIRYAEV_BAYES:
                step -= math.log1p(-config.nu)
            stat = _log1pexp(state.stat) + step
    alarmed = stat > config.internal_threshold
    return DetectorState(state.t + 1, stat, alarmed, config.log_scale)


def run_until_alarm(config: DetectorConfig, us: Iterable[float]) -> Union[int, NoAlarm]:
    """Stopping time ``T`` of ``config`` on ``us``; reads nothing past ``T``."""
    state = initial_state(config)
    for u in us:
        state = update(state, config, u)
        if state.alarmed:
            return state.t
    return NoAlarm(state.t)


def scan_stream(config: DetectorConfig, u, state: Optional[DetectorState] = None):
    """Vectorised detector pass over an array of indicator values.

    Returns ``(index, stats)``: the 0-based index of the first alarm within
    ``u`` (``-1`` if none) and the internal statistic after each observation
    up to and including that index.
    """
    s_in = initial_state(config).stat if state is None else state.stat
    return _kernels.first_passage(config.increments(u), config.kind,
                                  config.internal_threshold, s_in)
