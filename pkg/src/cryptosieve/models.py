"""Pre- and post-change laws of the indicator and the change-point prior.

Cleartext blocks are modelled as ``c * X`` with ``X ~ chi2(df)`` and
``c > 1``; encrypted blocks as plain ``chi2(df)``.  The change point is
1-indexed: at ``theta`` the observation is already post-change.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ._kernels import THETA_NEVER

SHIFT_PRESETS = (1.1, 1.2, 1.3)


@dataclass(frozen=True)
class ShiftModel:
    df: int = 255
    c: float = 1.2

    def __post_init__(self):
        if int(self.df) != self.df or self.df < 1:
            raise ValueError(f"df must be a positive integer, got {self.df}")
        if not self.c > 1.0 or not math.isfinite(self.c):
            raise ValueError(f"shift c must be a finite value > 1, got {self.c}")


@dataclass(frozen=True)
class ChangePointPrior:
    """Geometric prior: P(theta = t) = nu * (1 - nu)**(t - 1)."""

    nu: float

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")


@dataclass(frozen=True)
class SeededRng:
    """A reproducible, addressable random stream.

    Generators are derived with :class:`numpy.random.SeedSequence` from
    ``seed`` and the spawn key ``(stream_id, *path)``; every call to
    :meth:`generator` with the same arguments restarts the same stream.
    """

    seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = ()

    def child(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream_id, self.path + tuple(int(k) for k in key))

    def generator(self, *key: int) -> np.random.Generator:
        spawn = (int(self.stream_id),) + self.path + tuple(int(k) for k in key)
        ss = np.random.SeedSequence(int(self.seed), spawn_key=spawn)
        return np.random.Generator(np.random.PCG64(ss))


def _gen(rng):
    return rng.generator() if isinstance(rng, SeededRng) else rng


def sample_chi2(df, rng, size=None):
    return _gen(rng).chisquare(df, size=size)


def sample_pre(model: ShiftModel, rng, size=None):
    return model.c * _gen(rng).chisquare(model.df, size=size)


def sample_post(model: ShiftModel, rng, size=None):
    return _gen(rng).chisquare(model.df, size=size)


def gen_stream(model: ShiftModel, theta, length: int, rng) -> np.ndarray:
    """Indicator values ``U_1..U_length`` with a change at ``theta``.

    ``theta=None`` or ``math.inf`` means no change within any horizon.  The
    underlying chi-square draws do not depend on ``theta``, so streams that
    differ only in the change point are coupled.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    base = _gen(rng).chisquare(model.df, size=length)
    th = theta_index(theta)
    t = np.arange(1, length + 1)
    return np.where(t < th, model.c * base, base)


def sample_theta(prior: ChangePointPrior, rng, size=None):
    return _gen(rng).geometric(prior.nu, size=size)


def theta_index(theta) -> int:
    """Map ``None``/``inf`` to the kernels' never-changes sentinel."""
    if theta is None or (isinstance(theta, float) and math.isinf(theta)):
        return THETA_NEVER
    theta = int(theta)
    if theta < 1:
        raise ValueError(f"theta must be >= 1, got {theta}")
    return theta
