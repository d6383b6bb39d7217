"""Replicated run-length simulation shared by calibration and evaluation.

Replications are grouped into fixed-size blocks.  Block ``b`` draws its
indicator values from ``rng.generator(0, b)`` and, under a random change
point, its change points from ``rng.generator(1, b)``.  Results therefore
depend only on the seed, stream and replication count, never on how many
worker threads ran the blocks.

Because an alarm statistic never looks at the threshold, one simulated path
answers "when would this replication have stopped?" for every threshold up
to the cap it was run to: the stopping time at ``h`` is the first time the
path sets a new maximum above ``h``.  With ``keep_records=True`` those
record highs are kept, which turns one simulation into an exact
common-random-numbers ARL curve.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .detectors import DetectorConfig
from .models import ChangePointPrior, SeededRng, theta_index

REPS_PER_BLOCK = 4096


@dataclass
class Records:
    """Record highs of every replication, CSR-style."""

    offsets: np.ndarray
    times: np.ndarray
    values: np.ndarray
    horizon: int

    def stopping_times(self, h: float):
        """Stopping times and censoring flags had the internal threshold been ``h``."""
        below = np.concatenate(([0], np.cumsum(self.values <= h)))
        start, end = self.offsets[:-1], self.offsets[1:]
        k = below[end] - below[start]
        hit = (start + k) < end
        stop = np.full(start.size, self.horizon, dtype=np.int64)
        stop[hit] = self.times[(start + k)[hit]]
        return stop, ~hit


@dataclass
class RunLengths:
    stop: np.ndarray
    censored: np.ndarray
    theta: np.ndarray
    horizon: int
    records: Optional[Records] = None

    @property
    def replications(self) -> int:
        return int(self.stop.size)

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())


def mean_and_se(values):
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def resolve_threads(threads: int) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def simulate_runs(config: DetectorConfig, replications: int, horizon: int, rng: SeededRng,
                  theta=None, prior: Optional[ChangePointPrior] = None,
                  h_cap: Optional[float] = None, floor: float = -math.inf,
                  keep_records: bool = False, threads: int = 1) -> RunLengths:
    """Run ``replications`` independent streams through ``config``.

    ``theta`` fixes the change point for every replication (``None`` means
    never), ``prior`` draws it per replication instead.  ``h_cap`` is the
    internal-scale threshold to stop at; it defaults to the config's own.
    """
    if replications < 1 or horizon < 1:
        raise ValueError("replications and horizon must be >= 1")
    if theta is not None and prior is not None:
        raise ValueError("give either a fixed theta or a prior, not both")
    h = config.internal_threshold if h_cap is None else float(h_cap)
    alpha, beta = config.linear_map
    fixed_theta = theta_index(theta)
    model = config.model
    n_blocks = -(-replications // REPS_PER_BLOCK)

    def run_block(b):
        n_b = min(REPS_PER_BLOCK, replications - b * REPS_PER_BLOCK)
        if prior is not None:
            th = rng.generator(1, b).geometric(prior.nu, size=n_b).astype(np.int64)
        else:
            th = np.full(n_b, fixed_theta, dtype=np.int64)
        out = _kernels.simulate(rng.generator(0, b), n_b, float(model.df), model.c, th,
                                alpha, beta, config.kind, h, floor, int(horizon),
                                keep_records)
        return th, out

    workers = min(resolve_threads(threads), n_blocks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, range(n_blocks)))
    else:
        parts = [run_block(b) for b in range(n_blocks)]

    theta_all = np.concatenate([p[0] for p in parts])
    stop = np.concatenate([p[1][0] for p in parts])
    censored = np.concatenate([p[1][1] for p in parts])
    records = None
    if keep_records:
        offs, shift = [np.zeros(1, dtype=np.int64)], 0
        for _, out in parts:
            offs.append(out[2][1:] + shift)
            shift += out[2][-1]
        records = Records(np.concatenate(offs),
                          np.concatenate([p[1][3] for p in parts]),
                          np.concatenate([p[1][4] for p in parts]),
                          int(horizon))
    return RunLengths(stop, censored, theta_all, int(horizon), records)
