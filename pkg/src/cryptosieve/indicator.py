"""Block histograms and the Barkman crypto indicator.

The indicator of a block with ``N`` symbols spread over ``K`` cells with
counts ``O_i`` is::

    U = sum_i (K * O_i - N)**2 / (K * N)

which is Pearson's chi-square statistic against the uniform distribution.
Low values mean evenly used symbols, the signature of ciphertext.
"""

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from . import _kernels
from .errors import DegenerateAlphabet, EmptyBlock

_INT64_SAFE = 2 ** 62


@dataclass(frozen=True)
class AlphabetMode:
    """How many cells a block is tested against.

    ``size=None`` counts only symbols that occur in the block; a fixed size
    tests every block against the full alphabet, absent symbols included.
    """

    size: Optional[int] = None

    def __post_init__(self):
        if self.size is not None and self.size < 2:
            raise ValueError(f"fixed alphabet needs at least 2 symbols, got {self.size}")

    @property
    def observed(self):
        return self.size is None

    @classmethod
    def parse(cls, text):
        """Accept ``observed``, ``fixed`` (256 cells) or ``fixed:<n>``."""
        text = str(text).strip().lower()
        if text == "observed":
            return OBSERVED
        if text == "fixed":
            return FIXED_BYTES
        if text.startswith("fixed:"):
            return cls(int(text.split(":", 1)[1]))
        raise ValueError(f"unknown alphabet mode {text!r}")

    def __str__(self):
        return "observed" if self.observed else f"fixed:{self.size}"


OBSERVED = AlphabetMode(None)
FIXED_BYTES = AlphabetMode(256)


@dataclass(frozen=True)
class BlockHistogram:
    """Character counts of one block.

    ``symbols`` and ``counts`` are parallel arrays ordered by symbol id.  In
    observed mode only symbols with a non-zero count are stored; in fixed
    mode every symbol of the alphabet is present.
    """

    symbols: np.ndarray
    counts: np.ndarray
    mode: AlphabetMode = field(default=OBSERVED)

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    @property
    def k_kinds(self) -> int:
        return int(self.counts.size)

    @property
    def df(self) -> int:
        return self.k_kinds - 1

    def as_dict(self):
        return {int(s): int(c) for s, c in zip(self.symbols, self.counts)}


@dataclass(frozen=True)
class IndicatorSample:
    t: int
    u: float
    df: int


def _as_symbols(block):
    if isinstance(block, (bytes, bytearray, memoryview)):
        return np.frombuffer(block, dtype=np.uint8)
    arr = np.asarray(block)
    if arr.dtype == np.uint8:
        return arr.ravel()
    arr = arr.astype(np.int64, copy=False).ravel()
    if arr.size and arr.min() < 0:
        raise ValueError("symbol ids must be non-negative")
    return arr


def count_block(block, mode: AlphabetMode = OBSERVED) -> BlockHistogram:
    """Tally the symbols of ``block`` (bytes or a sequence of integer ids)."""
    symbols = _as_symbols(block)
    if symbols.size == 0:
        raise EmptyBlock()
    if mode.observed:
        ids, counts = np.unique(symbols, return_counts=True)
        return BlockHistogram(ids.astype(np.int64), counts.astype(np.int64), mode)
    if int(symbols.max()) >= mode.size:
        raise ValueError(f"symbol {int(symbols.max())} outside fixed alphabet of size {mode.size}")
    counts = np.bincount(symbols, minlength=mode.size).astype(np.int64)
    return BlockHistogram(np.arange(mode.size, dtype=np.int64), counts, mode)


def barkman_u(h: BlockHistogram) -> float:
    """Indicator value of one histogram, from exact integer residuals."""
    k = h.k_kinds
    if k < 2:
        raise DegenerateAlphabet()
    n = h.n_total
    if (k * n) ** 2 * k < _INT64_SAFE:
        resid = k * h.counts - n
        num = int(np.dot(resid, resid))
    else:
        num = sum((k * int(o) - n) ** 2 for o in h.counts)
    return num / (k * n)


def barkman_u_rows(counts, fixed=True):
    """Vectorised indicator for a stack of 256-cell histograms.

    Returns ``(u, k)``.  With ``fixed=False`` only non-empty cells count and
    rows with fewer than two kinds get ``u = nan``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.sum(axis=1)
    if fixed:
        k = np.full(counts.shape[0], counts.shape[1], dtype=np.int64)
        resid = k[:, None] * counts - n[:, None]
    else:
        present = counts > 0
        k = present.sum(axis=1)
        resid = np.where(present, k[:, None] * counts - n[:, None], 0)
    num = np.einsum("ij,ij->i", resid, resid)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = num / (k * n)
    if not fixed:
        u = np.where(k >= 2, u, np.nan)
    return u, k


def block_histograms(data):
    """256-cell histogram of every row of a 2-D uint8 array (hot kernel)."""
    return _kernels.byte_histograms(data)


def stream_indicators(source: Iterable, mode: AlphabetMode = OBSERVED) -> Iterator[IndicatorSample]:
    """Lazily turn blocks into indicator samples numbered from 1."""
    for t, block in enumerate(source, start=1):
        try:
            h = count_block(block, mode)
            u = barkman_u(h)
        except (EmptyBlock, DegenerateAlphabet) as exc:
            exc.block_index = t
            raise
        yield IndicatorSample(t, u, h.df)
