"""Block-by-block scan of a raw image for the onset of ciphertext.

The input is cut into consecutive, non-overlapping windows of
``block_size`` bytes in storage order.  Each window's indicator is fed to
the configured stopping rule; every alarm becomes an :class:`AlarmSegment`
pointing at the byte offset where brute-force effort should start.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .detectors import DetectorConfig, DetectorState, initial_state, scan_stream
from .errors import ScanReadError
from .indicator import FIXED_BYTES, AlphabetMode, barkman_u_rows, block_histograms

log = logging.getLogger(__name__)

MIN_BLOCK = 64
DEFAULT_BLOCK = 4096


@dataclass(frozen=True)
class RestartPolicy:
    """After an alarm either stop, or reset the detector and go on after ``skip`` blocks."""

    restart: bool = True
    skip: int = 0

    def __post_init__(self):
        if self.skip < 0:
            raise ValueError("skip must be >= 0")

    def to_dict(self):
        return {"mode": "restart" if self.restart else "stop", "skip": self.skip}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mode"] == "restart", int(d.get("skip", 0)))


STOP_AT_FIRST_ALARM = RestartPolicy(False)
RESTART_AFTER_ALARM = RestartPolicy(True, 0)


@dataclass(frozen=True)
class ScanConfig:
    detector: DetectorConfig
    block_size: int = DEFAULT_BLOCK
    alphabet: AlphabetMode = FIXED_BYTES
    restart: RestartPolicy = RESTART_AFTER_ALARM
    max_blocks: Optional[int] = None
    degenerate_fallback: bool = True
    keep_trace: bool = False
    # Blocks per read.  Alarms never depend on it; under the numpy backend the
    # statistics can differ from one batch size to another in the last bits.
    batch_blocks: int = field(default=256, compare=False)

    def __post_init__(self):
        if self.block_size < MIN_BLOCK:
            raise ValueError(f"block_size must be >= {MIN_BLOCK}")
        if self.max_blocks is not None and self.max_blocks < 1:
            raise ValueError("max_blocks must be >= 1")
        if self.batch_blocks < 1:
            raise ValueError("batch_blocks must be >= 1")

    def to_dict(self):
        return {
            "block_size": self.block_size,
            "alphabet": str(self.alphabet),
            "restart_policy": self.restart.to_dict(),
            "max_blocks": self.max_blocks,
            "degenerate_fallback": self.degenerate_fallback,
            "keep_trace": self.keep_trace,
            "detector": self.detector.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            detector=DetectorConfig.from_dict(d["detector"]),
            block_size=int(d["block_size"]),
            alphabet=AlphabetMode.parse(d["alphabet"]),
            restart=RestartPolicy.from_dict(d["restart_policy"]),
            max_blocks=d.get("max_blocks"),
            degenerate_fallback=bool(d.get("degenerate_fallback", True)),
            keep_trace=bool(d.get("keep_trace", False)),
        )


@dataclass(frozen=True)
class AlarmSegment:
    alarm_block: int
    byte_offset: int
    statistic_at_alarm: float
    method: str


@dataclass(frozen=True)
class TraceRow:
    t: int
    byte_offset: int
    u: Optional[float]
    a: Optional[float]
    alarmed: bool


@dataclass
class DetectionReport:
    path: Optional[str]
    size: Optional[int]
    sha256: str
    config: ScanConfig
    segments: List[AlarmSegment] = field(default_factory=list)
    blocks_scanned: int = 0
    bytes_consumed: int = 0
    tail_block_bytes: int = 0
    skipped_tail_bytes: int = 0
    degenerate_blocks: int = 0
    degenerate_skipped: int = 0
    trace: Optional[List[TraceRow]] = None

    @property
    def multi_segment_extension(self) -> bool:
        return self.config.restart.restart

    def to_dict(self):
        return {
            "input": {"path": self.path, "size": self.size, "sha256": self.sha256},
            "config": self.config.to_dict(),
            "segments": [asdict(s) for s in self.segments],
            "blocks_scanned": self.blocks_scanned,
            "bytes_consumed": self.bytes_consumed,
            "tail_block_bytes": self.tail_block_bytes,
            "skipped_tail_bytes": self.skipped_tail_bytes,
            "degenerate_blocks": self.degenerate_blocks,
            "degenerate_skipped": self.degenerate_skipped,
            "multi_segment_extension": self.multi_segment_extension,
            "trace": None if self.trace is None else [
                [r.t, r.byte_offset, _finite(r.u), _finite(r.a), r.alarmed] for r in self.trace],
        }

    @classmethod
    def from_dict(cls, d):
        trace = d.get("trace")
        return cls(
            path=d["input"]["path"], size=d["input"]["size"], sha256=d["input"]["sha256"],
            config=ScanConfig.from_dict(d["config"]),
            segments=[AlarmSegment(**s) for s in d["segments"]],
            blocks_scanned=d["blocks_scanned"], bytes_consumed=d["bytes_consumed"],
            tail_block_bytes=d["tail_block_bytes"], skipped_tail_bytes=d["skipped_tail_bytes"],
            degenerate_blocks=d["degenerate_blocks"], degenerate_skipped=d["degenerate_skipped"],
            trace=None if trace is None else [TraceRow(*row) for row in trace],
        )


def _finite(x):
    if x is None or not math.isfinite(x):
        return None
    return x


def _read_full(f, n, offset):
    parts, got = [], 0
    while got < n:
        try:
            chunk = f.read(n - got)
        except OSError as exc:
            raise ScanReadError(str(exc), offset + got) from exc
        if not chunk:
            break
        parts.append(chunk)
        got += len(chunk)
    return b"".join(parts)


def _indicators(rows, alphabet: AlphabetMode, fallback: bool):
    """Indicator per block plus masks (degenerate, fed-to-detector)."""
    counts = np.vstack([block_histograms(r[None, :]) if r.ndim == 1 else block_histograms(r)
                        for r in rows]) if rows else np.zeros((0, 256), np.int64)
    if alphabet.observed:
        u, _ = barkman_u_rows(counts, fixed=False)
        degenerate = np.isnan(u)
        if degenerate.any():
            if fallback:
                u_fixed, _ = barkman_u_rows(counts[degenerate], fixed=True)
                u = u.copy()
                u[degenerate] = u_fixed
                fed = np.ones(u.size, dtype=bool)
            else:
                fed = ~degenerate
        else:
            fed = np.ones(u.size, dtype=bool)
        return u, degenerate, fed
    size = alphabet.size
    if size > 256:
        counts = np.hstack([counts, np.zeros((counts.shape[0], size - 256), np.int64)])
    elif size < 256:
        if counts[:, size:].any():
            raise ValueError(f"byte value outside fixed alphabet of size {size}")
        counts = counts[:, :size]
    u, _ = barkman_u_rows(counts, fixed=True)
    return u, np.zeros(u.size, dtype=bool), np.ones(u.size, dtype=bool)


def scan_image(source, config: ScanConfig) -> DetectionReport:
    """Scan a path, ``"-"`` (standard input) or a binary file object."""
    path = None
    close = False
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path == "-":
            f = sys.stdin.buffer
        else:
            try:
                f = open(path, "rb")
            except OSError as exc:
                raise ScanReadError(str(exc), 0) from exc
            close = True
    else:
        f = source
        path = getattr(source, "name", None)
        path = path if isinstance(path, str) else None
    try:
        return _scan(f, path, config)
    finally:
        if close:
            f.close()


def _file_size(f):
    try:
        return os.fstat(f.fileno()).st_size
    except (AttributeError, OSError, io.UnsupportedOperation, ValueError):
        return None


def _scan(f, path, config: ScanConfig) -> DetectionReport:
    det = config.detector
    bs = config.block_size
    batch = 1 if not config.restart.restart else config.batch_blocks
    hasher = hashlib.sha256()
    report = DetectionReport(path, _file_size(f), "", config,
                             trace=[] if config.keep_trace else None)
    h_internal = det.internal_threshold
    stat = initial_state(det).stat
    skip_left = 0
    stopped = False
    while not stopped:
        want = batch
        if config.max_blocks is not None:
            want = min(want, config.max_blocks - report.blocks_scanned)
            if want <= 0:
                break
        data = _read_full(f, want * bs, report.bytes_consumed)
        if not data:
            break
        first_block = report.blocks_scanned + 1
        report.bytes_consumed += len(data)
        hasher.update(data)
        buf = np.frombuffer(data, dtype=np.uint8)
        n_full = len(data) // bs
        rows = []
        if n_full:
            rows.append(buf[: n_full * bs].reshape(n_full, bs))
        tail = len(data) - n_full * bs
        if tail >= MIN_BLOCK:
            rows.append(buf[n_full * bs:])
            report.tail_block_bytes = tail
        elif tail:
            report.skipped_tail_bytes = tail
        u, degenerate, fed = _indicators(rows, config.alphabet, config.degenerate_fallback)
        n = u.size
        report.blocks_scanned += n
        report.degenerate_blocks += int(degenerate.sum())
        report.degenerate_skipped += int((degenerate & ~fed).sum())
        a_out = np.full(n, np.nan)
        alarm_mask = np.zeros(n, dtype=bool)
        pos = 0
        while pos < n:
            if skip_left:
                k = min(skip_left, n - pos)
                fed[pos:pos + k] = False
                skip_left -= k
                pos += k
                continue
            idx = pos + np.flatnonzero(fed[pos:])
            if idx.size == 0:
                break
            i, stats = scan_stream(det, u[idx], DetectorState(stat=stat, log_scale=det.log_scale))
            a_out[idx[: stats.size]] = stats
            if i < 0:
                stat = float(stats[-1])
                break
            at = int(idx[i])
            alarm_mask[at] = True
            block_no = first_block + at
            report.segments.append(AlarmSegment(
                block_no, (block_no - 1) * bs,
                float(DetectorState(stat=float(stats[i]), log_scale=det.log_scale).a),
                det.method.value))
            if not config.restart.restart:
                stopped = True
                fed[at + 1:] = False
                break
            stat = initial_state(det).stat
            skip_left = config.restart.skip
            pos = at + 1
        if report.trace is not None:
            for j in range(n):
                a = None
                if fed[j] and not math.isnan(a_out[j]):
                    a = DetectorState(stat=float(a_out[j]), log_scale=det.log_scale).a
                uj = float(u[j])
                report.trace.append(TraceRow(first_block + j, (first_block + j - 1) * bs,
                                             None if math.isnan(uj) else uj, a,
                                             bool(alarm_mask[j])))
        if tail and tail < bs:
            break
    report.sha256 = hasher.hexdigest()
    if report.size is None:
        report.size = report.bytes_consumed
    if report.degenerate_skipped:
        log.warning("%d single-symbol blocks skipped", report.degenerate_skipped)
    return report


def write_report(report: DetectionReport, fmt: str = "json") -> bytes:
    fmt = fmt.lower()
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")
    if fmt in ("csv", "csv-trace"):
        if report.trace is None:
            raise ValueError("report was produced without a trace")
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "byte_offset", "U_t", "a_t", "alarmed"])
        for r in report.trace:
            w.writerow([r.t, r.byte_offset, "" if r.u is None else repr(r.u),
                        "" if r.a is None else repr(float(r.a)), int(r.alarmed)])
        return out.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def read_report(data: bytes) -> DetectionReport:
    return DetectionReport.from_dict(json.loads(data.decode("utf-8")))
