"""Hot loops, in two interchangeable implementations.

Every kernel exists as a numba ``@njit`` function and as a pure-numpy
function with the same signature.  The numba path is used when numba imports
and ``CRYPTOSIEVE_DISABLE_NUMBA`` is unset (or ``0``); otherwise the numpy
path is bound.  Both consume random draws from the same
``numpy.random.Generator`` in the same order, so for a given seed they
produce the same run lengths (up to last-ulp differences in ``exp``/``log``).

State kinds
-----------
0  static      a_t = x_t                       (Shewhart)
1  cusum       a_t = max(0, a_{t-1}) + x_t
2  log-sr      L_t = log(1 + exp(L_{t-1})) + x_t   with L = log a  (Shiryaev-Roberts)
"""

import math
import os

import numpy as np

KIND_STATIC = 0
KIND_CUSUM = 1
KIND_LOGSR = 2

THETA_NEVER = np.iinfo(np.int64).max // 4

ENV_FLAG = "CRYPTOSIEVE_DISABLE_NUMBA"

_PEEK_START = 64
_PEEK_MAX = 4096
_REFILL = 1 << 15


def numba_requested():
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None


def initial_state(kind):
    return -math.inf if kind == KIND_LOGSR else 0.0


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def np_chunk_states(x, kind, s_in):
    """Alarm statistic after each element of ``x``, starting from ``s_in``.

    Closed forms instead of a Python loop: CUSUM is a partial sum minus its
    running minimum, log-SR is a partial sum plus a running log-sum-exp.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == KIND_STATIC:
        return x.copy()
    csum = np.cumsum(x)
    before = np.empty_like(csum)
    if csum.size:
        before[0] = 0.0
        before[1:] = csum[:-1]
    if kind == KIND_CUSUM:
        start = -max(s_in, 0.0)
        floor = np.minimum.accumulate(np.concatenate(([start], before[1:])))
        return csum - floor
    terms = np.concatenate(([s_in], -before))
    acc = np.logaddexp.accumulate(terms)
    return csum + acc[1:]


def np_first_passage(x, kind, h, s_in):
    states = np_chunk_states(x, kind, s_in)
    hit = np.flatnonzero(states > h)
    if hit.size:
        i = int(hit[0])
        return i, states[: i + 1]
    return -1, states


def np_byte_histograms(data):
    data = np.ascontiguousarray(data, dtype=np.uint8)
    rows = data.shape[0]
    if rows == 0:
        return np.zeros((0, 256), dtype=np.int64)
    flat = data.astype(np.int64) + (np.arange(rows, dtype=np.int64) * 256)[:, None]
    return np.bincount(flat.ravel(), minlength=rows * 256).reshape(rows, 256)


class _DrawBuffer:
    """Sequential chi-square draws with look-ahead that can be given back."""

    def __init__(self, rng, df):
        self._rng = rng
        self._df = df
        self._buf = np.empty(0)
        self._pos = 0

    def peek(self, n):
        avail = self._buf.size - self._pos
        if avail < n:
            fresh = self._rng.chisquare(self._df, size=max(_REFILL, n - avail))
            self._buf = np.concatenate((self._buf[self._pos:], fresh))
            self._pos = 0
        return self._buf[self._pos:self._pos + n]

    def consume(self, k):
        self._pos += k


def np_simulate(rng, n_reps, df, scale_pre, theta, alpha, beta, kind, h_cap, floor,
                horizon, keep_records):
    stop = np.empty(n_reps, dtype=np.int64)
    censored = np.zeros(n_reps, dtype=np.bool_)
    offsets = np.zeros(n_reps + 1, dtype=np.int64)
    rec_t_parts = []
    rec_v_parts = []
    n_rec = 0
    buf = _DrawBuffer(rng, df)
    for r in range(n_reps):
        offsets[r] = n_rec
        th = theta[r]
        s = initial_state(kind)
        m = -math.inf
        t = 0
        width = _PEEK_START
        hit_time = -1
        while t < horizon:
            n = min(width, horizon - t)
            times = np.arange(t + 1, t + n + 1, dtype=np.int64)
            u = buf.peek(n) * np.where(times < th, scale_pre, 1.0)
            states = np_chunk_states(alpha + beta * u, kind, s)
            hit = np.flatnonzero(states > h_cap)
            k = int(hit[0]) + 1 if hit.size else n
            used = states[:k]
            if keep_records:
                prev = np.maximum.accumulate(np.concatenate(([m], used[:-1])))
                mask = (used > prev) & (used > floor)
                if mask.any():
                    rec_t_parts.append(times[:k][mask])
                    rec_v_parts.append(used[mask])
                    n_rec += int(mask.sum())
            m = max(m, float(used.max()))
            s = float(used[-1])
            buf.consume(k)
            t += k
            if hit.size:
                hit_time = t
                break
            width = min(2 * width, _PEEK_MAX)
        if hit_time < 0:
            stop[r] = horizon
            censored[r] = True
        else:
            stop[r] = hit_time
    offsets[n_reps] = n_rec
    if rec_t_parts:
        rec_t = np.concatenate(rec_t_parts)
        rec_v = np.concatenate(rec_v_parts)
    else:
        rec_t = np.empty(0, dtype=np.int64)
        rec_v = np.empty(0, dtype=np.float64)
    return stop, censored, offsets, rec_t, rec_v


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(nogil=True, cache=True)
    def _nb_step(kind, s, x):
        if kind == 0:
            return x
        if kind == 1:
            return max(s, 0.0) + x
        if s > 0.0:
            return s + math.log1p(math.exp(-s)) + x
        return math.log1p(math.exp(s)) + x

    @numba.njit(nogil=True, cache=True)
    def nb_first_passage(x, kind, h, s_in):
        out = np.empty(x.size, dtype=np.float64)
        s = s_in
        for i in range(x.size):
            s = _nb_step(kind, s, x[i])
            out[i] = s
            if s > h:
                return i, out[: i + 1]
        return -1, out

    @numba.njit(nogil=True, cache=True)
    def nb_byte_histograms(data):
        rows = data.shape[0]
        out = np.zeros((rows, 256), dtype=np.int64)
        for r in range(rows):
            for j in range(data.shape[1]):
                out[r, data[r, j]] += 1
        return out

    @numba.njit(nogil=True)
    def nb_simulate(rng, n_reps, df, scale_pre, theta, alpha, beta, kind, h_cap, floor,
                    horizon, keep_records):
        stop = np.empty(n_reps, dtype=np.int64)
        censored = np.zeros(n_reps, dtype=np.bool_)
        offsets = np.zeros(n_reps + 1, dtype=np.int64)
        cap = 16 * n_reps + 16 if keep_records else 1
        rec_t = np.empty(cap, dtype=np.int64)
        rec_v = np.empty(cap, dtype=np.float64)
        n_rec = 0
        for r in range(n_reps):
            offsets[r] = n_rec
            th = theta[r]
            s = -np.inf if kind == 2 else 0.0
            m = -np.inf
            hit_time = -1
            for t in range(1, horizon + 1):
                u = rng.chisquare(df)
                if t < th:
                    u = u * scale_pre
                s = _nb_step(kind, s, alpha + beta * u)
                if s > m:
                    if keep_records and s > floor:
                        if n_rec == rec_t.size:
                            grown_t = np.empty(2 * n_rec, dtype=np.int64)
                            grown_v = np.empty(2 * n_rec, dtype=np.float64)
                            grown_t[:n_rec] = rec_t
                            grown_v[:n_rec] = rec_v
                            rec_t = grown_t
                            rec_v = grown_v
                        rec_t[n_rec] = t
                        rec_v[n_rec] = s
                        n_rec += 1
                    m = s
                if s > h_cap:
                    hit_time = t
                    break
            if hit_time < 0:
                stop[r] = horizon
                censored[r] = True
            else:
                stop[r] = hit_time
        offsets[n_reps] = n_rec
        return stop, censored, offsets, rec_t[:n_rec].copy(), rec_v[:n_rec].copy()

else:  # pragma: no cover
    nb_first_passage = nb_byte_histograms = nb_simulate = None


def _np_simulate_entry(rng, n_reps, df, scale_pre, theta, alpha, beta, kind, h_cap, floor,
                       horizon, keep_records):
    return np_simulate(rng, n_reps, df, scale_pre, theta, alpha, beta, kind, h_cap, floor,
                       horizon, keep_records)


def _nb_simulate_entry(rng, n_reps, df, scale_pre, theta, alpha, beta, kind, h_cap, floor,
                       horizon, keep_records):
    return nb_simulate(rng, int(n_reps), float(df), float(scale_pre),
                       np.ascontiguousarray(theta, dtype=np.int64), float(alpha), float(beta),
                       int(kind), float(h_cap), float(floor), int(horizon), bool(keep_records))


def _nb_first_passage_entry(x, kind, h, s_in):
    i, states = nb_first_passage(np.ascontiguousarray(x, dtype=np.float64), int(kind),
                                 float(h), float(s_in))
    return int(i), states


def _nb_byte_histograms_entry(data):
    return nb_byte_histograms(np.ascontiguousarray(data, dtype=np.uint8))


IMPLEMENTATIONS = {
    "numpy": {
        "simulate": _np_simulate_entry,
        "first_passage": np_first_passage,
        "byte_histograms": np_byte_histograms,
    },
}
if numba is not None:
    IMPLEMENTATIONS["numba"] = {
        "simulate": _nb_simulate_entry,
        "first_passage": _nb_first_passage_entry,
        "byte_histograms": _nb_byte_histograms_entry,
    }

BACKEND = "numba" if (numba is not None and numba_requested()) else "numpy"

simulate = IMPLEMENTATIONS[BACKEND]["simulate"]
first_passage = IMPLEMENTATIONS[BACKEND]["first_passage"]
byte_histograms = IMPLEMENTATIONS[BACKEND]["byte_histograms"]
