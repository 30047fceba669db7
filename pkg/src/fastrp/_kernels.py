"""Compiled inner loops.

Every kernel here partitions work by output row and gives each row to exactly
one thread, accumulating in a fixed sequential order, so results do not
depend on the number of threads.
"""

import numba as nb
import numpy as np

nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ROW_SALT = np.uint64(0xD1B54A32D192ED03)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@nb.njit(cache=True, inline="always")
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def row_key(seed, row):
    return splitmix64(splitmix64(seed) ^ (np.uint64(row) * _ROW_SALT))


@nb.njit(cache=True, inline="always")
def stream_uniform(key, counter):
    """Uniform double in [0, 1) from draw ``counter`` of stream ``key``."""
    z = splitmix64(key + np.uint64(counter) * _GOLDEN)
    return np.float64(z >> np.uint64(11)) * _TO_UNIT


@nb.njit(cache=True)
def _sample_row(seed, row, d, p_half, p, cols_out, signs_out):
    key = row_key(seed, row)
    c = 0
    for j in range(d):
        u = stream_uniform(key, j)
        if u < p:
            cols_out[c] = j
            signs_out[c] = 1 if u < p_half else -1
            c += 1
    return c


@nb.njit(cache=True, parallel=True)
def sparse_sign_counts(seed, n, d, p):
    counts = np.zeros(n, dtype=np.int64)
    for r in nb.prange(n):
        key = row_key(seed, r)
        c = 0
        for j in range(d):
            if stream_uniform(key, j) < p:
                c += 1
        counts[r] = c
    return counts


@nb.njit(cache=True, parallel=True)
def sparse_sign_fill(seed, n, d, p_half, p, offsets, cols, signs):
    for r in nb.prange(n):
        start = offsets[r]
        end = offsets[r + 1]
        _sample_row(seed, r, d, p_half, p, cols[start:end], signs[start:end])


@nb.njit(cache=True)
def sample_one_row(seed, row, d, p_half, p):
    cols = np.empty(d, dtype=np.int32)
    signs = np.empty(d, dtype=np.int8)
    c = _sample_row(seed, row, d, p_half, p, cols, signs)
    return cols[:c].copy(), signs[:c].copy()


@nb.njit(cache=True, parallel=True)
def scatter_scaled_signs(offsets, cols, signs, row_scale, out):
    """out[r, cols] = signs * row_scale[r]; all other entries zero."""
    n, d = out.shape
    for r in nb.prange(n):
        for c in range(d):
            out[r, c] = 0.0
        s = row_scale[r]
        for p in range(offsets[r], offsets[r + 1]):
            out[r, cols[p]] = s if signs[p] > 0 else -s


@nb.njit(cache=True, parallel=True)
def neighbor_mean(offsets, targets, x, out):
    """out[i] = mean of x[j] over neighbours j of i; zero for isolated rows."""
    n = offsets.shape[0] - 1
    d = x.shape[1]
    for i in nb.prange(n):
        for c in range(d):
            out[i, c] = 0.0
        start = offsets[i]
        end = offsets[i + 1]
        if end == start:
            continue
        for p in range(start, end):
            j = targets[p]
            for c in range(d):
                out[i, c] += x[j, c]
        deg = out.dtype.type(end - start)
        for c in range(d):
            out[i, c] /= deg


@nb.njit(cache=True, parallel=True)
def axpy_rows(alpha, x, out):
    """out += alpha * x, row-parallel."""
    n, d = x.shape
    for i in nb.prange(n):
        for c in range(d):
            out[i, c] += alpha * x[i, c]


@nb.njit(cache=True, parallel=True)
def all_finite(x):
    n, d = x.shape
    bad = np.zeros(n, dtype=np.bool_)
    for i in nb.prange(n):
        for c in range(d):
            if not np.isfinite(x[i, c]):
                bad[i] = True
                break
    return not bad.any()
