"""Pure numpy versions of the sampling kernels.

Drop-in replacements for the compiled ``_kernels`` module, producing
identical integer outputs for identical inputs.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0

# max number of uint64 draws materialised at once
_CHUNK = 1 << 18


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _uniforms(keys, j):
    """Uniforms for draw indices ``j`` (broadcast against ``keys``)."""
    with np.errstate(over="ignore"):
        z = _mix(keys + (j + np.uint64(1)) * GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * _TWO_M53


def _search(cdf, u):
    # count of cdf entries <= u == first index with cdf > u
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.shape[-1] - 1)


def draw_counts(cdf, keys, m, out, nthreads=1, j0=0):
    rows, n = cdf.shape
    if keys.shape[0] != rows or out.shape != (rows, n):
        raise ValueError("shape mismatch")
    keys = np.asarray(keys, dtype=np.uint64)
    if m <= 0 or rows == 0:
        return
    if rows * m * n <= 4 * _CHUNK:
        j = np.arange(j0, j0 + m, dtype=np.uint64)
        u = _uniforms(keys[:, None], j[None, :])
        idx = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2)
        np.minimum(idx, n - 1, out=idx)
        flat = idx + (np.arange(rows) * n)[:, None]
        out += np.bincount(flat.ravel(), minlength=rows * n).reshape(rows, n)
        return
    for row in range(rows):
        c = cdf[row]
        for start in range(0, m, _CHUNK):
            stop = min(m, start + _CHUNK)
            j = np.arange(j0 + start, j0 + stop, dtype=np.uint64)
            idx = _search(c, _uniforms(keys[row], j))
            out[row] += np.bincount(idx, minlength=n)


def draw_states(cdf, key, j0, count):
    j = np.arange(j0, j0 + count, dtype=np.uint64)
    return _search(cdf, _uniforms(np.uint64(key), j)).astype(np.int64)


def walk_visits(cdf, start, horizon, key, visits):
    n = cdf.shape[0]
    if cdf.shape[1] != n or visits.shape[0] != n:
        raise ValueError("shape mismatch")
    key = np.uint64(key)
    s = int(start)
    counts = [0] * n
    step = max(1024, 4 * _CHUNK // (n * n))
    for begin in range(0, horizon, step):
        stop = min(horizon, begin + step)
        u = _uniforms(key, np.arange(begin, stop, dtype=np.uint64))
        # successor of every state for every step in the chunk
        succ = (u[:, None, None] >= cdf[None, :, :]).sum(axis=2)
        np.minimum(succ, n - 1, out=succ)
        table = succ.tolist()
        for t in range(stop - begin):
            counts[s] += 1
            s = table[t][s]
    # the successor drawn at the final step is never visited
    visits += np.asarray(counts, dtype=np.int64)
