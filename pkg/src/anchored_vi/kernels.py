"""Backend selection for the sampling kernels.

The compiled extension ``anchored_vi._kernels`` is used when it imports;
otherwise the numpy implementation in ``anchored_vi._pykernels`` takes over.
Setting ``ANCHORED_VI_PURE_PYTHON=1`` forces the numpy backend.

Both backends implement the same counter-based generator: the uniform for
draw ``j`` of a stream with key ``K`` is the SplitMix64 output
``mix(K + (j + 1) * GOLDEN)`` scaled to 53 bits, so any draw can be
reproduced in isolation and the result never depends on evaluation order.
"""
import os

import numpy as np

from . import _pykernels

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _load_backend():
    if os.environ.get("ANCHORED_VI_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _kernels
    except ImportError:
        return _pykernels, "python"
    return _kernels, "compiled"


_impl, BACKEND = _load_backend()

draw_counts = _impl.draw_counts
draw_states = _impl.draw_states
walk_visits = _impl.walk_visits


def get_backend(name):
    """Kernel module for ``name`` in {"python", "compiled"}."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed, *fields):
    """64-bit substream key for ``master_seed`` and integer ``fields``.

    Chained SplitMix64 finalisation; each step is a bijection of the running
    hash, so keys differing in any field collide only by 64-bit chance.
    """
    if not 0 <= master_seed <= MASK64:
        raise ValueError("master_seed must fit in 64 unsigned bits")
    h = mix64(master_seed + _GOLDEN)
    for x in fields:
        if x < 0:
            raise ValueError("stream key fields must be nonnegative")
        h = mix64(h ^ ((x * _GOLDEN + _GOLDEN) & MASK64))
    return h


def sampling_cdf(rows):
    """Row-wise cumulative sums prepared for inverse-CDF search.

    Entries from the last positive-probability state onward are set to
    exactly 1.0, so rounding in the cumulative sum can never select a
    zero-probability tail state and every uniform in [0, 1) is covered.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cdf = np.minimum(np.cumsum(rows, axis=-1), 1.0)
    flat = cdf.reshape(-1, cdf.shape[-1])
    pos = rows.reshape(-1, rows.shape[-1]) > 0
    n = flat.shape[1]
    last = n - 1 - np.argmax(pos[:, ::-1], axis=1)
    cols = np.arange(n)[None, :]
    flat[cols >= last[:, None]] = 1.0
    return np.ascontiguousarray(cdf)
