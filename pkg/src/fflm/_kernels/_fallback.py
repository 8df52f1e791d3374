"""Pure-Python/numpy versions of the hot kernels.

Every function here has a twin in ``_core.pyx`` with identical semantics;
the package picks one at import time (see ``fflm._kernels``).
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def sweep_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Best ``score >= t`` threshold by balanced accuracy.

    Candidates are -inf, midpoints between consecutive distinct scores, and
    +inf, visited in ascending order; only strict improvements replace the
    incumbent, so ties go to the smallest threshold.
    """
    order = np.argsort(scores, kind="stable")
    s = np.asarray(scores, dtype=np.float64)[order]
    y = np.asarray(labels, dtype=np.int64)[order]
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos

    # indices where a run of equal scores ends
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    pos_below = np.cumsum(y)[ends]
    neg_below = (ends + 1) - pos_below

    tp = np.concatenate(([n_pos], n_pos - pos_below))
    tn = np.concatenate(([0], neg_below))
    ba = (tp / n_pos + tn / n_neg) / 2

    mids = (s[ends[:-1]] + s[ends[:-1] + 1]) / 2
    thresholds = np.concatenate(([-np.inf], mids, [np.inf]))
    best = int(np.argmax(ba))
    return float(thresholds[best]), float(ba[best])


def kendall_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int]:
    """Pair counts for tau-b: (concordant - discordant, x-ties, y-ties, pairs)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    s = 0
    tx = 0
    ty = 0
    for i in range(n - 1):
        dx = np.sign(x[i + 1:] - x[i])
        dy = np.sign(y[i + 1:] - y[i])
        s += int((dx * dy).sum())
        tx += int((dx == 0).sum())
        ty += int((dy == 0).sum())
    return s, tx, ty, n * (n - 1) // 2
