"""Small numerical helpers."""

from __future__ import annotations

import numpy as np


def spectral_norm(M, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Largest singular value by power iteration on M^T M.

    Deterministic start vector; the ramp breaks ties so the iteration cannot
    begin orthogonal to the leading singular space of a symmetric sign
    pattern.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.size == 0 or not np.any(M):
        return 0.0
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = float(np.sqrt(nw))
        if abs(est - prev) <= tol * max(1.0, est):
            return est
        prev = est
    return prev
