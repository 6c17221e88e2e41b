"""Pure-NumPy implementation of the batched reward kernels.

This is the fallback backend and the reference the compiled extension is
checked against.  Family codes are shared with the extension:

    0 min | 1 mean | 2 max | 3 power-sum | 4 power-mean | 5 lse | 6 softmax
"""

from __future__ import annotations

import numpy as np


def _aggregate(values: np.ndarray, code: int, t: float, axis: int) -> np.ndarray:
    if code == 0:
        return values.min(axis=axis)
    if code == 1:
        return values.mean(axis=axis)
    if code == 2:
        return values.max(axis=axis)
    if code == 3:
        return np.sum(values**t, axis=axis)
    if code == 4:
        with np.errstate(divide="ignore", over="ignore"):
            # 0^t -> inf for t < 0; mean -> inf; inf^(1/t) -> 0, the correct limit
            return np.mean(values**t, axis=axis) ** (1.0 / t)
    if code == 5:
        z = t * values
        m = z.max(axis=axis, keepdims=True)
        out = (m.squeeze(axis) + np.log(np.sum(np.exp(z - m), axis=axis))) / t
        return out
    if code == 6:
        z = t * values
        z = z - z.max(axis=axis, keepdims=True)
        w = np.exp(z)
        w = w / w.sum(axis=axis, keepdims=True)
        return np.sum(w * values, axis=axis)
    raise ValueError(f"unknown family code {code}")


def batch_scores(batch: np.ndarray, code: int, t: float) -> np.ndarray:
    """Inner scores: aggregate each column of each (N, M) matrix -> (B, M)."""
    return _aggregate(batch, code, t, axis=1)


def batch_reward(
    batch: np.ndarray,
    inner_code: int,
    inner_t: float,
    outer_code: int,
    outer_t: float,
) -> np.ndarray:
    """Nested-aggregator team reward for a batch of allocation matrices."""
    scores = _aggregate(batch, inner_code, inner_t, axis=1)
    return _aggregate(scores, outer_code, outer_t, axis=1)
