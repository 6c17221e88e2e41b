"""Backend selection for the batched reward kernels.

The compiled extension is preferred when importable; otherwise the NumPy
implementation is used.  Set HETGAIN_PURE=1 to force the NumPy backend
(useful for benchmarking and for ruling the extension out when debugging).
"""

from __future__ import annotations

import os

import numpy as np

from ..aggregators import AggregatorSpec, Family
from . import numpy_backend

FAMILY_CODES = {
    Family.MIN: 0,
    Family.MEAN: 1,
    Family.MAX: 2,
    Family.POWER_SUM: 3,
    Family.POWER_MEAN: 4,
    Family.LOG_SUM_EXP: 5,
    Family.SOFTMAX: 6,
}

if os.environ.get("HETGAIN_PURE"):
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _reward_ext as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"


def _prep(batch) -> np.ndarray:
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 3:
        raise ValueError("batch must have shape (episodes, agents, tasks)")
    return batch


def batch_reward(batch, inner: AggregatorSpec, outer: AggregatorSpec) -> np.ndarray:
    """Team reward U(T(a_1), ..., T(a_M)) for a batch of allocation matrices."""
    return _impl.batch_reward(
        _prep(batch),
        FAMILY_CODES[inner.family],
        inner.t,
        FAMILY_CODES[outer.family],
        outer.t,
    )


def batch_scores(batch, inner: AggregatorSpec) -> np.ndarray:
    """Inner scores T(a_j) per task for a batch of allocation matrices."""
    return _impl.batch_scores(_prep(batch), FAMILY_CODES[inner.family], inner.t)
