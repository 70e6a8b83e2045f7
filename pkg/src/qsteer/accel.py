"""Numba acceleration toggle for the numeric hot kernels.

The functions in :mod:`qsteer.kernels` are written so they run unchanged
either as plain numpy code or compiled with numba's ``@njit``. Compilation
is the default; set the environment variable ``QSTEER_PURE_NUMPY=1`` before
import (or run without numba installed) to select the pure-numpy path.
The flag is read once at import time.
"""

import os

ENV_FLAG = "QSTEER_PURE_NUMPY"


def _pure_numpy_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_ENABLED = False
if not _pure_numpy_requested():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - depends on install
        pass


def jit_kernel(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def single_thread_blas():
    """Context manager pinning BLAS to one thread.

    The network layers here are small enough that BLAS threading overhead
    outweighs its gains, measurably so on few-core machines. Falls back to a
    no-op when threadpoolctl is unavailable.
    """
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1, user_api="blas")
    except ImportError:  # pragma: no cover - depends on install
        import contextlib

        return contextlib.nullcontext()
