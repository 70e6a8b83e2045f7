"""Dense complex linear algebra for small Hilbert spaces.

Matrices are ``complex128`` 2-D numpy arrays (row-major), vectors are 1-D
arrays. The toolkit only ever needs Hilbert-space dimensions 2, 4 and 8 and
superoperator dimensions up to 64, so everything is dense. All functions are
pure and thread-safe.
"""

import numpy as np

from . import kernels

__all__ = [
    "DimensionError",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_MINUS",
    "identity",
    "kron",
    "kron_all",
    "dagger",
    "trace",
    "matmul",
    "matvec",
    "scale",
    "add",
    "matexp",
    "vec",
    "unvec",
    "is_hermitian",
    "inf_norm",
    "as_cmatrix",
    "as_cvector",
]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
# Lowering operator |0><1|.
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def as_cmatrix(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={a.ndim}")
    return a


def as_cvector(v) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got ndim={v.ndim}")
    return v


def _check_finite(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a.view(np.float64))):
        raise FloatingPointError("non-finite entries in result")
    return a


def kron(a, b) -> np.ndarray:
    return _check_finite(np.kron(as_cmatrix(a), as_cmatrix(b)))


def kron_all(ops) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, as_cmatrix(op))
    return _check_finite(out)


def dagger(a) -> np.ndarray:
    return np.ascontiguousarray(as_cmatrix(a).conj().T)


def trace(a) -> complex:
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"trace needs a square matrix, got {a.shape}")
    return complex(np.trace(a))


def matmul(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _check_finite(a @ b)


def matvec(a, v) -> np.ndarray:
    a, v = as_cmatrix(a), as_cvector(v)
    if a.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec shape mismatch: {a.shape} @ ({v.shape[0]},)")
    return _check_finite(a @ v)


def scale(alpha, a) -> np.ndarray:
    return _check_finite(complex(alpha) * as_cmatrix(a))


def add(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")
    return _check_finite(a + b)


def matexp(a) -> np.ndarray:
    """Matrix exponential, Pade-13 with scaling and squaring."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matexp needs a square matrix, got {a.shape}")
    return _check_finite(kernels.matexp(a))


def vec(rho) -> np.ndarray:
    """Column-stacking vectorization of a square matrix."""
    rho = as_cmatrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"vec needs a square matrix, got {rho.shape}")
    return kernels.vec_density(rho)


def unvec(v, dim: int) -> np.ndarray:
    v = as_cvector(v)
    if v.shape[0] != dim * dim:
        raise DimensionError(f"unvec: length {v.shape[0]} != {dim}^2")
    return kernels.unvec_density(v, dim)


def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = as_cmatrix(a)
    return a.shape[0] == a.shape[1] and inf_norm(a - a.conj().T) <= tol


def inf_norm(a) -> float:
    return float(np.max(np.abs(a))) if np.asarray(a).size else 0.0
