"""Hot numeric kernels: matrix exponential, piecewise-constant propagation,
and exact pulse-gradient evaluation.

Everything here operates on bare ``complex128`` arrays and is compiled with
numba when enabled (see :mod:`qsteer.accel`). The public modules wrap these
with validation; tests exercise the kernels through both backends.

Vectorization convention throughout: column stacking, ``vec(A X B) =
(B^T (x) A) vec(X)``.
"""

import numpy as np

from .accel import NUMBA_ENABLED, jit_kernel

# Pade-13 numerator coefficients (Higham 2005, alg. 2.3) and the matching
# scaling threshold on the 1-norm.
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


# The element-loop forms below are what numba compiles well; the fallbacks
# are their vectorized numpy equivalents.

if NUMBA_ENABLED:

    @jit_kernel
    def adam_step(p, g, m, v, lr, beta1, beta2, eps, b1c, b2c):
        """Fused in-place Adam update on flattened float64 parameter views."""
        for i in range(p.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
            p[i] -= lr * (m[i] / b1c) / (np.sqrt(v[i] / b2c) + eps)

    @jit_kernel
    def polyak_mix(src, dst, tau):
        """dst <- tau * src + (1 - tau) * dst on flattened float64 views."""
        for i in range(dst.shape[0]):
            dst[i] = tau * src[i] + (1.0 - tau) * dst[i]

else:

    def adam_step(p, g, m, v, lr, beta1, beta2, eps, b1c, b2c):
        """Fused in-place Adam update on flattened float64 parameter views."""
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / b1c) / (np.sqrt(v / b2c) + eps)

    def polyak_mix(src, dst, tau):
        """dst <- tau * src + (1 - tau) * dst on flattened float64 views."""
        dst *= 1.0 - tau
        dst += tau * src


@jit_kernel
def one_norm(a):
    n = a.shape[1]
    best = 0.0
    for j in range(n):
        s = 0.0
        for i in range(a.shape[0]):
            s += abs(a[i, j])
        if s > best:
            best = s
    return best


@jit_kernel
def matexp(a):
    """exp(a) for a square complex matrix, Pade-13 with scaling and squaring."""
    n = a.shape[0]
    b = _PADE13
    nrm = one_norm(a)
    s = 0
    if nrm > _THETA13:
        s = int(np.ceil(np.log2(nrm / _THETA13)))
    a_s = a / (2.0**s)
    ident = np.eye(n, dtype=np.complex128)
    a2 = np.dot(a_s, a_s)
    a4 = np.dot(a2, a2)
    a6 = np.dot(a4, a2)
    u = np.dot(
        a_s,
        np.dot(a6, b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident,
    )
    v = (
        np.dot(a6, b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    r = np.linalg.solve(v - u, u + v)
    for _ in range(s):
        r = np.dot(r, r)
    return np.ascontiguousarray(r)


if NUMBA_ENABLED:

    @jit_kernel
    def vec_density(rho):
        """Column-stack a density matrix into a d^2 vector."""
        d = rho.shape[0]
        v = np.empty(d * d, dtype=np.complex128)
        k = 0
        for j in range(d):
            for i in range(d):
                v[k] = rho[i, j]
                k += 1
        return v

    @jit_kernel
    def unvec_density(v, d):
        """Inverse of :func:`vec_density`."""
        rho = np.empty((d, d), dtype=np.complex128)
        k = 0
        for j in range(d):
            for i in range(d):
                rho[i, j] = v[k]
                k += 1
        return rho

    @jit_kernel
    def _cdot(a, b):
        """<a|b> with the first argument conjugated."""
        s = 0.0 + 0.0j
        for i in range(a.shape[0]):
            s += np.conj(a[i]) * b[i]
        return s

else:

    def vec_density(rho):
        """Column-stack a density matrix into a d^2 vector."""
        return np.ascontiguousarray(rho.T).reshape(-1)

    def unvec_density(v, d):
        """Inverse of :func:`vec_density`."""
        return np.ascontiguousarray(v.reshape(d, d).T)

    def _cdot(a, b):
        """<a|b> with the first argument conjugated."""
        return np.vdot(a, b)


@jit_kernel
def _segment_hamiltonian(drift, controls, amps_k):
    h = drift.copy()
    for j in range(controls.shape[0]):
        h += amps_k[j] * controls[j]
    return np.ascontiguousarray(h)


@jit_kernel
def propagate_closed_states(drift, controls, amps, dt, psi0):
    """States after each segment under exp(-i H_k dt) stepping.

    drift: (d, d); controls: (m, d, d); amps: (N, m); psi0: (d,).
    Returns an (N, d) array of intermediate states.
    """
    n_seg = amps.shape[0]
    d = drift.shape[0]
    out = np.empty((n_seg, d), dtype=np.complex128)
    psi = psi0.astype(np.complex128)
    for k in range(n_seg):
        h = _segment_hamiltonian(drift, controls, amps[k])
        u = matexp(np.ascontiguousarray(-1j * dt * h))
        psi = np.dot(u, psi)
        out[k] = psi
    return out


@jit_kernel
def propagate_open_states(gen0, gen_controls, amps, dt, vrho0):
    """Vectorized density matrices after each segment under exp(G_k dt).

    gen0: (D, D) drift-plus-dissipator generator; gen_controls: (m, D, D)
    per-channel Hamiltonian commutator generators; vrho0: (D,).
    Returns an (N, D) array.
    """
    n_seg = amps.shape[0]
    dim = gen0.shape[0]
    out = np.empty((n_seg, dim), dtype=np.complex128)
    v = vrho0.astype(np.complex128)
    for k in range(n_seg):
        g = _segment_hamiltonian(gen0, gen_controls, amps[k])
        e = matexp(np.ascontiguousarray(dt * g))
        v = np.dot(e, v)
        out[k] = v
    return out


@jit_kernel
def expm_frechet(a, e):
    """Fréchet derivative of expm at ``a`` in direction ``e``.

    Uses the augmented-block identity: expm([[a, e], [0, a]]) has the
    derivative in its upper-right block. Returns (expm(a), derivative).
    """
    n = a.shape[0]
    blk = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    blk[:n, :n] = a
    blk[n:, n:] = a
    blk[:n, n:] = e
    full = matexp(blk)
    return full[:n, :n].copy(), full[:n, n:].copy()


@jit_kernel
def closed_fidelity_gradient(drift, controls, amps, dt, psi0, psi_target):
    """d|<target|psi(T)>|^2 / du_{k,j} via cached partial products.

    Returns (gradient with shape (N, m), fidelity).
    """
    n_seg = amps.shape[0]
    m = controls.shape[0]
    d = drift.shape[0]

    props = np.empty((n_seg, d, d), dtype=np.complex128)
    fwd = np.empty((n_seg + 1, d), dtype=np.complex128)
    fwd[0] = psi0
    for k in range(n_seg):
        h = _segment_hamiltonian(drift, controls, amps[k])
        props[k] = matexp(np.ascontiguousarray(-1j * dt * h))
        fwd[k + 1] = np.dot(props[k], fwd[k])

    overlap = _cdot(psi_target, fwd[n_seg])
    fid = (overlap * np.conj(overlap)).real

    # bwd[k] = (U_N ... U_{k+1})^dagger |target>, so <target|U_N..U_{k+1} = bwd[k]^dagger
    bwd = np.empty((n_seg + 1, d), dtype=np.complex128)
    bwd[n_seg] = psi_target
    for k in range(n_seg - 1, -1, -1):
        bwd[k] = np.dot(np.conj(props[k].T), bwd[k + 1])

    grad = np.empty((n_seg, m), dtype=np.float64)
    for k in range(n_seg):
        h = _segment_hamiltonian(drift, controls, amps[k])
        a = np.ascontiguousarray(-1j * dt * h)
        for j in range(m):
            e = np.ascontiguousarray(-1j * dt * controls[j])
            _, deriv = expm_frechet(a, e)
            term = _cdot(bwd[k + 1], np.dot(deriv, fwd[k]))
            grad[k, j] = 2.0 * (np.conj(overlap) * term).real
    return grad, fid


@jit_kernel
def open_fidelity_gradient(gen0, gen_controls, amps, dt, vrho0, vtarget):
    """d<target|rho(T)|target>/du_{k,j} for superoperator stepping.

    ``vtarget`` is the column-stacked target projector. Returns
    (gradient with shape (N, m), fidelity).
    """
    n_seg = amps.shape[0]
    m = gen_controls.shape[0]
    dim = gen0.shape[0]

    props = np.empty((n_seg, dim, dim), dtype=np.complex128)
    fwd = np.empty((n_seg + 1, dim), dtype=np.complex128)
    fwd[0] = vrho0
    for k in range(n_seg):
        g = _segment_hamiltonian(gen0, gen_controls, amps[k])
        props[k] = matexp(np.ascontiguousarray(dt * g))
        fwd[k + 1] = np.dot(props[k], fwd[k])

    fid = _cdot(vtarget, fwd[n_seg]).real

    bwd = np.empty((n_seg + 1, dim), dtype=np.complex128)
    bwd[n_seg] = vtarget
    for k in range(n_seg - 1, -1, -1):
        bwd[k] = np.dot(np.conj(props[k].T), bwd[k + 1])

    grad = np.empty((n_seg, m), dtype=np.float64)
    for k in range(n_seg):
        g = _segment_hamiltonian(gen0, gen_controls, amps[k])
        for j in range(m):
            _, deriv = expm_frechet(np.ascontiguousarray(dt * g), np.ascontiguousarray(dt * gen_controls[j]))
            grad[k, j] = _cdot(bwd[k + 1], np.dot(deriv, fwd[k])).real
    return grad, fid
