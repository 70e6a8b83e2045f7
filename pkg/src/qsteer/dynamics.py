"""Closed- and open-system time evolution under piecewise-constant controls.

Closed systems step the state vector with per-segment unitaries
``exp(-i H_k dt)``; open systems step the column-stacked density matrix with
``exp(G_k dt)`` where ``G`` is the Lindblad generator. Because the controls
are piecewise constant the exponential stepping is exact, with no step-size
tuning. All functions are pure.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, linalg
from .linalg import DimensionError

ALLOWED_DIMS = (2, 4, 8)
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ControlledHamiltonian:
    """Drift operator plus control operators: H(t) = H0 + sum_j u_j(t) H_j."""

    drift: np.ndarray
    controls: tuple

    def __post_init__(self):
        drift = linalg.as_cmatrix(self.drift)
        controls = tuple(linalg.as_cmatrix(c) for c in self.controls)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        d = drift.shape[0]
        if d not in ALLOWED_DIMS or drift.shape != (d, d):
            raise DimensionError(f"drift must be square with dim in {ALLOWED_DIMS}, got {drift.shape}")
        if not linalg.is_hermitian(drift, HERMITIAN_TOL):
            raise ValueError("drift is not Hermitian")
        for c in controls:
            if c.shape != (d, d):
                raise DimensionError(f"control shape {c.shape} != drift shape {drift.shape}")
            if not linalg.is_hermitian(c, HERMITIAN_TOL):
                raise ValueError("control operator is not Hermitian")

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def control_stack(self) -> np.ndarray:
        """Controls as an (m, d, d) array (empty-safe) for the kernels."""
        if self.controls:
            return np.stack(self.controls)
        return np.zeros((0, self.dim, self.dim), dtype=np.complex128)


@dataclass(frozen=True)
class LindbladChannel:
    """Dissipative channel: jump operator L with decay rate gamma >= 0."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "operator", linalg.as_cmatrix(self.operator))
        object.__setattr__(self, "rate", float(self.rate))
        if self.rate < 0:
            raise ValueError(f"negative decay rate {self.rate}")
        if self.operator.shape[0] != self.operator.shape[1]:
            raise DimensionError(f"jump operator must be square, got {self.operator.shape}")


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant pulses: N segments of duration T/N, amplitudes (N, m)."""

    total_time: float
    segments: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.float64)
        object.__setattr__(self, "total_time", float(self.total_time))
        object.__setattr__(self, "segments", int(self.segments))
        object.__setattr__(self, "amplitudes", amps)
        if self.total_time <= 0:
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if self.segments < 1:
            raise ValueError(f"segments must be >= 1, got {self.segments}")
        if amps.ndim != 2 or amps.shape[0] != self.segments:
            raise DimensionError(f"amplitudes must be (N, m) with N={self.segments}, got {amps.shape}")

    @property
    def dt(self) -> float:
        return self.total_time / self.segments

    @property
    def n_controls(self) -> int:
        return self.amplitudes.shape[1]

    def within_bound(self, bound: float) -> bool:
        if self.amplitudes.size == 0:
            return True
        return bool(np.max(np.abs(self.amplitudes)) <= bound)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace state. Validation tolerance 1e-9."""

    matrix: np.ndarray
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = linalg.as_cmatrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        if self._validate:
            if linalg.inf_norm(m - m.conj().T) > 1e-9:
                raise ValueError("density matrix is not Hermitian within 1e-9")
            if abs(np.trace(m) - 1.0) > 1e-9:
                raise ValueError(f"density matrix trace {np.trace(m)} != 1 within 1e-9")

    @classmethod
    def from_state(cls, psi) -> "DensityMatrix":
        psi = linalg.as_cvector(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def liouvillian(h, channels) -> np.ndarray:
    """Generator G with d vec(rho)/dt = G vec(rho), column stacking.

    G = -i (I (x) H - H^T (x) I)
        + sum_k gamma_k (conj(L) (x) L - 1/2 I (x) L^+L - 1/2 (L^+L)^T (x) I)
    """
    h = linalg.as_cmatrix(h)
    d = h.shape[0]
    if h.shape != (d, d):
        raise DimensionError(f"hamiltonian must be square, got {h.shape}")
    eye = np.eye(d, dtype=np.complex128)
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for ch in channels:
        L = ch.operator
        if L.shape != (d, d):
            raise DimensionError(f"channel dim {L.shape} != system dim {d}")
        if ch.rate < 0:
            raise ValueError(f"negative decay rate {ch.rate}")
        LdL = L.conj().T @ L
        gen += ch.rate * (
            np.kron(L.conj(), L)
            - 0.5 * np.kron(eye, LdL)
            - 0.5 * np.kron(LdL.T, eye)
        )
    return gen


def control_generators(ham: ControlledHamiltonian) -> np.ndarray:
    """Per-channel commutator generators -i (I (x) H_j - H_j^T (x) I), (m, D, D)."""
    d = ham.dim
    eye = np.eye(d, dtype=np.complex128)
    out = np.zeros((ham.n_controls, d * d, d * d), dtype=np.complex128)
    for j, hj in enumerate(ham.controls):
        out[j] = -1j * (np.kron(eye, hj) - np.kron(hj.T, eye))
    return out


def _check_schedule(ham: ControlledHamiltonian, schedule: PulseSchedule):
    if schedule.n_controls != ham.n_controls:
        raise DimensionError(
            f"schedule has {schedule.n_controls} channels, system has {ham.n_controls}"
        )


def propagate_closed(ham: ControlledHamiltonian, schedule: PulseSchedule, psi0) -> list:
    """State after each of the N segments. psi0 must be normalized."""
    psi0 = linalg.as_cvector(psi0)
    if psi0.shape[0] != ham.dim:
        raise DimensionError(f"state dim {psi0.shape[0]} != system dim {ham.dim}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state is not normalized")
    _check_schedule(ham, schedule)
    states = kernels.propagate_closed_states(
        ham.drift, ham.control_stack(), schedule.amplitudes, schedule.dt, psi0
    )
    return [states[k] for k in range(schedule.segments)]


def propagate_open(
    ham: ControlledHamiltonian, channels, schedule: PulseSchedule, rho0: DensityMatrix
) -> list:
    """Density matrix after each segment; trace is preserved by construction."""
    if rho0.dim != ham.dim:
        raise DimensionError(f"state dim {rho0.dim} != system dim {ham.dim}")
    _check_schedule(ham, schedule)
    gen0 = liouvillian(ham.drift, channels)
    gens = control_generators(ham)
    vstates = kernels.propagate_open_states(
        gen0, gens, schedule.amplitudes, schedule.dt, linalg.vec(rho0.matrix)
    )
    d = ham.dim
    return [
        DensityMatrix(linalg.unvec(vstates[k], d), _validate=False)
        for k in range(schedule.segments)
    ]


def fidelity(rho, target) -> float:
    """State-transfer fidelity <target|rho|target> (real part).

    ``rho`` may be a DensityMatrix or a bare matrix. The value is clamped to
    [0, 1] only when within 1e-9 of the bounds.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else linalg.as_cmatrix(rho)
    target = linalg.as_cvector(target)
    if m.shape[0] != target.shape[0]:
        raise DimensionError(f"state dim {m.shape[0]} != target dim {target.shape[0]}")
    f = float(np.real(target.conj() @ m @ target))
    if -1e-9 <= f < 0.0:
        return 0.0
    if 1.0 < f <= 1.0 + 1e-9:
        return 1.0
    return f


def amplitude_damping_channels(n_qubits: int, gamma: float) -> list:
    """One local sigma-minus channel per qubit, shared rate gamma."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    channels = []
    for q in range(n_qubits):
        ops = [linalg.identity(2)] * n_qubits
        ops[q] = linalg.SIGMA_MINUS
        channels.append(LindbladChannel(linalg.kron_all(ops), gamma))
    return channels
