"""Episodic state-transfer environment.

Observations concatenate a fixed-layout density-matrix encoding (zero-padded
to the largest Hilbert dimension squared, 64) with the six-entry task
descriptor. Actions are raw policy outputs in [-1, 1]: slot 0 picks the total
evolution time T, slot 1 the segment count N, the remaining slots the pulse
amplitudes. T and N are latched on the first step of an episode and ignored
afterwards; each step evolves the state by one segment of duration T/N.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, linalg
from .catalog import CatalogEntry
from .dynamics import amplitude_damping_channels, control_generators, liouvillian

RHO_SLOTS = 64  # d_max^2 with d_max = 8
DESCRIPTOR_SLOTS = 6
OBS_DIM = RHO_SLOTS + DESCRIPTOR_SLOTS
MAX_CONTROLS = 6
ACTION_DIM = 2 + MAX_CONTROLS


class EpisodeDoneError(RuntimeError):
    """step() called on a finished episode."""


@dataclass(frozen=True)
class EnvConfig:
    mode: str = "closed"
    gamma: float = 0.0
    f_min: float | None = None
    t_range: tuple = (1.0, 20.0)
    n_range: tuple = (2, 60)
    u_max: float = 1.0
    m_max: int = MAX_CONTROLS
    # Ablation mode: force the temporal parameters instead of letting the
    # agent's first action choose them.
    fixed_t: float | None = None
    fixed_n: int | None = None

    def __post_init__(self):
        if self.mode not in ("closed", "open"):
            raise ValueError(f"mode must be 'closed' or 'open', got {self.mode!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.n_range[1] > 3 * self.t_range[1]:
            raise ValueError("segment ceiling must not exceed 3x the time ceiling")
        if (self.fixed_t is None) != (self.fixed_n is None):
            raise ValueError("fixed_t and fixed_n must be set together")
        if self.fixed_t is not None:
            if not self.t_range[0] <= self.fixed_t <= self.t_range[1]:
                raise ValueError(f"fixed_t {self.fixed_t} outside {self.t_range}")
            if not self.n_range[0] <= self.fixed_n <= self.n_range[1]:
                raise ValueError(f"fixed_n {self.fixed_n} outside {self.n_range}")
        if self.f_min is None:
            object.__setattr__(self, "f_min", 0.999 if self.mode == "closed" else 0.95)


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def encode_observation(rho: np.ndarray, descriptor: np.ndarray) -> np.ndarray:
    """Fixed encoding: d populations, then upper-triangle coherences as
    (re, im) pairs in row-major order, zero-padded to 64; descriptor appended
    raw."""
    d = rho.shape[0]
    obs = np.zeros(OBS_DIM, dtype=np.float64)
    k = 0
    for i in range(d):
        obs[k] = rho[i, i].real
        k += 1
    for i in range(d):
        for j in range(i + 1, d):
            obs[k] = rho[i, j].real
            obs[k + 1] = rho[i, j].imag
            k += 2
    obs[RHO_SLOTS:] = np.asarray(descriptor, dtype=np.float64)
    return obs


def decode_observation(obs: np.ndarray, dim: int) -> np.ndarray:
    """Test helper: rebuild the density matrix from an observation."""
    rho = np.zeros((dim, dim), dtype=np.complex128)
    k = 0
    for i in range(dim):
        rho[i, i] = obs[k]
        k += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            rho[i, j] = obs[k] + 1j * obs[k + 1]
            rho[j, i] = obs[k] - 1j * obs[k + 1]
            k += 2
    return rho


@dataclass(frozen=True)
class DecodedAction:
    total_time: float | None
    segments: int | None
    pulses: np.ndarray


def decode_action(
    raw, config: EnvConfig, u_bound: float, n_controls: int, first_step: bool = True
) -> DecodedAction:
    """Affine map from the policy's [-1, 1] range to physical values.

    T and N are only meaningful on the first step of an episode; afterwards
    they are returned as None. Raw values are clamped, never rejected.
    """
    raw = np.clip(np.asarray(raw, dtype=np.float64), -1.0, 1.0)
    t_lo, t_hi = config.t_range
    n_lo, n_hi = config.n_range
    if first_step:
        total_time = t_lo + (raw[0] + 1.0) / 2.0 * (t_hi - t_lo)
        segments = int(round(n_lo + (raw[1] + 1.0) / 2.0 * (n_hi - n_lo)))
        segments = min(max(segments, n_lo), n_hi)
    else:
        total_time = None
        segments = None
    pulses = raw[2 : 2 + n_controls] * u_bound
    return DecodedAction(total_time, segments, pulses)


def shaped_reward(f_now: float, f_prev: float, t: int, f_min: float) -> float:
    """Fidelity-difference reward with threshold bonuses and a time penalty."""
    r = 10.0 * f_now if t == 0 else 100.0 * (f_now - f_prev)
    if f_now > 0.9:
        r += 5.0
    if f_now > f_min:
        r += 20.0
    return r - 0.01 * t


class QuantumControlEnv:
    """Single-system episodic environment; instances are single-threaded."""

    def __init__(self, entry: CatalogEntry, config: EnvConfig):
        self.entry = entry
        self.config = config
        self._descriptor = entry.descriptor.as_array()
        self._u_bound = config.u_max * entry.amplitude_scale
        if config.mode == "open":
            channels = amplitude_damping_channels(entry.n_qubits, config.gamma)
            self._gen0 = liouvillian(entry.ham.drift, channels)
            self._gen_controls = control_generators(entry.ham)
        else:
            self._drift = entry.ham.drift
            self._controls = entry.ham.control_stack()
        self._active = False

    @property
    def u_bound(self) -> float:
        return self._u_bound

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._seed = seed
        self._psi = self.entry.initial.copy()
        self._rho = np.outer(self._psi, self._psi.conj())
        self._vrho = linalg.vec(self._rho)
        self._step_index = 0
        self._total_time = None
        self._segments = None
        self._dt = None
        self._f_prev = self._fidelity()
        self._applied = []
        self._active = True
        return self._observe()

    def _fidelity(self) -> float:
        target = self.entry.target
        f = float(np.real(target.conj() @ self._rho @ target))
        return min(max(f, 0.0), 1.0) if -1e-9 <= f <= 1.0 + 1e-9 else f

    def _observe(self) -> np.ndarray:
        return encode_observation(self._rho, self._descriptor)

    def _evolve_segment(self, pulses: np.ndarray):
        if self.config.mode == "open":
            gen = self._gen0.copy()
            for j in range(pulses.shape[0]):
                gen += pulses[j] * self._gen_controls[j]
            self._vrho = kernels.matexp(self._dt * gen) @ self._vrho
            self._rho = linalg.unvec(self._vrho, self.entry.dim)
        else:
            h = self._drift.copy()
            for j in range(pulses.shape[0]):
                h += pulses[j] * self._controls[j]
            u = kernels.matexp(-1j * self._dt * h)
            self._psi = u @ self._psi
            self._rho = np.outer(self._psi, self._psi.conj())

    def step(self, raw_action) -> StepOutcome:
        if not self._active:
            raise EpisodeDoneError("episode is finished; call reset() first")
        first = self._step_index == 0
        decoded = decode_action(
            raw_action, self.config, self._u_bound, self.entry.ham.n_controls, first
        )
        if first:
            if self.config.fixed_t is not None:
                self._total_time = float(self.config.fixed_t)
                self._segments = int(self.config.fixed_n)
            else:
                self._total_time = decoded.total_time
                self._segments = decoded.segments
            self._dt = self._total_time / self._segments

        self._evolve_segment(decoded.pulses)
        self._applied.append(decoded.pulses.copy())
        f_now = self._fidelity()
        reward = shaped_reward(f_now, self._f_prev, self._step_index, self.config.f_min)
        self._step_index += 1
        done = f_now >= self.config.f_min or self._step_index >= self._segments
        self._f_prev = f_now
        if done:
            self._active = False
        info = {
            "fidelity": f_now,
            "step_index": self._step_index - 1,
            "steps_taken": self._step_index,
            "chosen_T": self._total_time,
            "chosen_N": self._segments,
            "effective_T": self._step_index * self._dt,
        }
        return StepOutcome(self._observe(), reward, done, info)

    def applied_schedule(self) -> tuple:
        """(T, N, amplitudes actually applied) for pulse-file export."""
        amps = (
            np.stack(self._applied)
            if self._applied
            else np.zeros((0, self.entry.ham.n_controls))
        )
        return self._total_time, self._segments, amps
