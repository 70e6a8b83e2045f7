"""Gradient-ascent pulse engineering over piecewise-constant amplitudes.

Segment-propagator derivatives are exact (augmented-block matrix
exponentials) rather than first-order approximations; a finite-difference
gradient is kept alongside as the independent cross-check and as an optional
gradient mode. Ascent uses backtracking line search with projection onto the
amplitude box, plus seeded random restarts.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, linalg
from .catalog import CatalogEntry
from .dynamics import (
    PulseSchedule,
    amplitude_damping_channels,
    control_generators,
    liouvillian,
)


@dataclass(frozen=True)
class GrapeConfig:
    max_iters: int = 300
    step_size: float = 0.5
    gradient_mode: str = "adjoint"  # or "finite-difference"
    tol: float = 1e-8
    u_max: float = 1.0
    restarts: int = 5
    armijo: float = 1e-4
    max_backtracks: int = 30
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 0 or self.step_size <= 0 or self.tol <= 0:
            raise ValueError("max_iters, step_size and tol must be positive")
        if self.gradient_mode not in ("adjoint", "finite-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")


@dataclass(frozen=True)
class GrapeResult:
    schedule: PulseSchedule
    fidelity_trace: tuple
    converged: bool
    restart_fidelities: tuple

    @property
    def fidelity(self) -> float:
        return self.fidelity_trace[-1]


def _open_setup(entry: CatalogEntry, gamma: float):
    channels = amplitude_damping_channels(entry.n_qubits, gamma)
    gen0 = liouvillian(entry.ham.drift, channels)
    gens = control_generators(entry.ham)
    rho0 = np.outer(entry.initial, entry.initial.conj())
    target_proj = np.outer(entry.target, entry.target.conj())
    return gen0, gens, linalg.vec(rho0), linalg.vec(target_proj)


def transfer_fidelity(entry: CatalogEntry, schedule: PulseSchedule, mode: str, gamma: float) -> float:
    """Final-state fidelity of a schedule, closed or open."""
    if mode == "closed":
        states = kernels.propagate_closed_states(
            entry.ham.drift, entry.ham.control_stack(), schedule.amplitudes,
            schedule.dt, entry.initial,
        )
        overlap = np.vdot(entry.target, states[-1])
        return float((overlap * overlap.conjugate()).real)
    gen0, gens, vrho0, vtarget = _open_setup(entry, gamma)
    vstates = kernels.propagate_open_states(gen0, gens, schedule.amplitudes, schedule.dt, vrho0)
    return float(np.vdot(vtarget, vstates[-1]).real)


def fidelity_gradient(entry: CatalogEntry, schedule: PulseSchedule, mode: str, gamma: float = 0.0) -> np.ndarray:
    """Exact dF/du_{k,j} as an (N, m) array."""
    if schedule.n_controls != entry.ham.n_controls:
        raise linalg.DimensionError(
            f"schedule has {schedule.n_controls} channels, system has {entry.ham.n_controls}"
        )
    if mode == "closed":
        grad, _ = kernels.closed_fidelity_gradient(
            entry.ham.drift, entry.ham.control_stack(), schedule.amplitudes,
            schedule.dt, entry.initial, entry.target,
        )
        return grad
    gen0, gens, vrho0, vtarget = _open_setup(entry, gamma)
    grad, _ = kernels.open_fidelity_gradient(
        gen0, gens, schedule.amplitudes, schedule.dt, vrho0, vtarget
    )
    return grad


def fidelity_gradient_fd(
    entry: CatalogEntry, schedule: PulseSchedule, mode: str, gamma: float = 0.0, h: float = 1e-6
) -> np.ndarray:
    """Central finite differences; the independent oracle for the exact gradient."""
    amps = schedule.amplitudes
    grad = np.zeros_like(amps)
    for k in range(amps.shape[0]):
        for j in range(amps.shape[1]):
            for sign in (1.0, -1.0):
                shifted = amps.copy()
                shifted[k, j] += sign * h
                f = transfer_fidelity(
                    entry,
                    PulseSchedule(schedule.total_time, schedule.segments, shifted),
                    mode,
                    gamma,
                )
                grad[k, j] += sign * f
    return grad / (2.0 * h)


def grape_optimize(
    entry: CatalogEntry,
    total_time: float,
    segments: int,
    mode: str,
    gamma: float,
    config: GrapeConfig = GrapeConfig(),
    seed: int = 0,
) -> GrapeResult:
    """Projected gradient ascent on transfer fidelity with random restarts."""
    bound = config.u_max * entry.amplitude_scale
    m = entry.ham.n_controls
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def gradient(amps):
        sched = PulseSchedule(total_time, segments, amps)
        if config.gradient_mode == "adjoint":
            return fidelity_gradient(entry, sched, mode, gamma)
        return fidelity_gradient_fd(entry, sched, mode, gamma, config.fd_step)

    def fid(amps):
        return transfer_fidelity(entry, PulseSchedule(total_time, segments, amps), mode, gamma)

    best = None
    restart_fids = []
    for _ in range(max(config.restarts, 1)):
        amps = rng.uniform(-0.1 * bound, 0.1 * bound, size=(segments, m))
        f = fid(amps)
        trace = [f]
        converged = False
        eta = config.step_size
        for _ in range(config.max_iters):
            g = gradient(amps)
            accepted = False
            for _ in range(config.max_backtracks):
                cand = np.clip(amps + eta * g, -bound, bound)
                f_cand = fid(cand)
                gain = f_cand - f
                predicted = float(np.sum(g * (cand - amps)))
                if gain >= config.armijo * predicted and gain > 0:
                    amps, f = cand, f_cand
                    trace.append(f)
                    accepted = True
                    eta = min(eta * 2.0, config.step_size * 64.0)
                    break
                eta *= 0.5
            if not accepted:
                converged = True
                break
            if len(trace) >= 2 and trace[-1] - trace[-2] < config.tol:
                converged = True
                break
        restart_fids.append(f)
        if best is None or f > best[1]:
            best = (amps, f, tuple(trace), converged)

    amps, _, trace, converged = best
    schedule = PulseSchedule(total_time, segments, amps)
    return GrapeResult(
        schedule=schedule,
        fidelity_trace=trace,
        converged=converged,
        restart_fidelities=tuple(restart_fids),
    )
