"""Propagation checks against analytic solutions and conservation laws."""

import numpy as np
import pytest

from qsteer import catalog
from qsteer.dynamics import (
    ControlledHamiltonian,
    DensityMatrix,
    LindbladChannel,
    PulseSchedule,
    amplitude_damping_channels,
    fidelity,
    liouvillian,
    propagate_closed,
    propagate_open,
)
from qsteer.linalg import SIGMA_MINUS, SIGMA_X, SIGMA_Z, DimensionError, unvec, vec

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def free_evolution(dim=2):
    return ControlledHamiltonian(drift=np.zeros((dim, dim), dtype=complex), controls=())


def no_pulse_schedule(total_time, segments):
    return PulseSchedule(total_time, segments, np.zeros((segments, 0)))


def random_schedule(rng, entry, total_time=None, segments=None, bound=1.0):
    total_time = total_time if total_time is not None else rng.uniform(1.0, 6.0)
    segments = segments if segments is not None else int(rng.integers(2, 9))
    amps = rng.uniform(-bound, bound, size=(segments, entry.ham.n_controls))
    return PulseSchedule(total_time, segments, amps)


class TestLiouvillian:
    def test_zero_hamiltonian_no_channels(self):
        gen = liouvillian(np.zeros((2, 2), dtype=complex), [])
        assert np.array_equal(gen, np.zeros((4, 4)))

    def test_damping_on_maximally_mixed(self):
        gamma = 0.37
        gen = liouvillian(
            np.zeros((2, 2), dtype=complex), [LindbladChannel(SIGMA_MINUS, gamma)]
        )
        rho_dot = unvec(gen @ vec(np.eye(2, dtype=complex) / 2), 2)
        want = gamma * np.diag([0.5, -0.5]).astype(complex)
        assert np.max(np.abs(rho_dot - want)) < 1e-14

    def test_matches_commutator(self, rng):
        gen = liouvillian(SIGMA_Z, [])
        for _ in range(10):
            m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            rho = (m + m.conj().T) / 2
            lhs = unvec(gen @ vec(rho), 2)
            rhs = -1j * (SIGMA_Z @ rho - rho @ SIGMA_Z)
            assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            LindbladChannel(SIGMA_MINUS, -0.1)


class TestClosedPropagation:
    def test_rabi_flip(self):
        ham = ControlledHamiltonian(drift=SIGMA_X, controls=())
        states = propagate_closed(ham, no_pulse_schedule(np.pi / 2, 1), KET0)
        assert abs(fidelity(DensityMatrix.from_state(states[-1]), KET1) - 1.0) <= 1e-9
        assert np.max(np.abs(states[-1] - (-1j) * KET1)) < 1e-9

    def test_zero_dynamics_is_identity(self):
        ham = ControlledHamiltonian(drift=np.zeros((2, 2), complex), controls=(SIGMA_X,))
        for segments in (1, 5, 17):
            sched = PulseSchedule(2.0, segments, np.zeros((segments, 1)))
            states = propagate_closed(ham, sched, KET0)
            assert np.max(np.abs(states[-1] - KET0)) < 1e-12

    def test_norm_preserved_on_random_schedules(self, rng):
        for entry_id in ("SQ2", "TQ1", "ThQ2"):
            entry = catalog.get_entry(entry_id)
            for _ in range(5):
                sched = random_schedule(rng, entry)
                for psi in propagate_closed(entry.ham, sched, entry.initial):
                    assert abs(np.linalg.norm(psi) - 1.0) <= 1e-9

    def test_purity_conserved(self, rng):
        entry = catalog.get_entry("TQ6")
        sched = random_schedule(rng, entry)
        for psi in propagate_closed(entry.ham, sched, entry.initial):
            rho = DensityMatrix.from_state(psi)
            assert abs(rho.purity() - 1.0) <= 1e-9

    def test_segment_refinement_consistency(self, rng):
        entry = catalog.get_entry("SQ10")
        sched = random_schedule(rng, entry, total_time=3.0, segments=5)
        doubled = PulseSchedule(3.0, 10, np.repeat(sched.amplitudes, 2, axis=0))
        final_a = propagate_closed(entry.ham, sched, entry.initial)[-1]
        final_b = propagate_closed(entry.ham, doubled, entry.initial)[-1]
        assert np.max(np.abs(final_a - final_b)) <= 1e-9

    def test_segment_refinement_consistency_open(self, rng):
        entry = catalog.get_entry("TQ1")
        channels = amplitude_damping_channels(entry.n_qubits, 0.01)
        rho0 = DensityMatrix.from_state(entry.initial)
        sched = random_schedule(rng, entry, total_time=2.0, segments=4)
        doubled = PulseSchedule(2.0, 8, np.repeat(sched.amplitudes, 2, axis=0))
        final_a = propagate_open(entry.ham, channels, sched, rho0)[-1].matrix
        final_b = propagate_open(entry.ham, channels, doubled, rho0)[-1].matrix
        assert np.max(np.abs(final_a - final_b)) <= 1e-9


class TestOpenPropagation:
    def test_amplitude_damping_decay(self):
        # <1|rho(T)|1> = exp(-gamma T) for a freely decaying excited state.
        channels = amplitude_damping_channels(1, 0.01)
        rho0 = DensityMatrix.from_state(KET1)
        states = propagate_open(free_evolution(), channels, no_pulse_schedule(2.0, 4), rho0)
        got = states[-1].matrix[1, 1].real
        assert abs(got - np.exp(-0.02)) <= 1e-6
        assert abs(fidelity(states[-1], KET1) - np.exp(-0.02)) <= 1e-6

    def test_zero_gamma_matches_closed(self, rng):
        entry = catalog.get_entry("TQ25")
        sched = random_schedule(rng, entry)
        channels = amplitude_damping_channels(entry.n_qubits, 0.0)
        rho0 = DensityMatrix.from_state(entry.initial)
        open_states = propagate_open(entry.ham, channels, sched, rho0)
        closed_states = propagate_closed(entry.ham, sched, entry.initial)
        f_open = fidelity(open_states[-1], entry.target)
        f_closed = fidelity(
            DensityMatrix.from_state(closed_states[-1]), entry.target
        )
        assert abs(f_open - f_closed) <= 1e-9

    def test_trace_and_hermiticity_preserved(self, rng):
        for entry_id in ("SQ5", "TQ13", "ThQ1"):
            entry = catalog.get_entry(entry_id)
            for gamma in (0.0, 0.01, 0.02):
                channels = amplitude_damping_channels(entry.n_qubits, gamma)
                sched = random_schedule(rng, entry)
                rho0 = DensityMatrix.from_state(entry.initial)
                for state in propagate_open(entry.ham, channels, sched, rho0):
                    m = state.matrix
                    assert abs(np.trace(m).real - 1.0) <= 1e-9
                    assert abs(np.trace(m).imag) <= 1e-9
                    assert np.max(np.abs(m - m.conj().T)) <= 1e-9

    def test_positivity_spot_check(self, rng):
        entry = catalog.get_entry("SQ2")
        channels = amplitude_damping_channels(1, 0.02)
        sched = random_schedule(rng, entry)
        rho0 = DensityMatrix.from_state(entry.initial)
        final = propagate_open(entry.ham, channels, sched, rho0)[-1].matrix
        for _ in range(25):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            assert (v.conj() @ final @ v).real >= -1e-9


class TestFidelity:
    def test_perfect_overlap(self):
        assert fidelity(DensityMatrix.from_state(KET1), KET1) == 1.0

    def test_maximally_mixed(self):
        rho = DensityMatrix(np.eye(2, dtype=complex) / 2)
        assert abs(fidelity(rho, KET0) - 0.5) < 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            fidelity(DensityMatrix(np.eye(2, dtype=complex) / 2), np.zeros(4))


class TestChannels:
    def test_single_qubit(self):
        (ch,) = amplitude_damping_channels(1, 0.25)
        assert np.array_equal(ch.operator, SIGMA_MINUS)
        assert ch.rate == 0.25

    def test_two_qubit_embeddings(self):
        chs = amplitude_damping_channels(2, 0.1)
        eye = np.eye(2, dtype=complex)
        assert np.array_equal(chs[0].operator, np.kron(SIGMA_MINUS, eye))
        assert np.array_equal(chs[1].operator, np.kron(eye, SIGMA_MINUS))

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            amplitude_damping_channels(1, -1e-3)

    def test_zero_gamma_channels_inert(self):
        channels = amplitude_damping_channels(1, 0.0)
        ham = ControlledHamiltonian(drift=SIGMA_X, controls=())
        rho0 = DensityMatrix.from_state(KET0)
        final = propagate_open(ham, channels, no_pulse_schedule(np.pi / 2, 2), rho0)[-1]
        assert abs(fidelity(final, KET1) - 1.0) <= 1e-9


class TestTypes:
    def test_non_hermitian_drift_rejected(self):
        with pytest.raises(ValueError):
            ControlledHamiltonian(drift=SIGMA_MINUS, controls=())

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            PulseSchedule(-1.0, 2, np.zeros((2, 1)))
        with pytest.raises(ValueError):
            PulseSchedule(1.0, 0, np.zeros((0, 1)))
        with pytest.raises(DimensionError):
            PulseSchedule(1.0, 2, np.zeros((3, 1)))

    def test_density_matrix_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(2, dtype=complex))  # trace 2
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[0.5, 0.5], [0.1, 0.5]], dtype=complex))

    def test_schedule_channel_count_checked(self):
        entry = catalog.get_entry("SQ2")
        with pytest.raises(DimensionError):
            propagate_closed(entry.ham, no_pulse_schedule(1.0, 2), entry.initial)
