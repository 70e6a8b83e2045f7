"""Environment contract: observation layout, action decoding, reward
branches, latching and termination."""

import numpy as np
import pytest

from qsteer import catalog
from qsteer.env import (
    ACTION_DIM,
    OBS_DIM,
    EnvConfig,
    EpisodeDoneError,
    QuantumControlEnv,
    decode_action,
    decode_observation,
    encode_observation,
    shaped_reward,
)


def make_env(entry_id="SQ2", **cfg):
    return QuantumControlEnv(catalog.get_entry(entry_id), EnvConfig(**cfg))


class TestConfig:
    def test_defaults(self):
        assert EnvConfig(mode="closed").f_min == 0.999
        assert EnvConfig(mode="open").f_min == 0.95
        assert EnvConfig(mode="open", f_min=0.9).f_min == 0.9

    def test_ranges(self):
        cfg = EnvConfig()
        assert cfg.t_range == (1.0, 20.0)
        assert cfg.n_range == (2, 60)
        assert cfg.u_max == 1.0
        assert cfg.m_max == 6

    def test_segment_ceiling_rule(self):
        with pytest.raises(ValueError):
            EnvConfig(t_range=(1.0, 10.0), n_range=(2, 60))


class TestObservationEncoding:
    def test_ground_state_single_qubit(self):
        rho = np.array([[1, 0], [0, 0]], dtype=complex)
        obs = encode_observation(rho, catalog.get_entry("SQ2").descriptor.as_array())
        assert obs.shape == (OBS_DIM,)
        assert obs[0] == 1.0
        assert np.all(obs[1:64] == 0.0)
        assert obs[64:].tolist() == [1, 1, 1.0, 1, 0, 1]

    def test_plus_state_layout(self):
        plus = catalog.named_state("+", 2)
        rho = np.outer(plus, plus.conj())
        obs = encode_observation(rho, np.zeros(6))
        assert np.allclose(obs[:4], [0.5, 0.5, 0.5, 0.0])

    def test_padding_for_two_qubits(self):
        env = make_env("TQ1", mode="closed")
        obs = env.reset()
        assert obs.shape == (OBS_DIM,)
        assert np.all(obs[16:64] == 0.0)

    def test_round_trip(self, rng):
        for dim in (2, 4, 8):
            m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            rho = m @ m.conj().T
            rho /= np.trace(rho)
            obs = encode_observation(rho, np.zeros(6))
            assert np.max(np.abs(decode_observation(obs, dim) - rho)) <= 1e-12


class TestActionDecoding:
    def test_time_endpoints(self):
        cfg = EnvConfig()
        lo = decode_action(np.full(ACTION_DIM, -1.0), cfg, 1.0, 1)
        hi = decode_action(np.full(ACTION_DIM, 1.0), cfg, 1.0, 1)
        assert lo.total_time == 1.0 and hi.total_time == 20.0
        assert lo.segments == 2 and hi.segments == 60

    def test_segment_midpoint(self):
        raw = np.zeros(ACTION_DIM)
        assert decode_action(raw, EnvConfig(), 1.0, 1).segments == 31

    def test_pulse_scaling(self):
        raw = np.zeros(ACTION_DIM)
        raw[2] = 0.5
        decoded = decode_action(raw, EnvConfig(), 1.0, 1)
        assert decoded.pulses.tolist() == [0.5]
        scaled = decode_action(raw, EnvConfig(), 2.0, 1)
        assert scaled.pulses.tolist() == [1.0]

    def test_extra_slots_ignored(self):
        raw = np.linspace(-1, 1, ACTION_DIM)
        decoded = decode_action(raw, EnvConfig(), 1.0, 2)
        assert decoded.pulses.shape == (2,)

    def test_clamping(self):
        raw = np.full(ACTION_DIM, 5.0)
        decoded = decode_action(raw, EnvConfig(), 1.0, 1)
        assert decoded.total_time == 20.0
        assert decoded.pulses.tolist() == [1.0]

    def test_monotone_in_each_slot(self):
        cfg = EnvConfig()
        grid = np.linspace(-1, 1, 9)
        times = [decode_action(np.array([g, 0, 0, 0, 0, 0, 0, 0]), cfg, 1.0, 1).total_time for g in grid]
        segs = [decode_action(np.array([0, g, 0, 0, 0, 0, 0, 0]), cfg, 1.0, 1).segments for g in grid]
        pulses = [decode_action(np.array([0, 0, g, 0, 0, 0, 0, 0]), cfg, 1.0, 1).pulses[0] for g in grid]
        assert times == sorted(times)
        assert segs == sorted(segs)
        assert pulses == sorted(pulses)

    def test_not_first_step(self):
        decoded = decode_action(np.zeros(ACTION_DIM), EnvConfig(), 1.0, 1, first_step=False)
        assert decoded.total_time is None and decoded.segments is None


class TestReward:
    def test_initial_step(self):
        assert shaped_reward(0.5, 0.0, 0, 0.95) == 5.0

    def test_all_branches(self):
        got = shaped_reward(0.96, 0.80, 3, 0.95)
        assert abs(got - 40.97) < 1e-12

    def test_time_penalty_only(self):
        assert shaped_reward(0.5, 0.5, 1, 0.95) == -0.01

    def test_delta_branch(self):
        assert abs(shaped_reward(0.6, 0.5, 2, 0.95) - (10.0 - 0.02)) < 1e-12

    def test_first_bonus_strict(self):
        assert shaped_reward(0.9, 0.9, 1, 0.95) == -0.01
        assert shaped_reward(0.9 + 1e-9, 0.9, 1, 0.95) > 4.0

    def test_threshold_bonus_strict(self):
        base = shaped_reward(0.95, 0.94, 1, 0.95)
        assert abs(base - (1.0 + 5.0 - 0.01)) < 1e-12
        above = shaped_reward(0.951, 0.94, 1, 0.95)
        assert abs(above - (1.1 + 5.0 + 20.0 - 0.01)) < 1e-12


class TestEpisode:
    def test_reset_observation(self):
        env = make_env("SQ2", mode="closed")
        obs = env.reset(seed=1)
        assert obs[0] == 1.0 and np.all(obs[1:64] == 0)
        obs2 = env.reset(seed=1)
        assert np.array_equal(obs, obs2)

    def test_latching(self):
        env = make_env("SQ2", mode="closed")
        env.reset()
        first = np.zeros(ACTION_DIM)
        env.step(first)
        assert env._segments == 31
        different = np.ones(ACTION_DIM)
        out = env.step(different)
        assert env._segments == 31  # unchanged after the first step
        assert out.info["chosen_N"] == 31

    def test_episode_length_capped(self):
        env = make_env("SQ1", mode="closed")
        env.reset()
        action = np.full(ACTION_DIM, -1.0)  # N = 2, zero drift keeps F flat
        action[2:] = 0.0
        out = env.step(action)
        assert not out.done
        out = env.step(action)
        assert out.done
        assert out.info["steps_taken"] == 2
        assert abs(out.info["effective_T"] - out.info["chosen_T"]) < 1e-12

    def test_early_termination_on_threshold(self):
        # Drift sigma_x alone flips |0> -> |1> at T = pi/2; pick T twice that
        # so the crossing happens mid-episode.
        env = make_env("SQ2", mode="closed", f_min=0.9)
        env.reset()
        t_total = np.pi
        raw_t = 2 * (t_total - 1.0) / 19.0 - 1.0
        action = np.array([raw_t, 0.0, 0, 0, 0, 0, 0, 0])
        done = False
        steps = 0
        while not done:
            out = env.step(action)
            done = out.done
            steps += 1
        assert out.info["fidelity"] >= 0.9
        assert steps < 31
        assert out.info["effective_T"] < t_total

    def test_step_after_done_raises(self):
        env = make_env("SQ1", mode="closed")
        env.reset()
        action = np.full(ACTION_DIM, -1.0)
        env.step(action)
        env.step(action)
        with pytest.raises(EpisodeDoneError):
            env.step(action)

    def test_fidelity_monotone_under_resonant_drive(self):
        # SQ2 with zero control follows the analytic drift rotation; fidelity
        # to |1> rises monotonically until T = pi/2.
        env = make_env("SQ2", mode="closed")
        env.reset()
        t_total = np.pi / 2
        raw_t = 2 * (t_total - 1.0) / 19.0 - 1.0
        action = np.array([raw_t, 1.0, 0, 0, 0, 0, 0, 0])  # N = 60
        fids = []
        done = False
        while not done:
            out = env.step(action)
            fids.append(out.info["fidelity"])
            done = out.done
        assert all(b >= a - 1e-12 for a, b in zip(fids, fids[1:]))
        assert fids[-1] >= 0.999

    def test_open_mode_reward_uses_open_dynamics(self):
        env = make_env("SQ2", mode="open", gamma=0.02)
        obs = env.reset()
        out = env.step(np.zeros(ACTION_DIM))
        assert 0.0 <= out.info["fidelity"] <= 1.0
        assert out.observation.shape == (OBS_DIM,)

    def test_fixed_temporal_ablation_overrides_action(self):
        env = make_env("SQ2", mode="closed", fixed_t=10.0, fixed_n=20)
        env.reset()
        out = env.step(np.ones(ACTION_DIM))  # action asks for T=20, N=60
        assert out.info["chosen_T"] == 10.0
        assert out.info["chosen_N"] == 20

    def test_fixed_temporal_validation(self):
        with pytest.raises(ValueError):
            EnvConfig(fixed_t=10.0)  # missing fixed_n
        with pytest.raises(ValueError):
            EnvConfig(fixed_t=50.0, fixed_n=20)  # outside t_range
