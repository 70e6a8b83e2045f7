"""Multi-task Soft Actor-Critic with a tanh-squashed Gaussian policy, twin
critics with target networks, a ring replay buffer and a learned entropy
temperature.

Gradients for the fixed topology are hand-derived in :mod:`qsteer.nets` and
here; finite-difference tests pin them down. One gradient update is performed
per environment step after a uniform-random warm-up.
"""

import dataclasses
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import accel
from .env import ACTION_DIM, OBS_DIM, QuantumControlEnv
from .nets import Adam, Mlp, init_linear, soft_update

LOG_2PI = float(np.log(2.0 * np.pi))
SQUASH_EPS = 1e-6

CHECKPOINT_MAGIC = b"QSTR"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


@dataclass(frozen=True)
class SacConfig:
    lr: float = 3e-4
    discount: float = 0.98
    tau: float = 0.05
    batch_size: int = 64
    buffer_capacity: int = 500_000
    hidden: tuple = (64, 256, 512, 256, 64)
    target_entropy: float | None = None  # defaults to -action_dim
    warmup_steps: int = 1000
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.tau <= 0 or self.batch_size <= 0:
            raise ValueError("lr, tau and batch_size must be positive")
        if not 0 < self.discount < 1:
            raise ValueError("discount must be in (0, 1)")


class PolicyNetwork:
    """Trunk MLP with mean and log-std heads; actions are tanh-squashed."""

    def __init__(self, obs_dim, act_dim, hidden, rng, log_std_min, log_std_max):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.log_std_min = log_std_min
        self.log_std_max = log_std_max
        self.trunk = Mlp([obs_dim, *hidden], rng, final_activation=True)
        feat = hidden[-1]
        self.w_mean, self.b_mean = init_linear(feat, act_dim, rng)
        self.w_logstd, self.b_logstd = init_linear(feat, act_dim, rng)

    def parameters(self) -> list:
        return self.trunk.parameters() + [
            self.w_mean,
            self.b_mean,
            self.w_logstd,
            self.b_logstd,
        ]

    def _heads(self, obs):
        feat, cache = self.trunk.forward(obs)
        mean = feat @ self.w_mean + self.b_mean
        log_std_pre = feat @ self.w_logstd + self.b_logstd
        log_std = np.clip(log_std_pre, self.log_std_min, self.log_std_max)
        return mean, log_std_pre, log_std, feat, cache

    def mean_action(self, obs):
        mean, *_ = self._heads(obs)
        return np.tanh(mean)

    def sample(self, obs, eps):
        """Reparametrized sample a = tanh(mean + std * eps) with its log
        density (tanh change-of-variables included)."""
        mean, log_std_pre, log_std, feat, cache = self._heads(obs)
        std = np.exp(log_std)
        a = np.tanh(mean + std * eps)
        log_prob = (
            (-0.5 * eps * eps - log_std - 0.5 * LOG_2PI).sum(axis=1)
            - np.log(1.0 - a * a + SQUASH_EPS).sum(axis=1)
        )
        ctx = (mean, log_std_pre, log_std, std, eps, a, feat, cache)
        return a, log_prob, ctx

    def backward_sample(self, obs, ctx, dlogp, da):
        """Gradients of a loss with per-sample log-prob coefficients
        ``dlogp`` (shape (B,)) and action gradient ``da`` (shape (B, A))."""
        _, log_std_pre, log_std, std, eps, a, feat, cache = ctx
        one_minus_a2 = 1.0 - a * a
        squash = 2.0 * a * one_minus_a2 / (one_minus_a2 + SQUASH_EPS)
        se = std * eps
        dlogp_col = dlogp[:, None]
        dmean = dlogp_col * squash + da * one_minus_a2
        dlogstd = dlogp_col * (squash * se - 1.0) + da * one_minus_a2 * se
        clip_mask = (log_std_pre > self.log_std_min) & (log_std_pre < self.log_std_max)
        dlogstd = dlogstd * clip_mask
        g_w_mean = feat.T @ dmean
        g_b_mean = dmean.sum(axis=0)
        g_w_logstd = feat.T @ dlogstd
        g_b_logstd = dlogstd.sum(axis=0)
        dfeat = dmean @ self.w_mean.T + dlogstd @ self.w_logstd.T
        trunk_grads, _ = self.trunk.backward(obs, cache, dfeat)
        return trunk_grads + [g_w_mean, g_b_mean, g_w_logstd, g_b_logstd]


class QNetwork:
    """Scalar state-action value with the same hidden stack as the policy."""

    def __init__(self, obs_dim, act_dim, hidden, rng):
        self.obs_dim = obs_dim
        self.net = Mlp([obs_dim + act_dim, *hidden, 1], rng)

    def parameters(self) -> list:
        return self.net.parameters()

    def value(self, obs, act):
        x = np.concatenate([obs, act], axis=1)
        out, cache = self.net.forward(x)
        return out[:, 0], (x, cache)

    def backward_value(self, ctx, dout, need_weight_grads=True):
        x, cache = ctx
        grads, dx = self.net.backward(
            x, cache, dout[:, None].copy(), need_weight_grads
        )
        return grads, dx[:, self.obs_dim :]


class ReplayBuffer:
    """Fixed-capacity ring buffer; oldest transitions are evicted first."""

    def __init__(self, capacity, obs_dim=OBS_DIM, act_dim=ACTION_DIM):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self._pos = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done):
        i = self._pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng: np.random.Generator) -> dict:
        """Uniform sample without replacement within the batch."""
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} < batch {batch_size}")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "obs": self.obs[idx].astype(np.float64),
            "actions": self.actions[idx].astype(np.float64),
            "rewards": self.rewards[idx].astype(np.float64),
            "next_obs": self.next_obs[idx].astype(np.float64),
            "dones": self.dones[idx].astype(np.float64),
        }


class SacAgent:
    def __init__(self, config: SacConfig = SacConfig(), obs_dim=OBS_DIM, act_dim=ACTION_DIM, seed=0):
        self.config = config
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init_ss, update_ss, action_ss = ss.spawn(3)
        init_rng = np.random.default_rng(init_ss)
        self._update_rng = np.random.default_rng(update_ss)
        self._action_rng = np.random.default_rng(action_ss)

        hidden = config.hidden
        self.policy = PolicyNetwork(
            obs_dim, act_dim, hidden, init_rng, config.log_std_min, config.log_std_max
        )
        self.q1 = QNetwork(obs_dim, act_dim, hidden, init_rng)
        self.q2 = QNetwork(obs_dim, act_dim, hidden, init_rng)
        self.q1_target = QNetwork(obs_dim, act_dim, hidden, init_rng)
        self.q2_target = QNetwork(obs_dim, act_dim, hidden, init_rng)
        self.q1_target.net.copy_from(self.q1.net)
        self.q2_target.net.copy_from(self.q2.net)
        self.log_alpha = np.zeros(1, dtype=np.float64)
        self.target_entropy = (
            config.target_entropy if config.target_entropy is not None else -float(act_dim)
        )

        adam = dict(beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps)
        self.policy_opt = Adam(self.policy.parameters(), config.lr, **adam)
        self.q1_opt = Adam(self.q1.parameters(), config.lr, **adam)
        self.q2_opt = Adam(self.q2.parameters(), config.lr, **adam)
        self.alpha_opt = Adam([self.log_alpha], config.lr, **adam)
        self.total_updates = 0
        self.total_env_steps = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def policy_sample(self, obs, deterministic=False, rng=None):
        """Single-observation action draw; returns (action, log_prob)."""
        obs = np.asarray(obs, dtype=np.float64)[None, :]
        if deterministic:
            return self.policy.mean_action(obs)[0], None
        rng = rng if rng is not None else self._action_rng
        eps = rng.standard_normal((1, self.act_dim))
        a, log_prob, _ = self.policy.sample(obs, eps)
        return a[0], float(log_prob[0])

    def _critic_loss_grads(self, q: QNetwork, obs, actions, y):
        values, ctx = q.value(obs, actions)
        diff = values - y
        loss = float(np.mean(diff * diff))
        dout = (2.0 / diff.shape[0]) * diff
        grads, _ = q.backward_value(ctx, dout)
        return loss, grads

    def _policy_loss_grads(self, obs, eps, alpha):
        """Loss mean(alpha * log_prob - min(Q1, Q2)) and its policy grads for
        a fixed reparametrization noise ``eps``."""
        batch = obs.shape[0]
        a, log_prob, ctx = self.policy.sample(obs, eps)
        q1v, ctx1 = self.q1.value(obs, a)
        q2v, ctx2 = self.q2.value(obs, a)
        qmin = np.minimum(q1v, q2v)
        loss = float(np.mean(alpha * log_prob - qmin))
        pick1 = (q1v <= q2v).astype(np.float64)
        scale = -1.0 / batch
        _, da1 = self.q1.backward_value(ctx1, scale * pick1, need_weight_grads=False)
        _, da2 = self.q2.backward_value(ctx2, scale * (1.0 - pick1), need_weight_grads=False)
        da = da1 + da2
        dlogp = np.full(batch, alpha / batch)
        grads = self.policy.backward_sample(obs, ctx, dlogp, da)
        return loss, grads, log_prob

    def update(self, batch: dict) -> dict:
        """One SAC gradient step on every component, then target soft-update."""
        obs = batch["obs"]
        actions = batch["actions"]
        rewards = batch["rewards"]
        next_obs = batch["next_obs"]
        dones = batch["dones"]
        cfg = self.config
        batch_size = obs.shape[0]
        alpha = self.alpha

        eps_next = self._update_rng.standard_normal((batch_size, self.act_dim))
        a_next, logp_next, _ = self.policy.sample(next_obs, eps_next)
        q1n, _ = self.q1_target.value(next_obs, a_next)
        q2n, _ = self.q2_target.value(next_obs, a_next)
        y = rewards + cfg.discount * (1.0 - dones) * (
            np.minimum(q1n, q2n) - alpha * logp_next
        )

        q1_loss, g1 = self._critic_loss_grads(self.q1, obs, actions, y)
        self.q1_opt.step(g1)
        q2_loss, g2 = self._critic_loss_grads(self.q2, obs, actions, y)
        self.q2_opt.step(g2)

        eps = self._update_rng.standard_normal((batch_size, self.act_dim))
        policy_loss, policy_grads, log_prob = self._policy_loss_grads(obs, eps, alpha)
        self.policy_opt.step(policy_grads)

        resid = log_prob + self.target_entropy
        alpha_loss = float(np.mean(-self.log_alpha[0] * resid))
        self.alpha_opt.step([np.array([-np.mean(resid)])])

        soft_update(self.q1.parameters(), self.q1_target.parameters(), cfg.tau)
        soft_update(self.q2.parameters(), self.q2_target.parameters(), cfg.tau)
        self.total_updates += 1
        return {
            "q1": q1_loss,
            "q2": q2_loss,
            "policy": policy_loss,
            "alpha": alpha_loss,
            "alpha_value": self.alpha,
        }

    def _ordered_arrays(self) -> list:
        arrays = (
            self.policy.parameters()
            + self.q1.parameters()
            + self.q2.parameters()
            + self.q1_target.parameters()
            + self.q2_target.parameters()
            + [self.log_alpha]
        )
        for opt in (self.policy_opt, self.q1_opt, self.q2_opt, self.alpha_opt):
            arrays += opt.m + opt.v
        return arrays


def rollout(agent: SacAgent, env: QuantumControlEnv, rng=None, deterministic=False) -> dict:
    """Run one episode; returns fidelity, temporal choices and the applied pulses."""
    obs = env.reset()
    done = False
    total_reward = 0.0
    info = {}
    while not done:
        action, _ = agent.policy_sample(obs, deterministic=deterministic, rng=rng)
        outcome = env.step(action)
        obs = outcome.observation
        total_reward += outcome.reward
        done = outcome.done
        info = outcome.info
    total_time, segments, amplitudes = env.applied_schedule()
    return {
        "fidelity": info["fidelity"],
        "chosen_T": total_time,
        "chosen_N": segments,
        "effective_T": info["effective_T"],
        "effective_N": info["steps_taken"],
        "reward": total_reward,
        "amplitudes": amplitudes,
    }


def train(
    entries,
    env_config,
    sac_config: SacConfig,
    total_steps: int,
    seed: int,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
) -> tuple:
    """Train one agent over a task set, sampling a system uniformly per
    episode. Returns (agent, per-episode log)."""
    if not entries:
        raise ValueError("need at least one catalog entry to train on")
    with accel.single_thread_blas():
        return _train_loop(
            entries, env_config, sac_config, total_steps, seed, checkpoint_dir, checkpoint_every
        )


def _train_loop(entries, env_config, sac_config, total_steps, seed, checkpoint_dir, checkpoint_every):
    ss = np.random.SeedSequence(seed)
    agent_ss, task_ss, warmup_ss, action_ss, buffer_ss = ss.spawn(5)
    agent = SacAgent(sac_config, seed=agent_ss)
    task_rng = np.random.default_rng(task_ss)
    warmup_rng = np.random.default_rng(warmup_ss)
    action_rng = np.random.default_rng(action_ss)
    buffer_rng = np.random.default_rng(buffer_ss)

    envs = [QuantumControlEnv(e, env_config) for e in entries]
    buffer = ReplayBuffer(sac_config.buffer_capacity, agent.obs_dim, agent.act_dim)
    log = []
    step = 0
    episode = 0
    losses = {}
    while step < total_steps:
        pick = int(task_rng.integers(len(entries)))
        env = envs[pick]
        obs = env.reset()
        done = False
        ep_reward = 0.0
        info = {}
        while not done and step < total_steps:
            if step < sac_config.warmup_steps:
                action = warmup_rng.uniform(-1.0, 1.0, agent.act_dim)
            else:
                action, _ = agent.policy_sample(obs, rng=action_rng)
            outcome = env.step(action)
            buffer.add(obs, action, outcome.reward, outcome.observation, outcome.done)
            obs = outcome.observation
            ep_reward += outcome.reward
            done = outcome.done
            info = outcome.info
            step += 1
            agent.total_env_steps += 1
            if step > sac_config.warmup_steps and len(buffer) >= sac_config.batch_size:
                losses = agent.update(buffer.sample(sac_config.batch_size, buffer_rng))
            if (
                checkpoint_dir is not None
                and checkpoint_every > 0
                and step % checkpoint_every == 0
            ):
                save_checkpoint(agent, f"{checkpoint_dir}/step_{step}.ckpt")
        log.append(
            {
                "episode": episode,
                "global_step": step,
                "system_id": entries[pick].id,
                "fidelity": info.get("fidelity"),
                "steps": info.get("steps_taken"),
                "chosen_T": info.get("chosen_T"),
                "chosen_N": info.get("chosen_N"),
                "effective_T": info.get("effective_T"),
                "reward": ep_reward,
                "completed": done,
                "losses": {k: losses[k] for k in ("q1", "q2", "policy", "alpha")}
                if losses
                else None,
            }
        )
        episode += 1
    return agent, log


def save_checkpoint(agent: SacAgent, path):
    """Binary little-endian dump: header (magic, version, dims), float64
    parameter and optimizer-state blocks, trailing CRC-32."""
    hidden = agent.config.hidden
    head = bytearray()
    head += CHECKPOINT_MAGIC
    head += struct.pack("<I", CHECKPOINT_VERSION)
    head += struct.pack("<III", agent.obs_dim, agent.act_dim, len(hidden))
    head += struct.pack(f"<{len(hidden)}I", *hidden)
    body = bytearray()
    for arr in agent._ordered_arrays():
        body += np.ascontiguousarray(arr, dtype=np.float64).tobytes()
    body += struct.pack(
        "<QQQQQQ",
        agent.policy_opt.t,
        agent.q1_opt.t,
        agent.q2_opt.t,
        agent.alpha_opt.t,
        agent.total_env_steps,
        agent.total_updates,
    )
    payload = bytes(head) + bytes(body)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_checkpoint(path, config: SacConfig | None = None) -> SacAgent:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 4 + 12 + 4:
        raise CheckpointCorruptError("file too short")
    payload, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CheckpointCorruptError("checksum mismatch")
    if payload[:4] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError("bad magic")
    (version,) = struct.unpack("<I", payload[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    obs_dim, act_dim, n_hidden = struct.unpack("<III", payload[8:20])
    off = 20
    hidden = struct.unpack(f"<{n_hidden}I", payload[off : off + 4 * n_hidden])
    off += 4 * n_hidden

    base = config if config is not None else SacConfig()
    cfg = dataclasses.replace(base, hidden=tuple(hidden))
    agent = SacAgent(cfg, obs_dim=obs_dim, act_dim=act_dim, seed=0)
    arrays = agent._ordered_arrays()
    for arr in arrays:
        n = arr.size * 8
        if off + n > len(payload):
            raise CheckpointCorruptError("truncated parameter block")
        flat = np.frombuffer(payload[off : off + n], dtype="<f8")
        np.copyto(arr, flat.reshape(arr.shape))
        off += n
    if off + 48 != len(payload):
        raise CheckpointCorruptError("unexpected trailing length")
    t1, t2, t3, t4, env_steps, updates = struct.unpack("<QQQQQQ", payload[off:])
    agent.policy_opt.t = t1
    agent.q1_opt.t = t2
    agent.q2_opt.t = t3
    agent.alpha_opt.t = t4
    agent.total_env_steps = env_steps
    agent.total_updates = updates
    return agent
