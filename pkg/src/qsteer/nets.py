"""Minimal fully-connected networks with hand-written reverse-mode gradients.

The agent's topology is fixed and small, so gradients are coded directly
rather than through an autodiff framework; correctness is pinned by
finite-difference tests. Weights are stored as (in, out) matrices so the
forward pass is ``x @ W + b`` on (batch, features) arrays.

Activation, delta and gradient buffers are preallocated per batch size to
keep the update loop allocation-free: a forward's cache is only valid until
the next forward of the same network at the same batch size, and returned
gradient arrays are only valid until the next backward. Call sites consume
them immediately.
"""

import numpy as np

from . import kernels


def init_linear(n_in: int, n_out: int, rng: np.random.Generator):
    """Uniform fan-in scaling: W, b ~ U(-1/sqrt(n_in), 1/sqrt(n_in))."""
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_in, n_out))
    b = rng.uniform(-bound, bound, size=n_out)
    return w, b


class Mlp:
    """ReLU network; ``final_activation`` also rectifies the last layer
    (used for feature trunks)."""

    def __init__(self, sizes, rng: np.random.Generator, final_activation=False):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.final_activation = final_activation
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w, b = init_linear(n_in, n_out, rng)
            self.weights.append(w)
            self.biases.append(b)
        self._scratch = {}
        self._grad_w = [np.empty_like(w) for w in self.weights]
        self._grad_b = [np.empty_like(b) for b in self.biases]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy_from(self, other: "Mlp"):
        for dst, src in zip(self.parameters(), other.parameters()):
            np.copyto(dst, src)

    def _buffers(self, batch: int):
        buf = self._scratch.get(batch)
        if buf is None:
            acts = [np.empty((batch, n)) for n in self.sizes[1:]]
            deltas = [np.empty((batch, n)) for n in self.sizes[1:-1]]
            buf = (acts, deltas)
            self._scratch[batch] = buf
        return buf

    def forward(self, x: np.ndarray):
        """Returns (output, cache). The cache (and the output view) are
        reused by the next same-batch forward of this network."""
        acts, _ = self._buffers(x.shape[0])
        h = x
        for i in range(self.n_layers):
            z = acts[i]
            np.matmul(h, self.weights[i], out=z)
            z += self.biases[i]
            if i < self.n_layers - 1 or self.final_activation:
                np.maximum(z, 0.0, out=z)
            h = z
        return acts[-1], acts

    def backward(self, x: np.ndarray, acts: list, dout: np.ndarray, need_weight_grads=True):
        """Reverse pass for the forward that produced ``acts``.

        Returns (grads aligned with parameters() or None, d_input). ``dout``
        may be modified in place; gradient arrays are reused by the next
        backward of this network.
        """
        _, deltas = self._buffers(x.shape[0])
        grads = [None] * (2 * self.n_layers) if need_weight_grads else None
        d = dout
        for i in range(self.n_layers - 1, -1, -1):
            if i == self.n_layers - 1 and self.final_activation:
                d = d * (acts[i] > 0)
            h_prev = x if i == 0 else acts[i - 1]
            if need_weight_grads:
                np.matmul(h_prev.T, d, out=self._grad_w[i])
                np.sum(d, axis=0, out=self._grad_b[i])
                grads[2 * i] = self._grad_w[i]
                grads[2 * i + 1] = self._grad_b[i]
            if i > 0:
                d_next = deltas[i - 1]
                np.matmul(d, self.weights[i].T, out=d_next)
                d_next *= acts[i - 1] > 0
                d = d_next
            else:
                d = d @ self.weights[i].T
        return grads, d


class Adam:
    """Adam with fused in-place parameter updates."""

    def __init__(self, params: list, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            kernels.adam_step(
                p.reshape(-1),
                np.ascontiguousarray(g).reshape(-1),
                m.reshape(-1),
                v.reshape(-1),
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                b1c,
                b2c,
            )


def soft_update(online_params: list, target_params: list, tau: float):
    """theta_target <- tau * theta_online + (1 - tau) * theta_target."""
    if len(online_params) != len(target_params):
        raise ValueError("parameter lists differ in length")
    for src, dst in zip(online_params, target_params):
        if src.shape != dst.shape:
            raise ValueError(f"shape mismatch {src.shape} vs {dst.shape}")
        kernels.polyak_mix(src.reshape(-1), dst.reshape(-1), tau)
