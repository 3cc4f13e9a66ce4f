"""Small numpy MLPs with hand-written backprop, Adam, and Gumbel-Softmax."""

from __future__ import annotations

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class Mlp:
    """Fully connected net, ReLU on hidden layers, linear output.

    Inputs are 2-D ``(batch, features)`` arrays; 1-D inputs are treated as a
    batch of one and the output is squeezed back to 1-D.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.params += [w, np.zeros(fan_out)]
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        squeeze = x.ndim == 1
        h = np.atleast_2d(x)
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {h.shape[1]} != expected {self.sizes[0]}")
        acts = [h]
        last = self.n_layers - 1
        for k in range(self.n_layers):
            h = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        if cache:
            self._cache = acts
        return h[0] if squeeze else h

    __call__ = forward

    def backward(self, grad_out: np.ndarray, x: np.ndarray | None = None,
                 param_grads: bool = True):
        """Reverse-mode gradients for the last forward pass (or for ``x``).

        Returns ``(param_grads, input_grad)``; ``grad_out`` has the shape of
        the forward output.  With ``param_grads=False`` only the input
        gradient is computed and the first item is None.
        """
        if x is not None:
            self.forward(x)
        acts = self._cache
        if acts is None:
            raise RuntimeError("backward() needs a cached forward pass")
        g = np.atleast_2d(grad_out)
        grads: list[np.ndarray] = [None] * len(self.params)
        for k in reversed(range(self.n_layers)):
            if param_grads:
                grads[2 * k] = acts[k].T @ g
                grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.params[2 * k].T
            if k > 0:
                g = g * (acts[k] > 0)
        return (grads if param_grads else None), g

    def copy(self) -> "Mlp":
        out = Mlp.__new__(Mlp)
        out.sizes = self.sizes
        out.params = [p.copy() for p in self.params]
        out._cache = None
        return out

    def load_from(self, other: "Mlp", tau: float = 1.0) -> None:
        """Move parameters toward ``other``'s (hard copy when tau == 1)."""
        for p, q in zip(self.params, other.params):
            if tau == 1.0:
                p[...] = q
            else:
                p *= 1.0 - tau
                p += tau * q


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads) -> None:
        """One bias-corrected Adam step (gradient descent), in place."""
        # any nan or inf entry makes the total non-finite
        if not np.isfinite(sum(float(g.sum()) for g in grads)):
            raise NonFiniteGradient("non-finite gradient passed to Adam")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def adam_step(params, grads, state: Adam) -> None:
    state.step(params, grads)


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    return -np.log(-np.log(u + 1e-20) + 1e-20)


def gumbel_softmax(logits: np.ndarray, temperature: float, rng: np.random.Generator,
                   noise: np.ndarray | None = None):
    """Return ``(hard, soft)``.

    ``hard`` is the one-hot argmax of logits plus Gumbel noise (an exact
    categorical sample); ``soft`` is the tempered softmax of the same
    perturbed logits, through which straight-through gradients flow.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if noise is None:
        noise = sample_gumbel(np.shape(logits), rng)
    y = (logits + noise) / temperature
    soft = softmax(y)
    hard = np.zeros_like(soft)
    idx = np.argmax(y, axis=-1)
    np.put_along_axis(hard, np.expand_dims(idx, -1), 1.0, axis=-1)
    return hard, soft


def softmax_backward(soft: np.ndarray, grad_soft: np.ndarray, temperature: float = 1.0):
    """Gradient w.r.t. logits of a tempered softmax, given dL/dsoft."""
    inner = (grad_soft * soft).sum(axis=-1, keepdims=True)
    return soft * (grad_soft - inner) / temperature
