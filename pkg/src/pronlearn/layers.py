"""Layers built on the autodiff kernel: dense, LSTM cell, multi-head attention,
conv stack pieces, plus the shared parameter registry."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


class ParameterSet:
    """Named parameter tensors with their gradient accumulators."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def merge(self, prefix: str, other: "ParameterSet"):
        for name, t in other._params.items():
            key = f"{prefix}.{name}"
            if key in self._params:
                raise ValueError(f"duplicate parameter name {key!r}")
            self._params[key] = t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self._params) - set(state)
        if missing:
            raise KeyError(f"checkpoint missing parameters: {sorted(missing)}")
        for k, t in self._params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {k!r}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()


class Dense:
    """Affine map x @ W + b."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int, name: str = "dense"):
        self.params = ParameterSet()
        self.W = self.params.add(f"{name}.W", uniform_init(rng, (n_in, n_out), n_in, n_out))
        self.b = self.params.add(f"{name}.b", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.W), self.b)


class LSTMCell:
    """Unidirectional LSTM cell with fused gate weights (order i, f, g, o)."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_hidden: int, name: str = "lstm"):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.params = ParameterSet()
        h = n_hidden
        self.W = self.params.add(
            f"{name}.W", uniform_init(rng, (n_in + h, 4 * h), n_in + h, 4 * h))
        self.b = self.params.add(f"{name}.b", np.zeros(4 * h))

    def init_state(self, batch: int) -> tuple[Tensor, Tensor]:
        z = np.zeros((batch, self.n_hidden))
        return Tensor(z), Tensor(z.copy())

    def step(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        h_prev, c_prev = state
        z = ad.add(ad.matmul(ad.concat([x, h_prev], axis=1), self.W), self.b)
        H = self.n_hidden
        i = ad.sigmoid(ad.narrow(z, 1, 0, H))
        f = ad.sigmoid(ad.narrow(z, 1, H, H))
        g = ad.tanh(ad.narrow(z, 1, 2 * H, H))
        o = ad.sigmoid(ad.narrow(z, 1, 3 * H, H))
        c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
        return h, c

    def run(self, xs: Tensor) -> Tensor:
        """Run over a (T, n_in) sequence; returns hidden states (T, n_hidden)."""
        state = self.init_state(1)
        outs = []
        for t in range(xs.data.shape[0]):
            x_t = ad.narrow(xs, 0, t, 1)
            h, c = self.step(x_t, state)
            state = (h, c)
            outs.append(h)
        return ad.concat(outs, axis=0)

    def run_batch(self, xs: Tensor) -> Tensor:
        """Run over a (N, T, n_in) batch; returns hidden states (N, T, n_hidden)."""
        n, T, _ = xs.data.shape
        state = self.init_state(n)
        outs = []
        for t in range(T):
            x_t = ad.reshape(ad.narrow(xs, 1, t, 1), (n, self.n_in))
            h, c = self.step(x_t, state)
            state = (h, c)
            outs.append(ad.reshape(h, (n, 1, self.n_hidden)))
        return ad.concat(outs, axis=1)


class MultiHeadAttention:
    """Scaled dot-product attention with ``n_heads`` heads over 2-D inputs.

    Query/key/value inputs are (Tq, d_model) and (Tk, d_model).  The softmax
    weights of the latest call are kept (as plain arrays) for inspection.
    """

    def __init__(self, rng: np.random.Generator, d_model: int, n_heads: int, name: str = "mha"):
        if d_model % n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.params = ParameterSet()
        for part in ("Wq", "Wk", "Wv", "Wo"):
            self.params.add(f"{name}.{part}",
                            uniform_init(rng, (d_model, d_model), d_model, d_model))
        self._name = name
        self.last_weights: np.ndarray | None = None

    def __call__(self, query: Tensor, key: Tensor, value: Tensor) -> Tensor:
        p = self.params
        n = self._name
        h, dk = self.n_heads, self.d_head
        tq = query.data.shape[0]
        tk = key.data.shape[0]

        def split_heads(x: Tensor, t: int) -> Tensor:
            return ad.transpose(ad.reshape(x, (t, h, dk)), (1, 0, 2))

        q = split_heads(ad.matmul(query, p[f"{n}.Wq"]), tq)   # (h, Tq, dk)
        k = split_heads(ad.matmul(key, p[f"{n}.Wk"]), tk)     # (h, Tk, dk)
        v = split_heads(ad.matmul(value, p[f"{n}.Wv"]), tk)
        scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dk))
        weights = ad.softmax(scores, axis=-1)                 # (h, Tq, Tk)
        self.last_weights = weights.data.copy()
        ctx = ad.matmul(weights, v)                           # (h, Tq, dk)
        ctx = ad.reshape(ad.transpose(ctx, (1, 0, 2)), (tq, self.d_model))
        return ad.matmul(ctx, p[f"{n}.Wo"])


class AttentionPool:
    """Additive attention pooling of a hidden-state sequence to one vector.

    Works on (T, d) sequences and (N, T, d) batches; weights are softmax of
    w . tanh(U h_t).
    """

    def __init__(self, rng: np.random.Generator, d: int, name: str = "pool"):
        self.d = d
        self.params = ParameterSet()
        self.U = self.params.add(f"{name}.U", uniform_init(rng, (d, d), d, d))
        self.w = self.params.add(f"{name}.w", uniform_init(rng, (d, 1), d, 1))

    def __call__(self, hs: Tensor) -> Tensor:
        scores = ad.matmul(ad.tanh(ad.matmul(hs, self.U)), self.w)  # (..., T, 1)
        if hs.data.ndim == 2:
            alpha = ad.softmax(ad.reshape(scores, (1, -1)), axis=-1)  # (1, T)
            return ad.reshape(ad.matmul(alpha, hs), (self.d,))
        n, T, d = hs.data.shape
        alpha = ad.softmax(ad.reshape(scores, (n, 1, T)), axis=-1)
        return ad.reshape(ad.matmul(alpha, hs), (n, d))


class Conv2d:
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 padding: str = "same", name: str = "conv"):
        fan_in = c_in * kernel * kernel
        fan_out = c_out * kernel * kernel
        self.padding = padding
        self.params = ParameterSet()
        self.W = self.params.add(
            f"{name}.W", uniform_init(rng, (c_out, c_in, kernel, kernel), fan_in, fan_out))
        self.b = self.params.add(f"{name}.b", np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.W, self.b, padding=self.padding)
