"""Finite-difference gradient checking for the autodiff primitives.

Each scenario builds a deterministic seeded input/parameter set, evaluates a
scalar-valued function of them, and compares the analytic reverse-mode
gradient against central finite differences.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import AttentionPool, LSTMCell, MultiHeadAttention

FD_EPS = 1e-4


def numeric_gradient(f, arrays: list[np.ndarray], eps: float = FD_EPS) -> list[np.ndarray]:
    """Central-difference gradient of scalar f(arrays) w.r.t. every entry."""
    grads = []
    for k, base in enumerate(arrays):
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(arrays)
            flat[i] = orig - eps
            lo = f(arrays)
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def max_relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def check_gradients(build_scalar, arrays: list[np.ndarray], eps: float = FD_EPS) -> float:
    """Compare reverse-mode and finite-difference gradients.

    ``build_scalar`` maps a list of Tensors to a scalar Tensor; the same
    function evaluated on plain arrays drives the numeric side.
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build_scalar(tensors)
    out.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def f(arrs):
        ts = [Tensor(a) for a in arrs]
        return float(build_scalar(ts).data)

    numeric = numeric_gradient(f, [a.copy() for a in arrays], eps=eps)
    return max_relative_error(analytic, numeric)


def _projection(rng: np.random.Generator, shape) -> np.ndarray:
    # projecting the output through fixed random weights makes any-output
    # primitives scalar-valued without hiding gradient structure
    return rng.uniform(0.5, 1.5, size=shape)


def _away_from_kinks(x: np.ndarray, margin: float = 5e-3) -> np.ndarray:
    # relu / max-pool are non-differentiable at ties; nudge samples away
    return np.where(np.abs(x) < margin, np.sign(x) * margin + (x == 0) * margin, x)


def grad_check(primitive: str, shape: tuple[int, ...] = (4, 3), seed: int = 0) -> float:
    """Finite-difference check of one primitive; returns the max relative error."""
    rng = np.random.default_rng(seed)
    if primitive == "dense":
        n_in, n_out = shape[-1], shape[-1] + 1
        x = rng.standard_normal(shape)
        w = rng.standard_normal((n_in, n_out))
        b = rng.standard_normal(n_out)
        proj = _projection(rng, (shape[0], n_out))
        return check_gradients(
            lambda ts: ad.tsum(ad.mul(ad.add(ad.matmul(ts[0], ts[1]), ts[2]), proj)),
            [x, w, b])
    if primitive == "lstm_cell":
        dim = shape[-1]
        steps = 5
        cell_rng = np.random.default_rng(seed + 1)
        cell = LSTMCell(cell_rng, dim, dim)
        xs = rng.standard_normal((steps, dim))
        proj = _projection(rng, (steps, dim))
        arrays = [xs, cell.W.data.copy(), cell.b.data.copy() + 0.05]

        def run(ts):
            cell.W, cell.b = ts[1], ts[2]
            return ad.tsum(ad.mul(cell.run(ts[0]), proj))

        return check_gradients(run, arrays)
    if primitive == "multi_head_attention":
        t_len, d_model = shape[0], 4
        mha = MultiHeadAttention(np.random.default_rng(seed + 1), d_model, 2)
        q = rng.standard_normal((t_len, d_model))
        k = rng.standard_normal((t_len + 1, d_model))
        v = rng.standard_normal((t_len + 1, d_model))
        proj = _projection(rng, (t_len, d_model))
        names = mha.params.names()
        arrays = [q, k, v] + [mha.params[n].data.copy() for n in names]

        def run(ts):
            for name, t in zip(names, ts[3:]):
                mha.params._params[name] = t
            return ad.tsum(ad.mul(mha(ts[0], ts[1], ts[2]), proj))

        return check_gradients(run, arrays)
    if primitive == "attention_pool":
        t_len, d = shape[0], shape[-1]
        pool = AttentionPool(np.random.default_rng(seed + 1), d)
        hs = rng.standard_normal((t_len, d))
        proj = _projection(rng, (d,))
        arrays = [hs, pool.U.data.copy(), pool.w.data.copy()]

        def run(ts):
            pool.U, pool.w = ts[1], ts[2]
            return ad.tsum(ad.mul(pool(ts[0]), proj))

        return check_gradients(run, arrays)
    if primitive == "conv2d":
        x = rng.standard_normal((2, 1, 6, 7))
        w = rng.standard_normal((1, 1, 3, 3))
        b = rng.standard_normal(1)
        proj = _projection(rng, (2, 1, 6, 7))
        return check_gradients(
            lambda ts: ad.tsum(ad.mul(ad.conv2d(ts[0], ts[1], ts[2], padding="same"), proj)),
            [x, w, b])
    if primitive == "max_pool":
        x = _away_from_kinks(rng.standard_normal((2, 2, 6, 6)))
        proj = _projection(rng, (2, 2, 3, 3))
        return check_gradients(
            lambda ts: ad.tsum(ad.mul(ad.max_pool2d(ts[0], 2), proj)), [x])
    if primitive == "relu":
        x = _away_from_kinks(rng.standard_normal(shape))
        proj = _projection(rng, shape)
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.relu(ts[0]), proj)), [x])
    if primitive == "sigmoid":
        x = rng.standard_normal(shape)
        proj = _projection(rng, shape)
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.sigmoid(ts[0]), proj)), [x])
    if primitive == "tanh":
        x = rng.standard_normal(shape)
        proj = _projection(rng, shape)
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.tanh(ts[0]), proj)), [x])
    if primitive == "softmax":
        x = rng.standard_normal(shape)
        proj = _projection(rng, shape)
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.softmax(ts[0]), proj)), [x])
    if primitive == "cross_entropy":
        n, v = shape[0], max(shape[-1], 3)
        logits = rng.standard_normal((n, v))
        targets = rng.integers(0, v, size=n)
        return check_gradients(
            lambda ts: ad.tsum(ad.cross_entropy(ad.softmax(ts[0]), targets)), [logits])
    if primitive == "mean":
        x = rng.standard_normal(shape)
        proj = _projection(rng, (shape[0],))
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.tmean(ts[0], axis=1), proj)), [x])
    if primitive == "concat":
        a = rng.standard_normal(shape)
        b = rng.standard_normal(shape)
        proj = _projection(rng, (2 * shape[0],) + tuple(shape[1:]))
        return check_gradients(
            lambda ts: ad.tsum(ad.mul(ad.concat([ts[0], ts[1]], axis=0), proj)), [a, b])
    if primitive == "flatten":
        x = rng.standard_normal((shape[0], 2, 3))
        proj = _projection(rng, (shape[0], 6))
        return check_gradients(lambda ts: ad.tsum(ad.mul(ad.flatten(ts[0]), proj)), [x])
    raise ValueError(f"unknown primitive {primitive!r}")


PRIMITIVES = (
    "dense", "lstm_cell", "multi_head_attention", "attention_pool", "conv2d",
    "max_pool", "relu", "sigmoid", "tanh", "softmax", "cross_entropy",
    "mean", "concat", "flatten",
)
