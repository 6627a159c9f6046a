"""Minimal reverse-mode differentiation kernel over float64 numpy arrays.

A Tensor wraps an ndarray and records the operation that produced it; calling
``backward()`` on a scalar result walks the tape in reverse topological order
and accumulates exact gradients into every tensor with ``requires_grad``.

The primitive set is exactly what the models in this package need: affine
(matmul/add), the pointwise nonlinearities, softmax/cross-entropy, reductions,
shape ops, gather, conv2d (stride 1) and max pooling.  No broadcasting beyond
what these primitives use.
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _GRAD_ENABLED
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad: np.ndarray | None = None):
        """Reverse pass from this tensor; defaults to d(self)/d(self) = 1."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.data.shape)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad and t._backward is None and not t._parents:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(a.data / b.data, (a, b), backward)


def power(a, p: float) -> Tensor:
    a = _as_tensor(a)
    p = float(p)

    def backward(g):
        _accum(a, g * p * np.power(a.data, p - 1.0))

    return _make(np.power(a.data, p), (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape))
        _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape))

    return _make(np.matmul(a.data, b.data), (a, b), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    y = np.exp(a.data)

    def backward(g):
        _accum(a, g * y)

    return _make(y, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        _accum(a, g / a.data)

    return _make(np.log(a.data), (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)

    def backward(g):
        _accum(a, g * (1.0 - y * y))

    return _make(y, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                 np.exp(a.data) / (1.0 + np.exp(a.data)))

    def backward(g):
        _accum(a, g * y * (1.0 - y))

    return _make(y, (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        _accum(a, g * mask)

    return _make(a.data * mask, (a,), backward)


def clip(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    mask = (a.data > lo) & (a.data < hi)

    def backward(g):
        _accum(a, g * mask)

    return _make(np.clip(a.data, lo, hi), (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Row-stochastic softmax along ``axis``."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, y * (g - dot))

    return _make(y, (a,), backward)


def cross_entropy(probs, targets) -> Tensor:
    """Per-row negative log likelihood of integer targets under given probabilities.

    ``probs`` is (N, V) row-stochastic (e.g. a softmax output), ``targets``
    an int vector (N,).  Returns losses of shape (N,).
    """
    probs = _as_tensor(probs)
    idx = np.asarray(targets, dtype=np.int64)
    if probs.data.ndim != 2 or idx.ndim != 1 or idx.shape[0] != probs.data.shape[0]:
        raise ValueError("cross_entropy expects probs (N, V) and targets (N,)")
    rows = np.arange(idx.shape[0])
    eps = 1e-12
    picked = np.maximum(probs.data[rows, idx], eps)

    def backward(g):
        dp = np.zeros_like(probs.data)
        dp[rows, idx] = -g / picked
        _accum(probs, dp)

    return _make(-np.log(picked), (probs,), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(y, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size if axis is None else (
        np.prod([a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _make(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), backward)


def stack_rows(tensors) -> Tensor:
    """Stack 1-D tensors of equal length into a (T, d) matrix."""
    return concat([reshape(t, (1, -1)) for t in tensors], axis=0)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def flatten(a) -> Tensor:
    """Flatten all but the leading (batch) axis."""
    a = _as_tensor(a)
    return reshape(a, (a.data.shape[0], -1))


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    inverse = np.argsort(axes)

    def backward(g):
        _accum(a, g.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), backward)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` entries starting at ``start`` along ``axis``."""
    a = _as_tensor(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def backward(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        _accum(a, full)

    return _make(a.data[sl].copy(), (a,), backward)


def take(a, indices) -> Tensor:
    """Gather rows of a 2-D tensor by integer index (embedding lookup)."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g):
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        _accum(a, da)

    return _make(a.data[idx], (a,), backward)


def conv2d(x, w, b=None, padding: str = "same") -> Tensor:
    """2-D convolution, stride 1.  x: (N, C, H, W), w: (F, C, kh, kw), b: (F,).

    ``same`` zero-pads so output spatial dims equal input dims (odd kernels);
    ``valid`` applies no padding.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    b = _as_tensor(b) if b is not None else None
    n, c, h, wd = x.data.shape
    f, c2, kh, kw = w.data.shape
    if c != c2:
        raise ValueError(f"conv2d channel mismatch: input {c}, weight {c2}")
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("same padding requires odd kernels")
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    oh, ow = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    if oh < 1 or ow < 1:
        raise ValueError("conv2d input smaller than kernel")
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw)
    w2 = w.data.reshape(f, c * kh * kw)
    y = np.matmul(cols, w2.T)
    if b is not None:
        y = y + b.data
    y = y.transpose(0, 2, 1).reshape(n, f, oh, ow)

    def backward(g):
        g2 = g.reshape(n, f, oh * ow).transpose(0, 2, 1)  # (N, OHW, F)
        dw = np.tensordot(g2, cols, axes=([0, 1], [0, 1])).reshape(f, c, kh, kw)
        _accum(w, dw)
        if b is not None:
            _accum(b, g2.sum(axis=(0, 1)))
        dcols = np.matmul(g2, w2)  # (N, OHW, C*kh*kw)
        dcols = dcols.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
        dxp = np.zeros_like(xp)
        for ki in range(kh):
            for kj in range(kw):
                dxp[:, :, ki:ki + oh, kj:kj + ow] += dcols[:, :, ki, kj]
        if ph or pw:
            dxp = dxp[:, :, ph:ph + h, pw:pw + wd]
        _accum(x, dxp)

    parents = (x, w, b) if b is not None else (x, w)
    return _make(y, parents, backward)


def max_pool2d(x, kernel: int = 2, stride: int | None = None) -> Tensor:
    """Max pooling over (kernel x kernel) patches; trailing rows/cols that do
    not fill a patch are dropped."""
    x = _as_tensor(x)
    k = kernel
    s = stride if stride is not None else k
    if s != k:
        raise ValueError("only stride == kernel pooling is supported")
    n, c, h, w = x.data.shape
    oh, ow = h // k, w // k
    if oh < 1 or ow < 1:
        raise ValueError("max_pool2d input smaller than one patch")
    cropped = x.data[:, :, :oh * k, :ow * k]
    patches = cropped.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, oh, ow, k * k)
    arg = patches.argmax(axis=-1)
    y = np.take_along_axis(patches, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        dpatches = np.zeros_like(patches)
        np.put_along_axis(dpatches, arg[..., None], g[..., None], axis=-1)
        dx = np.zeros_like(x.data)
        dx[:, :, :oh * k, :ow * k] = dpatches.reshape(
            n, c, oh, ow, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh * k, ow * k)
        _accum(x, dx)

    return _make(y, (x,), backward)


def forward_backward(graph, inputs, wrt=None):
    """Run ``graph(*inputs)`` forward, check every intermediate is finite, then
    run the reverse pass from its scalar output.

    Returns ``(output, grads)`` where grads maps each tensor in ``wrt``
    (default: the inputs) to its gradient array.
    """
    out = graph(*inputs)
    seen, stack = set(), [out]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if not np.all(np.isfinite(node.data)):
            raise FloatingPointError("non-finite value in forward pass")
        stack.extend(node._parents)
    out.backward()
    targets = wrt if wrt is not None else inputs
    return out, {id(t): t.grad for t in targets}
