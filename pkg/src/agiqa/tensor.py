"""Dense float64 tensors with reverse-mode automatic differentiation.

Values live in numpy arrays; gradients are tracked on a tape that is rebuilt
on every forward pass (define-by-run). Backward walks the tape in reverse and
accumulates gradients in tape order, which makes runs bitwise reproducible on
a given platform. Opening a tape is opt-in: outside of a ``tape()`` block no
graph is recorded, so inference costs nothing extra.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "TensorError",
    "GradientError",
    "tape",
    "tensor_from",
    "constant",
    "parameter",
    "zeros",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "absolute",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "select",
    "softmax",
    "sigmoid",
    "gelu",
    "mean_pool",
    "sum_all",
    "layer_norm",
    "attention",
    "attention_weights",
    "backward",
]


class TensorError(ValueError):
    """Shape mismatch or invalid construction/operation arguments."""


class GradientError(RuntimeError):
    """backward() called without a usable computation graph."""


# Active tape: list of (output, inputs, backward_fn) nodes, or None.
_TAPE: list | None = None


@contextlib.contextmanager
def tape():
    """Record operations for backward() while the context is open."""
    global _TAPE
    if _TAPE is not None:
        raise GradientError("a tape is already active; tapes do not nest")
    _TAPE = []
    try:
        yield
    finally:
        _TAPE = None


class Tensor:
    """n-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() needs a single element, got shape {self.dims}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.dims}, requires_grad={self.requires_grad})"

    # Operator sugar; all dispatch to the module-level ops.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def tensor_from(dims: Sequence[int], values: Sequence[float], requires_grad: bool = False) -> Tensor:
    """Build a tensor from a shape and a row-major flat list of values."""
    dims = tuple(int(d) for d in dims)
    if any(d <= 0 for d in dims):
        raise TensorError(f"dims must be positive, got {dims}")
    flat = np.asarray(list(values), dtype=np.float64)
    if flat.ndim != 1:
        raise TensorError("values must be a flat sequence")
    if flat.size != math.prod(dims):
        raise TensorError(
            f"shape {dims} needs {math.prod(dims)} values, got {flat.size}"
        )
    return Tensor(flat.reshape(dims), requires_grad=requires_grad)


def constant(values) -> Tensor:
    """Wrap an array as a non-tracked tensor."""
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=False)


def parameter(values) -> Tensor:
    """Wrap an array as a trainable (gradient-tracked) tensor."""
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def zeros(dims: Sequence[int], requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(tuple(dims), dtype=np.float64), requires_grad=requires_grad)


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    if _TAPE is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPE.append((out, inputs, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcastified gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad


def _check_axis(x: Tensor, axis: int) -> int:
    if not -x.data.ndim <= axis < x.data.ndim:
        raise TensorError(f"axis {axis} invalid for shape {x.dims}")
    return axis % x.data.ndim


# ---------------------------------------------------------------------------
# Elementwise arithmetic


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = Tensor(a.data + float(b))
        return _record(out, (a,), lambda g: (g,))
    try:
        out = Tensor(a.data + b.data)
    except ValueError as exc:
        raise TensorError(f"add: shapes {a.dims} and {b.dims} incompatible") from exc

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record(out, (a, b), back)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = Tensor(a.data - float(b))
        return _record(out, (a,), lambda g: (g,))
    try:
        out = Tensor(a.data - b.data)
    except ValueError as exc:
        raise TensorError(f"sub: shapes {a.dims} and {b.dims} incompatible") from exc

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record(out, (a, b), back)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = Tensor(a.data * s)
        return _record(out, (a,), lambda g: (g * s,))
    try:
        out = Tensor(a.data * b.data)
    except ValueError as exc:
        raise TensorError(f"mul: shapes {a.dims} and {b.dims} incompatible") from exc
    ad, bd = a.data, b.data

    def back(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _record(out, (a, b), back)


def div(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = Tensor(a.data / s)
        return _record(out, (a,), lambda g: (g / s,))
    try:
        out = Tensor(a.data / b.data)
    except ValueError as exc:
        raise TensorError(f"div: shapes {a.dims} and {b.dims} incompatible") from exc
    ad, bd = a.data, b.data

    def back(g):
        return (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        )

    return _record(out, (a, b), back)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def absolute(a: Tensor) -> Tensor:
    out = Tensor(np.abs(a.data))
    sign = np.sign(a.data)
    return _record(out, (a,), lambda g: (g * sign,))


# ---------------------------------------------------------------------------
# Linear algebra and shape ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise TensorError(f"matmul needs 2-D operands, got {a.dims} and {b.dims}")
    if a.dims[1] != b.dims[0]:
        raise TensorError(f"matmul: inner dims disagree ({a.dims} x {b.dims})")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data

    def back(g):
        return g @ bd.T, ad.T @ g

    return _record(out, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise TensorError(f"transpose needs a 2-D tensor, got {a.dims}")
    out = Tensor(a.data.T)
    return _record(out, (a,), lambda g: (g.T,))


def reshape(a: Tensor, dims: Sequence[int]) -> Tensor:
    dims = tuple(int(d) for d in dims)
    if math.prod(dims) != a.data.size:
        raise TensorError(f"cannot reshape {a.dims} to {dims}")
    out = Tensor(a.data.reshape(dims))
    src = a.data.shape
    return _record(out, (a,), lambda g: (g.reshape(src),))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise TensorError("concat needs at least one tensor")
    axis = _check_axis(parts[0], axis)
    try:
        out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    except ValueError as exc:
        raise TensorError("concat: incompatible shapes") from exc
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _record(out, tuple(parts), back)


def select(a: Tensor, index: int) -> Tensor:
    """Pick one element of a 1-D tensor as a shape-(1,) tensor."""
    if a.data.ndim != 1:
        raise TensorError(f"select needs a 1-D tensor, got {a.dims}")
    if not 0 <= index < a.data.shape[0]:
        raise TensorError(f"index {index} out of range for {a.dims}")
    out = Tensor(a.data[index : index + 1].copy())
    n = a.data.shape[0]

    def back(g):
        full = np.zeros(n, dtype=np.float64)
        full[index] = g[0]
        return (full,)

    return _record(out, (a,), back)


# ---------------------------------------------------------------------------
# Nonlinearities and reductions


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def back(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _record(out, (x,), back)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    out = Tensor(y)
    return _record(out, (x,), lambda g: (g * y * (1.0 - y),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh form)."""
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * xd * (1.0 + t))

    def back(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * dinner),)

    return _record(out, (x,), back)


def mean_pool(x: Tensor, axis: int) -> Tensor:
    axis = _check_axis(x, axis)
    pooled = x.data.mean(axis=axis)
    if pooled.ndim == 0:
        pooled = pooled.reshape(1)
    out = Tensor(pooled)
    n = x.data.shape[axis]
    src = x.data.shape

    def back(g):
        return (np.broadcast_to(np.expand_dims(g.reshape(pooled.shape), axis), src) / n,)

    return _record(out, (x,), back)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.array([x.data.sum()]))
    src = x.data.shape
    return _record(out, (x,), lambda g: (np.full(src, g[0]),))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    d = x.data.shape[-1]
    if gain.dims != (d,) or bias.dims != (d,):
        raise TensorError(f"layer_norm gain/bias must be shape ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(gain.data * xhat + bias.data)
    gd = gain.data

    def back(g):
        reduce_axes = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=reduce_axes)
        dbias = g.sum(axis=reduce_axes)
        dxhat = g * gd
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgain, dbias

    return _record(out, (x, gain, bias), back)


# ---------------------------------------------------------------------------
# Fused multi-head scaled dot-product attention


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def attention(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tensor:
    """Multi-head scaled dot-product attention over projected sequences.

    ``q`` is (N_q, D); ``k`` and ``v`` are (N_k, D); D must divide by
    ``heads``. Per head the weights are softmax(q k^T / sqrt(D/heads)).
    """
    if q.data.ndim != 2 or k.data.ndim != 2 or v.data.ndim != 2:
        raise TensorError("attention operands must be 2-D sequences")
    d = q.dims[1]
    if k.dims[1] != d or v.dims[1] != d:
        raise TensorError(f"attention: model dims disagree ({q.dims}, {k.dims}, {v.dims})")
    if k.dims[0] != v.dims[0]:
        raise TensorError("attention: key and value sequence lengths differ")
    if d % heads != 0:
        raise TensorError(f"model dim {d} not divisible by {heads} heads")
    scale = 1.0 / math.sqrt(d // heads)
    qh = _split_heads(q.data, heads)
    kh = _split_heads(k.data, heads)
    vh = _split_heads(v.data, heads)
    scores = scale * (qh @ kh.transpose(0, 2, 1))
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    a = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(_merge_heads(a @ vh))

    def back(g):
        gc = _split_heads(g, heads)
        ga = gc @ vh.transpose(0, 2, 1)
        gv = a.transpose(0, 2, 1) @ gc
        gs = a * (ga - (ga * a).sum(axis=-1, keepdims=True))
        gq = scale * (gs @ kh)
        gk = scale * (gs.transpose(0, 2, 1) @ qh)
        return _merge_heads(gq), _merge_heads(gk), _merge_heads(gv)

    return _record(out, (q, k, v), back)


def attention_weights(q: Tensor, k: Tensor, heads: int) -> np.ndarray:
    """Attention probabilities (heads, N_q, N_k); inspection only, no grad."""
    d = q.dims[1]
    scale = 1.0 / math.sqrt(d // heads)
    qh = _split_heads(q.data, heads)
    kh = _split_heads(k.data, heads)
    scores = scale * (qh @ kh.transpose(0, 2, 1))
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Backward


def backward(loss: Tensor) -> None:
    """Populate .grad on every tracked tensor reachable from ``loss``.

    Gradients accumulate across multiple uses of a tensor; order follows the
    tape. The loss must be scalar (a single element) and must have been
    produced under the active tape.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.dims}")
    if _TAPE is None:
        raise GradientError("backward called outside a tape() context")
    if not loss.requires_grad:
        raise GradientError("loss does not depend on any tracked tensor")
    loss.grad = np.ones_like(loss.data)
    for out, inputs, back_fn in reversed(_TAPE):
        if out.grad is None:
            continue
        grads = back_fn(out.grad)
        for tensor_in, g in zip(inputs, grads):
            if g is None or not tensor_in.requires_grad:
                continue
            if tensor_in.grad is None:
                tensor_in.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                tensor_in.grad += g
