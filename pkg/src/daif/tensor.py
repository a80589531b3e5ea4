"""Dense float64 tensors with tape-based reverse-mode differentiation.

Only the handful of ops the inverted forecaster needs are supported. Ops are
recorded onto the innermost active :class:`Tape`; outside a tape every tensor
is a plain immutable value.
"""
from __future__ import annotations

import contextvars
import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor", "Tape", "DimensionError", "NonFiniteError",
    "as_tensor", "matmul", "gelu", "layer_norm", "softmax", "concat",
    "backward",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "daif_active_tape", default=None)


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf showed up while the tape runs in checked mode."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_leaf")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64, copy=True)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._leaf = True

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        t._leaf = False
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return _add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return _add(self, _neg(as_tensor(other)))

    def __rsub__(self, other):
        return _add(as_tensor(other), _neg(self))

    def __neg__(self):
        return _neg(self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return _scale(self, float(other))
        return _mul(self, as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("only division by a Python scalar is supported")
        return _scale(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __getitem__(self, index):
        return _getitem(self, index)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return _transpose(self, axes)

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return _transpose(self, tuple(axes))

    def sum(self, axis=None) -> "Tensor":
        return _sum(self, axis)

    def mean(self) -> "Tensor":
        return _scale(_sum(self, None), 1.0 / self.size)

    def abs(self) -> "Tensor":
        return _abs(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("out", "inputs", "vjp")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], vjp: Callable):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Records ops for one forward pass; :func:`backward` consumes it.

    Tensors passed as ``params`` (or later via :meth:`watch`) are the
    parameter leaves: after ``backward`` each one holds a ``.grad`` buffer of
    its own shape, zeros if the loss never touched it.
    """

    def __init__(self, params: Iterable[Tensor] = (), check_finite: bool = False):
        self.records: list[_Record] = []
        self.params: list[Tensor] = []
        self.check_finite = check_finite
        self._token = None
        self.watch(params)

    def watch(self, params: Iterable[Tensor]) -> None:
        for p in params:
            p.requires_grad = True
            self.params.append(p)

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)

    def clear(self) -> None:
        self.records.clear()


def _emit(data: np.ndarray, inputs: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    tape = _active_tape.get()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    if tape is not None and tape.check_finite and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite value produced by op {vjp.__qualname__.split('.')[0]}")
    out = Tensor._wrap(data, needs)
    if needs:
        tape.records.append(_Record(out, inputs, vjp))
    return out


def _live_rows(g2: np.ndarray, *others: np.ndarray):
    # rows of an upstream gradient that are exactly zero add nothing; dropping
    # them keeps reductions bit-identical whether or not such rows are present
    live = g2.any(axis=1)
    if live.all():
        return (g2, *others)
    return (g2[live], *(o[live] for o in others))


def _sum_rows(g: np.ndarray, lead: int) -> np.ndarray:
    """Sum over the first ``lead`` axes."""
    tail = g.shape[lead:]
    g2 = g.reshape(-1, int(np.prod(tail, dtype=np.int64)))
    (g2,) = _live_rows(g2)
    return g2.sum(axis=0).reshape(tail)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead:
        g = _sum_rows(g, lead)
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def _add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def add_vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit(a.data + b.data, (a, b), add_vjp)


def _neg(a: Tensor) -> Tensor:
    return _emit(-a.data, (a,), lambda g: (-g,))


def _scale(a: Tensor, c: float) -> Tensor:
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def _mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def mul_vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit(a.data * b.data, (a, b), mul_vjp)


def _abs(a: Tensor) -> Tensor:
    return _emit(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def _sum(a: Tensor, axis) -> Tensor:
    shape = a.shape

    def sum_vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit(np.asarray(a.data.sum(axis=axis)), (a,), sum_vjp)


def _reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    return _emit(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def _transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inv = tuple(np.argsort(axes))
    return _emit(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def _getitem(a: Tensor, index) -> Tensor:
    def getitem_vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _emit(np.array(a.data[index]), (a,), getitem_vjp)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Join tensors along ``axis``; a single tensor is returned unchanged."""
    tensors = [as_tensor(t) for t in tensors]
    if len(tensors) == 1:
        return tensors[0]
    ax = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
                t.shape[i] != tensors[0].shape[i] for i in range(t.ndim) if i != ax):
            raise DimensionError(
                f"concat along axis {axis}: shapes {tensors[0].shape} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def concat_vjp(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(lo, hi)
            out.append(g[tuple(sl)])
        return tuple(out)

    return _emit(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), concat_vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes.

    A 2-D right operand is shared across every leading index of ``a``, which
    is how affine maps are applied to token batches.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul: batch shapes {a.shape} and {b.shape} differ")

    def matmul_vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            k, n = b.shape
            g2, a2 = _live_rows(g.reshape(-1, n), a.data.reshape(-1, k))
            gb = a2.T @ g2
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return _emit(a.data @ b.data, (a, b), matmul_vjp)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)`` with the erf form of the normal CDF."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))

    def gelu_vjp(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return _emit(x.data * cdf, (x,), gelu_vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            f"layer_norm: last axis {d} vs gain {gain.shape} / bias {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def layer_norm_vjp(g):
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        lead = g.ndim - 1
        return gx, _sum_rows(g * xhat, lead), _sum_rows(g, lead)

    return _emit(xhat * gain.data + bias.data, (x, gain, bias), layer_norm_vjp)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, max-shifted so large logits cannot overflow."""
    x = as_tensor(x)
    z = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    p = z / z.sum(axis=-1, keepdims=True)

    def softmax_vjp(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _emit(p, (x,), softmax_vjp)


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` and clear the tape.

    Every watched parameter ends up with a gradient buffer, zero-filled when
    the loss does not depend on it.
    """
    tape = tape if tape is not None else _active_tape.get()
    if tape is None:
        raise RuntimeError("backward needs a tape that recorded the forward pass")
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.out), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.vjp(g)):
            if not inp.requires_grad or gi is None:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if inp._leaf:
                leaves[key] = inp

    for p in tape.params:
        p.grad = np.zeros_like(p.data)
    for key, leaf in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        leaf.grad = g.reshape(leaf.shape) if leaf.grad is None else leaf.grad + g
    tape.clear()
