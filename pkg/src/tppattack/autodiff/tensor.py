"""Reverse-mode automatic differentiation over dense float64 tensors.

A ``Tape`` records every primitive applied to tracked tensors in creation
order; ``backward`` replays it in exact reverse. Tapes are define-by-run and
rebuilt per forward pass. Broadcasting is restricted to scalar-vs-tensor:
elementwise ops otherwise require identical shapes, which turns silent shape
bugs into immediate errors.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor", "Tape", "ShapeError", "DomainError", "backward",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose",
    "exp", "log", "softplus", "sigmoid", "tanh", "relu", "abs_",
    "sin", "cos", "scale", "power", "sum_", "mean", "max_", "softmax",
    "concat", "slice_", "gather_rows", "reshape",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested primitive."""


class DomainError(ValueError):
    """Forward value outside a primitive's domain (log of <= 0, div by 0)."""


class _Node:
    __slots__ = ("kind", "inputs", "vjp")

    def __init__(self, kind, inputs, vjp):
        self.kind = kind
        self.inputs = inputs  # node ids of tracked inputs (None for untracked)
        self.vjp = vjp        # grad_out -> tuple of grads aligned with inputs


class Tape:
    """Ordered record of primitives; node order is a topological order."""

    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def leaf(self, values) -> "Tensor":
        """Register an array as a tracked leaf (gradient target)."""
        node = self._record("leaf", (), None)
        return Tensor(values, tape=self, node=node)

    def _record(self, kind, inputs, vjp) -> int:
        self._nodes.append(_Node(kind, inputs, vjp))
        return len(self._nodes) - 1


def backward(tape: Tape, root: "Tensor") -> dict:
    """Accumulate gradients of a tracked scalar ``root`` w.r.t. every node.

    Returns a map node-id -> gradient array. Untracked tensors never appear:
    a constant has no entry rather than a zero-filled one.
    """
    if not root.tracked or root.tape is not tape:
        raise ValueError("backward root must be a tensor tracked on this tape")
    if root.values.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.shape}")
    grads = {root.node: np.ones_like(root.values)}
    for nid in range(root.node, -1, -1):
        g = grads.get(nid)
        if g is None:
            continue
        node = tape._nodes[nid]
        if node.vjp is None:
            continue
        for in_id, in_grad in zip(node.inputs, node.vjp(g)):
            if in_id is None or in_grad is None:
                continue
            if in_id in grads:
                grads[in_id] = grads[in_id] + in_grad
            else:
                grads[in_id] = in_grad
    return grads


class Tensor:
    """Dense float64 value array, optionally tracked on a tape."""

    __slots__ = ("values", "tape", "node")

    def __init__(self, values, tape=None, node=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.values.shape

    @property
    def tracked(self):
        return self.node is not None

    def item(self):
        return float(self.values.reshape(()))

    def __repr__(self):
        tag = f" node={self.node}" if self.tracked else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __pow__(self, p):
        return power(self, p)

    @property
    def T(self):
        return transpose(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _common_tape(inputs):
    tape = None
    for t in inputs:
        if t.tracked:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("inputs belong to different tapes")
    return tape


def _make(kind, out_vals, inputs, vjp):
    tape = _common_tape(inputs)
    if tape is None:
        return Tensor(out_vals)
    ids = tuple(t.node if t.tracked else None for t in inputs)
    return Tensor(out_vals, tape=tape, node=tape._record(kind, ids, vjp))


def _check_elementwise(kind, a, b):
    if a.shape == b.shape or a.values.size == 1 or b.values.size == 1:
        return
    raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not conform "
                     "(only scalar-vs-tensor broadcast is supported)")


def _unbroadcast(grad, shape):
    # reduce a broadcast gradient back to a scalar operand's shape
    if grad.shape != shape:
        grad = np.sum(grad).reshape(shape) if np.prod(shape, dtype=int) == 1 \
            else grad.reshape(shape)
    return grad


# ----------------------------------------------------------------- binary ops

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_elementwise("add", a, b)
    av, bv = a.values, b.values

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return _make("add", av + bv, (a, b), vjp)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_elementwise("sub", a, b)
    av, bv = a.values, b.values

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return _make("sub", av - bv, (a, b), vjp)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_elementwise("mul", a, b)
    av, bv = a.values, b.values

    def vjp(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _make("mul", av * bv, (a, b), vjp)


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_elementwise("div", a, b)
    av, bv = a.values, b.values
    if np.any(bv == 0.0):
        raise DomainError("div: zero in denominator")

    def vjp(g):
        return (_unbroadcast(g / bv, av.shape),
                _unbroadcast(-g * av / (bv * bv), bv.shape))

    return _make("div", av / bv, (a, b), vjp)


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    av, bv = a.values, b.values

    def vjp(g):
        return g @ bv.T, av.T @ g

    return _make("matmul", av @ bv, (a, b), vjp)


# ------------------------------------------------------------------ unary ops

def _unary(kind, a, out, dfun):
    a = _wrap(a)

    def vjp(g):
        return (g * dfun(),)

    return _make(kind, out, (a,), vjp)


def neg(a):
    a = _wrap(a)
    return _make("neg", -a.values, (a,), lambda g: (-g,))


def exp(a):
    a = _wrap(a)
    out = np.exp(a.values)
    return _unary("exp", a, out, lambda: out)


def log(a):
    a = _wrap(a)
    if np.any(a.values <= 0.0):
        raise DomainError("log: nonpositive forward value")
    return _unary("log", a, np.log(a.values), lambda: 1.0 / a.values)


def softplus(a):
    a = _wrap(a)
    x = a.values
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _unary("softplus", a, out, lambda: _sigmoid_vals(x))


def _sigmoid_vals(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = _wrap(a)
    out = _sigmoid_vals(a.values)
    return _unary("sigmoid", a, out, lambda: out * (1.0 - out))


def tanh(a):
    a = _wrap(a)
    out = np.tanh(a.values)
    return _unary("tanh", a, out, lambda: 1.0 - out * out)


def relu(a):
    a = _wrap(a)
    x = a.values
    # subgradient 0 at the kink
    return _unary("relu", a, np.maximum(x, 0.0), lambda: (x > 0).astype(np.float64))


def abs_(a):
    a = _wrap(a)
    x = a.values
    return _unary("abs", a, np.abs(x), lambda: np.sign(x))


def sin(a):
    a = _wrap(a)
    return _unary("sin", a, np.sin(a.values), lambda: np.cos(a.values))


def cos(a):
    a = _wrap(a)
    return _unary("cos", a, np.cos(a.values), lambda: -np.sin(a.values))


def scale(a, c):
    a = _wrap(a)
    c = float(c)
    return _unary("scale", a, c * a.values, lambda: c)


def power(a, p):
    a = _wrap(a)
    p = float(p)
    x = a.values
    return _unary("power", a, x ** p, lambda: p * x ** (p - 1.0))


def transpose(a):
    a = _wrap(a)
    if a.values.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d tensor, got shape {a.shape}")
    return _make("transpose", a.values.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape):
    a = _wrap(a)
    old = a.values.shape
    out = a.values.reshape(shape)
    return _make("reshape", out, (a,), lambda g: (g.reshape(old),))


# ----------------------------------------------------------------- reductions

def sum_(a, axis=None, keepdims=False):
    a = _wrap(a)
    av = a.values
    out = np.sum(av, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _make("sum", out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    av = a.values
    n = av.size if axis is None else av.shape[axis]
    out = np.mean(av, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, av.shape).copy(),)

    return _make("mean", out, (a,), vjp)


def max_(a, axis=None, keepdims=False):
    a = _wrap(a)
    av = a.values
    out = np.max(av, axis=axis, keepdims=keepdims)

    # subgradient routed to the first argmax per reduced slice
    if axis is None:
        hot = np.zeros_like(av)
        hot[np.unravel_index(np.argmax(av), av.shape)] = 1.0
    else:
        idx = np.expand_dims(np.argmax(av, axis=axis), axis)
        hot = np.zeros_like(av)
        np.put_along_axis(hot, idx, 1.0, axis=axis)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (hot * g,)

    return _make("max", out, (a,), vjp)


def softmax(a, axis=-1):
    a = _wrap(a)
    av = a.values
    shifted = av - np.max(av, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _make("softmax", out, (a,), vjp)


# -------------------------------------------------------- shuffling/indexing

def concat(parts, axis=0):
    parts = [_wrap(p) for p in parts]
    vals = [p.values for p in parts]
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(np.take(g, range(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(parts)))

    return _make("concat", out, tuple(parts), vjp)


def slice_(a, key):
    """Basic (view-style) slicing; gradients scatter back into place."""
    a = _wrap(a)
    av = a.values
    out = av[key]

    def vjp(g):
        full = np.zeros_like(av)
        full[key] = g
        return (full,)

    return _make("slice", np.array(out, copy=True), (a,), vjp)


def gather_rows(a, idx):
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.intp)
    av = a.values
    out = av[idx]

    def vjp(g):
        full = np.zeros_like(av)
        np.add.at(full, idx, g)
        return (full,)

    return _make("gather-rows", out, (a,), vjp)
