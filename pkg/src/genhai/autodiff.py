"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery to differentiate the log-density expressions of the
four model families with respect to their unconstrained parameter vector.
Nodes hold ndarrays (scalars are 0-d arrays); elementwise ops broadcast and
gradients are un-broadcast back to the operand shapes.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    # sum out leading broadcast axes, then axes of size 1
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad.reshape(shape)


class Var:
    """One node of the expression graph."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    # make ndarray <op> Var dispatch to our reflected operators
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    # --- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = as_var(other)
        out = Var(self.value + other.value, (self, other))

        def back(g):
            _accum(self, _unbroadcast(g, self.shape))
            _accum(other, _unbroadcast(g, other.shape))

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Var(-self.value, (self,))
        out._backward = lambda g: _accum(self, -g)
        return out

    def __sub__(self, other):
        return self + (-as_var(other))

    def __rsub__(self, other):
        return as_var(other) + (-self)

    def __mul__(self, other):
        other = as_var(other)
        out = Var(self.value * other.value, (self, other))

        def back(g):
            _accum(self, _unbroadcast(g * other.value, self.shape))
            _accum(other, _unbroadcast(g * self.value, other.shape))

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_var(other)
        out = Var(self.value / other.value, (self, other))

        def back(g):
            _accum(self, _unbroadcast(g / other.value, self.shape))
            _accum(other, _unbroadcast(-g * self.value / other.value**2, other.shape))

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return as_var(other) / self

    def __getitem__(self, idx):
        out = Var(self.value[idx], (self,))

        def back(g):
            full = np.zeros_like(self.value)
            np.add.at(full, idx, g)
            _accum(self, full)

        out._backward = back
        return out

    def reshape(self, *shape):
        out = Var(self.value.reshape(*shape), (self,))
        out._backward = lambda g: _accum(self, g.reshape(self.shape))
        return out

    # --- autodiff driver --------------------------------------------------

    def backward(self):
        """Populate .grad on every node reachable from this scalar output."""
        order: list[Var] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)


def _accum(node: Var, g: np.ndarray) -> None:
    node.grad += g


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


# --- elementwise functions -------------------------------------------------


def exp(x: Var) -> Var:
    x = as_var(x)
    out = Var(np.exp(x.value), (x,))
    out._backward = lambda g: _accum(x, g * out.value)
    return out


def log(x: Var) -> Var:
    x = as_var(x)
    out = Var(np.log(x.value), (x,))
    out._backward = lambda g: _accum(x, g / x.value)
    return out


def log1p(x: Var) -> Var:
    x = as_var(x)
    out = Var(np.log1p(x.value), (x,))
    out._backward = lambda g: _accum(x, g / (1.0 + x.value))
    return out


def softplus(x: Var) -> Var:
    x = as_var(x)
    out = Var(np.logaddexp(0.0, x.value), (x,))
    out._backward = lambda g: _accum(x, g * special.expit(x.value))
    return out


def gammaln(x: Var) -> Var:
    x = as_var(x)
    out = Var(special.gammaln(x.value), (x,))
    out._backward = lambda g: _accum(x, g * special.digamma(x.value))
    return out


def square(x: Var) -> Var:
    x = as_var(x)
    out = Var(x.value**2, (x,))
    out._backward = lambda g: _accum(x, g * 2.0 * x.value)
    return out


def clip(x: Var, lo: float | None, hi: float | None) -> Var:
    """Clamp values; gradient passes through only where unclipped."""
    x = as_var(x)
    out = Var(np.clip(x.value, lo, hi), (x,))
    mask = np.ones_like(x.value)
    if lo is not None:
        mask = mask * (x.value >= lo)
    if hi is not None:
        mask = mask * (x.value <= hi)

    out._backward = lambda g: _accum(x, g * mask)
    return out


# --- reductions and linear algebra ------------------------------------------


def vsum(x: Var, axis=None) -> Var:
    x = as_var(x)
    out = Var(x.value.sum(axis=axis), (x,))

    def back(g):
        if axis is None:
            _accum(x, np.broadcast_to(g, x.shape).copy())
        else:
            _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    out._backward = back
    return out


def dot(a: np.ndarray, v: Var) -> Var:
    """Matrix (constant) times vector (node)."""
    v = as_var(v)
    a = np.asarray(a, dtype=np.float64)
    out = Var(a @ v.value, (v,))
    out._backward = lambda g: _accum(v, a.T @ g)
    return out


def stack(vars_: list[Var], axis: int = -1) -> Var:
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.stack([v.value for v in vars_], axis=axis), tuple(vars_))

    def back(g):
        pieces = np.moveaxis(g, axis, 0)
        for v, piece in zip(vars_, pieces):
            _accum(v, piece)

    out._backward = back
    return out


def logsumexp(x: Var, axis: int = -1) -> Var:
    x = as_var(x)
    val = special.logsumexp(x.value, axis=axis)
    out = Var(val, (x,))

    def back(g):
        soft = np.exp(x.value - np.expand_dims(val, axis))
        _accum(x, np.expand_dims(g, axis) * soft)

    out._backward = back
    return out
