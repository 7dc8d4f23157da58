"""A small reverse-mode autodiff tensor over numpy arrays.

Only the operations the voting networks need are implemented. Every op
builds its output with :func:`_node`, passing a closure that maps the
output gradient to one gradient per parent (``None`` for "no gradient").
Leaves accumulate into ``.grad``; interior nodes never store gradients.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameterError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- introspection -----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # -- autodiff engine ---------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise InvalidParameterError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise InvalidParameterError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def _topo_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else np.float64))


def _node(data, parents, backward) -> Tensor:
    rg = any(p.requires_grad for p in parents)
    out = Tensor(data, rg)
    if rg:
        out._parents = parents
        out._backward = backward
    return out


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    ad, bd = a.data, b.data

    def back(g):
        ga = unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return _node(ad * bd, (a, b), back)


def matmul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise InvalidParameterError("matmul needs operands with at least 2 dimensions")
    if ad.shape[-1] != bd.shape[-2]:
        raise InvalidParameterError(f"matmul inner dimensions differ: {ad.shape} @ {bd.shape}")

    def back(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _node(ad @ bd, (a, b), back)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with the batch axes flattened into one GEMM on the way back."""
    xd, wd = x.data, w.data
    if xd.shape[-1] != wd.shape[0]:
        raise InvalidParameterError(f"linear: input width {xd.shape[-1]} != weight rows {wd.shape[0]}")
    out = xd @ wd
    if b is not None:
        out = out + b.data
    parents = (x, w) if b is None else (x, w, b)

    def back(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g @ wd.T) if x.requires_grad else None
        gw = xd.reshape(-1, xd.shape[-1]).T @ g2 if w.requires_grad else None
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _node(out, parents, back)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), back)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul(tsum(a, axis, keepdims), 1.0 / count)


def tmax(a: Tensor, axis: int) -> Tensor:
    """Max over one axis; the gradient goes to the first maximiser."""
    idx = np.expand_dims(a.data.argmax(axis=axis), axis)
    out = np.take_along_axis(a.data, idx, axis=axis)
    shape = a.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _node(np.squeeze(out, axis), (a,), back)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    return _node(np.swapaxes(a.data, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def getitem(a: Tensor, idx) -> Tensor:
    shape = a.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return _node(a.data[idx], (a,), back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def broadcast_to(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _node(np.broadcast_to(a.data, shape), (a,), lambda g: (unbroadcast(g, old),))


# ---------------------------------------------------------------------------
# activations and normalisation
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return _node(np.where(pos, x.data, 0).astype(x.dtype, copy=False), (x,), lambda g: (g * pos,))


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return _node(x.data * scale, (x,), lambda g: (g * scale,))


def layer_norm(x: Tensor, gain: Tensor, offset: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then ``* gain + offset``."""
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gain.data

    def back(g):
        d = xd.shape[-1]
        flat_g = g.reshape(-1, d)
        ggain = (flat_g * xhat.reshape(-1, d)).sum(axis=0) if gain.requires_grad else None
        goff = flat_g.sum(axis=0) if offset.requires_grad else None
        gx = None
        if x.requires_grad:
            gh = g * gd
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, ggain, goff

    return _node(xhat * gd + offset.data, (x, gain, offset), back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, (x,), back)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits, target, mask):
    """Masked log-softmax NLL and its gradient for one or many elections.

    ``logits`` and ``mask`` share shape (..., M); ``target`` has shape (...).
    Returns the per-election losses and ``softmax - onehot`` (zero on masked
    slots).
    """
    logits = np.asarray(logits)
    mask = np.asarray(mask, dtype=bool)
    target = np.asarray(target)
    if not np.all(np.take_along_axis(mask, target[..., None], axis=-1)):
        raise InvalidParameterError("target candidate is masked out")
    z = np.where(mask, logits, -np.inf)
    top = z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z - top), 0.0)
    s = e.sum(axis=-1, keepdims=True)
    logp = z - top - np.log(s)
    loss = -np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    grad = e / s
    np.put_along_axis(grad, target[..., None], np.take_along_axis(grad, target[..., None], axis=-1) - 1.0, axis=-1)
    return loss, grad.astype(logits.dtype, copy=False)


def cross_entropy(logits: Tensor, target, mask) -> Tensor:
    """Mean masked cross-entropy over a batch of logits (B, M) as a scalar Tensor."""
    loss, grad = softmax_cross_entropy(logits.data, target, mask)
    B = loss.shape[0]
    value = np.asarray(loss.mean(), dtype=logits.dtype)
    return _node(value, (logits,), lambda g: (grad * (g / B),))
