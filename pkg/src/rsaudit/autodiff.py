"""A small reverse-mode automatic differentiation engine over numpy arrays.

Only the operations the predictors need are provided. Every op records its
parents and a closure that maps the output gradient to parent gradients;
``backward`` walks the graph in reverse topological order. All arithmetic is
float64 so gradients can be checked against finite differences.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100  # make numpy defer to our operators

    def __init__(self, data, requires_grad: bool = False,
                 parents: Sequence["Tensor"] = (), backward: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    # -- basics ------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        # count how many graph children consume each node, then release nodes
        # in reverse topological order once all their children are processed
        pending: dict[int, int] = {id(self): 0}
        stack = [self]
        while stack:
            node = stack.pop()
            for p in node._parents:
                if not p.requires_grad:
                    continue
                key = id(p)
                if key in pending:
                    pending[key] += 1
                else:
                    pending[key] = 1
                    stack.append(p)
        grads = {id(self): np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)}
        ready = [self]
        while ready:
            node = ready.pop()
            g = grads.pop(id(node))
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if pg is not None:
                    grads[key] = pg if key not in grads else grads[key] + pg
                pending[key] -= 1
                if pending[key] == 0:
                    if key in grads:
                        ready.append(parent)
                    else:
                        # no gradient flowed in; still release its ancestors
                        grads[key] = np.zeros_like(parent.data)
                        ready.append(parent)

    # -- arithmetic ----------------------------------------------------------
    # Python scalars are folded into the op instead of becoming graph nodes.
    def __add__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return Tensor(self.data + other, parents=(self,), backward=lambda g: (g,))
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.data + other.data, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor(-self.data, parents=(self,), backward=lambda g: (-g,))

    def __sub__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return Tensor(self.data - other, parents=(self,), backward=lambda g: (g,))
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.data - other.data, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g, a), -_unbroadcast(g, b)))

    def __rsub__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return Tensor(other - self.data, parents=(self,), backward=lambda g: (-g,))
        return as_tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return Tensor(self.data * other, parents=(self,), backward=lambda g: (g * other,))
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x * y, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return self * (1.0 / other)
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x / y, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g / y, x.shape),
                                          _unbroadcast(-g * x / (y * y), y.shape)))

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x @ y, parents=(self, other),
                      backward=lambda g: (g @ y.T, x.T @ g))

    def __getitem__(self, index) -> "Tensor":
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, index, g)
            return (out,)

        return Tensor(self.data[index], parents=(self,), backward=back)

    # -- reductions and shape ------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,), backward=back)

    def mean(self, axis=None) -> "Tensor":
        n = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape) -> "Tensor":
        old = self.shape
        return Tensor(self.data.reshape(*shape), parents=(self,), backward=lambda g: (g.reshape(old),))

    def take(self, indices, axis: int) -> "Tensor":
        """Select entries along ``axis`` (indices may repeat)."""
        indices = np.asarray(indices)
        shape = self.shape

        ax = axis % len(shape)

        def back(g):
            out = np.zeros(shape)
            if ax == 0:
                np.add.at(out, indices, g)
            elif ax == 1 and len(shape) == 2:
                np.add.at(out.T, indices, g.T)
            else:
                np.add.at(np.moveaxis(out, ax, 0), indices, np.moveaxis(g, ax, 0))
            return (out,)

        return Tensor(np.take(self.data, indices, axis=axis), parents=(self,), backward=back)

    def prod(self, axis: int = -1) -> "Tensor":
        """Product along ``axis``; the gradient is exact even where entries are zero."""
        x = np.moveaxis(self.data, axis, -1)
        ones = np.ones(x.shape[:-1] + (1,))
        prefix = np.concatenate([ones, np.cumprod(x, axis=-1)[..., :-1]], axis=-1)
        suffix = np.concatenate([np.cumprod(x[..., ::-1], axis=-1)[..., :-1][..., ::-1], ones], axis=-1)
        others = prefix * suffix

        def back(g):
            return (np.moveaxis(np.expand_dims(g, -1) * others, -1, axis),)

        return Tensor(np.prod(self.data, axis=axis), parents=(self,), backward=back)

    # -- elementwise -----------------------------------------------------------
    def log(self) -> "Tensor":
        x = self.data
        with np.errstate(divide="ignore"):
            out = np.log(x)
        return Tensor(out, parents=(self,), backward=lambda g: (g / x,))

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor(out, parents=(self,), backward=lambda g: (g * out,))

    def log_softmax(self, axis: int = -1) -> "Tensor":
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        soft = np.exp(out)
        return Tensor(out, parents=(self,),
                      backward=lambda g: (g - soft * g.sum(axis=axis, keepdims=True),))

    def softmax(self, axis: int = -1) -> "Tensor":
        return self.log_softmax(axis).exp()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors)))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tensors, backward=back)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor(np.stack([t.data for t in tensors], axis=axis), parents=tensors, backward=back)


def log_weighted_sum_exp(logits: Tensor, weights: np.ndarray) -> Tensor:
    """``log sum_j w[i, j] exp(logits[i, j])`` per row, stable; ``-inf`` where all weights vanish."""
    w = np.asarray(weights, dtype=np.float64)
    x = logits.data
    masked = np.where(w > 0, x, -np.inf)
    m = masked.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = (w * np.exp(x - m)).sum(axis=-1, keepdims=True)
        out = np.log(s) + m

    def back(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(w > 0, w * np.exp(x - out), 0.0)
        return (np.expand_dims(g, -1) * share,)

    return Tensor(out[..., 0], parents=(logits,), backward=back)


def numerical_gradient(f: Callable[[], float], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f`` with respect to every entry of ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        grad.reshape(-1)[i] = (up - down) / (2 * h)
    return grad
