"""Dense float64 tensor kernel with hand-derived reverse-mode gradients.

Tensors wrap numpy arrays and record their producing operation on a tape;
calling ``backward()`` on a scalar result propagates gradients to every
leaf. Only the shapes the detection pipeline needs are supported --
no general broadcasting.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class DegenerateInputError(ValueError):
    """Input is outside an operation's domain (e.g. normalizing a zero vector)."""


class Tensor:
    """A dense float64 array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.shape != ():
            raise ShapeError(f"backward() needs a scalar output, got shape {self.data.shape}")
        order = _topo_order(self)
        for node in order:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad += 1.0
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Param(Tensor):
    """Trainable leaf tensor with a persistent, accumulated gradient."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(data)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.data.shape})"


class ParamRegistry:
    """Ordered name -> Param map holding every trainable weight of a model."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def register(self, name: str, data) -> Param:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        p = Param(name, data)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def reset_gradients(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def n_coords(self) -> int:
        return sum(p.data.size for p in self._params.values())


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative DFS; graphs can be a few thousand nodes deep per batch.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _require_2d(x: Tensor, op: str) -> None:
    if x.data.ndim != 2:
        raise ShapeError(f"{op} needs a 2-D operand, got shape {x.data.shape}")


def _require_1d(x: Tensor, op: str) -> None:
    if x.data.ndim != 1:
        raise ShapeError(f"{op} needs a 1-D operand, got shape {x.data.shape}")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """C = A @ B for 2-D operands."""
    _require_2d(a, "matmul")
    _require_2d(b, "matmul")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def _backward():
        a.grad += out.grad @ b.data.T
        b.grad += a.data.T @ out.grad

    out._backward = _backward
    return out


def matvec(a: Tensor, x: Tensor) -> Tensor:
    """y = A @ x with A 2-D and x 1-D."""
    _require_2d(a, "matvec")
    _require_1d(x, "matvec")
    if a.data.shape[1] != x.data.shape[0]:
        raise ShapeError(f"matvec inner dims disagree: {a.data.shape} vs {x.data.shape}")
    out = Tensor(a.data @ x.data, (a, x))

    def _backward():
        a.grad += np.outer(out.grad, x.data)
        x.grad += a.data.T @ out.grad

    out._backward = _backward
    return out


def transpose(x: Tensor) -> Tensor:
    _require_2d(x, "transpose")
    out = Tensor(x.data.T.copy(), (x,))

    def _backward():
        x.grad += out.grad.T

    out._backward = _backward
    return out


def outer(u: Tensor, v: Tensor) -> Tensor:
    """Rank-1 matrix u v^T from two vectors."""
    _require_1d(u, "outer")
    _require_1d(v, "outer")
    out = Tensor(np.outer(u.data, v.data), (u, v))

    def _backward():
        u.grad += out.grad @ v.data
        v.grad += out.grad.T @ u.data

    out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# elementwise and affine
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes disagree: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def _backward():
        a.grad += out.grad
        b.grad += out.grad

    out._backward = _backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shapes disagree: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data, (a, b))

    def _backward():
        a.grad += out.grad * b.data
        b.grad += out.grad * a.data

    out._backward = _backward
    return out


def affine(x: Tensor, a: float, b: float) -> Tensor:
    """a*x + b with python-float coefficients."""
    out = Tensor(a * x.data + b, (x,))

    def _backward():
        x.grad += a * out.grad

    out._backward = _backward
    return out


def scale(x: Tensor, c: float) -> Tensor:
    return affine(x, c, 0.0)


def scale_by(v: Tensor, s: Tensor) -> Tensor:
    """v scaled by a 0-d tensor s (e.g. a learned gate)."""
    if s.data.shape != ():
        raise ShapeError(f"scale_by needs a scalar multiplier, got shape {s.data.shape}")
    out = Tensor(v.data * s.data, (v, s))

    def _backward():
        v.grad += out.grad * s.data
        s.grad += np.sum(out.grad * v.data)

    out._backward = _backward
    return out


def scale_rows(m: Tensor, w: Tensor) -> Tensor:
    """Row i of m multiplied by w[i]."""
    _require_2d(m, "scale_rows")
    _require_1d(w, "scale_rows")
    if m.data.shape[0] != w.data.shape[0]:
        raise ShapeError(f"scale_rows shapes disagree: {m.data.shape} vs {w.data.shape}")
    out = Tensor(m.data * w.data[:, None], (m, w))

    def _backward():
        m.grad += out.grad * w.data[:, None]
        w.grad += np.sum(out.grad * m.data, axis=1)

    out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), (x,))

    def _backward():
        x.grad += out.grad * (x.data > 0.0)

    out._backward = _backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    # split form avoids overflow in exp for large |x|
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(y, (x,))

    def _backward():
        x.grad += out.grad * y * (1.0 - y)

    out._backward = _backward
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), (x,))

    def _backward():
        x.grad += out.grad / x.data

    out._backward = _backward
    return out


def clip(x: Tensor, lo: float | None, hi: float | None) -> Tensor:
    """Clamp to [lo, hi]; gradient passes through only where unclamped."""
    out = Tensor(np.clip(x.data, lo, hi), (x,))
    mask = np.ones_like(x.data, dtype=bool)
    if lo is not None:
        mask &= x.data >= lo
    if hi is not None:
        mask &= x.data <= hi

    def _backward():
        x.grad += out.grad * mask

    out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# softmax and normalization
# ---------------------------------------------------------------------------


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    _require_2d(x, "softmax_rows")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p, (x,))

    def _backward():
        # dx = p * (g - sum(g * p, row))
        s = np.sum(out.grad * p, axis=1, keepdims=True)
        x.grad += p * (out.grad - s)

    out._backward = _backward
    return out


def softmax_vec(x: Tensor) -> Tensor:
    """Softmax of a single 1-D logit vector."""
    _require_1d(x, "softmax_vec")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    p = e / e.sum()
    out = Tensor(p, (x,))

    def _backward():
        s = np.sum(out.grad * p)
        x.grad += p * (out.grad - s)

    out._backward = _backward
    return out


def l2_normalize(v: Tensor) -> Tensor:
    _require_1d(v, "l2_normalize")
    n = np.linalg.norm(v.data)
    if n == 0.0:
        raise DegenerateInputError("l2_normalize of a zero vector")
    y = v.data / n
    out = Tensor(y, (v,))

    def _backward():
        # d v = (g - y (y.g)) / ||v||
        v.grad += (out.grad - y * np.dot(y, out.grad)) / n

    out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def mean_pool(x: Tensor, axis: int) -> Tensor:
    _require_2d(x, "mean_pool")
    if axis not in (0, 1):
        raise ShapeError(f"mean_pool axis must be 0 or 1, got {axis}")
    m = x.data.shape[axis]
    out = Tensor(x.data.mean(axis=axis), (x,))

    def _backward():
        if axis == 0:
            x.grad += out.grad[None, :] / m
        else:
            x.grad += out.grad[:, None] / m

    out._backward = _backward
    return out


def max_pool(x: Tensor, axis: int) -> Tensor:
    """Max along an axis; ties route the gradient to the first maximum."""
    _require_2d(x, "max_pool")
    if axis not in (0, 1):
        raise ShapeError(f"max_pool axis must be 0 or 1, got {axis}")
    idx = np.argmax(x.data, axis=axis)
    out = Tensor(x.data.max(axis=axis), (x,))

    def _backward():
        if axis == 0:
            np.add.at(x.grad, (idx, np.arange(x.data.shape[1])), out.grad)
        else:
            np.add.at(x.grad, (np.arange(x.data.shape[0]), idx), out.grad)

    out._backward = _backward
    return out


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""
    out = Tensor(x.data.sum(), (x,))

    def _backward():
        x.grad += out.grad

    out._backward = _backward
    return out


def mean_scalars(parts: list[Tensor]) -> Tensor:
    """Average of 0-d tensors (batch loss reduction)."""
    if not parts:
        raise ShapeError("mean_scalars of an empty list")
    for p in parts:
        if p.data.shape != ():
            raise ShapeError(f"mean_scalars needs scalars, got shape {p.data.shape}")
    n = len(parts)
    out = Tensor(sum(float(p.data) for p in parts) / n, tuple(parts))

    def _backward():
        for p in parts:
            p.grad += out.grad / n

    out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    for p in parts:
        _require_1d(p, "concat")
    out = Tensor(np.concatenate([p.data for p in parts]), tuple(parts))
    sizes = [p.data.shape[0] for p in parts]

    def _backward():
        off = 0
        for p, size in zip(parts, sizes):
            p.grad += out.grad[off:off + size]
            off += size

    out._backward = _backward
    return out


def stack_rows(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix, one per row."""
    for p in parts:
        _require_1d(p, "stack_rows")
    widths = {p.data.shape[0] for p in parts}
    if len(widths) != 1:
        raise ShapeError(f"stack_rows needs equal lengths, got {sorted(widths)}")
    out = Tensor(np.stack([p.data for p in parts]), tuple(parts))

    def _backward():
        for i, p in enumerate(parts):
            p.grad += out.grad[i]

    out._backward = _backward
    return out


def take_rows(e: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup); repeats accumulate."""
    _require_2d(e, "take_rows")
    idx = np.asarray(ids, dtype=np.intp)
    out = Tensor(e.data[idx], (e,))

    def _backward():
        np.add.at(e.grad, idx, out.grad)

    out._backward = _backward
    return out


def take_at(v: Tensor, i: int) -> Tensor:
    """Single element of a 1-D tensor, as a 0-d tensor."""
    _require_1d(v, "take_at")
    out = Tensor(v.data[i], (v,))

    def _backward():
        v.grad[i] += out.grad

    out._backward = _backward
    return out


def take_diag(m: Tensor) -> Tensor:
    """Diagonal of a square matrix."""
    _require_2d(m, "take_diag")
    n, c = m.data.shape
    if n != c:
        raise ShapeError(f"take_diag needs a square matrix, got {m.data.shape}")
    out = Tensor(np.diagonal(m.data).copy(), (m,))
    ar = np.arange(n)

    def _backward():
        m.grad[ar, ar] += out.grad

    out._backward = _backward
    return out
