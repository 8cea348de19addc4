"""
Reverse-mode differentiation over numpy arrays.

A `Tensor` wraps an ndarray. Operations on tensors that require gradients record
their parents and a closure that pushes the output gradient back to them; calling
`backward()` on a scalar walks that graph in reverse topological order. Only the
handful of operations the network needs are provided.
"""
from collections.abc import Callable, Sequence
from typing import Any
try:
    from typing import override
except ImportError:  # Python < 3.12
    from typing_extensions import override
import numpy as np
from numpy.typing import NDArray

from ember_news.errors import DimensionError, NonFiniteError


Array = NDArray[np.floating[Any]]  # pyright: ignore[reportExplicitAny]
IndexLike = Any  # pyright: ignore[reportExplicitAny]

DEFAULT_DTYPE = np.float64


class Tensor:
    __slots__: tuple[str, ...] = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    # ndarray (op) Tensor must dispatch to the Tensor's reflected operator.
    __array_ufunc__ = None

    data: Array
    grad: Array | None
    requires_grad: bool
    _parents: tuple["Tensor", ...]
    _backward: Callable[[Array], None] | None
    name: str | None

    def __init__(
            self,
            data: Array | float | Sequence[float],
            requires_grad: bool=False,
            parents: tuple["Tensor", ...]=(),
            backward: Callable[[Array], None] | None=None,
            name: str | None=None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents if requires_grad else ()
        self._backward = backward if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> Array:
        return self.data

    @override
    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self, grad: Array | None=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's `.grad`."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() without a seed gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        self.grad = grad

        order = _topological_order(self)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # Interior gradients are not needed once pushed back.
                    node.grad = None

    # operator sugar
    def __add__(self, other: "Tensor | Array | float") -> "Tensor":
        return add(self, other)

    def __radd__(self, other: "Tensor | Array | float") -> "Tensor":
        return add(other, self)

    def __sub__(self, other: "Tensor | Array | float") -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: "Tensor | Array | float") -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: "Tensor | Array | float") -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: "Tensor | Array | float") -> "Tensor":
        return mul(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: IndexLike) -> "Tensor":
        return take(self, index)


def _topological_order(root: Tensor) -> list[Tensor]:
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


def as_tensor(value: "Tensor | Array | float", dtype: type | None=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype or DEFAULT_DTYPE)
    return Tensor(arr)


def _accumulate(t: Tensor, g: Array):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _result(data: Array, parents: tuple[Tensor, ...], backward: Callable[[Array], None]) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, parents=parents, backward=backward)


def check_finite(t: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteError(f"non-finite values produced at {where}", where=where)
    return t


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------
def add(a: "Tensor | Array | float", b: "Tensor | Array | float") -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward(g: Array):
        _accumulate(ta, _unbroadcast(g, ta.shape))
        _accumulate(tb, _unbroadcast(g, tb.shape))

    return _result(ta.data + tb.data, (ta, tb), backward)


def sub(a: "Tensor | Array | float", b: "Tensor | Array | float") -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward(g: Array):
        _accumulate(ta, _unbroadcast(g, ta.shape))
        _accumulate(tb, _unbroadcast(-g, tb.shape))

    return _result(ta.data - tb.data, (ta, tb), backward)


def mul(a: "Tensor | Array | float", b: "Tensor | Array | float") -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward(g: Array):
        if ta.requires_grad:
            _accumulate(ta, _unbroadcast(g * tb.data, ta.shape))
        if tb.requires_grad:
            _accumulate(tb, _unbroadcast(g * ta.data, tb.shape))

    return _result(ta.data * tb.data, (ta, tb), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; both operands need at least two axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs operands with >= 2 axes, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g: Array):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(a.data @ b.data, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None=None) -> Tensor:
    """x @ weight.T (+ bias), weight stored as (out, in)."""
    if x.shape[-1] != weight.shape[-1]:
        raise DimensionError(f"linear: input width {x.shape[-1]} does not match weight {weight.shape}")
    out = matmul(x, transpose(weight))
    if bias is not None:
        out = add(out, bias)
    return out


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------
def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g: Array):
        _accumulate(x, g * (1.0 - y * y))

    return _result(y, (x,), backward)


def _stable_sigmoid(v: Array) -> Array:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _stable_sigmoid(x.data)

    def backward(g: Array):
        _accumulate(x, g * y * (1.0 - y))

    return _result(y, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g: Array):
        _accumulate(x, g / x.data)

    return _result(np.log(x.data), (x,), backward)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)

    def backward(g: Array):
        _accumulate(x, g * inside)

    return _result(np.clip(x.data, lo, hi), (x,), backward)


def masked_softmax(x: Tensor, mask: NDArray[np.bool_] | None=None, axis: int=-1) -> Tensor:
    """
    Softmax along `axis` restricted to positions where `mask` is true.

    Masked positions get exactly zero weight. A slice with no valid position
    yields all zeros rather than NaN.
    """
    scores = x.data
    if mask is None:
        valid = np.ones(scores.shape, dtype=bool)
    else:
        valid = np.broadcast_to(mask, scores.shape)
    shifted = np.where(valid, scores, -np.inf)
    peak = np.max(shifted, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.where(valid, np.exp(np.where(valid, scores, 0.0) - peak), 0.0)
    total = e.sum(axis=axis, keepdims=True)
    w = e / np.where(total > 0, total, 1.0)

    def backward(g: Array):
        inner = (g * w).sum(axis=axis, keepdims=True)
        _accumulate(x, w * (g - inner))

    return _result(w, (x,), backward)


# ---------------------------------------------------------------------------
# Shape manipulation and reductions
# ---------------------------------------------------------------------------
def transpose(x: Tensor, axes: tuple[int, ...] | None=None) -> Tensor:
    if axes is None:
        axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    inverse = tuple(np.argsort(axes))

    def backward(g: Array):
        _accumulate(x, np.transpose(g, inverse))

    return _result(np.transpose(x.data, axes), (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward(g: Array):
        _accumulate(x, g.reshape(x.shape))

    return _result(x.data.reshape(shape), (x,), backward)


def sum(x: Tensor, axis: int | tuple[int, ...] | None=None, keepdims: bool=False) -> Tensor:  # noqa: A001
    def backward(g: Array):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward)


def mean(x: Tensor, axis: int | None=None) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / count)


def take(x: Tensor, index: IndexLike) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate on the way back."""
    def backward(g: Array):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        _accumulate(x, full)

    return _result(x.data[index], (x,), backward)


def embedding(table: Tensor, ids: NDArray[np.integer[Any]]) -> Tensor:  # pyright: ignore[reportExplicitAny]
    """Row lookup `table[ids]`, shape ids.shape + (d,)."""
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(f"token index out of range for a table with {table.shape[0]} rows")
    return take(table, ids)


def concat(tensors: Sequence[Tensor], axis: int=-1) -> Tensor:
    if not tensors:
        raise DimensionError("concat of an empty list")
    datas = [t.data for t in tensors]
    ax = axis if axis >= 0 else datas[0].ndim + axis
    bounds = np.cumsum([d.shape[ax] for d in datas])[:-1]

    def backward(g: Array):
        for t, piece in zip(tensors, np.split(g, bounds, axis=ax)):
            _accumulate(t, piece)

    return _result(np.concatenate(datas, axis=ax), tuple(tensors), backward)


def stack(tensors: Sequence[Tensor], axis: int=0) -> Tensor:
    if not tensors:
        raise DimensionError("stack of an empty list")
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis if axis >= 0 else out.ndim + axis

    def backward(g: Array):
        for i, t in enumerate(tensors):
            _accumulate(t, np.take(g, i, axis=ax))

    return _result(out, tuple(tensors), backward)
