from collections.abc import Iterator
import numpy as np
from numpy.typing import NDArray

from ember_news.errors import DimensionError
from ember_news.numerics.autograd import Array, Tensor


class ParamStore:
    """
    Every learnable array of the network keyed by dotted path
    (e.g. ``bfe.word.fwd.W_z``), with a gradient slot of identical shape.
    """
    params: dict[str, Array]
    grads: dict[str, Array]

    def __init__(self):
        self.params = {}
        self.grads = {}

    def __contains__(self, path: str) -> bool:
        return path in self.params

    def __len__(self) -> int:
        return len(self.params)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.params))

    def __getitem__(self, path: str) -> Array:
        return self.params[path]

    def add(self, path: str, value: Array) -> Array:
        if path in self.params:
            raise KeyError(f"parameter {path} already registered")
        arr = np.array(value, dtype=np.float64, copy=True)
        self.params[path] = arr
        self.grads[path] = np.zeros_like(arr)
        return arr

    def set(self, path: str, value: Array):
        if path not in self.params:
            raise KeyError(f"unknown parameter {path}")
        if self.params[path].shape != np.shape(value):
            raise DimensionError(f"{path}: expected shape {self.params[path].shape}, got {np.shape(value)}")
        self.params[path][...] = value

    def zero_grads(self):
        for g in self.grads.values():
            g.fill(0.0)

    def size(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for path in self:
            other.params[path] = self.params[path].copy()
            other.grads[path] = self.grads[path].copy()
        return other

    def load_from(self, other: "ParamStore"):
        """Overwrite values in place from another store with identical layout."""
        if set(other.params) != set(self.params):
            raise KeyError("parameter stores differ in layout")
        for path in self:
            self.set(path, other.params[path])

    def astype(self, dtype: type) -> "ParamStore":
        """Copy of the store with values held in `dtype` (float32 inference storage)."""
        other = ParamStore()
        for path in self:
            other.params[path] = self.params[path].astype(dtype)
            other.grads[path] = np.zeros_like(other.params[path])
        return other

    def bind(self, requires_grad: bool=True) -> "Binding":
        return Binding(self, requires_grad=requires_grad)


class Binding:
    """
    Leaf tensors for one forward pass over a ParamStore.

    A fresh binding is made per pass, so concurrent passes over the same
    read-only store never share graph state.
    """
    store: ParamStore
    requires_grad: bool
    leaves: dict[str, Tensor]

    def __init__(self, store: ParamStore, requires_grad: bool=True):
        self.store = store
        self.requires_grad = requires_grad
        self.leaves = {}

    def __getitem__(self, path: str) -> Tensor:
        leaf = self.leaves.get(path)
        if leaf is None:
            if path not in self.store.params:
                raise KeyError(f"unknown parameter {path}")
            leaf = Tensor(self.store.params[path], requires_grad=self.requires_grad, name=path)
            self.leaves[path] = leaf
        return leaf

    def __contains__(self, path: str) -> bool:
        return path in self.store.params

    def scope(self, prefix: str) -> "Scope":
        return Scope(self, prefix)

    def accumulate_grads(self):
        """Add leaf gradients from the last backward() into the store's gradient slots."""
        for path, leaf in self.leaves.items():
            if leaf.grad is not None:
                self.store.grads[path] += leaf.grad


class Scope:
    """A path-prefixed view of a Binding, e.g. the parameters of one GRU direction."""
    binding: Binding
    prefix: str

    def __init__(self, binding: Binding, prefix: str):
        self.binding = binding
        self.prefix = prefix

    def __getitem__(self, name: str) -> Tensor:
        return self.binding[f"{self.prefix}.{name}"]

    def __contains__(self, name: str) -> bool:
        return f"{self.prefix}.{name}" in self.binding

    def scope(self, name: str) -> "Scope":
        return Scope(self.binding, f"{self.prefix}.{name}")


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray[np.float64]:
    """U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))] for an (out, in) weight."""
    fan_out = shape[0]
    fan_in = shape[1] if len(shape) > 1 else 1
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def add_weight(store: ParamStore, rng: np.random.Generator, path: str, shape: tuple[int, ...]) -> Array:
    return store.add(path, glorot_uniform(rng, shape))


def add_bias(store: ParamStore, path: str, width: int) -> Array:
    return store.add(path, np.zeros(width))
