from dataclasses import dataclass, field
import numpy as np

from ember_news.errors import DimensionError, NonFiniteError
from ember_news.numerics.autograd import Array
from ember_news.numerics.params import ParamStore


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState):
    """
    Bias-corrected Adam update of every parameter from its gradient slot.

    Moments are created lazily with the parameter's shape. Only coordinates with a
    nonzero gradient move, so an all-zero gradient leaves every parameter in place
    whatever the moment history.
    """
    for path in store:
        if not np.all(np.isfinite(store.grads[path])):
            raise NonFiniteError(f"non-finite gradient for parameter {path}", where=path)

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    step_size = state.lr / bc1

    for path in store:
        g = store.grads[path]
        param = store.params[path]
        if path not in state.m:
            state.m[path] = np.zeros_like(param)
            state.v[path] = np.zeros_like(param)
        elif state.m[path].shape != param.shape:
            raise DimensionError(f"Adam moments for {path} have shape {state.m[path].shape}, parameter is {param.shape}")

        m = state.m[path]
        v = state.v[path]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        denom = np.sqrt(v * (1.0 / bc2)) + state.eps
        param -= np.where(g != 0.0, step_size * m / denom, 0.0)
