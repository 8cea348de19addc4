from collections.abc import Callable
from dataclasses import dataclass, field
import numpy as np

from ember_news.errors import EmptyInputError, GradcheckError
from ember_news.numerics.autograd import Array, Tensor
from ember_news.numerics.params import Binding, ParamStore


LossFn = Callable[[Binding], Tensor]
GradHook = Callable[[dict[str, Array]], None]

# Below this magnitude both gradients count as zero and the error is absolute.
ABS_FLOOR = 1e-5


@dataclass
class GradcheckReport:
    max_rel_error: float = 0.0
    worst_path: str | None = None
    checked: int = 0
    per_path: dict[str, float] = field(default_factory=dict)

    def per_module(self) -> dict[str, float]:
        """Worst error per top-level component (``bfe``, ``coatt``, ``head_gru`` ...)."""
        out: dict[str, float] = {}
        for path, err in self.per_path.items():
            module = path.split(".")[0]
            out[module] = max(out.get(module, 0.0), err)
        return dict(sorted(out.items()))

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol

    def raise_if_failed(self, tol: float):
        if not self.passed(tol) and self.worst_path is not None:
            raise GradcheckError(
                f"gradient check failed at {self.worst_path}: relative error {self.max_rel_error:.3e} >= {tol:.1e}",
                path=self.worst_path,
                rel_error=self.max_rel_error)


def relative_error(analytic: float, numeric: float, floor: float=ABS_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def loss_and_grads(loss_fn: LossFn, store: ParamStore) -> float:
    """Zero the gradient slots, run one forward/backward pass, fill the slots."""
    store.zero_grads()
    binding = store.bind(requires_grad=True)
    loss = loss_fn(binding)
    loss.backward()
    binding.accumulate_grads()
    return loss.item()


def loss_value(loss_fn: LossFn, store: ParamStore) -> float:
    return loss_fn(store.bind(requires_grad=False)).item()


def sample_coordinates(
        store: ParamStore,
        samples: int,
        rng: np.random.Generator,
        paths: list[str] | None=None) -> list[tuple[str, tuple[int, ...]]]:
    """
    Pick `samples` coordinates: one per parameter first (in path order) so every
    tensor is touched when budget allows, the rest uniformly over all entries.
    """
    if samples <= 0:
        raise EmptyInputError("gradcheck needs at least one sampled coordinate")
    names = paths if paths is not None else list(store)
    names = [p for p in names if store[p].size > 0]
    if not names:
        raise EmptyInputError("no parameters to check")

    picked: list[tuple[str, tuple[int, ...]]] = []
    for path in names[:samples]:
        flat = int(rng.integers(store[path].size))
        picked.append((path, tuple(int(i) for i in np.unravel_index(flat, store[path].shape))))

    remaining = samples - len(picked)
    if remaining > 0:
        sizes = np.array([store[p].size for p in names], dtype=np.float64)
        choices = rng.choice(len(names), size=remaining, p=sizes / sizes.sum())
        for which in choices:
            path = names[int(which)]
            flat = int(rng.integers(store[path].size))
            picked.append((path, tuple(int(i) for i in np.unravel_index(flat, store[path].shape))))
    return picked


def gradcheck(
        loss_fn: LossFn,
        store: ParamStore,
        samples: int=200,
        delta: float=1e-5,
        seed: int=0,
        paths: list[str] | None=None,
        tol: float | None=None,
        grad_hook: GradHook | None=None,
        verbose: bool=False) -> GradcheckReport:
    """
    Compare analytic gradients against central differences
    (L(θ+δ) − L(θ−δ)) / 2δ on sampled coordinates.

    `grad_hook` may alter the analytic gradients before comparison (fault
    injection). With `tol` set, a failing check raises GradcheckError naming
    the worst parameter path.
    """
    rng = np.random.default_rng(seed)
    _ = loss_and_grads(loss_fn, store)
    if grad_hook is not None:
        grad_hook(store.grads)
    analytic = {path: g.copy() for path, g in store.grads.items()}

    report = GradcheckReport()
    for path, idx in sample_coordinates(store, samples, rng, paths):
        param = store.params[path]
        original = float(param[idx])
        param[idx] = original + delta
        plus = loss_value(loss_fn, store)
        param[idx] = original - delta
        minus = loss_value(loss_fn, store)
        param[idx] = original

        numeric = (plus - minus) / (2.0 * delta)
        err = relative_error(float(analytic[path][idx]), numeric)
        if verbose:
            print(f"{path}{list(idx)}: analytic={float(analytic[path][idx]):+.6e} numeric={numeric:+.6e} rel={err:.2e}")
        report.checked += 1
        report.per_path[path] = max(report.per_path.get(path, 0.0), err)
        if report.worst_path is None or err > report.max_rel_error:
            report.max_rel_error = err
            report.worst_path = path

    if tol is not None:
        report.raise_if_failed(tol)
    return report
