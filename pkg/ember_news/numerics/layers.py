"""
Differentiable building blocks composed from the autograd primitives.

Weights are stored (out, in) and applied as ``x @ W.T``. Sequences are batched
(B, T, width) with a boolean (B, T) mask; padding sits at the end of each row.
"""
from typing import Literal
import numpy as np
from numpy.typing import NDArray

from ember_news.errors import DimensionError, EmptyInputError, LabelError
from ember_news.numerics import autograd as ag
from ember_news.numerics.autograd import Array, Tensor
from ember_news.numerics.params import ParamStore, Scope, add_bias, add_weight


CellKind = Literal["gru", "lstm"]
Mask = NDArray[np.bool_]

EPS_CLIP = 1e-7

GRU_GATES = ("z", "r", "n")
LSTM_GATES = ("i", "f", "o", "g")


# ---------------------------------------------------------------------------
# Parameter registration
# ---------------------------------------------------------------------------
def init_cell(store: ParamStore, rng: np.random.Generator, prefix: str, cell: CellKind, in_dim: int, hidden: int):
    gates = GRU_GATES if cell == "gru" else LSTM_GATES
    for gate in gates:
        _ = add_weight(store, rng, f"{prefix}.W_{gate}", (hidden, in_dim))
        _ = add_weight(store, rng, f"{prefix}.U_{gate}", (hidden, hidden))
        _ = add_bias(store, f"{prefix}.b_{gate}", hidden)


def init_bidirectional(store: ParamStore, rng: np.random.Generator, prefix: str, cell: CellKind, in_dim: int, hidden: int):
    init_cell(store, rng, f"{prefix}.fwd", cell, in_dim, hidden)
    init_cell(store, rng, f"{prefix}.bwd", cell, in_dim, hidden)


def init_attention(store: ParamStore, rng: np.random.Generator, prefix: str, width: int):
    _ = add_weight(store, rng, f"{prefix}.W", (width, width))
    _ = add_bias(store, f"{prefix}.b", width)
    _ = store.add(f"{prefix}.U", rng.uniform(-np.sqrt(6.0 / (width + 1)), np.sqrt(6.0 / (width + 1)), size=width))


def init_mlp(store: ParamStore, rng: np.random.Generator, prefix: str, in_dim: int):
    hidden = max(1, in_dim // 2)
    _ = add_weight(store, rng, f"{prefix}.W1", (hidden, in_dim))
    _ = add_bias(store, f"{prefix}.b1", hidden)
    _ = add_weight(store, rng, f"{prefix}.W2", (1, hidden))
    _ = add_bias(store, f"{prefix}.b2", 1)


# ---------------------------------------------------------------------------
# Recurrent cells
# ---------------------------------------------------------------------------
def _check_cell_shapes(x: Tensor, h_prev: Tensor, p: Scope, gate: str):
    w = p[f"W_{gate}"]
    u = p[f"U_{gate}"]
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"{p.prefix}: input width {x.shape[-1]} != {w.shape[1]}")
    if h_prev.shape[-1] != u.shape[0]:
        raise DimensionError(f"{p.prefix}: state width {h_prev.shape[-1]} != {u.shape[0]}")


def _as_rows(v: Tensor) -> Tensor:
    return ag.reshape(v, (1, v.shape[0])) if v.ndim == 1 else v


def _gru_step(xz: Tensor, xr: Tensor, xn: Tensor, h_prev: Tensor, p: Scope) -> Tensor:
    z = ag.sigmoid(xz + ag.linear(h_prev, p["U_z"]))
    r = ag.sigmoid(xr + ag.linear(h_prev, p["U_r"]))
    n = ag.tanh(xn + ag.linear(r * h_prev, p["U_n"]))
    return z * h_prev + (1.0 - z) * n


def gru_cell(x: Tensor, h_prev: Tensor, p: Scope) -> Tensor:
    """
    One GRU step (update gate z, reset gate r):

        z = σ(W_z x + U_z h + b_z)
        r = σ(W_r x + U_r h + b_r)
        n = tanh(W_n x + U_n (r ⊙ h) + b_n)
        h' = z ⊙ h + (1 − z) ⊙ n

    Accepts a single vector or a (B, width) batch.
    """
    single = x.ndim == 1
    x, h_prev = _as_rows(x), _as_rows(h_prev)
    _check_cell_shapes(x, h_prev, p, "z")
    h = _gru_step(
        ag.linear(x, p["W_z"], p["b_z"]),
        ag.linear(x, p["W_r"], p["b_r"]),
        ag.linear(x, p["W_n"], p["b_n"]),
        h_prev, p)
    return ag.reshape(h, (h.shape[1],)) if single else h


def _lstm_step(xi: Tensor, xf: Tensor, xo: Tensor, xg: Tensor, h_prev: Tensor, c_prev: Tensor, p: Scope) -> tuple[Tensor, Tensor]:
    i = ag.sigmoid(xi + ag.linear(h_prev, p["U_i"]))
    f = ag.sigmoid(xf + ag.linear(h_prev, p["U_f"]))
    o = ag.sigmoid(xo + ag.linear(h_prev, p["U_o"]))
    g = ag.tanh(xg + ag.linear(h_prev, p["U_g"]))
    c = f * c_prev + i * g
    h = o * ag.tanh(c)
    return h, c


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, p: Scope) -> tuple[Tensor, Tensor]:
    """
    One LSTM step (input i, forget f, output o gates, candidate g):

        c' = f ⊙ c + i ⊙ g,   h' = o ⊙ tanh(c')
    """
    single = x.ndim == 1
    x, h_prev, c_prev = _as_rows(x), _as_rows(h_prev), _as_rows(c_prev)
    _check_cell_shapes(x, h_prev, p, "i")
    h, c = _lstm_step(
        ag.linear(x, p["W_i"], p["b_i"]),
        ag.linear(x, p["W_f"], p["b_f"]),
        ag.linear(x, p["W_o"], p["b_o"]),
        ag.linear(x, p["W_g"], p["b_g"]),
        h_prev, c_prev, p)
    if single:
        return ag.reshape(h, (h.shape[1],)), ag.reshape(c, (c.shape[1],))
    return h, c


def _keep(new: Tensor, old: Tensor, m: Array | None) -> Tensor:
    """Masked state update: rows with m == 0 carry the previous state through."""
    if m is None:
        return new
    return new * m + old * (1.0 - m)


def run_direction(
        seq: Tensor,
        cell: CellKind,
        p: Scope,
        mask: Mask | None=None,
        reverse: bool=False) -> tuple[list[Tensor], Tensor]:
    """
    Run one recurrent direction over a (B, T, in) sequence from a zero state.

    Returns the per-position states (in sequence order) and the final state.
    """
    if seq.ndim != 3:
        raise DimensionError(f"{p.prefix}: expected a (B, T, width) sequence, got {seq.shape}")
    batch, steps, _ = seq.shape
    if steps == 0:
        raise EmptyInputError(f"{p.prefix}: empty input sequence")

    gates = GRU_GATES if cell == "gru" else LSTM_GATES
    hidden = p[f"U_{gates[0]}"].shape[0]
    if seq.shape[-1] != p[f"W_{gates[0]}"].shape[1]:
        raise DimensionError(f"{p.prefix}: input width {seq.shape[-1]} != {p[f'W_{gates[0]}'].shape[1]}")
    projected = {gate: ag.linear(seq, p[f"W_{gate}"], p[f"b_{gate}"]) for gate in gates}
    dtype = seq.data.dtype
    step_masks = None if mask is None else mask.astype(dtype)[:, :, None]

    h = Tensor(np.zeros((batch, hidden), dtype=dtype))
    c = Tensor(np.zeros((batch, hidden), dtype=dtype))
    states: list[Tensor | None] = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        m = None if step_masks is None else step_masks[:, t]
        if cell == "gru":
            h_new = _gru_step(*(projected[g][:, t] for g in gates), h, p)
        else:
            h_new, c_new = _lstm_step(*(projected[g][:, t] for g in gates), h, c, p)
            c = _keep(c_new, c, m)
        h = _keep(h_new, h, m)
        states[t] = h
    return [s for s in states if s is not None], h


def bidirectional_encode(seq: Tensor, cell: CellKind, p: Scope, mask: Mask | None=None) -> Tensor:
    """
    Bi-directional recurrent encoding. Position t of the (B, T, 2h) output is
    concat(forward_state_t, backward_state_t); masked positions are zeroed.
    """
    fwd, _ = run_direction(seq, cell, p.scope("fwd"), mask)
    bwd, _ = run_direction(seq, cell, p.scope("bwd"), mask, reverse=True)
    out = ag.concat([ag.stack(fwd, axis=1), ag.stack(bwd, axis=1)], axis=-1)
    if mask is not None:
        out = out * mask.astype(out.data.dtype)[:, :, None]
    return out


# ---------------------------------------------------------------------------
# Attention, MLP head, loss
# ---------------------------------------------------------------------------
def additive_attention_pool(H: Tensor, p: Scope, mask: Mask | None=None) -> tuple[Tensor, Tensor]:
    """
    u_i = tanh(W H_i + b),  α = softmax(u_i · U),  pooled = Σ α_i H_i.

    H is (B, n, m); returns weights (B, n) and pooled (B, m). Masked
    positions receive zero weight.
    """
    if H.ndim != 3:
        raise DimensionError(f"{p.prefix}: expected (B, n, m) input, got {H.shape}")
    if H.shape[1] == 0:
        raise EmptyInputError(f"{p.prefix}: attention over an empty sequence")
    width = p["U"].shape[0]
    u = ag.tanh(ag.linear(H, p["W"], p["b"]))
    scores = ag.reshape(ag.matmul(u, ag.reshape(p["U"], (width, 1))), H.shape[:2])
    weights = ag.masked_softmax(scores, mask, axis=-1)
    pooled = ag.reshape(
        ag.matmul(ag.reshape(weights, (H.shape[0], 1, H.shape[1])), H),
        (H.shape[0], H.shape[2]))
    return weights, pooled


def mlp_logit(x: Tensor, p: Scope) -> Tensor:
    """Two-layer head: tanh hidden layer of half the input width, one logit per row."""
    hidden = ag.tanh(ag.linear(x, p["W1"], p["b1"]))
    logit = ag.linear(hidden, p["W2"], p["b2"])
    return ag.reshape(logit, (x.shape[0],))


def check_labels(y: NDArray[np.int64] | list[int]) -> NDArray[np.float64]:
    labels = np.asarray(y)
    if labels.size and not np.all((labels == 0) | (labels == 1)):
        bad = labels[(labels != 0) & (labels != 1)][0]
        raise LabelError(f"labels must be 0 or 1, got {bad!r}")
    return labels.astype(np.float64)


def cross_entropy(prob: Tensor, y: NDArray[np.int64] | list[int], eps: float=EPS_CLIP) -> Tensor:
    """
    Mean binary cross-entropy −[y log p + (1−y) log(1−p)] over the batch,
    with p clipped to [eps, 1 − eps] before the log.
    """
    labels = check_labels(y)
    if prob.data.size != labels.size:
        raise DimensionError(f"{prob.data.size} probabilities for {labels.size} labels")
    p = ag.clip(ag.reshape(prob, (labels.size,)), eps, 1.0 - eps)
    per_item = -(labels * ag.log(p) + (1.0 - labels) * ag.log(1.0 - p))
    return ag.mean(per_item)
