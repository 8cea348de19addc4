"""
Inter-component fusion: co-attention over component pairs, the reading-order
pair sequence, its backward aggregation and the refinement features.

Sequences are batched rows: P_D is (B, N, 2h) and P_E is (B, Q, 2h), with
masked positions holding zero vectors.
"""
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal
import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

from ember_news.data import Component
from ember_news.errors import DimensionError, EmptyInputError
from ember_news.extractors import EncodedComponent
from ember_news.numerics import autograd as ag
from ember_news.numerics.autograd import Tensor
from ember_news.numerics.layers import (
    additive_attention_pool,
    bidirectional_encode,
    init_attention,
    init_bidirectional,
    init_cell,
    run_direction,
)
from ember_news.numerics.params import Binding, ParamStore, Scope, add_weight


Pair = tuple[Component, Component]
Aggregator = Literal["gru", "concat", "attention", "bigru"]


def pair_name(pair: Pair) -> str:
    return f"{pair[0]}{pair[1]}"


def parse_pair(text: str) -> Pair:
    text = text.strip().strip("()").replace(",", "").upper()
    if len(text) != 2 or any(c not in "HICB" for c in text) or text[0] == text[1]:
        raise ValueError(f"not a component pair: {text!r}")
    return (text[0], text[1])  # pyright: ignore[reportReturnType]


def canonical_pair(pair: Pair, order: Sequence[Component]) -> Pair:
    """Orient a pair so its first component is the one read earlier."""
    a, b = pair
    return (a, b) if order.index(a) < order.index(b) else (b, a)


def pair_order(order: Sequence[Component]) -> list[Pair]:
    """
    Every unordered pair of the reading order, sorted by the reading rank of
    the later component, then of the earlier one. HICB gives
    HI, HC, IC, HB, IB, CB.
    """
    if len(order) < 2:
        raise EmptyInputError(f"pair order needs at least two components, got {list(order)}")
    if len(set(order)) != len(order):
        raise ValueError(f"duplicate component in reading order {list(order)}")
    ranked = [(j, i) for j in range(len(order)) for i in range(j)]
    return [(order[i], order[j]) for j, i in sorted(ranked)]


# ---------------------------------------------------------------------------
# Co-attention
# ---------------------------------------------------------------------------
@dataclass
class CoAttentionOutput:
    pair: Pair
    O_D_E: Tensor
    O_E_D: Tensor
    O_DE: Tensor
    A: Tensor
    a_D: Tensor
    a_E: Tensor
    mask_D: NDArray[np.bool_]
    mask_E: NDArray[np.bool_]


def init_co_attention(store: ParamStore, rng: np.random.Generator, pair: Pair, h: int, k: int):
    prefix = f"coatt.{pair_name(pair)}"
    _ = add_weight(store, rng, f"{prefix}.W_m", (2 * h, 2 * h))
    _ = add_weight(store, rng, f"{prefix}.W_D", (k, 2 * h))
    _ = add_weight(store, rng, f"{prefix}.W_E", (k, 2 * h))
    _ = add_weight(store, rng, f"{prefix}.w_DE", (k,))
    _ = add_weight(store, rng, f"{prefix}.w_ED", (k,))


def co_attention(P_D: EncodedComponent, P_E: EncodedComponent, p: Scope) -> CoAttentionOutput:
    """
    Affinity A = tanh(P_E W_m P_Dᵀ), then

        H^D = tanh(P_D W_Dᵀ + Aᵀ (P_E W_Eᵀ))      (B, N, k)
        H^E = tanh(P_E W_Eᵀ + A (P_D W_Dᵀ))       (B, Q, k)
        a^D = softmax_N(H^D w_DE),  a^E = softmax_Q(H^E w_ED)
        O^{D_E} = Σ a^D_i P_D_i,    O^{E_D} = Σ a^E_j P_E_j

    and O^{DE} = [O^{D_E}, O^{E_D}].
    """
    pd, pe = P_D.vectors, P_E.vectors
    if pd.shape[-1] != pe.shape[-1] or pd.shape[-1] != p["W_m"].shape[0]:
        raise DimensionError(f"{p.prefix}: component widths {pd.shape[-1]} and {pe.shape[-1]}, expected {p['W_m'].shape[0]}")
    if pd.shape[1] == 0 or pe.shape[1] == 0:
        raise EmptyInputError(f"{p.prefix}: empty component sequence")
    batch, n, width = pd.shape
    q = pe.shape[1]
    k = p["w_DE"].shape[0]

    A = ag.tanh(ag.matmul(ag.matmul(pe, p["W_m"]), ag.transpose(pd)))
    proj_d = ag.linear(pd, p["W_D"])
    proj_e = ag.linear(pe, p["W_E"])
    H_D = ag.tanh(proj_d + ag.matmul(ag.transpose(A), proj_e))
    H_E = ag.tanh(proj_e + ag.matmul(A, proj_d))

    a_D = ag.masked_softmax(ag.reshape(ag.matmul(H_D, ag.reshape(p["w_DE"], (k, 1))), (batch, n)), P_D.mask)
    a_E = ag.masked_softmax(ag.reshape(ag.matmul(H_E, ag.reshape(p["w_ED"], (k, 1))), (batch, q)), P_E.mask)

    O_D_E = ag.reshape(ag.matmul(ag.reshape(a_D, (batch, 1, n)), pd), (batch, width))
    O_E_D = ag.reshape(ag.matmul(ag.reshape(a_E, (batch, 1, q)), pe), (batch, width))
    return CoAttentionOutput(
        (P_D.kind, P_E.kind), O_D_E, O_E_D, ag.concat([O_D_E, O_E_D], axis=-1),
        A, a_D, a_E, P_D.mask, P_E.mask)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------
def fea_width(aggregator: Aggregator, h: int, n_pairs: int) -> int:
    """Width of the global feature Fea_gru (or its stand-in) fed to the detector."""
    if aggregator == "concat":
        return n_pairs * 4 * h
    return 4 * h


def init_aggregator(store: ParamStore, rng: np.random.Generator, aggregator: Aggregator, h: int):
    match aggregator:
        case "gru":
            init_cell(store, rng, "agg.gru", "gru", 4 * h, 4 * h)
        case "attention":
            init_attention(store, rng, "agg.att", 4 * h)
        case "bigru":
            init_bidirectional(store, rng, "agg.bigru", "gru", 4 * h, 2 * h)
        case "concat":
            pass


def aggregate(seq: Sequence[Tensor], p: Binding, aggregator: Aggregator="gru") -> Tensor:
    """
    Fold the (B, 4h) pair features into Fea_gru.

    The default GRU reads the sequence from its last element to its first, so
    later-read pairs enter the recurrence first, and returns the final state.
    """
    if not seq:
        raise EmptyInputError("aggregate over an empty fusion sequence")
    if aggregator == "concat":
        return ag.concat(list(seq), axis=-1)
    stacked = ag.stack(list(seq), axis=1)
    match aggregator:
        case "gru":
            _, final = run_direction(stacked, "gru", p.scope("agg.gru"), reverse=True)
            return final
        case "attention":
            _, pooled = additive_attention_pool(stacked, p.scope("agg.att"))
            return pooled
        case "bigru":
            states = bidirectional_encode(stacked, "gru", p.scope("agg.bigru"))
            half = states.shape[-1] // 2
            fwd_final = states[:, -1, :half]
            bwd_final = states[:, 0, half:]
            return ag.concat([fwd_final, bwd_final], axis=-1)
    raise ValueError(f"unknown aggregator {aggregator!r}")


def refinement_features(outputs: Mapping[Pair, CoAttentionOutput], order: Sequence[Component]) -> Tensor:
    """
    Fea_R: the last-read component's enhanced representation from each of its
    pairs, ordered by the partner's reading rank. For HICB that is
    [O^{B_H}, O^{B_I}, O^{B_C}].
    """
    last = order[-1]
    pieces: list[Tensor] = []
    for partner in order[:-1]:
        out = outputs.get((partner, last))
        if out is not None:
            pieces.append(out.O_E_D)
    if not pieces:
        raise EmptyInputError(f"no active pair contains the last component {last}")
    return ag.concat(pieces, axis=-1) if len(pieces) > 1 else pieces[0]


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------
class PairDiagnostics(BaseModel):
    id: str
    pair: str
    affinity: list[list[float]]
    a_D: list[float]
    a_E: list[float]


def diagnostics_records(ids: Sequence[str], outputs: Iterable[CoAttentionOutput]) -> list[PairDiagnostics]:
    """Per item and pair: A trimmed to the valid Q × N block, and both attention vectors."""
    records: list[PairDiagnostics] = []
    outputs = list(outputs)
    for b, item_id in enumerate(ids):
        for out in outputs:
            n = int(out.mask_D[b].sum())
            q = int(out.mask_E[b].sum())
            records.append(PairDiagnostics(
                id=item_id,
                pair=pair_name(out.pair),
                affinity=out.A.data[b, :q, :n].tolist(),
                a_D=out.a_D.data[b, :n].tolist(),
                a_E=out.a_E.data[b, :q].tolist()))
    return records


def dump_diagnostics(records: Iterable[PairDiagnostics], path: str | Path, append: bool=False):
    with open(path, "a" if append else "w", encoding="utf-8") as f:
        for record in records:
            _ = f.write(record.model_dump_json() + "\n")
