"""
Intra-component feature extractors. Each turns one component of a batch into a
(B, n, 2h) sequence with a (B, n) validity mask.

    hfe  headline: word Bi-LSTM → attention pool → sentence Bi-LSTM (one sentence)
    bfe  body:     word Bi-GRU → attention pool per sentence → sentence Bi-GRU
    cfe  comments: attention pool over word embeddings → Bi-GRU across comments
    ife  images:   project original/ELA halves → attention over the two → Bi-GRU across images
"""
from dataclasses import dataclass
import numpy as np
from numpy.typing import NDArray

from ember_news.data import NOCOMP, Component, ImageBatch, TextBatch
from ember_news.errors import ConfigError
from ember_news.numerics import autograd as ag
from ember_news.numerics.autograd import Tensor
from ember_news.numerics.layers import (
    CellKind,
    additive_attention_pool,
    bidirectional_encode,
    init_attention,
    init_bidirectional,
)
from ember_news.numerics.params import Binding, ParamStore, Scope, add_bias, add_weight


EXTRACTOR_PREFIX: dict[Component, str] = {"H": "hfe", "I": "ife", "C": "cfe", "B": "bfe"}


@dataclass
class EncodedComponent:
    kind: Component
    vectors: Tensor
    mask: NDArray[np.bool_]
    # Attention weights of the innermost pooling layer, kept for diagnostics.
    inner_weights: Tensor | None = None

    @property
    def width(self) -> int:
        return int(self.vectors.shape[-1])

    @property
    def length(self) -> NDArray[np.int64]:
        return self.mask.sum(axis=1)


# ---------------------------------------------------------------------------
# Parameter registration
# ---------------------------------------------------------------------------
def init_embedding(store: ParamStore, table: NDArray[np.float64], train_embeddings: bool):
    """NOCOMP is always learned; the whole table only when fine-tuning is on."""
    _ = store.add("embed.nocomp", table[NOCOMP].copy())
    if train_embeddings:
        _ = store.add("embed.table", table)


def init_hierarchical(store: ParamStore, rng: np.random.Generator, prefix: str, cell: CellKind, d: int, h: int):
    init_bidirectional(store, rng, f"{prefix}.word", cell, d, h)
    init_attention(store, rng, f"{prefix}.word_att", 2 * h)
    init_bidirectional(store, rng, f"{prefix}.sent", cell, 2 * h, h)


def init_cfe(store: ParamStore, rng: np.random.Generator, d: int, h: int):
    init_attention(store, rng, "cfe.word_att", d)
    init_bidirectional(store, rng, "cfe.sent", "gru", d, h)


def init_ife(store: ParamStore, rng: np.random.Generator, image_width: int, h: int):
    _ = add_weight(store, rng, "ife.proj_orig.W", (2 * h, image_width))
    _ = add_bias(store, "ife.proj_orig.b", 2 * h)
    _ = add_weight(store, rng, "ife.proj_ela.W", (2 * h, image_width))
    _ = add_bias(store, "ife.proj_ela.b", 2 * h)
    init_attention(store, rng, "ife.att", 2 * h)
    init_bidirectional(store, rng, "ife.seq", "gru", 2 * h, h)
    _ = store.add("ife.nocomp", np.zeros(2 * h))


def init_extractor(
        store: ParamStore,
        rng: np.random.Generator,
        kind: Component,
        d: int,
        h: int,
        image_width: int):
    match kind:
        case "H":
            init_hierarchical(store, rng, "hfe", "lstm", d, h)
        case "B":
            init_hierarchical(store, rng, "bfe", "gru", d, h)
        case "C":
            init_cfe(store, rng, d, h)
        case "I":
            init_ife(store, rng, image_width, h)


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------
def embed_tokens(p: Binding, table: Tensor, ids: NDArray[np.int64]) -> Tensor:
    """Word vectors for an id array; NOCOMP positions take the learned placeholder."""
    x = ag.embedding(table, ids)
    placeholder = (ids == NOCOMP)[..., None].astype(x.data.dtype)
    if placeholder.any():
        x = x * (1.0 - placeholder) + p["embed.nocomp"] * placeholder
    return x


def _hierarchical(p: Scope, cell: CellKind, x: Tensor, text: TextBatch, kind: Component) -> EncodedComponent:
    batch, n_sent, n_tok = text.ids.shape
    d = x.shape[-1]
    words = ag.reshape(x, (batch * n_sent, n_tok, d))
    word_mask = text.word_mask.reshape(batch * n_sent, n_tok)
    states = bidirectional_encode(words, cell, p.scope("word"), word_mask)
    weights, pooled = additive_attention_pool(states, p.scope("word_att"), word_mask)
    sentences = ag.reshape(pooled, (batch, n_sent, pooled.shape[-1]))
    out = bidirectional_encode(sentences, cell, p.scope("sent"), text.sent_mask)
    return EncodedComponent(kind, out, text.sent_mask, ag.reshape(weights, (batch, n_sent, n_tok)))


def bfe(p: Binding, table: Tensor, body: TextBatch) -> EncodedComponent:
    """Body: one vector per sentence."""
    return _hierarchical(p.scope("bfe"), "gru", embed_tokens(p, table, body.ids), body, "B")


def hfe(p: Binding, table: Tensor, headline: TextBatch) -> EncodedComponent:
    """Headline: the same hierarchy on LSTM cells; exactly one output position."""
    if headline.ids.shape[1] != 1:
        raise ConfigError(f"headline batch must hold one sentence per item, got {headline.ids.shape[1]}")
    return _hierarchical(p.scope("hfe"), "lstm", embed_tokens(p, table, headline.ids), headline, "H")


def cfe(p: Binding, table: Tensor, comments: TextBatch) -> EncodedComponent:
    """Comments: no word-level recurrence, attention straight over the embeddings."""
    batch, n_com, n_tok = comments.ids.shape
    x = embed_tokens(p, table, comments.ids)
    d = x.shape[-1]
    words = ag.reshape(x, (batch * n_com, n_tok, d))
    word_mask = comments.word_mask.reshape(batch * n_com, n_tok)
    s = p.scope("cfe")
    weights, pooled = additive_attention_pool(words, s.scope("word_att"), word_mask)
    seq = ag.reshape(pooled, (batch, n_com, d))
    out = bidirectional_encode(seq, "gru", s.scope("sent"), comments.sent_mask)
    return EncodedComponent("C", out, comments.sent_mask, ag.reshape(weights, (batch, n_com, n_tok)))


def ife(p: Binding, images: ImageBatch, use_ela: bool=True) -> EncodedComponent:
    """
    Images: each image's original and ELA vectors are projected to 2h and
    pooled by attention over the two halves, then a Bi-GRU runs across images.
    With `use_ela` off the ELA half is masked out of the attention.
    """
    batch, n_img, width = images.original.shape
    s = p.scope("ife")
    if width != s.scope("proj_orig")["W"].shape[1]:
        raise ConfigError(f"image features are {width} wide, model expects {s.scope('proj_orig')['W'].shape[1]}")
    dtype = s["proj_orig.W"].data.dtype
    orig = ag.linear(Tensor(images.original.astype(dtype, copy=False)), s["proj_orig.W"], s["proj_orig.b"])
    ela = ag.linear(Tensor(images.ela.astype(dtype, copy=False)), s["proj_ela.W"], s["proj_ela.b"])
    halves = ag.stack([orig, ela], axis=2)
    two_h = halves.shape[-1]

    half_mask = images.half_mask.copy()
    if not use_ela:
        half_mask[:, :, 1] = False
        half_mask[:, :, 0] = images.mask
    weights, pooled = additive_attention_pool(
        ag.reshape(halves, (batch * n_img, 2, two_h)),
        s.scope("att"),
        half_mask.reshape(batch * n_img, 2))
    seq = ag.reshape(pooled, (batch, n_img, two_h))

    if images.nocomp.any():
        slot = np.zeros((batch, n_img, 1), dtype=dtype)
        slot[images.nocomp, 0, 0] = 1.0
        seq = seq * (1.0 - slot) + s["nocomp"] * slot

    out = bidirectional_encode(seq, "gru", s.scope("seq"), images.mask)
    return EncodedComponent("I", out, images.mask, ag.reshape(weights, (batch, n_img, 2)))
