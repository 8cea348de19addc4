"""
The assembled network: extractors for the active components, one co-attention
block per active pair, the pair-sequence aggregator and the two detector heads.
"""
from collections.abc import Callable, Sequence, Mapping
from dataclasses import dataclass
import numpy as np
from numpy.typing import NDArray

from ember_news.config import TrainConfig
from ember_news.data import COMPONENTS, Component, EmbeddingTable, EncodedBatch, NewsItem, encode_batch
from ember_news.errors import DimensionError
from ember_news.extractors import EncodedComponent, bfe, cfe, hfe, ife, init_embedding, init_extractor
from ember_news.forensics import ImageFeature
from ember_news.fusion import (
    CoAttentionOutput,
    Pair,
    aggregate,
    co_attention,
    fea_width,
    init_aggregator,
    init_co_attention,
    pair_name,
    refinement_features,
)
from ember_news.numerics import autograd as ag
from ember_news.numerics.autograd import Tensor, check_finite
from ember_news.numerics.layers import cross_entropy, init_mlp, mlp_logit
from ember_news.numerics.params import Binding, ParamStore


@dataclass
class ForwardResult:
    G_gru: Tensor
    G_R: Tensor
    fea_gru: Tensor
    fea_r: Tensor
    components: dict[Component, EncodedComponent]
    outputs: dict[Pair, CoAttentionOutput]

    def probabilities(self) -> NDArray[np.float64]:
        return self.G_gru.data.astype(np.float64)


def refinement_width(config: TrainConfig) -> int:
    last = config.reading_order()[-1]
    return sum(1 for pair in config.active_pairs() if last in pair) * 2 * config.h


def joint_loss(G_gru: Tensor, G_R: Tensor, y: NDArray[np.int64] | Sequence[int], lam: float) -> Tensor:
    """L = L_gru + λ·L_R, both mean binary cross-entropies."""
    if lam < 0:
        raise ValueError(f"λ must be non-negative, got {lam}")
    labels = np.asarray(y)
    loss = cross_entropy(G_gru, labels)
    if lam == 0:
        return loss
    return loss + lam * cross_entropy(G_R, labels)


class Ember:
    """
    Parameters plus the fixed inputs a forward pass needs (embedding table,
    image feature width). The ParamStore belongs to whoever trains it; forward
    passes only read it, each through its own Binding.
    """
    config: TrainConfig
    embeddings: EmbeddingTable
    image_width: int
    store: ParamStore
    _table: Tensor

    def __init__(self, config: TrainConfig, embeddings: EmbeddingTable, image_width: int, store: ParamStore):
        self.config = config
        self.embeddings = embeddings
        self.image_width = image_width
        self.store = store
        self._table = Tensor(embeddings.matrix)

    @classmethod
    def initialise(cls, config: TrainConfig, embeddings: EmbeddingTable, image_width: int) -> "Ember":
        """Seeded uniform weights and zero biases, drawn in a fixed path order."""
        rng = np.random.default_rng(config.seed)
        store = ParamStore()
        init_embedding(store, embeddings.matrix, config.train_embeddings)
        for kind in COMPONENTS:
            if kind in config.components:
                init_extractor(store, rng, kind, embeddings.dim, config.h, image_width)
        pairs = config.active_pairs()
        for pair in sorted(pairs, key=pair_name):
            init_co_attention(store, rng, pair, config.h, config.k)
        init_aggregator(store, rng, config.aggregator, config.h)
        init_mlp(store, rng, "head_gru", fea_width(config.aggregator, config.h, len(pairs)))
        init_mlp(store, rng, "head_r", refinement_width(config))
        return cls(config, embeddings, image_width, store)

    def astype(self, dtype: type) -> "Ember":
        """Copy holding parameters and the embedding table in `dtype` (32-bit inference)."""
        table = EmbeddingTable(self.embeddings.vocab, self.embeddings.matrix.astype(dtype))
        return Ember(self.config, table, self.image_width, self.store.astype(dtype))

    def encode(self, items: Sequence[NewsItem], features: Mapping[str, ImageFeature]) -> EncodedBatch:
        return encode_batch(items, self.embeddings, features, self.image_width, self.config.caps())

    def table(self, p: Binding) -> Tensor:
        return p["embed.table"] if "embed.table" in p else self._table

    def extract(self, p: Binding, batch: EncodedBatch) -> dict[Component, EncodedComponent]:
        table = self.table(p)
        out: dict[Component, EncodedComponent] = {}
        for kind in self.config.components:
            match kind:
                case "H":
                    enc = hfe(p, table, batch.headline)
                case "B":
                    enc = bfe(p, table, batch.body)
                case "C":
                    enc = cfe(p, table, batch.comments)
                case _:
                    enc = ife(p, batch.images, use_ela=self.config.use_ela)
            if enc.width != 2 * self.config.h:
                raise DimensionError(f"{kind} extractor emitted width {enc.width}, expected {2 * self.config.h}")
            _ = check_finite(enc.vectors, f"extractor {kind}")
            out[kind] = enc  # pyright: ignore[reportArgumentType]
        return out

    def forward(self, batch: EncodedBatch, p: Binding | None=None) -> ForwardResult:
        """G_gru and G_R per item; NaN or Inf anywhere raises naming the stage."""
        if p is None:
            p = self.store.bind(requires_grad=False)
        components = self.extract(p, batch)

        outputs: dict[Pair, CoAttentionOutput] = {}
        for pair in self.config.active_pairs():
            out = co_attention(components[pair[0]], components[pair[1]], p.scope(f"coatt.{pair_name(pair)}"))
            _ = check_finite(out.O_DE, f"co-attention {pair_name(pair)}")
            outputs[pair] = out

        sequence = [outputs[pair].O_DE for pair in self.config.active_pairs()]
        fea_gru = check_finite(aggregate(sequence, p, self.config.aggregator), "aggregator")
        fea_r = refinement_features(outputs, self.config.reading_order())

        G_gru = check_finite(ag.sigmoid(mlp_logit(fea_gru, p.scope("head_gru"))), "detector head")
        G_R = check_finite(ag.sigmoid(mlp_logit(fea_r, p.scope("head_r"))), "refinement head")
        return ForwardResult(G_gru, G_R, fea_gru, fea_r, components, outputs)

    def loss(self, batch: EncodedBatch, p: Binding) -> Tensor:
        result = self.forward(batch, p)
        return check_finite(joint_loss(result.G_gru, result.G_R, batch.labels, self.config.lam), "joint loss")

    def loss_fn(self, batch: EncodedBatch) -> Callable[[Binding], Tensor]:
        return lambda p: self.loss(batch, p)

    def predict_proba(self, batch: EncodedBatch) -> NDArray[np.float64]:
        return self.forward(batch).probabilities()
