"""
Corpus schema, word-embedding ingestion, splitting, batch encoding and the
synthetic desk-scale corpus generator.
"""
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal
import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ember_news.errors import ConfigError, EmptyInputError, FormatError
from ember_news.forensics import ImageFeature, resolve_features
from ember_news.utils import split_sentences, tokenize, tokenize_document, warn


Component = Literal["H", "I", "C", "B"]
COMPONENTS: tuple[Component, ...] = ("H", "I", "C", "B")

PAD = 0
UNK = 1
NOCOMP = 2
RESERVED_TOKENS = ("<pad>", "<unk>", "<nocomp>")

EMBEDDING_DIM = 100


class NewsItem(BaseModel):
    """
    One article: headline (one sentence), body (sentences), comments (one
    token list each) and image identifiers, with label 1 real / 0 fake.

    Raw strings are accepted for the text fields and tokenized on the way in.
    """
    model_config = ConfigDict(extra="forbid")

    id: str
    label: Literal[0, 1]
    headline: list[str] = Field(default_factory=list)
    body: list[list[str]] = Field(default_factory=list)
    comments: list[list[str]] = Field(default_factory=list)
    image_refs: list[str] = Field(default_factory=list)

    @field_validator("headline", mode="before")
    @classmethod
    def _tokenize_headline(cls, value: object) -> object:
        if not isinstance(value, str):
            return value
        sentences = split_sentences(value)
        if len(sentences) > 1:
            warn(f"headline has {len(sentences)} sentences, keeping the first: {sentences[0]!r}")
        return tokenize(sentences[0]) if sentences else []

    @field_validator("body", mode="before")
    @classmethod
    def _tokenize_body(cls, value: object) -> object:
        if isinstance(value, str):
            return tokenize_document(value)
        return value

    @field_validator("comments", mode="before")
    @classmethod
    def _tokenize_comments(cls, value: object) -> object:
        if not isinstance(value, list):
            return value
        out: list[object] = []
        for comment in value:
            if isinstance(comment, str):
                out.append([tok for sentence in tokenize_document(comment) for tok in sentence])
            else:
                out.append(comment)
        return out

    def present(self) -> set[Component]:
        """Components carrying any content (images are checked against refs only)."""
        comps: set[Component] = set()
        if self.headline:
            comps.add("H")
        if self.image_refs:
            comps.add("I")
        if any(self.comments):
            comps.add("C")
        if any(self.body):
            comps.add("B")
        return comps


def load_corpus(path: str | Path) -> list[NewsItem]:
    items: list[NewsItem] = []
    seen: dict[str, int] = {}
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                item = NewsItem.model_validate_json(line)
            except UnicodeDecodeError as e:
                raise FormatError(f"invalid UTF-8 at byte {e.start}: {e.reason}", path=str(path), line=lineno)
            except ValidationError as e:
                first = e.errors()[0]
                where = ".".join(str(p) for p in first["loc"])
                raise FormatError(f"malformed record ({where}): {first['msg']}", path=str(path), line=lineno)
            if item.id in seen:
                raise FormatError(f"duplicate id {item.id!r} (first seen on line {seen[item.id]})", path=str(path), line=lineno)
            seen[item.id] = lineno
            items.append(item)
    return items


def write_corpus(items: Sequence[NewsItem], path: str | Path):
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            _ = f.write(item.model_dump_json() + "\n")


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------
@dataclass
class EmbeddingTable:
    """Token → row index plus the |V| × d matrix; rows 0..2 are PAD, UNK, NOCOMP."""
    vocab: dict[str, int]
    matrix: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def index(self, token: str) -> int:
        return self.vocab.get(token, UNK)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index(tok) for tok in tokens]

    def lookup(self, token: str) -> NDArray[np.float64]:
        return self.matrix[self.index(token)]

    def tokens(self) -> list[str]:
        return sorted(self.vocab, key=lambda t: self.vocab[t])

    @classmethod
    def from_vectors(cls, tokens: Sequence[str], vectors: NDArray[np.float64]) -> "EmbeddingTable":
        """
        Prepend the reserved rows: PAD is zero, UNK is the mean of the loaded
        vectors and NOCOMP starts as a copy of UNK.
        """
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise FormatError(f"{len(tokens)} tokens for a {vectors.shape} matrix")
        d = vectors.shape[1]
        unk = vectors.mean(axis=0) if len(tokens) else np.zeros(d)
        matrix = np.vstack([np.zeros((1, d)), unk[None, :], unk[None, :], vectors]).astype(np.float64)
        vocab = {tok: i for i, tok in enumerate(RESERVED_TOKENS)}
        for i, tok in enumerate(tokens):
            vocab[tok] = i + len(RESERVED_TOKENS)
        return cls(vocab, matrix)


def load_embeddings(path: str | Path, d: int=EMBEDDING_DIM) -> EmbeddingTable:
    """Read a GloVe-style text file: `token v1 … vd` per line."""
    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.rstrip("\n").split()
            if not fields:
                continue
            if len(fields) - 1 != d:
                raise FormatError(f"expected {d} values, got {len(fields) - 1}", path=str(path), line=lineno)
            token = fields[0]
            if token in RESERVED_TOKENS:
                warn(f"{path}:{lineno}: reserved token {token} ignored")
                continue
            if token in seen:
                warn(f"{path}:{lineno}: duplicate token {token!r}, keeping the first vector")
                continue
            try:
                rows.append([float(v) for v in fields[1:]])
            except ValueError as e:
                raise FormatError(f"bad float: {e}", path=str(path), line=lineno)
            tokens.append(token)
            seen.add(token)
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    if not np.all(np.isfinite(vectors)):
        raise FormatError("non-finite embedding value", path=str(path))
    return EmbeddingTable.from_vectors(tokens, vectors)


def save_embeddings(table: EmbeddingTable, path: str | Path):
    with open(path, "w", encoding="utf-8") as f:
        for token in table.tokens()[len(RESERVED_TOKENS):]:
            values = " ".join(repr(float(v)) for v in table.lookup(token))
            _ = f.write(f"{token} {values}\n")


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------
@dataclass
class SplitSpec:
    ratios: tuple[int, int, int] = (8, 1, 1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) or sum(self.ratios) == 0:
            raise ConfigError(f"split ratios must be three non-negative numbers, got {self.ratios}")

    def sizes(self, n: int) -> tuple[int, int, int]:
        total = sum(self.ratios)
        n_train = (n * self.ratios[0]) // total
        n_val = (n * self.ratios[1]) // total
        return n_train, n_val, n - n_train - n_val


def split_dataset(
        items: Sequence[NewsItem],
        spec: SplitSpec | None=None) -> tuple[list[NewsItem], list[NewsItem], list[NewsItem]]:
    """Seeded shuffle into train/val/test of ⌊0.8n⌋ / ⌊0.1n⌋ / remainder for 8:1:1."""
    spec = spec or SplitSpec()
    n = len(items)
    if n < 10:
        raise EmptyInputError(f"need at least 10 items to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train, n_val, _ = spec.sizes(n)
    train = [items[i] for i in perm[:n_train]]
    val = [items[i] for i in perm[n_train:n_train + n_val]]
    test = [items[i] for i in perm[n_train + n_val:]]
    for name, split in (("train", train), ("val", val), ("test", test)):
        if len({item.label for item in split}) < 2:
            warn(f"{name} split of {len(split)} items holds a single class")
    return train, val, test


# ---------------------------------------------------------------------------
# Batch encoding
# ---------------------------------------------------------------------------
@dataclass
class EncodingCaps:
    max_sentence_tokens: int = 32
    max_body_sentences: int = 16
    max_comments: int = 16
    max_images: int = 4


@dataclass
class TextBatch:
    """
    Token ids of one text component for a batch, (B, S, N) with S sentences of
    N tokens. Absent components hold a single NOCOMP token and set `nocomp`.
    """
    ids: NDArray[np.int64]
    word_mask: NDArray[np.bool_]
    sent_mask: NDArray[np.bool_]
    nocomp: NDArray[np.bool_]


@dataclass
class ImageBatch:
    """(B, L, w) original and ELA vectors with per-half and per-image masks."""
    original: NDArray[np.float64]
    ela: NDArray[np.float64]
    half_mask: NDArray[np.bool_]
    mask: NDArray[np.bool_]
    nocomp: NDArray[np.bool_]


@dataclass
class EncodedBatch:
    ids: list[str]
    labels: NDArray[np.int64]
    headline: TextBatch
    body: TextBatch
    comments: TextBatch
    images: ImageBatch

    @property
    def size(self) -> int:
        return len(self.ids)


def _encode_text(sentences_per_item: list[list[list[int]]]) -> TextBatch:
    batch = len(sentences_per_item)
    nocomp = np.array([not sents for sents in sentences_per_item], dtype=np.bool_)
    filled = [sents if sents else [[NOCOMP]] for sents in sentences_per_item]
    n_sent = max(len(sents) for sents in filled)
    n_tok = max(len(s) for sents in filled for s in sents)
    ids = np.full((batch, n_sent, n_tok), PAD, dtype=np.int64)
    word_mask = np.zeros((batch, n_sent, n_tok), dtype=np.bool_)
    sent_mask = np.zeros((batch, n_sent), dtype=np.bool_)
    for b, sents in enumerate(filled):
        for s, tokens in enumerate(sents):
            ids[b, s, :len(tokens)] = tokens
            word_mask[b, s, :len(tokens)] = True
            sent_mask[b, s] = True
    return TextBatch(ids, word_mask, sent_mask, nocomp)


def _clip_sentences(sentences: Sequence[Sequence[str]], max_sentences: int, max_tokens: int, table: EmbeddingTable) -> list[list[int]]:
    kept = [s for s in sentences if s][:max_sentences]
    return [table.encode(s[:max_tokens]) for s in kept]


def _encode_images(items: Sequence[NewsItem], features: Mapping[str, ImageFeature], width: int, max_images: int) -> ImageBatch:
    per_item = [resolve_features(item.image_refs, features)[:max_images] for item in items]
    for feats in per_item:
        for feat in feats:
            if feat.width != width:
                raise ConfigError(f"image feature {feat.image_id} is {feat.width} wide, corpus width is {width}")
    batch = len(items)
    n_img = max(1, max(len(feats) for feats in per_item))
    original = np.zeros((batch, n_img, width))
    ela = np.zeros((batch, n_img, width))
    half_mask = np.zeros((batch, n_img, 2), dtype=np.bool_)
    mask = np.zeros((batch, n_img), dtype=np.bool_)
    nocomp = np.zeros(batch, dtype=np.bool_)
    for b, feats in enumerate(per_item):
        if not feats:
            # Placeholder position; the extractor substitutes its NOCOMP vector.
            nocomp[b] = True
            mask[b, 0] = True
            half_mask[b, 0] = True
            continue
        for i, feat in enumerate(feats):
            original[b, i] = feat.original
            ela[b, i] = feat.ela
            half_mask[b, i] = (feat.has_original, feat.has_ela)
            if not feat.has_original and not feat.has_ela:
                half_mask[b, i] = True
            mask[b, i] = True
    return ImageBatch(original, ela, half_mask, mask, nocomp)


def encode_batch(
        items: Sequence[NewsItem],
        table: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        caps: EncodingCaps | None=None) -> EncodedBatch:
    """Render items as padded index/feature arrays, truncating to the caps."""
    if not items:
        raise EmptyInputError("cannot encode an empty batch")
    caps = caps or EncodingCaps()
    tok = caps.max_sentence_tokens
    headline = _encode_text([_clip_sentences([item.headline], 1, tok, table) for item in items])
    body = _encode_text([_clip_sentences(item.body, caps.max_body_sentences, tok, table) for item in items])
    comments = _encode_text([_clip_sentences(item.comments, caps.max_comments, tok, table) for item in items])
    images = _encode_images(items, features, image_width, caps.max_images)
    labels = np.array([item.label for item in items], dtype=np.int64)
    return EncodedBatch([item.id for item in items], labels, headline, body, comments, images)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------
FILLER_WORDS = ("the", "a", "of", "to", "and", "in", "on", "is", "for", "with")


@dataclass
class SyntheticCorpus:
    items: list[NewsItem]
    features: dict[str, ImageFeature]
    embeddings: EmbeddingTable
    image_width: int
    # item id → component → latent topic, for the components the item carries
    topics: dict[str, dict[str, int]] = field(default_factory=dict)

    def oracle_label(self, item_id: str) -> int:
        """Real (1) iff every present component was drawn from one topic."""
        return int(len(set(self.topics[item_id].values())) == 1)

    def oracle_accuracy(self) -> float:
        hits = sum(self.oracle_label(item.id) == item.label for item in self.items)
        return hits / len(self.items)


def topic_word(topic: int, index: int) -> str:
    return f"t{topic}w{index}"


def generate_synthetic(
        n: int,
        mismatch_rate: float=1.0 / 3.0,
        seed: int=0,
        d: int=EMBEDDING_DIM,
        image_width: int=1024,
        n_topics: int=4,
        words_per_topic: int=24,
        absent_rate: float=0.05) -> SyntheticCorpus:
    """
    Desk-scale corpus whose ground truth is component affinity.

    Real items draw every component from one latent topic; fake items (a
    `mismatch_rate` share) move one or two of their present components to a
    second topic. Word vectors cluster around per-topic centroids and image
    vectors around per-topic image centroids. Images that were swapped in
    carry a tamper signature in their ELA vector half the time.
    """
    if n < 20:
        raise EmptyInputError(f"synthetic corpus needs n >= 20, got {n}")
    if not 0.0 <= mismatch_rate <= 1.0:
        raise ConfigError(f"mismatch_rate must be in [0, 1], got {mismatch_rate}")
    if n_topics < 2:
        raise ConfigError("need at least two topics to build mismatches")
    rng = np.random.default_rng(seed)

    word_centroids = rng.normal(0.0, 1.0, size=(n_topics, d))
    tokens: list[str] = list(FILLER_WORDS)
    vectors: list[NDArray[np.float64]] = [rng.normal(0.0, 0.5, size=d) for _ in FILLER_WORDS]
    for t in range(n_topics):
        for j in range(words_per_topic):
            tokens.append(topic_word(t, j))
            vectors.append(word_centroids[t] + rng.normal(0.0, 0.3, size=d))
    table = EmbeddingTable.from_vectors(tokens, np.array(vectors))

    image_centroids = rng.normal(0.0, 1.0, size=(n_topics, image_width))
    tamper_signature = rng.normal(0.0, 1.0, size=image_width)

    def sentence(topic: int, lo: int, hi: int) -> list[str]:
        length = int(rng.integers(lo, hi + 1))
        out: list[str] = []
        for _ in range(length):
            if rng.random() < 0.25:
                out.append(FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))])
            else:
                out.append(topic_word(topic, int(rng.integers(words_per_topic))))
        return out

    n_fake = int(round(n * mismatch_rate))
    labels = np.array([0] * n_fake + [1] * (n - n_fake))
    rng.shuffle(labels)

    items: list[NewsItem] = []
    features: dict[str, ImageFeature] = {}
    topics: dict[str, dict[str, int]] = {}
    for index in range(n):
        item_id = f"syn{index:05d}"
        label = int(labels[index])
        present: list[Component] = ["H", "B"]
        if rng.random() >= absent_rate:
            present.insert(1, "I")
        if rng.random() >= absent_rate:
            present.insert(-1, "C")

        base = int(rng.integers(n_topics))
        assigned: dict[str, int] = {comp: base for comp in present}
        if label == 0:
            n_moved = int(rng.integers(1, max(1, len(present) // 2) + 1))
            moved = rng.choice(len(present), size=n_moved, replace=False)
            other = int((base + rng.integers(1, n_topics)) % n_topics)
            for i in moved:
                assigned[present[int(i)]] = other

        headline = sentence(assigned["H"], 4, 7)
        body = [sentence(assigned["B"], 5, 8) for _ in range(int(rng.integers(2, 5)))]
        comments: list[list[str]] = []
        if "C" in assigned:
            comments = [sentence(assigned["C"], 3, 6) for _ in range(int(rng.integers(1, 4)))]
        image_refs: list[str] = []
        if "I" in assigned:
            tampered = label == 0 and assigned["I"] != base
            for j in range(int(rng.integers(1, 3))):
                image_id = f"{item_id}_img{j}"
                image_refs.append(image_id)
                original = image_centroids[assigned["I"]] + rng.normal(0.0, 0.5, size=image_width)
                ela_vec = rng.normal(0.0, 0.3, size=image_width)
                if tampered and rng.random() < 0.5:
                    ela_vec = ela_vec + tamper_signature
                features[image_id] = ImageFeature(image_id, original, ela_vec)

        items.append(NewsItem(
            id=item_id, label=label, headline=headline, body=body,
            comments=comments, image_refs=image_refs))
        topics[item_id] = assigned

    return SyntheticCorpus(items, features, table, image_width, topics)
