"""
Parameter checkpoints.

Layout: the magic line ``EMBERCKPT1``, one JSON header line, then every
parameter as little-endian float64 in sorted path order. Nothing time-dependent
is written, so equal parameters give equal bytes.
"""
from pathlib import Path
import numpy as np
from pydantic import BaseModel, ValidationError

from ember_news.config import TrainConfig, build_config
from ember_news.data import EmbeddingTable
from ember_news.errors import DimensionError, FormatError
from ember_news.model import Ember
from ember_news.numerics.params import ParamStore
from ember_news.utils import bytes_digest, warn


MAGIC = b"EMBERCKPT1\n"
PAYLOAD_DTYPE = np.dtype("<f8")


class ParamEntry(BaseModel):
    path: str
    shape: list[int]
    offset: int


class CheckpointHeader(BaseModel):
    config: dict[str, object]
    seed: int
    components: str
    h: int
    k: int
    image_width: int
    embedding_dim: int
    vocab_size: int
    embedding_digest: str
    params: list[ParamEntry]


def embedding_digest(table: EmbeddingTable) -> str:
    return bytes_digest(np.ascontiguousarray(table.matrix, dtype=PAYLOAD_DTYPE).tobytes())


def checkpoint_bytes(model: Ember) -> bytes:
    entries: list[ParamEntry] = []
    chunks: list[bytes] = []
    offset = 0
    for path in model.store:
        arr = np.ascontiguousarray(model.store[path], dtype=PAYLOAD_DTYPE)
        entries.append(ParamEntry(path=path, shape=list(arr.shape), offset=offset))
        chunks.append(arr.tobytes())
        offset += arr.size
    header = CheckpointHeader(
        config=model.config.model_dump(mode="json"),
        seed=model.config.seed,
        components=model.config.components,
        h=model.config.h,
        k=model.config.k,
        image_width=model.image_width,
        embedding_dim=model.embeddings.dim,
        vocab_size=len(model.embeddings),
        embedding_digest=embedding_digest(model.embeddings),
        params=entries)
    return MAGIC + header.model_dump_json().encode("utf-8") + b"\n" + b"".join(chunks)


def save_checkpoint(model: Ember, path: str | Path):
    with open(path, "wb") as f:
        _ = f.write(checkpoint_bytes(model))


def read_checkpoint(path: str | Path) -> tuple[CheckpointHeader, TrainConfig, ParamStore]:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise FormatError("not an ember checkpoint (bad magic)", path=str(path), line=1)
    end = blob.find(b"\n", len(MAGIC))
    if end < 0:
        raise FormatError("truncated checkpoint header", path=str(path), line=2)
    try:
        header = CheckpointHeader.model_validate_json(blob[len(MAGIC):end])
    except ValidationError as e:
        raise FormatError(f"bad checkpoint header: {e.errors()[0]['msg']}", path=str(path), line=2)
    config = build_config(header.config, source=str(path))

    payload = np.frombuffer(blob[end + 1:], dtype=PAYLOAD_DTYPE)
    expected = sum(int(np.prod(entry.shape)) for entry in header.params)
    if payload.size != expected:
        raise FormatError(f"payload holds {payload.size} values, header declares {expected}", path=str(path))

    store = ParamStore()
    for entry in header.params:
        size = int(np.prod(entry.shape))
        values = payload[entry.offset:entry.offset + size].reshape(entry.shape)
        _ = store.add(entry.path, values)
    return header, config, store


def load_checkpoint(path: str | Path, embeddings: EmbeddingTable) -> Ember:
    """Rebuild the model; the embedding table must be the one it was trained with."""
    header, config, store = read_checkpoint(path)
    if len(embeddings) != header.vocab_size or embeddings.dim != header.embedding_dim:
        raise DimensionError(
            f"checkpoint expects a {header.vocab_size}x{header.embedding_dim} embedding table, "
            f"got {len(embeddings)}x{embeddings.dim}")
    if embedding_digest(embeddings) != header.embedding_digest:
        warn(f"{path}: embedding table differs from the one used in training")

    reference = Ember.initialise(config, embeddings, header.image_width)
    if set(reference.store.params) != set(store.params):
        missing = sorted(set(reference.store.params) ^ set(store.params))
        raise FormatError(f"checkpoint parameters do not match its config: {', '.join(missing[:5])}", path=str(path))
    reference.store.load_from(store)
    return reference
