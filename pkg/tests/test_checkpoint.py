# test_checkpoint.py
from pathlib import Path
import pytest
import numpy as np

from ember_news.checkpoint import MAGIC, checkpoint_bytes, load_checkpoint, read_checkpoint, save_checkpoint
from ember_news.data import EmbeddingTable, SyntheticCorpus
from ember_news.errors import DimensionError, FormatError
from ember_news.model import Ember
from ember_news.training import evaluate, train

from conftest import TINY_IMAGE_WIDTH, tiny_config


def test_same_seed_training_gives_identical_bytes(corpus: SyntheticCorpus):
    config = tiny_config(max_epochs=2)
    first = train(corpus.items, config, corpus.embeddings, corpus.features, TINY_IMAGE_WIDTH)
    second = train(corpus.items, config, corpus.embeddings, corpus.features, TINY_IMAGE_WIDTH)
    assert checkpoint_bytes(first.model) == checkpoint_bytes(second.model), "training must be reproducible"
    assert [r.val_loss for r in first.history] == [r.val_loss for r in second.history]


def test_round_trip_reproduces_the_evaluation(corpus: SyntheticCorpus, tmp_path: Path):
    config = tiny_config(max_epochs=1)
    result = train(corpus.items, config, corpus.embeddings, corpus.features, TINY_IMAGE_WIDTH)
    path = tmp_path / "model.ckpt"
    save_checkpoint(result.model, path)
    restored = load_checkpoint(path, corpus.embeddings)

    assert restored.config == result.model.config
    assert restored.image_width == TINY_IMAGE_WIDTH
    for name in result.model.store:
        assert np.array_equal(restored.store[name], result.model.store[name]), f"{name} changed on the way through"

    before = evaluate(result.model, corpus.items, corpus.features)
    after = evaluate(restored, corpus.items, corpus.features)
    assert np.array_equal(before.probabilities, after.probabilities)
    assert before.summary() == after.summary()
    assert checkpoint_bytes(restored) == path.read_bytes()


def test_header_describes_the_model(corpus: SyntheticCorpus, tmp_path: Path):
    model = Ember.initialise(tiny_config(components="HIC", seed=5), corpus.embeddings, TINY_IMAGE_WIDTH)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    header, config, store = read_checkpoint(path)
    assert (header.seed, header.components, header.h, header.k) == (5, "HIC", 3, 4)
    assert (header.vocab_size, header.embedding_dim) == (len(corpus.embeddings), corpus.embeddings.dim)
    assert config == model.config
    assert [entry.path for entry in header.params] == sorted(store), "parameters are stored in sorted order"
    assert path.read_bytes().startswith(MAGIC)


def test_bad_magic(tmp_path: Path):
    path = tmp_path / "model.ckpt"
    _ = path.write_bytes(b"PK\x03\x04 not a checkpoint\n")
    with pytest.raises(FormatError) as info:
        _ = read_checkpoint(path)
    assert "magic" in str(info.value)


def test_truncated_payload(corpus: SyntheticCorpus, tmp_path: Path):
    model = Ember.initialise(tiny_config(), corpus.embeddings, TINY_IMAGE_WIDTH)
    path = tmp_path / "model.ckpt"
    _ = path.write_bytes(checkpoint_bytes(model)[:-8])
    with pytest.raises(FormatError):
        _ = read_checkpoint(path)


def test_embedding_table_must_match(corpus: SyntheticCorpus, tmp_path: Path):
    model = Ember.initialise(tiny_config(), corpus.embeddings, TINY_IMAGE_WIDTH)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    tokens = corpus.embeddings.tokens()[3:10]
    smaller = EmbeddingTable.from_vectors(tokens, np.ones((len(tokens), corpus.embeddings.dim)))
    with pytest.raises(DimensionError):
        _ = load_checkpoint(path, smaller)


def test_changed_embedding_values_only_warn(corpus: SyntheticCorpus, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    model = Ember.initialise(tiny_config(), corpus.embeddings, TINY_IMAGE_WIDTH)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    shifted = EmbeddingTable(dict(corpus.embeddings.vocab), corpus.embeddings.matrix + 1.0)
    _ = load_checkpoint(path, shifted)
    assert "embedding table differs" in capsys.readouterr().err
