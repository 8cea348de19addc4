# test_data.py
from pathlib import Path
import pytest
import numpy as np

from ember_news.data import (
    NOCOMP,
    PAD,
    UNK,
    EmbeddingTable,
    EncodingCaps,
    NewsItem,
    SplitSpec,
    SyntheticCorpus,
    encode_batch,
    generate_synthetic,
    load_corpus,
    load_embeddings,
    save_embeddings,
    split_dataset,
    write_corpus,
)
from ember_news.errors import ConfigError, EmptyInputError, FormatError
from ember_news.forensics import ImageFeature
from ember_news.utils import split_sentences, tokenize

from conftest import TINY_DIM, TINY_IMAGE_WIDTH


def make_items(n: int) -> list[NewsItem]:
    return [
        NewsItem(id=f"n{i}", label=i % 2, headline=["word"], body=[["body", "text"]])  # pyright: ignore[reportArgumentType]
        for i in range(n)
    ]


def tiny_table() -> EmbeddingTable:
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return EmbeddingTable.from_vectors(["alpha", "beta", "gamma"], vectors)


# --- tokenization -----------------------------------------------------------

@pytest.mark.parametrize(
    ("sentence", "expected"),
    [
        ("Breaking: Mayor RESIGNS!", ["breaking", "mayor", "resigns"]),
        ("It's   over, folks.", ["it's", "over", "folks"]),
        ("Café déjà vu", ["cafe", "deja", "vu"]),
        ("", []),
    ],
)
def test_tokenize(sentence: str, expected: list[str]):
    assert tokenize(sentence) == expected, f"{sentence!r}: expected {expected}, got {tokenize(sentence)}"


def test_split_sentences():
    assert split_sentences("One here. Two there! Three?") == ["one here.", "two there!", "three?"]


# --- corpus -----------------------------------------------------------------

def test_raw_text_is_tokenized_on_load():
    item = NewsItem.model_validate({
        "id": "x1",
        "label": 1,
        "headline": "Senator Visits Plant",
        "body": "The senator came. She left early.",
        "comments": ["so fake", "Great news! really"],
        "image_refs": [],
    })
    assert item.headline == ["senator", "visits", "plant"], f"got {item.headline}"
    assert item.body == [["the", "senator", "came"], ["she", "left", "early"]], f"got {item.body}"
    assert item.comments == [["so", "fake"], ["great", "news", "really"]], f"got {item.comments}"
    assert item.present() == {"H", "C", "B"}, f"got {item.present()}"


def test_multi_sentence_headline_keeps_the_first(capsys: pytest.CaptureFixture[str]):
    item = NewsItem(id="x", label=0, headline="First part. Second part.")  # pyright: ignore[reportArgumentType]
    assert item.headline == ["first", "part"], f"got {item.headline}"
    assert "WARNING:" in capsys.readouterr().err


def test_corpus_round_trip_is_byte_exact(tmp_path: Path, corpus: SyntheticCorpus):
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    write_corpus(corpus.items, first)
    write_corpus(load_corpus(first), second)
    assert first.read_bytes() == second.read_bytes(), "token-list corpus must round-trip byte for byte"


@pytest.mark.parametrize(
    ("lines", "bad_line"),
    [
        (['{"id": "a", "label": 1}', '{"id": "b", "label": 3}'], 2),
        (['{"id": "a", "label": 1}', '{"id": "a", "label": 0}'], 2),
        (['{"id": "a", "label": 1, "extra": true}'], 1),
        (['not json'], 1),
    ],
)
def test_malformed_corpus_names_the_line(tmp_path: Path, lines: list[str], bad_line: int):
    path = tmp_path / "corpus.jsonl"
    _ = path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError) as info:
        _ = load_corpus(path)
    assert info.value.line == bad_line, f"expected line {bad_line}, got {info.value.line}"


def test_invalid_utf8_names_the_line(tmp_path: Path):
    path = tmp_path / "corpus.jsonl"
    _ = path.write_bytes(b'{"id": "a", "label": 1}\n{"id": "b\xff\xfe", "label": 0}\n')
    with pytest.raises(FormatError) as info:
        _ = load_corpus(path)
    assert info.value.line == 2, f"expected line 2, got {info.value.line}"
    assert str(info.value).startswith(f"{path}:2: invalid UTF-8"), f"got {info.value}"


# --- embeddings -------------------------------------------------------------

def test_reserved_rows():
    table = tiny_table()
    assert np.all(table.matrix[PAD] == 0.0), "PAD must be the zero vector"
    assert np.allclose(table.matrix[UNK], [2.0 / 3.0, 2.0 / 3.0]), f"UNK must be the mean, got {table.matrix[UNK]}"
    assert np.array_equal(table.matrix[NOCOMP], table.matrix[UNK]), "NOCOMP starts as a copy of UNK"
    assert table.encode(["beta", "missing"]) == [4, UNK]


def test_embedding_file_round_trip(tmp_path: Path):
    table = tiny_table()
    path = tmp_path / "vectors.txt"
    save_embeddings(table, path)
    loaded = load_embeddings(path, d=2)
    assert loaded.vocab == table.vocab, "vocabulary changed on round trip"
    assert np.array_equal(loaded.matrix, table.matrix), "vectors changed on round trip"


def test_embedding_width_mismatch(tmp_path: Path):
    path = tmp_path / "vectors.txt"
    _ = path.write_text("alpha 1.0 2.0\nbeta 1.0\n")
    with pytest.raises(FormatError) as info:
        _ = load_embeddings(path, d=2)
    assert info.value.line == 2


def test_duplicate_embedding_keeps_first(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = tmp_path / "vectors.txt"
    _ = path.write_text("alpha 1.0 2.0\nalpha 5.0 5.0\n")
    table = load_embeddings(path, d=2)
    assert np.array_equal(table.lookup("alpha"), [1.0, 2.0])
    assert "duplicate" in capsys.readouterr().err


# --- splitting --------------------------------------------------------------

@pytest.mark.parametrize(
    ("n", "expected"),
    [
        (1000, (800, 100, 100)),
        (10, (8, 1, 1)),
        (25, (20, 2, 3)),
    ],
)
def test_split_sizes(n: int, expected: tuple[int, int, int]):
    train, val, test = split_dataset(make_items(n), SplitSpec(seed=4))
    sizes = (len(train), len(val), len(test))
    assert sizes == expected, f"n={n}: expected {expected}, got {sizes}"
    ids = {item.id for split in (train, val, test) for item in split}
    assert len(ids) == n, "splits must partition the corpus"


def test_split_is_seeded():
    items = make_items(50)
    first = [item.id for item in split_dataset(items, SplitSpec(seed=1))[0]]
    again = [item.id for item in split_dataset(items, SplitSpec(seed=1))[0]]
    other = [item.id for item in split_dataset(items, SplitSpec(seed=2))[0]]
    assert first == again, "same seed must give the same split"
    assert first != other, "different seeds should shuffle differently"


def test_split_needs_ten_items():
    with pytest.raises(EmptyInputError):
        _ = split_dataset(make_items(9))


# --- batch encoding ---------------------------------------------------------

def test_absent_components_become_nocomp():
    table = tiny_table()
    items = [
        NewsItem(id="full", label=1, headline=["alpha"], body=[["beta", "gamma"], ["alpha"]],
                 comments=[["beta"]], image_refs=["img"]),
        NewsItem(id="bare", label=0, headline=["gamma"], body=[["alpha"]]),
    ]
    features = {"img": ImageFeature("img", np.ones(4), np.zeros(4))}
    batch = encode_batch(items, table, features, image_width=4)

    assert batch.comments.nocomp.tolist() == [False, True]
    assert batch.comments.ids[1, 0, 0] == NOCOMP, "absent comments hold one NOCOMP token"
    assert batch.comments.sent_mask[1].tolist() == [True], "the placeholder is a valid position"
    assert batch.images.nocomp.tolist() == [False, True]
    assert batch.body.sent_mask.tolist() == [[True, True], [True, False]]
    assert batch.body.ids[1, 0].tolist() == [table.index("alpha"), PAD]


def test_unknown_image_refs_are_dropped():
    table = tiny_table()
    item = NewsItem(id="x", label=1, headline=["alpha"], body=[["beta"]], image_refs=["gone"])
    batch = encode_batch([item], table, {}, image_width=4)
    assert batch.images.nocomp.tolist() == [True], "an item whose images are all unknown has no image component"


def test_image_width_mismatch_is_a_config_error():
    item = NewsItem(id="x", label=1, headline=["alpha"], body=[["beta"]], image_refs=["img"])
    features = {"img": ImageFeature("img", np.ones(3), np.ones(3))}
    with pytest.raises(ConfigError):
        _ = encode_batch([item], tiny_table(), features, image_width=4)


def test_caps_truncate():
    item = NewsItem(id="x", label=1, headline=["alpha"] * 10, body=[["beta"]] * 7)
    batch = encode_batch([item], tiny_table(), {}, image_width=4, caps=EncodingCaps(max_sentence_tokens=3, max_body_sentences=2))
    assert batch.headline.ids.shape == (1, 1, 3), f"got {batch.headline.ids.shape}"
    assert batch.body.ids.shape == (1, 2, 1), f"got {batch.body.ids.shape}"


# --- synthetic corpus -------------------------------------------------------

def test_synthetic_corpus_is_seeded():
    a = generate_synthetic(30, seed=5, d=TINY_DIM, image_width=TINY_IMAGE_WIDTH)
    b = generate_synthetic(30, seed=5, d=TINY_DIM, image_width=TINY_IMAGE_WIDTH)
    assert [item.model_dump() for item in a.items] == [item.model_dump() for item in b.items]
    assert np.array_equal(a.embeddings.matrix, b.embeddings.matrix)


def test_synthetic_labels_follow_topic_agreement(corpus: SyntheticCorpus):
    assert corpus.oracle_accuracy() == 1.0, "labels must be exactly the topic-agreement oracle"
    n_fake = sum(1 for item in corpus.items if item.label == 0)
    assert n_fake == round(len(corpus.items) / 3), f"expected a third fake, got {n_fake}"


def test_synthetic_features_cover_image_refs(corpus: SyntheticCorpus):
    for item in corpus.items:
        for ref in item.image_refs:
            assert ref in corpus.features, f"{item.id}: missing feature for {ref}"
            assert corpus.features[ref].width == TINY_IMAGE_WIDTH


def test_synthetic_rejects_tiny_corpus():
    with pytest.raises(EmptyInputError):
        _ = generate_synthetic(5)
