# conftest.py
import io
import pytest
import numpy as np
from PIL import Image

from ember_news.config import TrainConfig
from ember_news.data import SyntheticCorpus, generate_synthetic

# Small widths keep every forward pass in the millisecond range.
TINY_DIM = 8
TINY_IMAGE_WIDTH = 12


def tiny_config(**overrides: object) -> TrainConfig:
    base: dict[str, object] = dict(
        h=3,
        k=4,
        embedding_dim=TINY_DIM,
        max_sentence_tokens=6,
        max_body_sentences=3,
        max_comments=3,
        max_images=2,
        batch_size=8,
        max_epochs=3,
        patience=None,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig.model_validate(base)


# The quickstart sizes: 600 items, h=16, k=16, lr 1e-3, 30 epochs. The word and
# image widths are free there, so they stay at 16 and 32. The length caps equal
# the longest sentence, body, comment list and image list the generator makes,
# so nothing is truncated. Batches of 16 give 30 Adam steps per epoch.
REFERENCE_ITEMS = 600
REFERENCE_DIM = 16
REFERENCE_IMAGE_WIDTH = 32
REFERENCE_CONFIG: dict[str, object] = dict(
    h=16,
    k=16,
    embedding_dim=REFERENCE_DIM,
    lr=1e-3,
    max_epochs=30,
    patience=8,
    batch_size=16,
    max_sentence_tokens=8,
    max_body_sentences=4,
    max_comments=3,
    max_images=2,
    seed=0,
)


def reference_config(**overrides: object) -> TrainConfig:
    return TrainConfig.model_validate({**REFERENCE_CONFIG, **overrides})


def reference_corpus() -> SyntheticCorpus:
    return generate_synthetic(REFERENCE_ITEMS, seed=0, d=REFERENCE_DIM, image_width=REFERENCE_IMAGE_WIDTH)


@pytest.fixture
def config() -> TrainConfig:
    return tiny_config()


@pytest.fixture(scope="session")
def corpus() -> SyntheticCorpus:
    return generate_synthetic(40, seed=0, d=TINY_DIM, image_width=TINY_IMAGE_WIDTH)


# --- image fixtures ---------------------------------------------------------

def solid_jpeg(color: tuple[int, int, int]=(120, 120, 120), size: int=64, quality: int=90) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (size, size), color).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def spliced_jpeg(seed: int, size: int=128, box: tuple[int, int, int, int]=(40, 40, 88, 88)) -> bytes:
    """
    A smooth background saved twice at low quality, with a noisy patch pasted
    in after the recompressions so it carries only one lossy generation.
    """
    rng = np.random.default_rng(seed)
    ramp = np.linspace(60, 190, size, dtype=np.float64)
    base = np.stack([np.add.outer(ramp, ramp) / 2.0] * 3, axis=-1).astype(np.uint8)
    img = Image.fromarray(base, mode="RGB")
    for _ in range(2):
        buf = io.BytesIO()
        img.save(buf, format="JPEG", quality=60)
        buf.seek(0)
        img = Image.open(buf).convert("RGB")

    left, top, right, bottom = box
    patch = rng.integers(0, 256, size=(bottom - top, right - left, 3), dtype=np.uint8)
    img.paste(Image.fromarray(patch, mode="RGB"), (left, top))

    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=95)
    return buf.getvalue()


def solid_png(color: tuple[int, int, int]=(200, 30, 30), size: int=32) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (size, size), color).save(buf, format="PNG")
    return buf.getvalue()
