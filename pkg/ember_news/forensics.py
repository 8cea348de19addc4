import io
import re
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError

from ember_news.errors import FormatError
from ember_news.utils import get_thread_count, warn


DEFAULT_ERROR_LEVEL = 0.3
# Quality used to give a non-lossy source a compression history before ELA.
BASELINE_QUALITY = 95
FEATURE_WIDTH = 1024
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff", ".webp"}

_HEADER = re.compile(r"^#\s*width=(\d+)\s+count=(\d+)\s*$")


@dataclass
class ElaMap:
    """Per-pixel error level, max over channels of |original − recompressed| / 255."""
    magnitude: NDArray[np.float64]

    @property
    def height(self) -> int:
        return int(self.magnitude.shape[0])

    @property
    def width(self) -> int:
        return int(self.magnitude.shape[1])

    def mean(self) -> float:
        return float(self.magnitude.mean())

    def region_mean(self, box: tuple[int, int, int, int]) -> float:
        """Mean magnitude inside (left, top, right, bottom)."""
        left, top, right, bottom = box
        return float(self.magnitude[top:bottom, left:right].mean())

    def to_image(self, stretch: bool=True) -> Image.Image:
        """Grayscale heatmap; with `stretch` the brightest pixel maps to 255."""
        mag = self.magnitude
        peak = float(mag.max())
        if stretch and peak > 0:
            mag = mag / peak
        return Image.fromarray(np.clip(np.round(mag * 255.0), 0, 255).astype(np.uint8), mode="L")


def quality_for_error_level(r: float) -> int:
    """Map the error level r in [0, 1) to a lossy quality q = round((1 − r)·100)."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"error level must be in [0, 1), got {r}")
    return max(1, min(100, int(round((1.0 - r) * 100))))


def _jpeg_roundtrip(img: Image.Image, quality: int) -> Image.Image:
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    out = Image.open(buf)
    out.load()
    return out.convert("RGB")


def decode_image(image_bytes: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(image_bytes))
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise FormatError(f"cannot decode image: {e}")
    return img


def ela(image_bytes: bytes, r: float=DEFAULT_ERROR_LEVEL) -> ElaMap:
    """
    Error level analysis: recompress at quality round((1 − r)·100), decode and
    take the per-pixel absolute difference.

    Sources without a lossy history (PNG, BMP ...) are first encoded at
    quality 95 so every map compares two lossy generations.
    """
    img = decode_image(image_bytes)
    lossy = img.format == "JPEG"
    original = img.convert("RGB")
    if not lossy:
        original = _jpeg_roundtrip(original, BASELINE_QUALITY)

    resaved = _jpeg_roundtrip(original, quality_for_error_level(r))
    diff = np.abs(
        np.asarray(original, dtype=np.int16) - np.asarray(resaved, dtype=np.int16))
    return ElaMap(diff.max(axis=2).astype(np.float64) / 255.0)


def ela_file(path: str | Path, r: float=DEFAULT_ERROR_LEVEL) -> ElaMap:
    with open(path, "rb") as f:
        return ela(f.read(), r=r)


# ---------------------------------------------------------------------------
# Image feature vectors
# ---------------------------------------------------------------------------
@dataclass
class ImageFeature:
    """Backbone vectors of an image and of its ELA image, both of the corpus width."""
    image_id: str
    original: NDArray[np.float64]
    ela: NDArray[np.float64]
    has_original: bool = True
    has_ela: bool = True

    @property
    def width(self) -> int:
        return int(self.original.shape[0])


def _format_row(feature: ImageFeature) -> str:
    values = " ".join(repr(float(v)) for v in np.concatenate([feature.original, feature.ela]))
    return f"{feature.image_id} {int(feature.has_original)} {int(feature.has_ela)} {values}"


def save_image_features(features: Mapping[str, ImageFeature], path: str | Path, width: int):
    """Fixed-width text table: a `# width=W count=N` header, then one row per image."""
    with open(path, "w", encoding="utf-8") as f:
        _ = f.write(f"# width={width} count={len(features)}\n")
        for image_id in sorted(features):
            feature = features[image_id]
            if feature.original.shape != (width,) or feature.ela.shape != (width,):
                raise FormatError(f"feature {image_id} is not {width} wide", path=str(path))
            if re.search(r"\s", image_id):
                raise FormatError(f"image id {image_id!r} contains whitespace", path=str(path))
            _ = f.write(_format_row(feature) + "\n")


def read_feature_width(path: str | Path) -> int:
    with open(path, "r", encoding="utf-8") as f:
        m = _HEADER.match(f.readline())
    if not m:
        raise FormatError("missing '# width=W count=N' header", path=str(path), line=1)
    return int(m.group(1))


def load_image_features(path: str | Path) -> dict[str, ImageFeature]:
    features: dict[str, ImageFeature] = {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        m = _HEADER.match(header)
        if not m:
            raise FormatError("missing '# width=W count=N' header", path=str(path), line=1)
        width, count = int(m.group(1)), int(m.group(2))
        for lineno, line in enumerate(f, start=2):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3 + 2 * width:
                raise FormatError(
                    f"expected {2 * width} values for width {width}, got {len(fields) - 3}",
                    path=str(path), line=lineno)
            try:
                values = np.array([float(v) for v in fields[3:]], dtype=np.float64)
            except ValueError as e:
                raise FormatError(f"bad float: {e}", path=str(path), line=lineno)
            if not np.all(np.isfinite(values)):
                raise FormatError("non-finite feature value", path=str(path), line=lineno)
            image_id = fields[0]
            if image_id in features:
                raise FormatError(f"duplicate image id {image_id}", path=str(path), line=lineno)
            features[image_id] = ImageFeature(
                image_id,
                values[:width],
                values[width:],
                has_original=fields[1] == "1",
                has_ela=fields[2] == "1")
    if len(features) != count:
        raise FormatError(f"header declares {count} rows, found {len(features)}", path=str(path))
    return features


def _projection(rng: np.random.Generator, width: int, in_dim: int) -> NDArray[np.float64]:
    return rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(width, in_dim))


def _pool(arr: NDArray[np.float64], grid: int) -> NDArray[np.float64]:
    """Mean-pool an (H, W) or (H, W, C) array onto a grid × grid raster."""
    channels = [arr] if arr.ndim == 2 else [arr[:, :, c] for c in range(arr.shape[2])]
    pooled = [
        np.asarray(Image.fromarray(ch.astype(np.float32), mode="F").resize((grid, grid), Image.Resampling.BOX),
                   dtype=np.float64)
        for ch in channels]
    return np.stack(pooled, axis=-1).ravel()


def featurize_image(
        image_bytes: bytes,
        image_id: str,
        width: int=FEATURE_WIDTH,
        seed: int=0,
        r: float=DEFAULT_ERROR_LEVEL,
        grid: int=16,
        precomputed: ImageFeature | None=None) -> ImageFeature:
    """
    Backbone-free image vectors: the image and its ELA map are mean-pooled to a
    grid and pushed through fixed random projections seeded from `seed`.

    Halves already present in `precomputed` are kept as they are.
    """
    rng = np.random.default_rng(seed)
    proj_rgb = _projection(rng, width, grid * grid * 3)
    proj_ela = _projection(rng, width, grid * grid)

    if precomputed is not None and precomputed.has_original:
        original = precomputed.original
    else:
        rgb = np.asarray(decode_image(image_bytes).convert("RGB"), dtype=np.float64) / 255.0
        original = proj_rgb @ _pool(rgb, grid)

    if precomputed is not None and precomputed.has_ela:
        ela_vec = precomputed.ela
    else:
        ela_vec = proj_ela @ _pool(ela(image_bytes, r=r).magnitude, grid)

    return ImageFeature(image_id, original, ela_vec)


def list_images(directory: str | Path) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def featurize_directory(
        directory: str | Path,
        width: int=FEATURE_WIDTH,
        seed: int=0,
        r: float=DEFAULT_ERROR_LEVEL,
        precomputed: Mapping[str, ImageFeature] | None=None,
        verbose: bool=False) -> dict[str, ImageFeature]:
    """Featurize every image in a directory; the file stem is the image id."""
    paths = list_images(directory)

    def one(path: Path) -> ImageFeature | None:
        try:
            return featurize_image(
                path.read_bytes(), path.stem, width=width, seed=seed, r=r,
                precomputed=None if precomputed is None else precomputed.get(path.stem))
        except FormatError as e:
            warn(f"skipping {path}: {e}")
            return None

    with ThreadPoolExecutor(max_workers=get_thread_count()) as pool:
        results = list(pool.map(one, paths))

    features: dict[str, ImageFeature] = {}
    for path, feature in zip(paths, results):
        if feature is None:
            continue
        if verbose:
            print(f"{path.name}: featurized")
        features[feature.image_id] = feature
    return features


def resolve_features(
        image_refs: Iterable[str],
        features: Mapping[str, ImageFeature]) -> list[ImageFeature]:
    """Features for the referenced images that exist; unknown ids are dropped."""
    return [features[ref] for ref in image_refs if ref in features]
