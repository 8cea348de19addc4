import argparse
from pathlib import Path
from typing import cast

from ember_news.cli import add_verbose_arg, guarded
from ember_news.forensics import (
    DEFAULT_ERROR_LEVEL,
    FEATURE_WIDTH,
    ela_file,
    featurize_directory,
    load_image_features,
    save_image_features,
)
from ember_news.manifest import RunManifest


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-ela",
        description="Error level analysis. A file input writes a grayscale heatmap; "
                    "a directory input writes an image feature table for every image in it."
    )
    _ = parser.add_argument("input", type=str, help="Image file or directory of images")
    _ = parser.add_argument("output", type=str, help="Heatmap image path, or feature table path for a directory")
    _ = parser.add_argument("--r", type=float, default=DEFAULT_ERROR_LEVEL, help="Error level; recompression quality is round((1 - r) * 100)")
    _ = parser.add_argument("--width", type=int, default=FEATURE_WIDTH, help="Feature width (directory mode)")
    _ = parser.add_argument("--seed", type=int, default=0, help="Projection seed (directory mode)")
    _ = parser.add_argument("--precomputed", type=str, required=False, help="Existing feature table whose halves are kept (directory mode)")
    _ = parser.add_argument("--no-stretch", action="store_true", help="Write raw magnitudes instead of scaling the peak to white")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    r = cast(float, args.r)
    if not 0.0 <= r < 1.0:
        parser.error("--r must be in [0, 1)")

    def run():
        source = Path(cast(str, args.input))
        output = Path(cast(str, args.output))
        output.parent.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest.begin("ela", seed=cast(int, args.seed), r=r, input=str(source))

        if source.is_dir():
            width = cast(int, args.width)
            precomputed_path = cast(str | None, args.precomputed)
            precomputed = load_image_features(precomputed_path) if precomputed_path else None
            manifest.add_input(precomputed_path)
            features = featurize_directory(
                source, width=width, seed=cast(int, args.seed), r=r,
                precomputed=precomputed, verbose=cast(bool, args.verbose))
            save_image_features(features, output, width)
            print(f"featurized {len(features)} images from {source} into {output}")
        else:
            manifest.add_input(source)
            ela_map = ela_file(source, r=r)
            ela_map.to_image(stretch=not cast(bool, args.no_stretch)).save(output)
            print(f"{source}: mean_magnitude={ela_map.mean():.6f} max_magnitude={float(ela_map.magnitude.max()):.6f}")

        manifest.add_artifact(output)
        _ = manifest.finish(output.parent)

    guarded(run)


if __name__ == "__main__":
    main()
