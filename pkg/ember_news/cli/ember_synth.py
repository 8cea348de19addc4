import argparse
import json
from typing import cast

from ember_news.cli import add_verbose_arg, ensure_dir, guarded
from ember_news.data import EMBEDDING_DIM, generate_synthetic, save_embeddings, write_corpus
from ember_news.forensics import save_image_features
from ember_news.manifest import RunManifest


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-synth",
        description="Write a synthetic corpus whose labels follow component topic agreement."
    )
    _ = parser.add_argument("--out", type=str, required=True, help="Output directory")
    _ = parser.add_argument("--n", type=int, default=600, help="Number of items")
    _ = parser.add_argument("--mismatch-rate", type=float, default=1.0 / 3.0, help="Share of fake (mismatched) items")
    _ = parser.add_argument("--seed", type=int, default=0, help="Generator seed")
    _ = parser.add_argument("--dim", type=int, default=EMBEDDING_DIM, help="Word vector width")
    _ = parser.add_argument("--image-width", type=int, default=1024, help="Image feature width")
    _ = parser.add_argument("--topics", type=int, default=4, help="Number of latent topics")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    n = cast(int, args.n)
    if n < 20:
        parser.error("--n must be at least 20")

    def run():
        out = ensure_dir(cast(str, args.out))
        seed = cast(int, args.seed)
        manifest = RunManifest.begin(
            "synth", seed=seed, n=n, mismatch_rate=cast(float, args.mismatch_rate),
            dim=cast(int, args.dim), image_width=cast(int, args.image_width), topics=cast(int, args.topics))
        corpus = generate_synthetic(
            n,
            mismatch_rate=cast(float, args.mismatch_rate),
            seed=seed,
            d=cast(int, args.dim),
            image_width=cast(int, args.image_width),
            n_topics=cast(int, args.topics))

        write_corpus(corpus.items, out / "corpus.jsonl")
        save_embeddings(corpus.embeddings, out / "embeddings.txt")
        save_image_features(corpus.features, out / "features.txt", corpus.image_width)
        with open(out / "topics.json", "w", encoding="utf-8") as f:
            json.dump(corpus.topics, f, sort_keys=True)
            _ = f.write("\n")
        for name in ("corpus.jsonl", "embeddings.txt", "features.txt", "topics.json"):
            manifest.add_artifact(out / name)
        _ = manifest.finish(out)

        n_fake = sum(1 for item in corpus.items if item.label == 0)
        print(f"wrote {len(corpus.items)} items ({n_fake} fake) and {len(corpus.features)} image features to {out}")
        if cast(bool, args.verbose):
            print(f"oracle accuracy: {corpus.oracle_accuracy():.4f}")

    guarded(run)


if __name__ == "__main__":
    main()
