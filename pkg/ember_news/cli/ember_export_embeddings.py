import argparse
from pathlib import Path
from typing import cast

from ember_news.cli import add_input_args, add_verbose_arg, guarded, load_for_checkpoint
from ember_news.manifest import RunManifest
from ember_news.training import export_embeddings


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-export-embeddings",
        description="Write the final news representation of every item (id, label, f0..) for external plotting."
    )
    _ = parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint written by ember-train")
    add_input_args(parser)
    _ = parser.add_argument("--out", type=str, required=True, help="CSV file to write")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    def run():
        out = Path(cast(str, args.out))
        out.parent.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest.begin("export-embeddings")
        for path in (args.checkpoint, args.corpus, args.embeddings, args.features):
            manifest.add_input(cast(str | None, path))
        inputs, model = load_for_checkpoint(args)
        manifest.config = model.config.model_dump(mode="json")
        manifest.seed = model.config.seed

        frame = export_embeddings(model, inputs.items, inputs.features)
        frame.to_csv(out, index=False)
        manifest.add_artifact(out)
        _ = manifest.finish(out.parent)
        print(f"wrote {len(frame)} rows of width {frame.shape[1] - 2} to {out}")

    guarded(run)


if __name__ == "__main__":
    main()
