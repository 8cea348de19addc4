import argparse
from pathlib import Path
from typing import cast
import numpy as np

from ember_news.cli import add_input_args, add_verbose_arg, ensure_dir, guarded, load_for_checkpoint
from ember_news.data import EncodedBatch
from ember_news.fusion import diagnostics_records, dump_diagnostics
from ember_news.manifest import RunManifest
from ember_news.model import ForwardResult
from ember_news.training import evaluate


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-eval",
        description="Score a corpus with a trained checkpoint."
    )
    _ = parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint written by ember-train")
    add_input_args(parser)
    _ = parser.add_argument("--out", type=str, required=True, help="Output directory")
    _ = parser.add_argument("--diagnostics", type=str, required=False, help="Write per-item affinity matrices and attention vectors (JSON lines)")
    _ = parser.add_argument("--float32", action="store_true", help="Run inference with 32-bit parameters")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    def run():
        out = ensure_dir(cast(str, args.out))
        manifest = RunManifest.begin("eval", float32=cast(bool, args.float32))
        for path in (args.checkpoint, args.corpus, args.embeddings, args.features):
            manifest.add_input(cast(str | None, path))
        inputs, model = load_for_checkpoint(args)
        manifest.config = model.config.model_dump(mode="json")
        manifest.seed = model.config.seed

        diagnostics = cast(str | None, args.diagnostics)
        if diagnostics is not None:
            _ = Path(diagnostics).write_text("")

        def write_diagnostics(batch: EncodedBatch, result: ForwardResult):
            assert diagnostics is not None
            dump_diagnostics(diagnostics_records(batch.ids, result.outputs.values()), diagnostics, append=True)

        report = evaluate(
            model, inputs.items, inputs.features,
            dtype=np.float32 if cast(bool, args.float32) else None,
            on_batch=write_diagnostics if diagnostics is not None else None)

        with open(out / "report.json", "w", encoding="utf-8") as f:
            _ = f.write(report.summary().model_dump_json(indent=2) + "\n")
        report.predictions_frame().to_csv(out / "predictions.csv", index=False)
        manifest.add_artifact(out / "report.json")
        manifest.add_artifact(out / "predictions.csv")
        if diagnostics is not None:
            manifest.add_artifact(diagnostics)
        _ = manifest.finish(out)

        print(f"acc={report.accuracy:.4f} prec={report.precision:.4f} rec={report.recall:.4f} f1={report.f1:.4f} ({report.averaging}, n={report.count})")
        if cast(bool, args.verbose):
            print(f"confusion: tn={report.tn} fp={report.fp} fn={report.fn} tp={report.tp}")

    guarded(run)


if __name__ == "__main__":
    main()
