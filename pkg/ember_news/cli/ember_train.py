import argparse
from typing import cast

from ember_news.checkpoint import save_checkpoint
from ember_news.cli import add_config_args, add_input_args, add_verbose_arg, ensure_dir, guarded, load_inputs, resolve_config
from ember_news.config import render_config
from ember_news.errors import TrainingDiverged
from ember_news.manifest import RunManifest
from ember_news.training import TrainResult, evaluate, train


CHECKPOINT_NAME = "checkpoint.ckpt"
LOG_NAME = "train_log.jsonl"
CONFIG_NAME = "config.conf"
REPORT_NAME = "test_report.json"


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-train",
        description="Train the detector on a corpus split 8:1:1 and keep the best-validation checkpoint."
    )
    add_input_args(parser)
    add_config_args(parser)
    _ = parser.add_argument("--out", type=str, required=True, help="Output directory")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)
    verbose = cast(bool, args.verbose)

    def run():
        config = resolve_config(args)
        out = ensure_dir(cast(str, args.out))
        manifest = RunManifest.begin("train", config=config)
        for path in (args.config, args.corpus, args.embeddings, args.features):
            manifest.add_input(cast(str | None, path))
        inputs = load_inputs(args, config)

        try:
            result = train(
                inputs.items, config, inputs.embeddings, inputs.features, inputs.image_width,
                log_path=out / LOG_NAME, verbose=verbose)
        except TrainingDiverged as e:
            # Keep the last good parameters before reporting the failure.
            if isinstance(e.result, TrainResult):
                save_checkpoint(e.result.model, out / CHECKPOINT_NAME)
                manifest.add_artifact(out / CHECKPOINT_NAME)
                _ = manifest.finish(out)
            raise

        save_checkpoint(result.model, out / CHECKPOINT_NAME)
        with open(out / CONFIG_NAME, "w", encoding="utf-8") as f:
            _ = f.write(render_config(config))

        assert result.splits is not None
        report = evaluate(result.model, result.splits[2], inputs.features)
        with open(out / REPORT_NAME, "w", encoding="utf-8") as f:
            _ = f.write(report.summary().model_dump_json(indent=2) + "\n")

        for name in (CHECKPOINT_NAME, LOG_NAME, CONFIG_NAME, REPORT_NAME):
            manifest.add_artifact(out / name)
        _ = manifest.finish(out)

        stop = "early stop" if result.stopped_early else "max epochs"
        print(f"trained {result.epochs_run} epochs ({stop}), best epoch {result.best_epoch} val_loss={result.best_val_loss:.4f}")
        print(f"test: acc={report.accuracy:.4f} prec={report.precision:.4f} rec={report.recall:.4f} f1={report.f1:.4f} ({report.averaging})")

    guarded(run)


if __name__ == "__main__":
    main()
