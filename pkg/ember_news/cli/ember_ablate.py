import argparse
from typing import cast

from ember_news.ablation import ablate, load_variants, sweep_lambda, write_table
from ember_news.cli import add_config_args, add_input_args, add_verbose_arg, ensure_dir, guarded, load_inputs, resolve_config
from ember_news.manifest import RunManifest


def parse_lambdas(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-ablate",
        description="Train and test the full model and each listed variant under one seed."
    )
    add_input_args(parser)
    add_config_args(parser)
    _ = parser.add_argument("--variants", type=str, required=False, help="Variants file, one tag per line")
    _ = parser.add_argument("--lambdas", type=parse_lambdas, required=False, help="Sweep the refinement weight instead, e.g. 0,0.2,0.4")
    _ = parser.add_argument("--out", type=str, required=True, help="Output directory")
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    variants_path = cast(str | None, args.variants)
    lambdas = cast(list[float] | None, args.lambdas)
    if variants_path is None and lambdas is None:
        parser.error("one of --variants or --lambdas is required")

    def run():
        config = resolve_config(args)
        out = ensure_dir(cast(str, args.out))
        manifest = RunManifest.begin("ablate", config=config, lambdas=None if lambdas is None else ",".join(f"{v:g}" for v in lambdas))
        for path in (args.config, args.corpus, args.embeddings, args.features, variants_path):
            manifest.add_input(cast(str | None, path))
        inputs = load_inputs(args, config)
        verbose = cast(bool, args.verbose)

        tables: list[str] = []
        if variants_path is not None:
            table = ablate(
                inputs.items, config, load_variants(variants_path),
                inputs.embeddings, inputs.features, inputs.image_width, verbose=verbose)
            write_table(table, out / "ablation.csv")
            tables.append("ablation.csv")
            print(table.to_string(index=False))
        if lambdas is not None:
            table = sweep_lambda(
                inputs.items, config, lambdas,
                inputs.embeddings, inputs.features, inputs.image_width, verbose=verbose)
            write_table(table, out / "lambda_sweep.csv")
            tables.append("lambda_sweep.csv")
            print(table.to_string(index=False))

        for name in tables:
            manifest.add_artifact(out / name)
        _ = manifest.finish(out)

    guarded(run)


if __name__ == "__main__":
    main()
