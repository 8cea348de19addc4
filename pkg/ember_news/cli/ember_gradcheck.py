import argparse
from typing import cast

from ember_news.cli import add_config_args, add_verbose_arg, ensure_dir, guarded, resolve_config
from ember_news.config import TrainConfig
from ember_news.data import EncodedBatch, generate_synthetic
from ember_news.errors import ConfigError
from ember_news.model import Ember
from ember_news.manifest import RunManifest
from ember_news.numerics.autograd import Array
from ember_news.numerics.gradcheck import GradcheckReport, gradcheck


def toy_model(config: TrainConfig, image_width: int) -> tuple[Ember, EncodedBatch]:
    """A freshly initialised model and a 2-item batch, one fake and one real."""
    corpus = generate_synthetic(20, seed=config.seed, d=config.embedding_dim, image_width=image_width)
    fake = next(item for item in corpus.items if item.label == 0)
    real = next(item for item in corpus.items if item.label == 1)
    model = Ember.initialise(config, corpus.embeddings, image_width)
    return model, model.encode([fake, real], corpus.features)


def run_gradcheck(
        config: TrainConfig,
        samples: int=200,
        delta: float=1e-5,
        image_width: int=32,
        corrupt: str | None=None,
        verbose: bool=False) -> GradcheckReport:
    model, batch = toy_model(config, image_width)
    if corrupt is not None and corrupt not in model.store:
        raise ConfigError(f"--corrupt-grad: no parameter named {corrupt}")

    def hook(grads: dict[str, Array]):
        if corrupt is not None:
            grads[corrupt] += 1.0

    return gradcheck(
        model.loss_fn(batch), model.store,
        samples=samples, delta=delta, seed=config.seed,
        grad_hook=hook if corrupt is not None else None,
        verbose=verbose)


def main(argv: list[str] | None=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ember-gradcheck",
        description="Compare analytic gradients of the full joint loss against central differences."
    )
    add_config_args(parser)
    _ = parser.add_argument("--samples", type=int, default=200, help="Number of sampled coordinates")
    _ = parser.add_argument("--delta", type=float, default=1e-5, help="Finite-difference step")
    _ = parser.add_argument("--tol", type=float, default=1e-4, help="Maximum relative error")
    _ = parser.add_argument("--image-width", type=int, default=32, help="Image feature width of the toy batch")
    _ = parser.add_argument("--out", type=str, required=False, help="Directory for the run manifest")
    _ = parser.add_argument("--corrupt-grad", type=str, required=False, help=argparse.SUPPRESS)
    add_verbose_arg(parser)
    args = parser.parse_args(argv)

    samples = cast(int, args.samples)
    if samples <= 0:
        parser.error("--samples must be positive")
    tol = cast(float, args.tol)

    def run():
        config = resolve_config(args)
        report = run_gradcheck(
            config,
            samples=samples,
            delta=cast(float, args.delta),
            image_width=cast(int, args.image_width),
            corrupt=cast(str | None, args.corrupt_grad),
            verbose=cast(bool, args.verbose))

        for module, err in report.per_module().items():
            status = "PASS" if err < tol else "FAIL"
            print(f"{module:10s} max_rel_error={err:.3e} {status}")
        overall = "PASS" if report.passed(tol) else "FAIL"
        print(f"{overall}: {report.checked} coordinates, worst {report.max_rel_error:.3e} at {report.worst_path}")

        out = cast(str | None, args.out)
        if out is not None:
            manifest = RunManifest.begin("gradcheck", config=config, samples=samples, tol=tol)
            manifest.add_input(cast(str | None, args.config))
            _ = manifest.finish(ensure_dir(out))
        report.raise_if_failed(tol)

    guarded(run)


if __name__ == "__main__":
    main()
