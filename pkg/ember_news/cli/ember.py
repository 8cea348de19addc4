import sys

from ember_news.cli import EXIT_USAGE
from ember_news.cli import ember_ablate, ember_ela, ember_eval, ember_export_embeddings, ember_gradcheck, ember_synth, ember_train


SUBCOMMANDS = {
    "synth": ember_synth.main,
    "train": ember_train.main,
    "eval": ember_eval.main,
    "ablate": ember_ablate.main,
    "gradcheck": ember_gradcheck.main,
    "ela": ember_ela.main,
    "export-embeddings": ember_export_embeddings.main,
}


def main(argv: list[str] | None=None) -> None:
    """`ember <subcommand> ...`, forwarding to the matching ember-<subcommand> entry point."""
    args = sys.argv[1:] if argv is None else argv
    if not args or args[0] in ("-h", "--help"):
        print("usage: ember {" + ",".join(SUBCOMMANDS) + "} ...")
        sys.exit(0 if args else EXIT_USAGE)
    command = SUBCOMMANDS.get(args[0])
    if command is None:
        print(f"ember: unknown subcommand {args[0]!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    command(args[1:])


if __name__ == "__main__":
    main()
