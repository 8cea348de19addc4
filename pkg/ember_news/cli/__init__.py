"""
Pieces shared by the command-line entry points: input loading, config
resolution from file plus flags, and the top-level error guard.
"""
import argparse
import sys
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import cast

from ember_news.checkpoint import load_checkpoint, read_checkpoint
from ember_news.config import TrainConfig, load_config
from ember_news.data import EMBEDDING_DIM, EmbeddingTable, NewsItem, load_corpus, load_embeddings
from ember_news.errors import ConfigError, EmberError
from ember_news.forensics import FEATURE_WIDTH, ImageFeature, load_image_features, read_feature_width
from ember_news.model import Ember
from ember_news.utils import die


EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass
class Inputs:
    items: list[NewsItem]
    embeddings: EmbeddingTable
    features: dict[str, ImageFeature]
    image_width: int


def add_input_args(parser: argparse.ArgumentParser, corpus_required: bool=True):
    _ = parser.add_argument("--corpus", type=str, required=corpus_required, help="Corpus file, one JSON record per line")
    _ = parser.add_argument("--embeddings", type=str, required=True, help="Word vectors, `token v1 ... vd` per line")
    _ = parser.add_argument("--features", type=str, required=False, help="Image feature table (`# width=W count=N` header)")
    _ = parser.add_argument("--dim", type=int, default=None, help=f"Embedding width (default: model.embedding_dim, {EMBEDDING_DIM})")


def add_config_args(parser: argparse.ArgumentParser):
    _ = parser.add_argument("--config", type=str, required=False, help="Config file of dotted `section.key = value` lines")
    _ = parser.add_argument("--seed", type=int, required=False, help="Override train.seed")
    _ = parser.add_argument("--lambda", dest="lam", type=float, required=False, help="Override train.lambda")
    _ = parser.add_argument("--components", type=str, required=False, help="Active components, e.g. HICB or HIC")
    _ = parser.add_argument("--order", type=str, required=False, help="Reading order of the components, e.g. HICB")
    _ = parser.add_argument("--dataset", type=str, required=False, help="Apply a dataset preset (PolitiFact2, PolitiFact7, GossipCop, Compre)")


def add_verbose_arg(parser: argparse.ArgumentParser):
    _ = parser.add_argument("--verbose", action="store_true", help="Print progress")


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    config = load_config(cast(str | None, args.config))
    return config.with_overrides(
        seed=cast(int | None, args.seed),
        lam=cast(float | None, args.lam),
        components=cast(str | None, args.components),
        order=cast(str | None, args.order),
        dataset=cast(str | None, args.dataset))


def load_inputs(args: argparse.Namespace, config: TrainConfig | None=None) -> Inputs:
    dim = cast(int | None, args.dim) or (config.embedding_dim if config is not None else EMBEDDING_DIM)
    corpus = cast(str | None, args.corpus)
    items = load_corpus(corpus) if corpus is not None else []
    embeddings = load_embeddings(cast(str, args.embeddings), d=dim)
    features_path = cast(str | None, args.features)
    if features_path is None:
        return Inputs(items, embeddings, {}, FEATURE_WIDTH)
    return Inputs(items, embeddings, load_image_features(features_path), read_feature_width(features_path))


def load_for_checkpoint(args: argparse.Namespace) -> tuple[Inputs, Ember]:
    """Inputs sized by the checkpoint's own config, and the model rebuilt from it."""
    checkpoint = cast(str, args.checkpoint)
    _, config, _ = read_checkpoint(checkpoint)
    inputs = load_inputs(args, config)
    return inputs, load_checkpoint(checkpoint, inputs.embeddings)


def ensure_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def guarded(body: Callable[[], None]):
    """
    Run a command body, turning failures into one stderr line and an exit code:
    2 for missing inputs and usage errors, 1 for everything else.
    """
    try:
        body()
    except FileNotFoundError as e:
        die(f'error kind=missing_input path={e.filename} msg="{e.strerror}"', EXIT_USAGE)
    except ConfigError as e:
        die(e.one_line(), EXIT_USAGE)
    except EmberError as e:
        die(e.one_line(), EXIT_FAILURE)
    except OSError as e:
        die(f'error kind=io path={e.filename} msg="{e.strerror}"', EXIT_FAILURE)
    except Exception as e:
        msg = str(e).replace('"', "'").replace("\n", " ")
        die(f'error kind=internal type={type(e).__name__} msg="{msg}"', EXIT_FAILURE)
    sys.exit(0)
