"""
Ablation harness: variants of the full model expressed as config rewrites,
trained and scored under one shared seed.

Variant tags, one per line in a variants file:

    drop_component:H      remove a component and every pair it takes part in
    drop_ELA              mask the ELA half of every image
    drop_GRU              concatenate the pair features instead of aggregating
    agg_attention         attention pooling over the pair features
    agg_bigru             bidirectional GRU over the pair features
    drop_pair:HI          discard one co-attention pair
    reorder:HB,IB,CB,HI,HC,IC
                          feed the pairs to the aggregator in this order
"""
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal
import pandas as pd

from ember_news.config import TrainConfig
from ember_news.data import EmbeddingTable, NewsItem
from ember_news.errors import ConfigError, EmberError
from ember_news.forensics import ImageFeature
from ember_news.fusion import pair_name, parse_pair
from ember_news.training import evaluate, train
from ember_news.utils import warn


VariantKind = Literal[
    "full", "drop_component", "drop_ELA", "drop_GRU", "agg_attention", "agg_bigru", "drop_pair", "reorder"]

TABLE_COLUMNS = ["variant", "accuracy", "precision", "recall", "f1", "epochs"]

# Single-change variants of the four-component model.
ARCHITECTURE_VARIANTS = [
    "drop_component:H",
    "drop_component:I",
    "drop_component:C",
    "drop_component:B",
    "drop_ELA",
    "drop_GRU",
    "agg_attention",
    "agg_bigru",
]

# Pair sequences for the reading-order comparison; the first of each list is
# the order the reading rule itself produces.
REORDER_VARIANTS = [
    "reorder:HI,HC,IC,HB,IB,CB",
    "reorder:HB,IB,CB,HI,HC,IC",
    "reorder:IC,HI,HC,HB,IB,CB",
    "reorder:HI,HC,IC,CB,IB,HB",
    "reorder:HI,HC,IC,IB,HB,CB",
]
REORDER_VARIANTS_HIC = [
    "reorder:HI,HC,IC",
    "reorder:HI,IC,HC",
    "reorder:IC,HC,HI",
]


@dataclass(frozen=True)
class AblationVariant:
    kind: VariantKind
    arg: str | None = None

    @property
    def tag(self) -> str:
        return self.kind if self.arg is None else f"{self.kind}:{self.arg}"

    def label(self) -> str:
        """Short row label: Ember/H, Ember/ELA, Ember-Att, [(HB),(IB),...] and so on."""
        match self.kind:
            case "full":
                return "Ember"
            case "drop_component" | "drop_pair":
                return f"Ember/{self.arg}"
            case "drop_ELA":
                return "Ember/ELA"
            case "drop_GRU":
                return "Ember/GRU"
            case "agg_attention":
                return "Ember-Att"
            case "agg_bigru":
                return "Ember-BiGRU"
            case "reorder":
                return "[" + ",".join(f"({p})" for p in (self.arg or "").split(",")) + "]"

    def apply(self, config: TrainConfig) -> TrainConfig:
        """The variant's config; ConfigError when it does not fit `config`."""
        match self.kind:
            case "full":
                return config
            case "drop_component":
                comp = self.arg or ""
                if comp not in config.components:
                    raise ConfigError(f"{self.tag}: component {comp} is not active in {config.components}")
                return config.with_overrides(
                    components=config.components.replace(comp, ""),
                    order=(config.order or config.components).replace(comp, ""),
                    dropped_pairs=[p for p in config.dropped_pairs if comp not in p],
                    pair_sequence=None if config.pair_sequence is None else [p for p in config.pair_sequence if comp not in p])
            case "drop_ELA":
                if "I" not in config.components:
                    raise ConfigError(f"{self.tag}: no image component in {config.components}")
                return config.with_overrides(use_ela=False)
            case "drop_GRU":
                return config.with_overrides(aggregator="concat")
            case "agg_attention":
                return config.with_overrides(aggregator="attention")
            case "agg_bigru":
                return config.with_overrides(aggregator="bigru")
            case "drop_pair":
                return config.with_overrides(
                    dropped_pairs=[*config.dropped_pairs, self.arg or ""],
                    pair_sequence=None if config.pair_sequence is None else [p for p in config.pair_sequence if p != self.arg])
            case "reorder":
                return config.with_overrides(pair_sequence=(self.arg or "").split(","))


def parse_variant(text: str) -> AblationVariant:
    kind, _, arg = text.strip().partition(":")
    arg = arg.strip()
    match kind:
        case "full" | "drop_ELA" | "drop_GRU" | "agg_attention" | "agg_bigru":
            if arg:
                raise ConfigError(f"variant {kind} takes no argument, got {text!r}")
            return AblationVariant(kind)
        case "drop_component":
            if len(arg) != 1 or arg.upper() not in "HICB":
                raise ConfigError(f"drop_component needs one of H, I, C, B, got {text!r}")
            return AblationVariant(kind, arg.upper())
        case "drop_pair":
            try:
                return AblationVariant(kind, pair_name(parse_pair(arg)))
            except ValueError as e:
                raise ConfigError(f"{text!r}: {e}")
        case "reorder":
            try:
                pairs = [pair_name(parse_pair(p)) for p in arg.split(",") if p.strip()]
            except ValueError as e:
                raise ConfigError(f"{text!r}: {e}")
            if not pairs:
                raise ConfigError(f"reorder needs a pair sequence, got {text!r}")
            return AblationVariant(kind, ",".join(pairs))
        case _:
            raise ConfigError(f"unknown ablation variant {text!r}")


def load_variants(path: str | Path) -> list[AblationVariant]:
    variants: list[AblationVariant] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                variants.append(parse_variant(line))
            except ConfigError as e:
                raise ConfigError(f"{path}:{lineno}: {e.message}")
    return variants


def pair_drop_variants(config: TrainConfig) -> list[AblationVariant]:
    """One drop_pair variant per active pair, in aggregation order."""
    return [AblationVariant("drop_pair", pair_name(pair)) for pair in config.active_pairs()]


def _run(
        name: str,
        items: Sequence[NewsItem],
        config: TrainConfig,
        embeddings: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        verbose: bool) -> dict[str, object]:
    result = train(items, config, embeddings, features, image_width, verbose=False)
    assert result.splits is not None
    report = evaluate(result.model, result.splits[2], features)
    if verbose:
        print(f"{name}: acc={report.accuracy:.4f} f1={report.f1:.4f} epochs={result.epochs_run}")
    return {
        "variant": name,
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "epochs": result.epochs_run,
    }


def ablate(
        items: Sequence[NewsItem],
        config: TrainConfig,
        variants: Sequence[AblationVariant],
        embeddings: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        verbose: bool=False) -> pd.DataFrame:
    """
    Train and test the full model, then every variant, all on the same seed and
    split. Variants that do not fit the configuration are skipped with a warning.
    The first row is always the full model.
    """
    rows = [_run("full", items, config, embeddings, features, image_width, verbose)]
    for variant in variants:
        if variant.kind == "full":
            continue
        try:
            variant_config = variant.apply(config)
        except EmberError as e:
            warn(f"skipping variant {variant.tag}: {e.message}")
            continue
        rows.append(_run(variant.tag, items, variant_config, embeddings, features, image_width, verbose))
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def sweep_lambda(
        items: Sequence[NewsItem],
        config: TrainConfig,
        values: Sequence[float],
        embeddings: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        verbose: bool=False) -> pd.DataFrame:
    """The same table with one row per refinement-loss weight λ."""
    rows: list[dict[str, object]] = []
    for lam in values:
        try:
            swept = config.with_overrides(lam=lam)
        except EmberError as e:
            warn(f"skipping lambda={lam}: {e.message}")
            continue
        rows.append(_run(f"lambda={lam:g}", items, swept, embeddings, features, image_width, verbose))
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_table(table: pd.DataFrame, path: str | Path):
    table.to_csv(path, index=False, float_format="%.6f")
