"""
Training configuration: the `TrainConfig` model, λ presets per dataset and the
flat dotted-key config file format.

    # quickstart.conf
    model.h = 16
    model.k = 16
    train.max_epochs = 30
    train.lambda = 0.6
    data.dataset = PolitiFact2
"""
from pathlib import Path
from typing import Literal
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ember_news.data import COMPONENTS, Component, EncodingCaps, SplitSpec
from ember_news.errors import ConfigError
from ember_news.fusion import Aggregator, Pair, canonical_pair, pair_name, pair_order, parse_pair


LAMBDA_PRESETS: dict[str, float] = {
    "PolitiFact2": 0.6,
    "PolitiFact7": 1.0,
    "GossipCop": 0.1,
    "Compre": 0.4,
}

# Datasets without body text run the three-component configuration.
COMPONENT_PRESETS: dict[str, str] = {
    "Compre": "HIC",
}

SECTIONS: dict[str, set[str]] = {
    "model": {"h", "k", "components", "order", "aggregator", "use_ela", "dropped_pairs",
              "pair_sequence", "train_embeddings", "embedding_dim"},
    "train": {"lam", "lr", "batch_size", "max_epochs", "patience", "seed"},
    "data": {"max_sentence_tokens", "max_body_sentences", "max_comments", "max_images",
             "error_level", "split", "dataset"},
    "eval": {"threshold", "averaging"},
}
KEY_ALIASES = {"lambda": "lam"}
LIST_FIELDS = {"dropped_pairs", "pair_sequence", "split"}


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # model
    h: int = Field(50, ge=1)
    k: int = Field(100, ge=1)
    components: str = "HICB"
    order: str | None = None
    aggregator: Aggregator = "gru"
    use_ela: bool = True
    dropped_pairs: list[str] = Field(default_factory=list)
    pair_sequence: list[str] | None = None
    train_embeddings: bool = False
    embedding_dim: int = Field(100, ge=1)

    # train
    lam: float = Field(0.6, ge=0.0)
    lr: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(100, ge=1)
    patience: int | None = Field(8, ge=1)
    seed: int = 0

    # data
    max_sentence_tokens: int = Field(32, ge=1)
    max_body_sentences: int = Field(16, ge=1)
    max_comments: int = Field(16, ge=1)
    max_images: int = Field(4, ge=1)
    error_level: float = Field(0.3, ge=0.0, lt=1.0)
    split: tuple[int, int, int] = (8, 1, 1)
    dataset: str | None = None

    # eval
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    averaging: Literal["weighted", "macro"] = "weighted"

    @model_validator(mode="before")
    @classmethod
    def _apply_dataset_preset(cls, data: object) -> object:
        if not isinstance(data, dict) or data.get("dataset") is None:
            return data
        name = str(data["dataset"])
        if name not in LAMBDA_PRESETS:
            raise ValueError(f"unknown dataset {name!r}, known: {', '.join(LAMBDA_PRESETS)}")
        out = dict(data)
        if "lam" not in out:
            out["lam"] = LAMBDA_PRESETS[name]
        if "components" not in out and name in COMPONENT_PRESETS:
            out["components"] = COMPONENT_PRESETS[name]
        return out

    @model_validator(mode="after")
    def _check_structure(self) -> Self:
        comps = self.components.upper()
        if any(c not in COMPONENTS for c in comps):
            raise ValueError(f"components must be drawn from HICB, got {self.components!r}")
        if len(set(comps)) != len(comps):
            raise ValueError(f"duplicate component in {self.components!r}")
        if len(comps) < 2:
            raise ValueError("at least two components are needed to form a pair")
        self.components = comps

        order = (self.order or "".join(c for c in COMPONENTS if c in comps)).upper()
        if sorted(order) != sorted(comps):
            raise ValueError(f"order {order!r} is not a permutation of components {comps!r}")
        self.order = order

        reading = self.reading_order()
        active = set(pair_order(reading))
        dropped: list[str] = []
        for text in self.dropped_pairs:
            pair = canonical_pair(parse_pair(text), reading) if set(text.upper()) <= set(comps) else None
            if pair is None or pair not in active:
                raise ValueError(f"dropped pair {text!r} is not a pair of {comps}")
            dropped.append(pair_name(pair))
        self.dropped_pairs = dropped
        remaining = active - {parse_pair(p) for p in dropped}

        if self.pair_sequence is not None:
            seq: list[str] = []
            for text in self.pair_sequence:
                pair = canonical_pair(parse_pair(text), reading) if set(text.upper()) <= set(comps) else None
                if pair is None or pair not in remaining:
                    raise ValueError(f"pair {text!r} in pair_sequence is not an active pair")
                seq.append(pair_name(pair))
            if len(set(seq)) != len(seq) or len(seq) != len(remaining):
                raise ValueError(f"pair_sequence must list each of the {len(remaining)} active pairs once")
            self.pair_sequence = seq

        if not remaining:
            raise ValueError("every pair was dropped")
        if not any(reading[-1] in pair for pair in remaining):
            raise ValueError(f"no remaining pair contains the last-read component {reading[-1]}")
        if sum(self.split) == 0 or any(r < 0 for r in self.split):
            raise ValueError(f"bad split ratios {self.split}")
        return self

    def reading_order(self) -> list[Component]:
        return list(self.order or self.components)  # pyright: ignore[reportReturnType]

    def active_pairs(self) -> list[Pair]:
        """Pairs in the order the aggregator consumes them."""
        if self.pair_sequence is not None:
            return [parse_pair(p) for p in self.pair_sequence]
        dropped = {parse_pair(p) for p in self.dropped_pairs}
        return [pair for pair in pair_order(self.reading_order()) if pair not in dropped]

    def caps(self) -> EncodingCaps:
        return EncodingCaps(
            max_sentence_tokens=self.max_sentence_tokens,
            max_body_sentences=self.max_body_sentences,
            max_comments=self.max_comments,
            max_images=self.max_images)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.split, seed=self.seed)

    def with_overrides(self, **overrides: object) -> "TrainConfig":
        """Re-validated copy with fields replaced; `None` values are ignored."""
        data = self.model_dump()
        changes = {key: value for key, value in overrides.items() if value is not None}
        if "components" in changes and "order" not in changes:
            data["order"] = None
        if "dataset" in changes:
            for preset_field in ("lam", "components", "order"):
                if preset_field not in changes:
                    _ = data.pop(preset_field)
        data.update(changes)
        return build_config(data)

    @classmethod
    def for_dataset(cls, name: str, **overrides: object) -> "TrainConfig":
        return build_config({"dataset": name, **overrides})


def build_config(data: dict[str, object], source: str | None=None) -> TrainConfig:
    try:
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        prefix = f"{source}: " if source else ""
        raise ConfigError(f"{prefix}{where + ': ' if where else ''}{first['msg']}")


def _parse_value(field: str, raw: str) -> object:
    value = raw.strip()
    if value.lower() in ("none", "null"):
        return None
    if field in LIST_FIELDS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        return [int(v) for v in items] if field == "split" else items
    return value


def parse_config_text(text: str, source: str="<config>") -> TrainConfig:
    data: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        section, _, name = key.partition(".")
        name = KEY_ALIASES.get(name, name)
        if section not in SECTIONS:
            raise ConfigError(f"{source}:{lineno}: unknown section {section!r} in key {key!r}")
        if name not in SECTIONS[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if name in data:
            raise ConfigError(f"{source}:{lineno}: key {key!r} set twice")
        try:
            data[name] = _parse_value(name, raw)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: {e}")
    return build_config(data, source=source)


def load_config(path: str | Path | None) -> TrainConfig:
    """Read a config file; no path means every default."""
    if path is None:
        return TrainConfig()
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def render_config(config: TrainConfig) -> str:
    """Config file text that parses back to `config`."""
    lines: list[str] = []
    values = config.model_dump()
    for section, names in SECTIONS.items():
        for name in sorted(names):
            value = values[name]
            if value is None:
                text = "none"
            elif isinstance(value, (list, tuple)):
                text = ",".join(str(v) for v in value)  # pyright: ignore[reportUnknownVariableType, reportUnknownArgumentType]
            else:
                text = str(value)
            key = "lambda" if name == "lam" else name
            lines.append(f"{section}.{key} = {text}")
    return "\n".join(lines) + "\n"
