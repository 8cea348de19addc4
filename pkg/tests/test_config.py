# test_config.py
from pathlib import Path
import pytest

from ember_news.config import LAMBDA_PRESETS, TrainConfig, build_config, load_config, parse_config_text, render_config
from ember_news.errors import ConfigError


def test_defaults():
    config = TrainConfig()
    assert (config.h, config.k, config.lam, config.patience) == (50, 100, 0.6, 8)
    assert config.order == "HICB"
    assert [f"{a}{b}" for a, b in config.active_pairs()] == ["HI", "HC", "IC", "HB", "IB", "CB"]
    assert config.split_spec().ratios == (8, 1, 1)


@pytest.mark.parametrize(
    ("dataset", "lam", "components"),
    [
        ("PolitiFact2", 0.6, "HICB"),
        ("PolitiFact7", 1.0, "HICB"),
        ("GossipCop", 0.1, "HICB"),
        ("Compre", 0.4, "HIC"),
    ],
)
def test_dataset_presets(dataset: str, lam: float, components: str):
    config = TrainConfig.for_dataset(dataset)
    assert config.lam == lam, f"{dataset}: expected lambda {lam}, got {config.lam}"
    assert config.components == components, f"{dataset}: expected {components}, got {config.components}"
    assert LAMBDA_PRESETS[dataset] == lam


def test_explicit_lambda_beats_preset():
    assert TrainConfig.for_dataset("GossipCop", lam=0.3).lam == 0.3


@pytest.mark.parametrize(
    ("data", "fragment"),
    [
        ({"components": "HX"}, "components"),
        ({"components": "H"}, "two components"),
        ({"components": "HIH"}, "duplicate"),
        ({"order": "HIC"}, "permutation"),
        ({"dropped_pairs": ["HZ"]}, "dropped pair"),
        ({"components": "HB", "dropped_pairs": ["HB"]}, "dropped"),
        ({"pair_sequence": ["HI", "HC"]}, "pair_sequence"),
        ({"lam": -1.0}, "lam"),
        ({"patience": 0}, "patience"),
        ({"dataset": "Twitter15"}, "unknown dataset"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_invalid_configs(data: dict[str, object], fragment: str):
    with pytest.raises(ConfigError) as info:
        _ = build_config(data)
    assert fragment in str(info.value), f"{data}: expected {fragment!r} in {info.value}"


def test_dropped_pairs_are_canonicalized():
    config = build_config({"dropped_pairs": ["bh"]})
    assert config.dropped_pairs == ["HB"]
    assert "HB" not in [f"{a}{b}" for a, b in config.active_pairs()]


def test_every_remaining_pair_missing_last_component():
    with pytest.raises(ConfigError):
        _ = build_config({"components": "HIB", "dropped_pairs": ["HB", "IB"]})


def test_pair_sequence_overrides_order():
    config = build_config({"pair_sequence": ["HB", "IB", "CB", "HI", "HC", "IC"]})
    assert [f"{a}{b}" for a, b in config.active_pairs()] == ["HB", "IB", "CB", "HI", "HC", "IC"]


def test_overrides_reset_dependent_fields():
    config = TrainConfig(order="HICB")
    smaller = config.with_overrides(components="HIC")
    assert smaller.order == "HIC", "changing components resets the order"
    assert config.with_overrides(seed=None).seed == config.seed, "None overrides are ignored"
    compre = config.with_overrides(dataset="Compre")
    assert (compre.lam, compre.components) == (0.4, "HIC")


# --- config files -----------------------------------------------------------

def test_parse_config_text():
    text = """
    # quick run
    model.h = 16
    model.components = HIC
    train.lambda = 0.2
    train.patience = none
    data.split = 6,2,2
    eval.averaging = macro
    """
    config = parse_config_text(text)
    assert (config.h, config.components, config.lam) == (16, "HIC", 0.2)
    assert config.patience is None
    assert config.split == (6, 2, 2)
    assert config.averaging == "macro"


@pytest.mark.parametrize(
    ("text", "fragment"),
    [
        ("model.h 16\n", ":1:"),
        ("network.h = 16\n", "unknown section"),
        ("model.depth = 3\n", "unknown key"),
        ("model.h = 4\nmodel.h = 5\n", ":2:"),
        ("model.h = lots\n", "h"),
    ],
)
def test_bad_config_text(text: str, fragment: str):
    with pytest.raises(ConfigError) as info:
        _ = parse_config_text(text, source="run.conf")
    assert fragment in str(info.value), f"expected {fragment!r} in {info.value}"


def test_render_round_trip(tmp_path: Path):
    config = TrainConfig(h=7, components="HIC", dropped_pairs=["HC"], lam=0.25, patience=None, seed=9)
    path = tmp_path / "run.conf"
    _ = path.write_text(render_config(config))
    assert load_config(path) == config


def test_missing_config_file_means_defaults():
    assert load_config(None) == TrainConfig()
