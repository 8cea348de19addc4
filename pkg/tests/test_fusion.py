# test_fusion.py
from pathlib import Path
import json
import pytest
import numpy as np

from ember_news.errors import EmptyInputError
from ember_news.extractors import EncodedComponent
from ember_news.fusion import (
    Pair,
    aggregate,
    canonical_pair,
    co_attention,
    diagnostics_records,
    dump_diagnostics,
    fea_width,
    init_aggregator,
    init_co_attention,
    pair_name,
    pair_order,
    parse_pair,
    refinement_features,
)
from ember_news.numerics.autograd import Tensor
from ember_news.numerics.layers import gru_cell
from ember_news.numerics.params import ParamStore


def component(kind: str, vectors: np.ndarray, mask: np.ndarray | None=None) -> EncodedComponent:  # pyright: ignore[reportMissingTypeArgument, reportUnknownParameterType]
    arr = np.asarray(vectors, dtype=np.float64)
    if mask is None:
        mask = np.ones(arr.shape[:2], dtype=np.bool_)
    return EncodedComponent(kind, Tensor(arr), mask)  # pyright: ignore[reportArgumentType]


def coatt_params(h: int, k: int, seed: int=0, pair: Pair=("H", "I")) -> ParamStore:
    store = ParamStore()
    init_co_attention(store, np.random.default_rng(seed), pair, h, k)
    return store


# --- pair ordering ----------------------------------------------------------

@pytest.mark.parametrize(
    ("order", "expected"),
    [
        ("HICB", ["HI", "HC", "IC", "HB", "IB", "CB"]),
        ("HIC", ["HI", "HC", "IC"]),
        ("HB", ["HB"]),
        ("BCIH", ["BC", "BI", "CI", "BH", "CH", "IH"]),
    ],
)
def test_pair_order(order: str, expected: list[str]):
    got = [pair_name(pair) for pair in pair_order(list(order))]  # pyright: ignore[reportArgumentType]
    assert got == expected, f"{order}: expected {expected}, got {got}"


def test_pair_order_needs_two_components():
    with pytest.raises(EmptyInputError):
        _ = pair_order(["H"])


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("HI", ("H", "I")),
        ("(hb)", ("H", "B")),
        ("I,C", ("I", "C")),
    ],
)
def test_parse_pair(text: str, expected: Pair):
    assert parse_pair(text) == expected


@pytest.mark.parametrize("text", ["HH", "HX", "HIC", ""])
def test_parse_pair_rejects(text: str):
    with pytest.raises(ValueError):
        _ = parse_pair(text)


def test_canonical_pair_follows_reading_order():
    assert canonical_pair(("B", "H"), list("HICB")) == ("H", "B")  # pyright: ignore[reportArgumentType]
    assert canonical_pair(("H", "B"), list("BCIH")) == ("B", "H")  # pyright: ignore[reportArgumentType]


# --- co-attention -----------------------------------------------------------

def reference_co_attention(P_D, P_E, W_m, W_D, W_E, w_DE, w_ED):  # pyright: ignore[reportMissingParameterType, reportUnknownParameterType]
    """Unbatched, unmasked evaluation written out directly from the definitions."""
    A = np.tanh(P_E @ W_m @ P_D.T)
    H_D = np.tanh(W_D @ P_D.T + (W_E @ P_E.T) @ A)
    H_E = np.tanh(W_E @ P_E.T + (W_D @ P_D.T) @ A.T)
    s_D = w_DE @ H_D
    s_E = w_ED @ H_E
    a_D = np.exp(s_D - s_D.max()) / np.exp(s_D - s_D.max()).sum()
    a_E = np.exp(s_E - s_E.max()) / np.exp(s_E - s_E.max()).sum()
    return A, a_D, a_E, a_D @ P_D, a_E @ P_E  # pyright: ignore[reportUnknownVariableType]


def test_two_by_two_hand_instance():
    P_D = np.array([[0.5, -1.0], [1.0, 0.25]])
    P_E = np.array([[-0.5, 0.75], [0.2, 1.0]])
    W_m = np.array([[0.3, -0.2], [0.1, 0.4]])
    W_D = np.array([[0.5, 0.1], [-0.3, 0.2]])
    W_E = np.array([[0.2, -0.4], [0.6, 0.1]])
    w_DE = np.array([1.0, -0.5])
    w_ED = np.array([-0.7, 0.3])

    store = coatt_params(1, 2)
    for name, value in (("W_m", W_m), ("W_D", W_D), ("W_E", W_E), ("w_DE", w_DE), ("w_ED", w_ED)):
        store.set(f"coatt.HI.{name}", value)
    out = co_attention(component("H", P_D[None]), component("I", P_E[None]), store.bind().scope("coatt.HI"))

    A, a_D, a_E, O_D_E, O_E_D = reference_co_attention(P_D, P_E, W_m, W_D, W_E, w_DE, w_ED)  # pyright: ignore[reportUnknownVariableType]
    assert np.allclose(out.A.data[0], A, atol=1e-10, rtol=0), f"affinity: expected {A}, got {out.A.data[0]}"
    assert np.allclose(out.a_D.data[0], a_D, atol=1e-10, rtol=0), f"a_D: expected {a_D}, got {out.a_D.data[0]}"
    assert np.allclose(out.a_E.data[0], a_E, atol=1e-10, rtol=0), f"a_E: expected {a_E}, got {out.a_E.data[0]}"
    assert np.allclose(out.O_D_E.data[0], O_D_E, atol=1e-10, rtol=0)
    assert np.allclose(out.O_E_D.data[0], O_E_D, atol=1e-10, rtol=0)
    assert np.array_equal(out.O_DE.data[0], np.concatenate([out.O_D_E.data[0], out.O_E_D.data[0]]))


def test_zero_affinity_weights_give_zero_affinity():
    rng = np.random.default_rng(1)
    store = coatt_params(2, 3)
    store.set("coatt.HI.W_m", np.zeros((4, 4)))
    out = co_attention(
        component("H", rng.normal(size=(1, 3, 4))),
        component("I", rng.normal(size=(1, 2, 4))),
        store.bind().scope("coatt.HI"))
    assert np.all(out.A.data == 0.0), "W_m = 0 must give A = 0"


def test_single_position_takes_all_the_weight():
    rng = np.random.default_rng(2)
    store = coatt_params(2, 3)
    P_D = rng.normal(size=(1, 1, 4))
    out = co_attention(component("H", P_D), component("I", rng.normal(size=(1, 3, 4))), store.bind().scope("coatt.HI"))
    assert out.a_D.data[0, 0] == 1.0
    assert np.array_equal(out.O_D_E.data[0], P_D[0, 0]), "a singleton is its own enhanced representation"


def test_zero_parameters_give_mean_pooling():
    rng = np.random.default_rng(3)
    store = coatt_params(2, 3)
    for path in store:
        store.set(path, np.zeros_like(store[path]))
    P_D = rng.normal(size=(1, 4, 4))
    P_E = rng.normal(size=(1, 2, 4))
    out = co_attention(component("H", P_D), component("I", P_E), store.bind().scope("coatt.HI"))
    assert np.allclose(out.a_D.data[0], 0.25, atol=1e-15)
    assert np.allclose(out.O_D_E.data[0], P_D[0].mean(axis=0), atol=1e-12)
    assert np.allclose(out.O_E_D.data[0], P_E[0].mean(axis=0), atol=1e-12)


def test_permutation_invariance_and_equivariance():
    rng = np.random.default_rng(4)
    for trial in range(100):
        n, q = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        store = coatt_params(2, 3, seed=trial)
        p = store.bind().scope("coatt.HI")
        P_D = rng.normal(size=(1, n, 4))
        P_E = rng.normal(size=(1, q, 4))
        perm_d = rng.permutation(n)
        perm_e = rng.permutation(q)
        base = co_attention(component("H", P_D), component("I", P_E), p)
        moved = co_attention(component("H", P_D[:, perm_d]), component("I", P_E[:, perm_e]), p)
        assert np.allclose(moved.O_D_E.data, base.O_D_E.data, atol=1e-10), f"trial {trial}: O_D_E changed"
        assert np.allclose(moved.O_E_D.data, base.O_E_D.data, atol=1e-10), f"trial {trial}: O_E_D changed"
        assert np.allclose(moved.a_D.data[0], base.a_D.data[0, perm_d], atol=1e-10), f"trial {trial}: a_D not equivariant"


def test_padding_does_not_change_co_attention():
    rng = np.random.default_rng(5)
    store = coatt_params(2, 3)
    p = store.bind().scope("coatt.HI")
    P_D = rng.normal(size=(1, 2, 4))
    P_E = rng.normal(size=(1, 3, 4))
    alone = co_attention(component("H", P_D), component("I", P_E), p)

    padded_D = np.concatenate([P_D, np.zeros((1, 2, 4))], axis=1)
    mask_D = np.array([[True, True, False, False]])
    padded = co_attention(component("H", padded_D, mask_D), component("I", P_E), p)
    assert np.allclose(padded.O_DE.data, alone.O_DE.data, atol=1e-12), "padding leaked into the pooled features"
    assert np.all(padded.a_D.data[0, 2:] == 0.0), "padded positions must get no attention"


def test_attention_vectors_are_distributions():
    rng = np.random.default_rng(6)
    store = coatt_params(2, 3)
    p = store.bind().scope("coatt.HI")
    for trial in range(50):
        out = co_attention(
            component("H", rng.normal(size=(3, 4, 4)) * 5.0),
            component("I", rng.normal(size=(3, 2, 4)) * 5.0), p)
        for weights in (out.a_D.data, out.a_E.data):
            assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-12), f"trial {trial}: sums {weights.sum(axis=1)}"
            assert np.all(weights >= 0.0)


# --- aggregation ------------------------------------------------------------

@pytest.mark.parametrize("aggregator", ["gru", "concat", "attention", "bigru"])
def test_aggregate_widths(aggregator: str):
    h, n_pairs = 2, 3
    store = ParamStore()
    init_aggregator(store, np.random.default_rng(0), aggregator, h)  # pyright: ignore[reportArgumentType]
    rng = np.random.default_rng(1)
    seq = [Tensor(rng.normal(size=(5, 4 * h))) for _ in range(n_pairs)]
    out = aggregate(seq, store.bind(), aggregator)  # pyright: ignore[reportArgumentType]
    expected = fea_width(aggregator, h, n_pairs)  # pyright: ignore[reportArgumentType]
    assert out.shape == (5, expected), f"{aggregator}: expected (5, {expected}), got {out.shape}"


def test_backward_aggregation_depends_on_order():
    store = ParamStore()
    init_aggregator(store, np.random.default_rng(0), "gru", 2)
    rng = np.random.default_rng(2)
    seq = [Tensor(rng.normal(size=(1, 8))) for _ in range(3)]
    forward = aggregate(seq, store.bind(), "gru").data
    reordered = aggregate(seq[::-1], store.bind(), "gru").data
    assert not np.allclose(forward, reordered), "the recurrence must be sensitive to pair order"


def test_aggregate_empty_sequence():
    with pytest.raises(EmptyInputError):
        _ = aggregate([], ParamStore().bind(), "gru")


def test_zero_parameter_aggregator_returns_zeros():
    store = ParamStore()
    init_aggregator(store, np.random.default_rng(0), "gru", 2)
    for path in store:
        store.set(path, np.zeros_like(store[path]))
    rng = np.random.default_rng(3)
    seq = [Tensor(rng.normal(size=(4, 8))) for _ in range(6)]
    out = aggregate(seq, store.bind(), "gru").data
    assert np.all(out == 0.0), f"z=0.5 and n=0 keep the zero state, got {out}"


def test_single_pair_takes_one_gru_step():
    store = ParamStore()
    init_aggregator(store, np.random.default_rng(1), "gru", 2)
    x = Tensor(np.random.default_rng(2).normal(size=(3, 8)))
    binding = store.bind()
    one_step = gru_cell(x, Tensor(np.zeros((3, 8))), binding.scope("agg.gru")).data
    out = aggregate([x], binding, "gru").data
    assert np.allclose(out, one_step, atol=1e-12), "a one-pair sequence is one step from the zero state"


def test_refinement_features_use_last_component():
    rng = np.random.default_rng(7)
    order = list("HICB")
    store = ParamStore()
    comps = {kind: component(kind, rng.normal(size=(2, 3, 4))) for kind in order}
    outputs = {}
    for pair in pair_order(order):  # pyright: ignore[reportArgumentType]
        init_co_attention(store, rng, pair, 2, 3)
        outputs[pair] = co_attention(comps[pair[0]], comps[pair[1]], store.bind().scope(f"coatt.{pair_name(pair)}"))
    fea_r = refinement_features(outputs, order)  # pyright: ignore[reportArgumentType]
    expected = np.concatenate([outputs[("H", "B")].O_E_D.data, outputs[("I", "B")].O_E_D.data, outputs[("C", "B")].O_E_D.data], axis=1)
    assert np.array_equal(fea_r.data, expected), "Fea_R must be [O^{B_H}, O^{B_I}, O^{B_C}]"


def test_refinement_features_need_a_pair_with_last_component():
    rng = np.random.default_rng(8)
    store = coatt_params(2, 3)
    out = co_attention(component("H", rng.normal(size=(1, 2, 4))), component("I", rng.normal(size=(1, 2, 4))), store.bind().scope("coatt.HI"))
    with pytest.raises(EmptyInputError):
        _ = refinement_features({("H", "I"): out}, list("HIB"))  # pyright: ignore[reportArgumentType]


# --- diagnostics ------------------------------------------------------------

def test_diagnostics_trim_to_valid_block(tmp_path: Path):
    rng = np.random.default_rng(9)
    store = coatt_params(2, 3)
    mask_D = np.array([[True, True, True], [True, False, False]])
    out = co_attention(
        component("H", rng.normal(size=(2, 3, 4)) * mask_D[:, :, None], mask_D),
        component("I", rng.normal(size=(2, 2, 4))),
        store.bind().scope("coatt.HI"))
    records = diagnostics_records(["a", "b"], [out])
    assert [(r.id, r.pair) for r in records] == [("a", "HI"), ("b", "HI")]
    assert np.shape(records[1].affinity) == (2, 1), f"got {np.shape(records[1].affinity)}"
    assert len(records[1].a_D) == 1

    path = tmp_path / "diag.jsonl"
    dump_diagnostics(records, path)
    dump_diagnostics(records[:1], path, append=True)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[2])["id"] == "a"
