from ember_news.numerics.autograd import Tensor, Array
from ember_news.numerics.params import ParamStore, Binding, Scope
from ember_news.numerics.layers import (
    gru_cell,
    lstm_cell,
    bidirectional_encode,
    additive_attention_pool,
    cross_entropy,
)
from ember_news.numerics.optim import AdamState, adam_step
from ember_news.numerics.gradcheck import gradcheck, GradcheckReport

__all__ = [
    "Tensor",
    "Array",
    "ParamStore",
    "Binding",
    "Scope",
    "gru_cell",
    "lstm_cell",
    "bidirectional_encode",
    "additive_attention_pool",
    "cross_entropy",
    "AdamState",
    "adam_step",
    "gradcheck",
    "GradcheckReport",
]
