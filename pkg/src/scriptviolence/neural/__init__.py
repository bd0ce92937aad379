"""From-scratch numpy kernels for the window classifier and sentiment encoder."""
from .adam import AdamState, adam_step
from .attention import AttentionParams, attention, softmax
from .gru import GruParams, gru_step
from .lstm import BiLstmParams, LstmParams, bilstm_forward, init_bilstm
from .model import (
    ModelParams,
    OutputParams,
    classify_window,
    finite_diff_check,
    init_model,
    loss_and_gradients,
    zero_model,
)
from .serialize import dumps_model, load_model, loads_model, save_model

__all__ = [
    "AdamState", "AttentionParams", "BiLstmParams", "GruParams", "LstmParams", "ModelParams",
    "OutputParams", "adam_step", "attention", "bilstm_forward", "classify_window", "dumps_model",
    "finite_diff_check", "gru_step", "init_bilstm", "init_model", "load_model", "loads_model",
    "loss_and_gradients", "save_model", "softmax", "zero_model",
]
