"""Minimal float64 reverse-mode autodiff and the Adam optimizer."""
from .optim import AdamState, adam_step
from .rng import make_rng
from .tensor import (
    BatchNormState,
    ShapeError,
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    batch_norm,
    concat,
    div,
    dot,
    dropout,
    exp,
    gather,
    getitem,
    index_select,
    l2_norm,
    linear,
    matmul,
    mean,
    mse_loss,
    mul,
    reshape,
    scatter_add,
    sigmoid,
    split,
    sqrt,
    square,
    sub,
    sum_,
    swish,
    topological_order,
)
