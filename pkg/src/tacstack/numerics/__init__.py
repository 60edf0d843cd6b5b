from .checkpoint import load_arrays, load_params, save_params
from .gradcheck import grad_check
from .optim import AdamW, ParameterSet, conv_init, glorot
from .rng import Rng
from .tensor import (
    Tensor,
    add,
    as_tensor,
    bilinear_interp,
    clip,
    concat,
    conv2d,
    conv3d,
    exp,
    gather_rows,
    getitem,
    global_max_pool,
    linear,
    log,
    matmul,
    mul,
    no_grad,
    pad_replicate,
    pad_zero,
    power,
    relu,
    reshape,
    sigmoid,
    softmax_pair,
    tanh,
    tmax,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "AdamW", "ParameterSet", "Rng", "Tensor", "add", "as_tensor",
    "bilinear_interp", "clip", "concat", "conv2d", "conv3d", "conv_init",
    "exp", "gather_rows", "getitem", "glorot", "global_max_pool",
    "grad_check", "linear", "load_arrays", "load_params", "log", "matmul",
    "mul", "no_grad", "pad_replicate", "pad_zero", "power", "relu",
    "reshape", "save_params", "sigmoid", "softmax_pair", "tanh", "tmax",
    "tmean", "transpose", "tsum",
]
