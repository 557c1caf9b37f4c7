from .tensor import (
    Tensor, Tape, ShapeError, DomainError, backward,
    add, sub, mul, div, neg, matmul, transpose,
    exp, log, softplus, sigmoid, tanh, relu, abs_,
    sin, cos, scale, power, sum_, mean, max_, softmax,
    concat, slice_, gather_rows, reshape,
)
from .gradcheck import grad_check

__all__ = [
    "Tensor", "Tape", "ShapeError", "DomainError", "backward",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose",
    "exp", "log", "softplus", "sigmoid", "tanh", "relu", "abs_",
    "sin", "cos", "scale", "power", "sum_", "mean", "max_", "softmax",
    "concat", "slice_", "gather_rows", "reshape", "grad_check",
]
