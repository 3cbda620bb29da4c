from .autograd import Tensor, Parameter, no_grad, backward
from .layers import Module, Conv2d, Linear, GroupNorm, Embedding

__all__ = [
    "Tensor",
    "Parameter",
    "no_grad",
    "backward",
    "Module",
    "Conv2d",
    "Linear",
    "GroupNorm",
    "Embedding",
]
