"""Autodiff tensor core, layers, architectures, optimizers and checkpoints."""
from .models import ARCHITECTURES, DeepSets, GIN, MLP, Model, ModelConfig, SetTransformer, build_model, qkv_attention
from .optim import Adam, Lookahead, clip_grad_norm, cosine_warmup_lr, make_optimizer
from .tensor import Tensor, cross_entropy, softmax_cross_entropy

__all__ = [
    "ARCHITECTURES", "Adam", "DeepSets", "GIN", "Lookahead", "MLP", "Model", "ModelConfig",
    "SetTransformer", "Tensor", "build_model", "clip_grad_norm", "cosine_warmup_lr",
    "cross_entropy", "make_optimizer", "qkv_attention", "softmax_cross_entropy",
]
