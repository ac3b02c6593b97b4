"""
ResNet, MLP and neural ODE models
"""

from .activations import Activation
from .resnet import (
    AffineSigmaMap,
    BatchTrace,
    HiddenTrace,
    PreactivationNormalizer,
    ResidualLayer,
    ResNetModel,
    SigmaBlock,
    evaluate,
    forward,
    forward_batch,
    forward_unrolled,
    resnet_to_mlp,
)
from .neural_ode import NeuralOdeSpec, embed_resnet_as_node, euler_discretize, integrate_node, integrate_node_batch
from .serialization import ModelDocument, dumps_model, load_model, loads_model, save_model
from .factory import ModelSkeleton, random_autonomous_node, random_drift_model, random_model, scale_to_inf_norm

__all__ = [
    "Activation",
    "AffineSigmaMap",
    "BatchTrace",
    "HiddenTrace",
    "PreactivationNormalizer",
    "ResidualLayer",
    "ResNetModel",
    "SigmaBlock",
    "evaluate",
    "forward",
    "forward_batch",
    "forward_unrolled",
    "resnet_to_mlp",
    "NeuralOdeSpec",
    "embed_resnet_as_node",
    "euler_discretize",
    "integrate_node",
    "integrate_node_batch",
    "ModelDocument",
    "dumps_model",
    "load_model",
    "loads_model",
    "save_model",
    "ModelSkeleton",
    "random_autonomous_node",
    "random_drift_model",
    "random_model",
    "scale_to_inf_norm",
]
