"""
Batch normalization of residual-branch pre-activations and its folding.

During training each layer's pre-activation a = W h + b is replaced by
gain * (a - mean) / sqrt(var + eps_floor) + shift using batch statistics.
After training the frozen running statistics are folded into W and b, so the
result is again a canonical ResNet.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from utils.core.exceptions import DimensionError, InvalidStateError
from ..models import ResNetModel

EPS_FLOOR = 1e-5
MOMENTUM = 0.1


@dataclass
class BatchNormLayer:
    width: int
    momentum: float = MOMENTUM
    eps_floor: float = EPS_FLOOR
    gain: np.ndarray = field(default=None)
    shift: np.ndarray = field(default=None)
    running_mean: np.ndarray = field(default=None)
    running_var: np.ndarray = field(default=None)
    batches_seen: int = 0

    def __post_init__(self):
        self.gain = np.ones(self.width) if self.gain is None else np.asarray(self.gain, dtype=np.float64)
        self.shift = np.zeros(self.width) if self.shift is None else np.asarray(self.shift, dtype=np.float64)
        self.running_mean = np.zeros(self.width) if self.running_mean is None else np.asarray(self.running_mean, dtype=np.float64)
        self.running_var = np.ones(self.width) if self.running_var is None else np.asarray(self.running_var, dtype=np.float64)

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"gain": self.gain, "shift": self.shift}

    def normalize(self, a: np.ndarray, training: bool) -> Tuple[np.ndarray, Any]:
        if a.shape[-1] != self.width:
            raise DimensionError(f"Batch norm of width {self.width} got {a.shape[-1]} features",
                                 error_code="SHAPE_MISMATCH")
        if training:
            mean = a.mean(axis=0)
            var = a.var(axis=0)
            self.running_mean = (1.0 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1.0 - self.momentum) * self.running_var + self.momentum * var
            self.batches_seen += 1
        else:
            if self.batches_seen == 0:
                raise InvalidStateError("Batch norm has no running statistics yet", error_code="NO_STATISTICS")
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps_floor)
        x_hat = (a - mean) * inv_std
        return self.gain * x_hat + self.shift, (x_hat, inv_std, training)

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        x_hat, inv_std, training = cache
        grads = {"gain": np.sum(grad_out * x_hat, axis=0), "shift": np.sum(grad_out, axis=0)}
        d_xhat = grad_out * self.gain
        if not training:
            return d_xhat * inv_std, grads
        n = grad_out.shape[0]
        d_a = (inv_std / n) * (n * d_xhat - d_xhat.sum(axis=0) - x_hat * np.sum(d_xhat * x_hat, axis=0))
        return d_a, grads


def fold_batch_norm(model: ResNetModel, normalizers: Sequence[BatchNormLayer]) -> ResNetModel:
    """
    Fold frozen statistics into the residual layers:
    ``W' = diag(s) W`` and ``b' = s (b - mean) + shift`` with ``s = gain / sqrt(var + eps_floor)``.

    Raises:
        InvalidStateError: If a normalizer never saw a training batch
    """
    if len(normalizers) != model.depth:
        raise DimensionError(f"{len(normalizers)} normalizers for {model.depth} layers", error_code="SHAPE_MISMATCH")
    layers = []
    for index, (layer, bn) in enumerate(zip(model.layers, normalizers)):
        if bn.batches_seen == 0:
            raise InvalidStateError("Cannot fold batch norm before any statistics were collected",
                                    error_code="NO_STATISTICS", details={"layer": index + 1})
        s = bn.gain / np.sqrt(bn.running_var + bn.eps_floor)
        layers.append(replace(layer, W=s[:, None] * layer.W, b=s * (layer.b - bn.running_mean) + bn.shift))
    return replace(model, layers=tuple(layers))
