"""
Mini-batch training of canonical ResNets with Adam.

A run is fully determined by the model, the dataset and ``TrainConfig``: the
shuffle stream is ``(seed, "shuffle")`` and nothing else draws randomness.
"""

import time
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from utils.core.exceptions import ConfigurationError, NumericalError
from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng
from ..gradients import param_gradient
from ..models import ResNetModel, forward_batch
from .batchnorm import BatchNormLayer, fold_batch_norm
from .datasets import LABEL_THRESHOLD, Dataset
from .init import is_frozen
from .optim import Adam, AdamConfig

logger = get_project_logger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, description="Root seed of the shuffle stream")
    lr: float = Field(0.01, gt=0, description="Adam step size")
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(100, ge=0)
    loss: Literal["mse", "bce"] = "mse"
    batch_norm: bool = Field(False, description="Normalize residual pre-activations, folded after training")
    adam: AdamConfig = Field(default_factory=AdamConfig)
    log_every: int = Field(50, ge=0, description="Log the loss every k epochs, 0 disables")


class TrainRecord(BaseModel):
    seed: int
    epochs: int
    losses: List[float] = Field(default_factory=list, description="Mean batch loss per epoch")
    accuracies: List[float] = Field(default_factory=list, description="Accuracy per epoch (bce only)")
    accuracy: Optional[float] = None
    sign_flip_fraction: Optional[float] = None
    wall_time: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"epoch": np.arange(1, len(self.losses) + 1), "loss": self.losses})
        if self.accuracies:
            frame["accuracy"] = self.accuracies
        return frame


def _check_setup(dataset: Dataset, config: TrainConfig, model: ResNetModel):
    if config.batch_size > len(dataset):
        raise ConfigurationError(
            f"batch_size {config.batch_size} exceeds dataset size {len(dataset)}", error_code="BAD_BATCH_SIZE"
        )
    if dataset.kind.is_classification != (config.loss == "bce"):
        raise ConfigurationError(
            f"Loss '{config.loss}' does not fit dataset {dataset.kind.value}", error_code="LOSS_MISMATCH"
        )
    if dataset.dim != model.n_in:
        raise ConfigurationError(
            f"Dataset is {dataset.dim}-D, model input is {model.n_in}-D", error_code="SHAPE_MISMATCH"
        )


def _weight_signs(params: Dict[str, np.ndarray], keys: Sequence[str]) -> np.ndarray:
    weights = [params[k].ravel() for k in keys if k.rsplit(".", 1)[-1] in ("W", "W_tilde")]
    return np.sign(np.concatenate(weights)) if weights else np.zeros(0)


def _accuracy(model: ResNetModel, dataset: Dataset, normalizers) -> float:
    Y, _ = forward_batch(model, dataset.inputs, normalizers=normalizers, training=False)
    return float(np.mean((Y[:, 0] > LABEL_THRESHOLD) == (dataset.targets > LABEL_THRESHOLD)))


def train(
    model: ResNetModel,
    dataset: Dataset,
    config: TrainConfig,
    frozen_patterns: Sequence[str] = (),
) -> Tuple[ResNetModel, TrainRecord]:
    """
    Train ``model`` on ``dataset``.

    Args:
        model (ResNetModel): Initial model
        dataset (Dataset): Training data
        config (TrainConfig): Optimizer and loop settings
        frozen_patterns (Sequence[str]): fnmatch patterns of parameter keys kept fixed

    Returns:
        Tuple[ResNetModel, TrainRecord]: The trained model (batch norm folded in) and the run record

    Raises:
        ConfigurationError: If the batch size, loss or dimensions do not fit the data
        NumericalError: If the loss or a gradient becomes non-finite, with the epoch and batch
    """
    _check_setup(dataset, config, model)
    started = time.perf_counter()
    rng = make_rng(config.seed, "shuffle")

    params = {k: np.array(v, dtype=np.float64) for k, v in model.parameters().items()}
    trainable = [k for k in params if not is_frozen(k, frozen_patterns)]
    normalizers = [BatchNormLayer(layer.width) for layer in model.layers] if config.batch_norm else None
    opt_params = {k: params[k] for k in trainable}
    if normalizers:
        for index, bn in enumerate(normalizers):
            opt_params[f"bn.{index}.gain"] = bn.gain
            opt_params[f"bn.{index}.shift"] = bn.shift
    adam = Adam(lr=config.lr, config=config.adam)
    initial_signs = _weight_signs(params, trainable)

    record = TrainRecord(seed=config.seed, epochs=config.epochs)
    X, T = dataset.inputs, dataset.targets
    n = len(dataset)
    current = model
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for batch, start in enumerate(range(0, n, config.batch_size), start=1):
            index = order[start:start + config.batch_size]
            current = model.with_parameters(params)
            try:
                result = param_gradient(current, X[index], T[index], loss=config.loss,
                                        normalizers=normalizers, training=True)
            except NumericalError as e:
                raise NumericalError(f"Training diverged: {e.message}", error_code="TRAINING_DIVERGED",
                                     details={**e.details, "epoch": epoch, "batch": batch}) from e
            grads = {k: result.grads[k] for k in trainable}
            for layer_index, layer_grads in enumerate(result.normalizer_grads):
                for name, g in layer_grads.items():
                    grads[f"bn.{layer_index}.{name}"] = g
            if not np.isfinite(result.loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError("Training produced a non-finite loss or gradient",
                                     error_code="TRAINING_DIVERGED", details={"epoch": epoch, "batch": batch})
            adam.step(opt_params, grads)
            total += result.loss * len(index)
        record.losses.append(total / n)
        current = model.with_parameters(params)
        if config.loss == "bce":
            record.accuracies.append(_accuracy(current, dataset, normalizers))
        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"seed {config.seed} epoch {epoch}/{config.epochs}: loss={record.losses[-1]:.6g}")

    if normalizers and config.epochs > 0:
        current = fold_batch_norm(current, normalizers)
    if config.loss == "bce":
        record.accuracy = _accuracy(current, dataset, None)

    final_signs = _weight_signs(params, trainable)
    if initial_signs.size:
        record.sign_flip_fraction = float(np.mean(initial_signs != final_signs))
        logger.info(f"seed {config.seed}: {record.sign_flip_fraction:.1%} of weights changed sign")
    record.wall_time = time.perf_counter() - started
    return current, record
