"""
JSON documents for ResNet models.

Field names are part of the command-line contract:

    {eps, delta, n_in, n_hid, n_out, activation,
     input: {W, W_tilde, b, b_tilde, affine_only},
     layers: [{W, W_tilde, b, b_tilde[, activation]}, ...],
     output: {W, W_tilde, b, b_tilde, affine_only}}

Matrices are row-major nested arrays. An ``activation`` key inside ``input`` or
``output`` overrides the model-wide activation for that map (used by the
sigmoid probability head of classifiers). Layers whose activation differs from
the model-wide one carry their own ``activation`` key as well.
"""

import json
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError

from utils.core.exceptions import ConfigurationError, DimensionError
from utils.core.logging import get_project_logger
from .activations import Activation
from .resnet import AffineSigmaMap, ResidualLayer, ResNetModel

logger = get_project_logger(__name__)


class LayerDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    W: List[List[float]] = Field(..., description="Inner weights, row-major")
    W_tilde: List[List[float]] = Field(..., description="Outer weights, row-major")
    b: List[float] = Field(..., description="Inner bias")
    b_tilde: List[float] = Field(..., description="Outer bias")
    activation: Optional[Activation] = Field(None, description="Per-layer activation override")


class MapDocument(LayerDocument):
    affine_only: bool = Field(False, description="Skip the activation (pure affine map)")


class ModelDocument(BaseModel):
    """Serialized canonical ResNet."""

    model_config = ConfigDict(extra="forbid")

    eps: float = Field(..., ge=0, description="Skip parameter")
    delta: float = Field(..., ge=0, description="Residual parameter")
    n_in: int = Field(..., ge=1)
    n_hid: int = Field(..., ge=1)
    n_out: int = Field(..., ge=1)
    activation: Activation = Field(Activation.TANH, description="Activation of the residual layers")
    input: MapDocument
    layers: List[LayerDocument] = Field(default_factory=list)
    output: MapDocument


def _map_to_document(block: AffineSigmaMap, default_act: Activation) -> MapDocument:
    return MapDocument(
        W=block.W.tolist(),
        W_tilde=block.W_tilde.tolist(),
        b=block.b.tolist(),
        b_tilde=block.b_tilde.tolist(),
        affine_only=block.affine_only,
        activation=None if block.act == default_act else block.act,
    )


def model_to_document(model: ResNetModel) -> ModelDocument:
    activation = model.layers[0].act if model.layers else model.input_map.act
    return ModelDocument(
        eps=model.eps,
        delta=model.delta,
        n_in=model.n_in,
        n_hid=model.n_hid,
        n_out=model.n_out,
        activation=activation,
        input=_map_to_document(model.input_map, activation),
        layers=[
            LayerDocument(W=layer.W.tolist(), W_tilde=layer.W_tilde.tolist(),
                          b=layer.b.tolist(), b_tilde=layer.b_tilde.tolist(),
                          activation=None if layer.act == activation else layer.act)
            for layer in model.layers
        ],
        output=_map_to_document(model.output_map, activation),
    )


def model_from_document(doc: ModelDocument) -> ResNetModel:
    """Build a model from a validated document, checking the declared sizes."""

    def build_map(part: MapDocument) -> AffineSigmaMap:
        return AffineSigmaMap(W=part.W, W_tilde=part.W_tilde, b=part.b, b_tilde=part.b_tilde,
                              act=part.activation or doc.activation, affine_only=part.affine_only)

    model = ResNetModel(
        eps=doc.eps,
        delta=doc.delta,
        input_map=build_map(doc.input),
        layers=tuple(
            ResidualLayer(W=layer.W, W_tilde=layer.W_tilde, b=layer.b, b_tilde=layer.b_tilde,
                          act=layer.activation or doc.activation)
            for layer in doc.layers
        ),
        output_map=build_map(doc.output),
    )
    declared = (doc.n_in, doc.n_hid, doc.n_out)
    actual = (model.n_in, model.n_hid, model.n_out)
    if declared != actual:
        raise DimensionError(
            f"Declared dimensions {declared} do not match the weights {actual}",
            error_code="SHAPE_MISMATCH",
        )
    return model


def dumps_model(model: ResNetModel) -> str:
    return model_to_document(model).model_dump_json(indent=2, exclude_none=True)


def loads_model(text: str) -> ResNetModel:
    try:
        doc = ModelDocument.model_validate_json(text)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid model document: {e.error_count()} error(s)",
                                 error_code="BAD_MODEL_JSON", details={"errors": json.loads(e.json())})
    return model_from_document(doc)


def save_model(model: ResNetModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_model(model), encoding="utf-8")
    logger.debug(f"Model saved to {path}")
    return path


def load_model(path: Union[str, Path]) -> ResNetModel:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Model file not found: {path}", error_code="MODEL_NOT_FOUND")
    return loads_model(path.read_text(encoding="utf-8"))
