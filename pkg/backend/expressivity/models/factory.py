"""
Model skeletons and random model generators.

A skeleton fixes the architecture (eps, delta, depth, widths, the form of the
input/output maps and of the residual branches) and records which parameters
are structural constants rather than trainable weights.
"""

from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.core.exceptions import ValidationError
from ..numerics import inf_norm_mat
from .activations import Activation
from .neural_ode import NeuralOdeSpec
from .resnet import AffineSigmaMap, ResidualLayer, ResNetModel


class ModelSkeleton(BaseModel):
    """
    Architecture of a canonical ResNet.

    input_kind:
        ``identity`` (n_in == n_hid), ``affine`` (W x + b) or ``tanh``
        (tanh(W x + b) with W~ = Id, b~ = 0).
    output_kind:
        ``affine`` (W h + b) or ``sigmoid`` (probability head sigmoid(W h + b)).
    residual_form:
        ``full`` trains W, W~, b, b~; ``outer`` freezes W~ = Id and b~ = 0 so each
        branch is sigma(W h + b).
    """

    model_config = ConfigDict(extra="forbid")

    eps: float = Field(..., ge=0, description="Skip parameter")
    delta: float = Field(..., ge=0, description="Residual parameter")
    depth: int = Field(..., ge=0, description="Number of residual layers L")
    n_in: int = Field(..., ge=1)
    n_hid: int = Field(..., ge=1)
    n_out: int = Field(1, ge=1)
    inner_width: Optional[int] = Field(None, ge=1, description="m_l, defaults to n_hid")
    activation: Activation = Activation.TANH
    input_kind: Literal["identity", "affine", "tanh"] = "identity"
    output_kind: Literal["affine", "sigmoid"] = "affine"
    residual_form: Literal["full", "outer"] = "full"

    @model_validator(mode="after")
    def _check_structure(self):
        if self.input_kind == "identity" and self.n_in != self.n_hid:
            raise ValueError("identity input map needs n_in == n_hid")
        if self.residual_form == "outer" and self.width != self.n_hid:
            raise ValueError("outer residual form needs inner_width == n_hid")
        return self

    @property
    def width(self) -> int:
        return self.inner_width or self.n_hid

    def frozen_patterns(self) -> List[str]:
        """fnmatch patterns over flat parameter keys that training must not touch."""
        patterns = ["output.W_tilde", "output.b_tilde"]
        if self.input_kind == "identity":
            patterns.append("input.*")
        else:
            patterns.extend(["input.W_tilde", "input.b_tilde"])
        if self.residual_form == "outer":
            patterns.extend(["layers.*.W_tilde", "layers.*.b_tilde"])
        return patterns

    def template(self) -> ResNetModel:
        """Model with structural entries set and every trainable entry zero."""
        n_in, n_hid, n_out, m = self.n_in, self.n_hid, self.n_out, self.width
        if self.input_kind == "identity":
            input_map = AffineSigmaMap.identity(n_hid)
        else:
            input_map = AffineSigmaMap(
                W=np.zeros((n_hid, n_in)), W_tilde=np.eye(n_hid), b=np.zeros(n_hid),
                b_tilde=np.zeros(n_hid), act=Activation.TANH,
                affine_only=self.input_kind == "affine",
            )
        if self.output_kind == "sigmoid":
            output_map = AffineSigmaMap(W=np.zeros((n_out, n_hid)), W_tilde=np.eye(n_out),
                                        b=np.zeros(n_out), b_tilde=np.zeros(n_out),
                                        act=Activation.SIGMOID)
        else:
            output_map = AffineSigmaMap(W=np.zeros((n_out, n_hid)), W_tilde=np.eye(n_out),
                                        b=np.zeros(n_out), b_tilde=np.zeros(n_out), affine_only=True)
        outer = self.residual_form == "outer"
        layers = tuple(
            ResidualLayer(W=np.zeros((m, n_hid)), W_tilde=np.eye(n_hid) if outer else np.zeros((n_hid, m)),
                          b=np.zeros(m), b_tilde=np.zeros(n_hid), act=self.activation)
            for _ in range(self.depth)
        )
        return ResNetModel(eps=self.eps, delta=self.delta, input_map=input_map, layers=layers,
                           output_map=output_map)


def scale_to_inf_norm(M: np.ndarray, bound: float) -> np.ndarray:
    """Shrink ``M`` so its induced max-norm is at most ``bound``."""
    norm = inf_norm_mat(M)
    return M if norm <= bound or norm == 0 else M * (bound / norm)


def random_model(
    rng: np.random.Generator,
    *,
    n_in: int,
    n_hid: int,
    depth: int,
    eps: float,
    delta: float,
    activation: Activation = Activation.TANH,
    weight_range: float = 2.0,
    n_out: int = 1,
    inner_width: Optional[int] = None,
    input_kind: str = "tanh",
    output_kind: str = "affine",
) -> ResNetModel:
    """
    Canonical ResNet with every parameter drawn from U(-weight_range, weight_range).

    Structural entries (identity maps, the sigmoid head's W~ = 1) follow the
    skeleton of the same shape; with ``input_kind='tanh'`` both inner and outer
    weights of the input map are random.
    """
    m = inner_width or n_hid

    def u(*shape):
        return rng.uniform(-weight_range, weight_range, size=shape)

    if input_kind == "identity":
        if n_in != n_hid:
            raise ValidationError("identity input map needs n_in == n_hid", error_code="SHAPE_MISMATCH")
        input_map = AffineSigmaMap.identity(n_hid)
    else:
        input_map = AffineSigmaMap(W=u(n_hid, n_in), W_tilde=u(n_hid, n_hid), b=u(n_hid), b_tilde=u(n_hid),
                                   act=Activation.TANH, affine_only=input_kind == "affine")
    layers = tuple(
        ResidualLayer(W=u(m, n_hid), W_tilde=u(n_hid, m), b=u(m), b_tilde=u(n_hid), act=activation)
        for _ in range(depth)
    )
    if output_kind == "sigmoid":
        output_map = AffineSigmaMap(W=u(n_out, n_hid), W_tilde=np.eye(n_out), b=u(n_out),
                                    b_tilde=np.zeros(n_out), act=Activation.SIGMOID)
    else:
        output_map = AffineSigmaMap(W=u(n_out, n_hid), W_tilde=np.eye(n_out), b=u(n_out),
                                    b_tilde=np.zeros(n_out), affine_only=True)
    return ResNetModel(eps=eps, delta=delta, input_map=input_map, layers=layers, output_map=output_map)


def random_drift_model(
    rng: np.random.Generator,
    *,
    n_in: int = 1,
    n_hid: int = 1,
    depth: int,
    eps: float,
    delta: float = 1.0,
    drift: float = 1.0,
    branch_scale: float = 0.05,
    input_scale: float = 0.5,
    activation: Activation = Activation.TANH,
) -> ResNetModel:
    """
    Canonical ResNet whose residual branches are dominated by a shared drift b~.

    Every b~_l equals ``s * drift * 1`` for one random sign s, the outer weights
    satisfy ``||W~_l||_inf <= branch_scale`` and the input map is
    ``input_scale * tanh(W x + b)``. The hidden state of the MLP limit then stays
    near the drift, so the MLP-limit error grows linearly in eps with a small
    relative quadratic term. Output weights are positive.
    """
    sign = rng.choice([-1.0, 1.0])
    input_map = AffineSigmaMap(W=rng.uniform(-1, 1, size=(n_hid, n_in)), W_tilde=input_scale * np.eye(n_hid),
                               b=rng.uniform(-1, 1, size=n_hid), b_tilde=np.zeros(n_hid), act=Activation.TANH)
    layers = tuple(
        ResidualLayer(
            W=rng.uniform(-1, 1, size=(n_hid, n_hid)),
            W_tilde=scale_to_inf_norm(rng.uniform(-1, 1, size=(n_hid, n_hid)), branch_scale),
            b=rng.uniform(-1, 1, size=n_hid),
            b_tilde=sign * drift * np.ones(n_hid),
            act=activation,
        )
        for _ in range(depth)
    )
    output_map = AffineSigmaMap(W=rng.uniform(0.5, 1.0, size=(1, n_hid)), W_tilde=np.eye(1),
                                b=rng.uniform(-1, 1, size=1), b_tilde=np.zeros(1), affine_only=True)
    return ResNetModel(eps=eps, delta=delta, input_map=input_map, layers=layers, output_map=output_map)


def random_autonomous_node(
    rng: np.random.Generator,
    *,
    n_in: int,
    n_hid: int,
    horizon_T: float,
    weight_bound: float = 1.0,
    activation: Activation = Activation.TANH,
    n_out: int = 1,
) -> NeuralOdeSpec:
    """
    Autonomous canonical neural ODE with ``||W||_inf, ||W~||_inf <= weight_bound``.

    The input map is the identity when ``n_in == n_hid`` and a random affine map
    otherwise; the output map is affine with max-norm at most 1.
    """
    field = ResidualLayer(
        W=scale_to_inf_norm(rng.uniform(-1, 1, size=(n_hid, n_hid)), weight_bound),
        W_tilde=scale_to_inf_norm(rng.uniform(-1, 1, size=(n_hid, n_hid)), weight_bound),
        b=rng.uniform(-1, 1, size=n_hid),
        b_tilde=rng.uniform(-0.5, 0.5, size=n_hid),
        act=activation,
    )
    if n_in == n_hid:
        input_map = AffineSigmaMap.identity(n_hid)
    else:
        input_map = AffineSigmaMap(W=rng.uniform(-1, 1, size=(n_hid, n_in)), W_tilde=np.eye(n_hid),
                                   b=rng.uniform(-1, 1, size=n_hid), b_tilde=np.zeros(n_hid), affine_only=True)
    output_map = AffineSigmaMap(W=scale_to_inf_norm(rng.uniform(-1, 1, size=(n_out, n_hid)), 1.0),
                                W_tilde=np.eye(n_out), b=rng.uniform(-1, 1, size=n_out),
                                b_tilde=np.zeros(n_out), affine_only=True)
    return NeuralOdeSpec(fields=(field,), horizon_T=horizon_T, input_map=input_map, output_map=output_map)
