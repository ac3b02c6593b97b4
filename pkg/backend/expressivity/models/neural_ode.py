"""
Neural ODEs and their bridges to ResNets.

The vector field is ``f(h, t) = c * h + W~(t) sigma(W(t) h + b(t)) + b~(t)``
with piecewise-constant parameters on ``K`` equal sub-intervals of [0, T].
The linear coefficient ``c`` is what makes a ResNet with eps != 1 the Euler
discretization of a neural ODE.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.core.exceptions import DimensionError, NumericalError, ValidationError
from utils.core.logging import get_project_logger
from ..numerics import Vec64, as_vec
from .resnet import AffineSigmaMap, ResidualLayer, ResNetModel

logger = get_project_logger(__name__)

INTEGRATION_METHODS = ("euler", "rk4")

# Keeps t = l * T / K inside knot l despite rounding
KNOT_SLACK = 1e-9


@dataclass(frozen=True)
class NeuralOdeSpec:
    """
    Parameters of ``dh/dt = f(h, t)`` on [0, horizon_T] with input/output maps.

    One knot makes the field autonomous; K knots are held constant on
    ``[k T / K, (k+1) T / K)``.
    """

    fields: Tuple[ResidualLayer, ...]
    horizon_T: float
    input_map: AffineSigmaMap
    output_map: AffineSigmaMap
    linear_coefficient: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.fields:
            raise ValidationError("A neural ODE needs at least one field knot", error_code="NO_FIELD")
        if not (np.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise ValidationError(f"horizon_T must be positive, got {self.horizon_T}", error_code="BAD_HORIZON")
        if not np.isfinite(self.linear_coefficient):
            raise ValidationError("linear_coefficient must be finite", error_code="BAD_CHANNEL_PARAMETER")
        n_hid = self.input_map.out_dim
        for knot in self.fields:
            if knot.in_dim != n_hid:
                raise DimensionError(
                    f"Field knot expects width {knot.in_dim}, hidden width is {n_hid}",
                    error_code="SHAPE_MISMATCH",
                )
        if self.output_map.in_dim != n_hid:
            raise DimensionError("Output map does not match hidden width", error_code="SHAPE_MISMATCH")
        object.__setattr__(self, "horizon_T", float(self.horizon_T))
        object.__setattr__(self, "linear_coefficient", float(self.linear_coefficient))

    @property
    def n_in(self) -> int:
        return self.input_map.in_dim

    @property
    def n_hid(self) -> int:
        return self.input_map.out_dim

    @property
    def n_out(self) -> int:
        return self.output_map.out_dim

    @property
    def autonomous(self) -> bool:
        return len(self.fields) == 1

    def knot_at(self, t: float) -> ResidualLayer:
        count = len(self.fields)
        index = int(np.floor(t * count / self.horizon_T + KNOT_SLACK))
        return self.fields[min(max(index, 0), count - 1)]

    def field(self, H: np.ndarray, t: float) -> np.ndarray:
        """Evaluate f on a batch of hidden states (rows)."""
        out = self.knot_at(t).residual(H)
        if self.linear_coefficient != 0.0:
            out = out + self.linear_coefficient * H
        return out


def integrate_node_batch(spec: NeuralOdeSpec, X, steps: int, method: str = "euler") -> np.ndarray:
    """Fixed-step integration for every row of ``X``; returns lambda~(h(T))."""
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}", error_code="BAD_STEPS")
    if method not in INTEGRATION_METHODS:
        raise ValidationError(f"Unknown integration method '{method}'", error_code="BAD_METHOD",
                              details={"allowed": list(INTEGRATION_METHODS)})
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.n_in:
        raise DimensionError(f"Input has {X.shape[1]} columns, spec expects {spec.n_in}",
                             error_code="SHAPE_MISMATCH")

    dt = spec.horizon_T / steps
    h, _, _ = spec.input_map.apply_batch(X)
    for step in range(steps):
        t = step * dt
        if method == "euler":
            h = h + dt * spec.field(h, t)
        else:
            k1 = spec.field(h, t)
            k2 = spec.field(h + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = spec.field(h + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = spec.field(h + dt * k3, t + dt)
            h = h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(h)):
            raise NumericalError(
                f"Non-finite ODE state at t={t + dt:.6g}",
                error_code="NON_FINITE",
                details={"time": t + dt, "step": step + 1, "method": method},
            )
    y, _, _ = spec.output_map.apply_batch(h)
    return y


def integrate_node(spec: NeuralOdeSpec, x: Vec64, steps: int, method: str = "euler") -> Vec64:
    """
    Approximate ``lambda~(h(T))`` for one input with a fixed-step scheme.

    Args:
        spec (NeuralOdeSpec): The neural ODE
        x (Vec64): Input of dimension n_in
        steps (int): Number of equal steps on [0, T]
        method (str): ``euler`` or ``rk4``

    Returns:
        Vec64: Output of dimension n_out

    Raises:
        NumericalError: If the state becomes non-finite (carries the time stamp)
    """
    return integrate_node_batch(spec, as_vec(x, "x")[None, :], steps, method)[0]


def euler_discretize(spec: NeuralOdeSpec, L: int) -> ResNetModel:
    """
    Explicit Euler with step ``delta = T / L`` written as a ResNet.

    Layer l carries the knot active at ``t_{l-1} = (l - 1) delta``. The linear
    part of the field is absorbed into the skip parameter, eps = 1 + delta * c.
    """
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}", error_code="BAD_DEPTH")
    delta = spec.horizon_T / L
    eps = 1.0 + delta * spec.linear_coefficient
    if eps < 0:
        raise ValidationError(
            f"Step {delta} too large for linear coefficient {spec.linear_coefficient}: eps would be {eps}",
            error_code="BAD_CHANNEL_PARAMETER",
        )
    layers = tuple(spec.knot_at((l - 1) * delta) for l in range(1, L + 1))
    logger.debug(f"Euler discretization: L={L}, delta={delta:.6g}, eps={eps:.6g}")
    return ResNetModel(eps=eps, delta=delta, input_map=spec.input_map, layers=layers,
                       output_map=spec.output_map)


def embed_resnet_as_node(model: ResNetModel) -> NeuralOdeSpec:
    """
    Neural ODE on [0, L delta] whose L-step Euler scheme is ``model``.

    The field is ``(eps - 1)/delta * h + f_l(h)`` with the layer parameters held
    piecewise constant on ``[t_{l-1}, t_l)``.

    Raises:
        ValidationError: If delta = 0 or the model has no layers
    """
    if model.delta <= 0:
        raise ValidationError("Embedding needs delta > 0", error_code="DELTA_ZERO")
    if model.depth == 0:
        raise ValidationError("Embedding needs at least one layer", error_code="NO_FIELD")
    return NeuralOdeSpec(
        fields=model.layers,
        horizon_T=model.depth * model.delta,
        input_map=model.input_map,
        output_map=model.output_map,
        linear_coefficient=(model.eps - 1.0) / model.delta,
    )
