"""
Canonical ResNets with skip parameter eps and residual parameter delta.

    h_0 = lambda(x),  h_l = eps * h_{l-1} + delta * f_l(h_{l-1}),  y = lambda~(h_L)

with residual branch ``f_l(h) = W~_l sigma(W_l h + b_l) + b~_l``. Batches are
row-major: an input batch has shape (N, n_in) and every hidden state (N, n_hid).
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from utils.core.exceptions import DimensionError, NumericalError, ValidationError
from utils.core.logging import get_project_logger
from ..numerics import Mat64, Vec64, affine_box_image, as_mat, as_vec, inf_norm_mat, inf_norm_vec
from .activations import Activation

logger = get_project_logger(__name__)


class PreactivationNormalizer(Protocol):
    """Hook applied to the pre-activations a_l inside a residual branch (batch norm)."""

    def normalize(self, a: np.ndarray, training: bool) -> Tuple[np.ndarray, Any]:
        ...

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        ...


@dataclass(frozen=True)
class SigmaBlock:
    """Parameters of ``x -> W~ sigma(W x + b) + b~``."""

    W: Mat64
    W_tilde: Mat64
    b: Vec64
    b_tilde: Vec64
    act: Activation = Activation.TANH

    def __post_init__(self):
        W = as_mat(self.W, "W")
        W_tilde = as_mat(self.W_tilde, "W_tilde")
        b = as_vec(self.b, "b")
        b_tilde = as_vec(self.b_tilde, "b_tilde")
        if b.size != W.shape[0]:
            raise DimensionError(f"b has {b.size} entries but W has {W.shape[0]} rows",
                                 error_code="SHAPE_MISMATCH")
        if W_tilde.shape[1] != W.shape[0]:
            raise DimensionError(
                f"W_tilde has {W_tilde.shape[1]} columns but W has {W.shape[0]} rows",
                error_code="SHAPE_MISMATCH",
            )
        if b_tilde.size != W_tilde.shape[0]:
            raise DimensionError(
                f"b_tilde has {b_tilde.size} entries but W_tilde has {W_tilde.shape[0]} rows",
                error_code="SHAPE_MISMATCH",
            )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "W_tilde", W_tilde)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "b_tilde", b_tilde)
        object.__setattr__(self, "act", Activation(self.act))

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def width(self) -> int:
        """Inner width m (rows of W)."""
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W_tilde.shape[0]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "W_tilde": self.W_tilde, "b": self.b, "b_tilde": self.b_tilde}


@dataclass(frozen=True)
class AffineSigmaMap(SigmaBlock):
    """
    Input/output transformation lambda or lambda~.

    With ``affine_only`` the activation is skipped: ``x -> W~ (W x + b) + b~``.
    """

    affine_only: bool = False

    @classmethod
    def identity(cls, n: int) -> "AffineSigmaMap":
        eye = np.eye(n)
        return cls(W=eye, W_tilde=eye, b=np.zeros(n), b_tilde=np.zeros(n), affine_only=True)

    def inner(self, pre: np.ndarray) -> np.ndarray:
        return pre if self.affine_only else self.act.apply(pre)

    def inner_derivative(self, pre: np.ndarray) -> np.ndarray:
        return np.ones_like(pre) if self.affine_only else self.act.derivative(pre)

    def apply_batch(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(output, pre-activation, inner value)`` for a batch."""
        pre = X @ self.W.T + self.b
        inner = self.inner(pre)
        return inner @ self.W_tilde.T + self.b_tilde, pre, inner

    def __call__(self, x: Vec64) -> Vec64:
        out, _, _ = self.apply_batch(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return out[0]

    def jacobian(self, x: Vec64) -> Mat64:
        pre = self.W @ np.asarray(x, dtype=np.float64) + self.b
        return self.W_tilde @ (self.inner_derivative(pre)[:, None] * self.W)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        """Jacobians for every row of ``X``, shape (N, out_dim, in_dim)."""
        pre = X @ self.W.T + self.b
        scaled = self.inner_derivative(pre)[:, :, None] * self.W[None, :, :]
        return np.einsum("om,nmi->noi", self.W_tilde, scaled)

    def lipschitz_inf(self) -> float:
        """Global Lipschitz constant w.r.t. the max-norm."""
        if self.affine_only:
            return inf_norm_mat(self.W_tilde @ self.W)
        return inf_norm_mat(self.W_tilde) * self.act.K_sigma * inf_norm_mat(self.W)

    def sup_norm_on(self, lo: Vec64, hi: Vec64) -> float:
        """Upper bound of ``||map(x)||_inf`` over the box ``[lo, hi]`` (interval arithmetic)."""
        pre_lo, pre_hi = affine_box_image(self.W, self.b, lo, hi)
        if self.affine_only:
            inner_lo, inner_hi = pre_lo, pre_hi
        else:
            # monotone activation maps interval ends to interval ends
            inner_lo, inner_hi = self.act.apply(pre_lo), self.act.apply(pre_hi)
        out_lo, out_hi = affine_box_image(self.W_tilde, self.b_tilde, inner_lo, inner_hi)
        return float(np.max(np.maximum(np.abs(out_lo), np.abs(out_hi))))

    def parameters(self) -> Dict[str, np.ndarray]:
        return super().parameters()


@dataclass(frozen=True)
class ResidualLayer(SigmaBlock):
    """One residual branch ``f_l(h) = W~_l sigma(W_l h + b_l) + b~_l``."""

    def __post_init__(self):
        super().__post_init__()
        if self.W_tilde.shape[0] != self.W.shape[1]:
            raise DimensionError(
                f"Residual branch maps {self.W.shape[1]} -> {self.W_tilde.shape[0]}, "
                "must be square in the hidden width",
                error_code="SHAPE_MISMATCH",
            )

    def residual(self, H: np.ndarray) -> np.ndarray:
        return self.act.apply(H @ self.W.T + self.b) @ self.W_tilde.T + self.b_tilde

    def raw_jacobian(self, h: Vec64) -> Mat64:
        """``W~_l sigma'(a_l) W_l`` at the hidden state ``h``."""
        a = self.W @ np.asarray(h, dtype=np.float64) + self.b
        return self.W_tilde @ (self.act.derivative(a)[:, None] * self.W)

    def sup_norm(self) -> float:
        """S_f = ||W~||_inf S_sigma + ||b~||_inf."""
        return inf_norm_mat(self.W_tilde) * self.act.S_sigma + inf_norm_vec(self.b_tilde)

    def lipschitz_inf(self) -> float:
        """K_f = ||W~||_inf K_sigma ||W||_inf."""
        return inf_norm_mat(self.W_tilde) * self.act.K_sigma * inf_norm_mat(self.W)


@dataclass(frozen=True)
class HiddenTrace:
    """Hidden states h_0..h_L and pre-activations a_1..a_L of one forward pass."""

    states: Tuple[Vec64, ...]
    preacts: Tuple[Vec64, ...]


@dataclass
class BatchTrace:
    """Everything a reverse-mode pass needs, for a whole batch."""

    inputs: np.ndarray
    input_pre: np.ndarray
    input_inner: np.ndarray
    states: List[np.ndarray] = field(default_factory=list)
    preacts: List[np.ndarray] = field(default_factory=list)
    normed: List[np.ndarray] = field(default_factory=list)
    sigmas: List[np.ndarray] = field(default_factory=list)
    norm_caches: List[Any] = field(default_factory=list)
    output_pre: Optional[np.ndarray] = None
    output_inner: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ResNetModel:
    """
    A canonical ResNet Phi(x) = lambda~(h_L(lambda(x))).

    ``eps`` and ``delta`` may be zero: eps = 0 is the feed-forward (MLP) limit
    and delta = 0 the skip-only affine limit.
    """

    eps: float
    delta: float
    input_map: AffineSigmaMap
    layers: Tuple[ResidualLayer, ...]
    output_map: AffineSigmaMap

    def __post_init__(self):
        if not (np.isfinite(self.eps) and np.isfinite(self.delta)):
            raise ValidationError("eps and delta must be finite", error_code="BAD_CHANNEL_PARAMETER")
        if self.eps < 0 or self.delta < 0:
            raise ValidationError(
                f"eps and delta must be non-negative, got eps={self.eps}, delta={self.delta}",
                error_code="BAD_CHANNEL_PARAMETER",
            )
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "layers", tuple(self.layers))
        n_hid = self.input_map.out_dim
        for index, layer in enumerate(self.layers, start=1):
            if layer.in_dim != n_hid:
                raise DimensionError(
                    f"Layer {index} expects width {layer.in_dim}, hidden width is {n_hid}",
                    error_code="SHAPE_MISMATCH",
                )
        if self.output_map.in_dim != n_hid:
            raise DimensionError(
                f"Output map expects width {self.output_map.in_dim}, hidden width is {n_hid}",
                error_code="SHAPE_MISMATCH",
            )

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
    def depth(self) -> int:
        return len(self.layers)

    @property
    def non_augmented(self) -> bool:
        return self.n_in >= self.n_hid

    def alpha(self) -> float:
        """Channel ratio delta / eps."""
        if self.eps <= 0:
            raise ValidationError("alpha = delta/eps is undefined for eps = 0", error_code="ALPHA_UNDEFINED")
        return self.delta / self.eps

    def parameters(self) -> Dict[str, np.ndarray]:
        """Flat view keyed ``input.W``, ``layers.3.b_tilde``, ``output.b`` ..."""
        params: Dict[str, np.ndarray] = {}
        for name, value in self.input_map.parameters().items():
            params[f"input.{name}"] = value
        for index, layer in enumerate(self.layers):
            for name, value in layer.parameters().items():
                params[f"layers.{index}.{name}"] = value
        for name, value in self.output_map.parameters().items():
            params[f"output.{name}"] = value
        return params

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "ResNetModel":
        """Copy of the model with any subset of the flat parameters replaced."""
        unknown = set(params) - set(self.parameters())
        if unknown:
            raise ValidationError(f"Unknown parameter keys: {sorted(unknown)}", error_code="UNKNOWN_PARAMETER")

        def rebuild(block, prefix):
            updates = {name: params[f"{prefix}.{name}"] for name in ("W", "W_tilde", "b", "b_tilde")
                       if f"{prefix}.{name}" in params}
            return replace(block, **updates) if updates else block

        return replace(
            self,
            input_map=rebuild(self.input_map, "input"),
            layers=tuple(rebuild(layer, f"layers.{i}") for i, layer in enumerate(self.layers)),
            output_map=rebuild(self.output_map, "output"),
        )


def _check_batch(model: ResNetModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_in:
        raise DimensionError(
            f"Input has shape {X.shape}, model expects (N, {model.n_in})",
            error_code="SHAPE_MISMATCH",
        )
    if not np.all(np.isfinite(X)):
        raise NumericalError("Input contains NaN or Inf", error_code="NON_FINITE", details={"where": "input"})
    return X


def forward_batch(
    model: ResNetModel,
    X,
    normalizers: Optional[Sequence[PreactivationNormalizer]] = None,
    training: bool = False,
) -> Tuple[np.ndarray, BatchTrace]:
    """
    Evaluate the model on every row of ``X`` and keep the trace.

    Raises:
        DimensionError: If ``X`` does not have ``n_in`` columns
        NumericalError: If an intermediate value is not finite (names the layer)
    """
    X = _check_batch(model, X)
    if normalizers is not None and len(normalizers) != model.depth:
        raise DimensionError(
            f"{len(normalizers)} normalizers for {model.depth} layers", error_code="SHAPE_MISMATCH"
        )

    h, input_pre, input_inner = model.input_map.apply_batch(X)
    if not np.all(np.isfinite(h)):
        raise NumericalError("Non-finite value after input map", error_code="NON_FINITE",
                             details={"layer": 0})
    trace = BatchTrace(inputs=X, input_pre=input_pre, input_inner=input_inner, states=[h])

    for index, layer in enumerate(model.layers, start=1):
        a = h @ layer.W.T + layer.b
        if normalizers is not None:
            z, cache = normalizers[index - 1].normalize(a, training)
        else:
            z, cache = a, None
        s = layer.act.apply(z)
        h = model.eps * h + model.delta * (s @ layer.W_tilde.T + layer.b_tilde)
        if not np.all(np.isfinite(h)):
            raise NumericalError(f"Non-finite hidden state in layer {index}", error_code="NON_FINITE",
                                 details={"layer": index})
        trace.preacts.append(a)
        trace.normed.append(z)
        trace.sigmas.append(s)
        trace.norm_caches.append(cache)
        trace.states.append(h)

    y, output_pre, output_inner = model.output_map.apply_batch(h)
    if not np.all(np.isfinite(y)):
        raise NumericalError("Non-finite value after output map", error_code="NON_FINITE",
                             details={"layer": model.depth + 1})
    trace.output_pre = output_pre
    trace.output_inner = output_inner
    return y, trace


def forward(model: ResNetModel, x: Vec64) -> Tuple[Vec64, HiddenTrace]:
    """Evaluate Phi at a single input and return the hidden trace."""
    x = as_vec(x, "x")
    if x.size != model.n_in:
        raise DimensionError(f"x has {x.size} entries, model expects {model.n_in}", error_code="SHAPE_MISMATCH")
    y, trace = forward_batch(model, x[None, :])
    hidden = HiddenTrace(
        states=tuple(state[0].copy() for state in trace.states),
        preacts=tuple(a[0].copy() for a in trace.preacts),
    )
    return y[0], hidden


def evaluate(model: ResNetModel, X) -> np.ndarray:
    """Outputs only, for a batch (shape (N, n_out))."""
    y, _ = forward_batch(model, X)
    return y


def forward_unrolled(model: ResNetModel, x: Vec64) -> Vec64:
    """
    Evaluate Phi through the closed-form unrolled hidden states

        h_l = eps^l lambda(x) + delta * sum_{j<=l} eps^(l-j) f_j(h_{j-1}).
    """
    x = as_vec(x, "x")
    if x.size != model.n_in:
        raise DimensionError(f"x has {x.size} entries, model expects {model.n_in}", error_code="SHAPE_MISMATCH")
    h0 = model.input_map(x)
    residuals: List[np.ndarray] = []
    h = h0
    for l, layer in enumerate(model.layers, start=1):
        residuals.append(layer.residual(h[None, :])[0])
        acc = np.zeros_like(h0)
        for j, f_j in enumerate(residuals, start=1):
            acc = acc + model.eps ** (l - j) * f_j
        h = model.eps ** l * h0 + model.delta * acc
        if not np.all(np.isfinite(h)):
            raise NumericalError(f"Non-finite hidden state in layer {l}", error_code="NON_FINITE",
                                 details={"layer": l})
    return model.output_map(h)


def resnet_to_mlp(model: ResNetModel) -> ResNetModel:
    """The eps = 0 (feed-forward) counterpart with identical parameters."""
    return replace(model, eps=0.0)
