"""
Component-wise activation functions.

Only smooth, bounded, strictly monotone activations are admitted; ReLU-type
functions are deliberately absent because the critical-point analysis needs a
continuous, strictly positive derivative.
"""

from enum import Enum

import numpy as np

from utils.core.exceptions import ValidationError


class Activation(str, Enum):
    """Supported activations with their global bounds S_sigma and K_sigma."""

    TANH = "tanh"
    SIGMOID = "sigmoid"

    @property
    def S_sigma(self) -> float:
        """Global bound on |sigma(y)|."""
        return 1.0

    @property
    def K_sigma(self) -> float:
        """Global bound on |sigma'(y)| (attained at y = 0)."""
        return 1.0 if self is Activation.TANH else 0.25

    def apply(self, y):
        if self is Activation.TANH:
            return np.tanh(y)
        # 0.5 (1 + tanh(y/2)) is the logistic function without exp overflow
        return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(y, dtype=np.float64)))

    def derivative(self, y):
        # sech^2 keeps full relative accuracy in the tails where 1 - tanh^2 cancels
        y = np.asarray(y, dtype=np.float64)
        if self is Activation.SIGMOID:
            y = 0.5 * y
        with np.errstate(over="ignore"):
            sech2 = 1.0 / np.cosh(y) ** 2
        return sech2 if self is Activation.TANH else 0.25 * sech2

    def derivative_from_value(self, s):
        """sigma' expressed through sigma(y), avoiding a second transcendental call."""
        if self is Activation.TANH:
            return 1.0 - s * s
        return s * (1.0 - s)

    def min_derivative_on(self, radius: float) -> float:
        """
        ``inf_{|y| <= radius} sigma'(y)``.

        Both activations have an even derivative that decreases in |y|, so the
        infimum sits at the edge of the interval.
        """
        if radius < 0:
            raise ValidationError(f"radius must be non-negative, got {radius}", error_code="BAD_RADIUS")
        if not np.isfinite(radius):
            return 0.0
        return float(self.derivative(radius))

    def inverse_derivative(self, v):
        """
        Non-negative preimage of ``v`` under sigma'.

        tanh: ``arccosh(v^{-1/2})`` for v in (0, 1]; sigmoid: the logit of the
        upper root of ``s (1 - s) = v`` for v in (0, 1/4].
        """
        v = np.asarray(v, dtype=np.float64)
        if np.any(v <= 0.0) or np.any(v > self.K_sigma):
            raise ValidationError(
                f"inverse derivative of {self.value} needs v in (0, {self.K_sigma}]",
                error_code="OUTSIDE_DERIVATIVE_RANGE",
                details={"v": v.tolist()},
            )
        if self is Activation.TANH:
            return np.arccosh(1.0 / np.sqrt(v))
        s = 0.5 * (1.0 + np.sqrt(np.maximum(1.0 - 4.0 * v, 0.0)))
        return np.log(s / (1.0 - s))
