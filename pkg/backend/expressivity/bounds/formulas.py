"""
Closed-form proximity bounds.

Euler (ResNet with eps = 1 vs. the neural ODE it discretizes):

    general:    K_lambda~ * (M_theta delta / (2 K_theta)) * (exp(K_theta T) - 1)
    canonical:  K_lambda~ * ((w~ S_sigma + b~) delta / (2 w)) * (exp(K_sigma w~ w T) - 1)

with K_theta = K_sigma w~ w and M_theta = w~ K_sigma (w~ S_sigma + b~). The
canonical form certifies the Euler error when w = omega_inf <= 1.

MLP (ResNet with 0 < eps < 1 vs. the same weights at eps = 0):

    eps * K_lambda~ * ((delta K_f)^(L-1) S_lambda
                       + (S_lambda + delta S_f / (1 - eps)) * sum_{j=0}^{L-2} (delta K_f)^j)
"""

import math
from typing import Optional, Tuple

from pydantic import BaseModel, Field

from utils.core.exceptions import ValidationError
from ..models import Activation


class CanonicalConstants(BaseModel):
    """Max-norm weight bounds of canonical residual branches."""

    omega_inf: float = Field(..., ge=0, description="max ||W||_inf")
    omega_tilde_inf: float = Field(..., ge=0, description="max ||W~||_inf")
    beta_tilde_inf: float = Field(..., ge=0, description="max ||b~||_inf")
    S_sigma: float = Field(1.0, ge=0)
    K_sigma: float = Field(1.0, ge=0)

    @property
    def K_theta(self) -> float:
        return self.K_sigma * self.omega_tilde_inf * self.omega_inf

    @property
    def M_theta(self) -> float:
        return self.omega_tilde_inf * self.K_sigma * (self.omega_tilde_inf * self.S_sigma + self.beta_tilde_inf)


class EulerBoundInputs(BaseModel):
    K_lambda_tilde: float = Field(..., ge=0)
    K_theta: float = Field(..., ge=0)
    M_theta: float = Field(..., ge=0)
    T: float = Field(..., gt=0)
    delta: float = Field(..., gt=0)
    canonical: Optional[CanonicalConstants] = None


class MlpBoundInputs(BaseModel):
    eps: float = Field(..., description="Skip parameter, 0 < eps < 1")
    delta: float = Field(..., gt=0)
    L: int = Field(..., ge=1)
    S_f: float = Field(..., ge=0)
    K_f: float = Field(..., ge=0)
    S_lambda: float = Field(..., ge=0)
    K_lambda_tilde: float = Field(..., ge=0)


def _growth(rate: float, T: float) -> float:
    """``(exp(rate T) - 1) / rate`` with its limit T at rate = 0."""
    if rate == 0:
        return T
    return math.expm1(rate * T) / rate


def euler_bound_general(inputs: EulerBoundInputs) -> float:
    """
    Global Euler error bound from Lipschitz and second-derivative constants.

    K_theta = 0 uses the continuous extension ``K_lambda~ * M_theta * delta * T / 2``.
    """
    if inputs.delta > inputs.T:
        raise ValidationError(f"Step {inputs.delta} exceeds horizon {inputs.T}", error_code="STEP_EXCEEDS_HORIZON")
    return inputs.K_lambda_tilde * inputs.M_theta * inputs.delta / 2.0 * _growth(inputs.K_theta, inputs.T)


def euler_bound_canonical(canonical: CanonicalConstants, K_lambda_tilde: float, T: float, delta: float) -> float:
    """Euler error bound of a canonical field; omega_inf = 0 uses the continuous extension."""
    if delta > T:
        raise ValidationError(f"Step {delta} exceeds horizon {T}", error_code="STEP_EXCEEDS_HORIZON")
    c = canonical
    field_bound = c.omega_tilde_inf * c.S_sigma + c.beta_tilde_inf
    if c.omega_inf == 0:
        return K_lambda_tilde * field_bound * delta / 2.0 * c.K_sigma * c.omega_tilde_inf * T
    return K_lambda_tilde * (field_bound * delta / (2.0 * c.omega_inf)) * math.expm1(c.K_theta * T)


def mlp_bound_explicit(inputs: MlpBoundInputs) -> float:
    """
    Non-asymptotic bound of ``||Phi_eps - Phi_0||_inf``.

    Raises:
        ValidationError: Unless 0 < eps < 1
    """
    eps = inputs.eps
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"MLP bound needs 0 < eps < 1, got eps={eps}", error_code="EPS_OUT_OF_RANGE")
    q = inputs.delta * inputs.K_f
    hidden = inputs.S_lambda + inputs.delta * inputs.S_f / (1.0 - eps)
    series = sum(q ** j for j in range(inputs.L - 1))
    return eps * inputs.K_lambda_tilde * (q ** (inputs.L - 1) * inputs.S_lambda + hidden * series)


def mlp_bound_canonical_constants(
    act: Activation, omega_inf: float, omega_tilde_inf: float, beta_tilde_inf: float
) -> Tuple[float, float, float, float]:
    """``(S_f, K_f, S_lambda, K_lambda~)`` when lambda, lambda~ share the branch weight bounds."""
    if min(omega_inf, omega_tilde_inf, beta_tilde_inf) < 0:
        raise ValidationError("Norm bounds must be non-negative", error_code="NEGATIVE_NORM")
    s = omega_tilde_inf * act.S_sigma + beta_tilde_inf
    k = omega_tilde_inf * act.K_sigma * omega_inf
    return s, k, s, k
