import os

# must be set before the first logger is created
os.environ.setdefault("RESNETLAB_LOG_FILE", "0")
os.environ.setdefault("RESNETLAB_THREADS", "2")

import numpy as np
import pytest

from backend.expressivity.models import (
    Activation,
    AffineSigmaMap,
    ResidualLayer,
    ResNetModel,
    random_model,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def make_random_model(rng):
    """Factory for canonical ResNets with weights in [-2, 2]."""

    def factory(n_in=2, n_hid=2, depth=3, eps=1.0, delta=0.5, activation=Activation.TANH, **kwargs):
        return random_model(rng, n_in=n_in, n_hid=n_hid, depth=depth, eps=eps, delta=delta,
                            activation=activation, **kwargs)

    return factory


def scalar_model(eps, delta, layers, out_w=1.0, out_b=0.0):
    """1-1-1 model with identity input map; ``layers`` holds (W~, W, b, b~) tuples."""
    return ResNetModel(
        eps=eps,
        delta=delta,
        input_map=AffineSigmaMap.identity(1),
        layers=tuple(
            ResidualLayer(W=[[w]], W_tilde=[[wt]], b=[b], b_tilde=[bt], act=Activation.TANH)
            for wt, w, b, bt in layers
        ),
        output_map=AffineSigmaMap(W=[[out_w]], W_tilde=[[1.0]], b=[out_b], b_tilde=[0.0], affine_only=True),
    )


@pytest.fixture
def one_layer_model():
    return scalar_model(1.0, 1.0, [(1.0, 1.0, 0.0, 0.0)])
