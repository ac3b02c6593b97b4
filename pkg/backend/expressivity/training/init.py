"""
Weight initialization for skeletons.
"""

from fnmatch import fnmatchcase
from typing import Iterable

import numpy as np

from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng
from ..models import ModelSkeleton, ResNetModel

logger = get_project_logger(__name__)


def is_frozen(key: str, patterns: Iterable[str]) -> bool:
    return any(fnmatchcase(key, pattern) for pattern in patterns)


def _is_scalar(skeleton: ModelSkeleton) -> bool:
    return skeleton.n_in == skeleton.n_hid == skeleton.n_out == skeleton.width == 1


def xavier_init(skeleton: ModelSkeleton, seed: int) -> ResNetModel:
    """
    Initialize every trainable weight of ``skeleton``.

    Scalar networks draw weights from N(0, 1). Otherwise weights are Xavier
    uniform on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))] with
    fan_in the column count and fan_out the row count. Biases start at 0 and
    frozen entries keep their structural values.

    Args:
        skeleton (ModelSkeleton): Architecture to initialize
        seed (int): Root seed, the stream is ``(seed, "init")``

    Returns:
        ResNetModel: The initialized model
    """
    template = skeleton.template()
    frozen = skeleton.frozen_patterns()
    rng = make_rng(seed, "init")
    scalar = _is_scalar(skeleton)

    params = {}
    for key, value in template.parameters().items():
        if is_frozen(key, frozen):
            continue
        name = key.rsplit(".", 1)[-1]
        if name in ("b", "b_tilde"):
            params[key] = np.zeros_like(value)
        elif scalar:
            params[key] = rng.standard_normal(value.shape)
        else:
            fan_out, fan_in = value.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[key] = rng.uniform(-limit, limit, size=value.shape)
    logger.debug(f"initialized {len(params)} trainable tensors (scalar={scalar})")
    return template.with_parameters(params)
