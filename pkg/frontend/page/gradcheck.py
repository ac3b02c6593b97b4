"""
``resnetlab gradcheck``: exact input gradients against finite differences on
a randomized corpus of canonical ResNets.
"""

from typing import List

import numpy as np
import pandas as pd

from backend.expressivity.gradients import fd_gradient, input_gradient
from backend.expressivity.models import random_model
from frontend.run_config import GradcheckConfig
from frontend.ui_components import ArtifactWriter, print_summary, run_parallel
from utils.core.exceptions import PropertyViolation
from utils.core.logging import get_project_logger
from utils.core.seeding import make_rng

logger = get_project_logger(__name__)

COLUMNS = ["case", "n_in", "n_hid", "depth", "activation", "abs_err", "rel_err", "pass"]


def check_case(config: GradcheckConfig, case: int) -> dict:
    rng = make_rng(config.seed, "gradcheck", case)
    n_in = int(rng.integers(1, config.max_n_in + 1))
    n_hid = int(rng.integers(1, config.max_n_hid + 1))
    depth = int(rng.integers(0, config.max_depth + 1))
    activation = config.activations[int(rng.integers(len(config.activations)))]
    model = random_model(rng, n_in=n_in, n_hid=n_hid, depth=depth, eps=float(rng.uniform(0, 1.5)),
                         delta=float(rng.uniform(0, 1.5)), activation=activation,
                         weight_range=config.weight_range)
    x = rng.uniform(-1.0, 1.0, size=n_in)
    exact = input_gradient(model, x).grad
    approx = fd_gradient(model, x, h=config.fd_step)
    abs_err = float(np.max(np.abs(exact - approx)))
    rel_err = abs_err / max(float(np.max(np.abs(approx))), 1.0)
    return {
        "case": case, "n_in": n_in, "n_hid": n_hid, "depth": depth, "activation": activation.value,
        "abs_err": abs_err, "rel_err": rel_err, "pass": rel_err < config.tolerance,
    }


def main(config: GradcheckConfig, writer: ArtifactWriter) -> List[int]:
    if config.cases == 0:
        logger.warning("Empty gradient-check sweep, nothing to do")
    rows = run_parallel(lambda case: check_case(config, case), list(range(config.cases)))
    frame = pd.DataFrame(rows, columns=COLUMNS)
    writer.write_csv("gradcheck.csv", frame)

    failures = int((~frame["pass"].astype(bool)).sum()) if len(frame) else 0
    worst = float(frame["rel_err"].max()) if len(frame) else 0.0
    print_summary("gradcheck", {
        "cases": config.cases,
        "max rel. error": worst,
        "tolerance": config.tolerance,
        "result": "PASS" if failures == 0 else f"FAIL ({failures})",
    })
    if failures:
        raise PropertyViolation(
            f"{failures} of {config.cases} gradient checks exceed {config.tolerance:g}",
            error_code="GRADIENT_MISMATCH",
            details={"max_rel_err": worst},
        )
    return [config.seed]
