"""Radio tomographic imaging with rotating sensors.

Thin Python layer over the C++ core: scenario construction, TDMA simulation,
RTI model training and localization, network and incremental calibration, and
the experiment harness.
"""

from ._core import (
    Error,
    Frame,
    InvalidArgument,
    IoError,
    Model,
    Network,
    Scenario,
    SingularSystem,
    build_projection,
    covariance_matrix,
    ellipse_area,
    ellipse_contains,
    excess_probability,
    fit_path_loss,
    improvement,
    incremental_calibrate,
    lambda_widths,
    multinomial_bias_test,
    obstruction_sign_rates,
    run_experiment,
)

VARIANTS = ("standard", "servo-random", "servo-default", "servo-calibrated")

__all__ = [
    "Error",
    "Frame",
    "InvalidArgument",
    "IoError",
    "Model",
    "Network",
    "Scenario",
    "SingularSystem",
    "VARIANTS",
    "build_projection",
    "covariance_matrix",
    "ellipse_area",
    "ellipse_contains",
    "excess_probability",
    "fit_path_loss",
    "improvement",
    "incremental_calibrate",
    "lambda_widths",
    "multinomial_bias_test",
    "obstruction_sign_rates",
    "run_experiment",
]
