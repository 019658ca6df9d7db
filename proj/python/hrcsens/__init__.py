"""Sensitivity analysis of the causal hazard ratio under shared frailty models."""

from ._hrcsens import (
    HrcError,
    Sample,
    __version__,
    bootstrap,
    fit_cox,
    kaplan_meier,
    laplace,
    logrank,
    nelson_aalen,
    read_csv,
    run_cli,
    sensitivity,
    simulate,
    study,
    tau_to_theta,
    theta_to_tau,
    time_grid,
    true_hrc,
    varphi,
)

__all__ = [
    "HrcError",
    "Sample",
    "__version__",
    "bootstrap",
    "fit_cox",
    "kaplan_meier",
    "laplace",
    "logrank",
    "nelson_aalen",
    "read_csv",
    "run_cli",
    "sensitivity",
    "simulate",
    "study",
    "tau_to_theta",
    "theta_to_tau",
    "time_grid",
    "true_hrc",
    "varphi",
]
