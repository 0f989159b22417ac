"""Adversarial calibration and consistency lab for margin losses on finite distributions."""

from .calibration import CalibrationReport, audit, check_adversarial_calibration, check_standard_calibration
from .errors import (
    AdvcalError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    InvariantViolation,
    NumericError,
    PreconditionError,
    ResourceError,
)
from .finite_instance import (
    Atom,
    ProblemInstance,
    adversarial_bayes_risk,
    brute_force_bayes_risk,
    optimal_attack,
    standard_bayes_risk,
    verify_strong_duality,
)
from .grid_world import Axis, GridClassifier, adv_surrogate_risk, adv_zero_one_risk
from .losses import MarginLoss, get_loss, make_loss, optimal_conditional_risk, zoo
from .training import TrainConfig, pathological_sequence, train

__version__ = "0.1.0"

__all__ = [
    "AdvcalError",
    "Atom",
    "Axis",
    "CalibrationReport",
    "ConfigurationError",
    "DivergenceError",
    "DomainError",
    "GridClassifier",
    "InvariantViolation",
    "MarginLoss",
    "NumericError",
    "PreconditionError",
    "ProblemInstance",
    "ResourceError",
    "TrainConfig",
    "adv_surrogate_risk",
    "adv_zero_one_risk",
    "adversarial_bayes_risk",
    "audit",
    "brute_force_bayes_risk",
    "check_adversarial_calibration",
    "check_standard_calibration",
    "get_loss",
    "make_loss",
    "optimal_attack",
    "optimal_conditional_risk",
    "pathological_sequence",
    "standard_bayes_risk",
    "train",
    "verify_strong_duality",
    "zoo",
]
