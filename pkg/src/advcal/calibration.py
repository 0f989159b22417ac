"""Standard / adversarial calibration verdicts for zoo losses.

The adversarial verdict combines three clauses: standard calibration, the
structural flags (decreasing, strictly decreasing near 0) and the requirement
that 0 is not a minimizer of ``S(alpha) = phi(alpha)/2 + phi(-alpha)/2`` over
the extended reals. Each verdict carries the numbers it was decided on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import MarginLoss, SearchConfig, optimal_conditional_risk

__all__ = [
    "ETA_GRID",
    "CalibrationReport",
    "StandardCalibration",
    "check_standard_calibration",
    "check_adversarial_calibration",
    "check_zero_one_like",
    "audit",
]

ETA_GRID = np.round(np.linspace(0.0, 1.0, 101), 12)
DERIVATIVE_STEP = 1e-5
DERIVATIVE_THRESHOLD = -1e-7
LIMIT_PROBE = 50.0
LIMIT_TOL = 1e-6

# verdict rules, in the order they are tried
RULE_NOT_STANDARD = "not_standard_calibrated"
RULE_CONVEX = "convex_corollary"
RULE_ODD = "odd_plus_constant_corollary"
RULE_NECESSARY = "necessary_condition"
RULE_INCONCLUSIVE = "inconclusive"
RULE_SHIFTED = "shifted_odd_proposition"
RULE_SUFFICIENT = "sufficient_condition"


@dataclass(frozen=True)
class StandardCalibration:
    calibrated: bool
    method: str  # "derivative" or "argmin_sign"
    derivative_at_zero: float | None = None
    sign_failures: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sign_failures"] = [list(f) for f in self.sign_failures]
        return d


@dataclass(frozen=True)
class CalibrationReport:
    loss_name: str
    loss: dict
    flags: dict
    standard: StandardCalibration
    zero_in_argmin_symmetrized: bool
    symmetrized_at_zero: float
    symmetrized_min: float
    symmetrized_gap: float
    adversarially_calibrated: bool | None
    failed_clauses: tuple
    zero_one_like: bool
    measured_limits: tuple
    verdict_rule: str
    argmin: dict = field(default_factory=dict)

    @property
    def standard_calibrated(self) -> bool:
        return self.standard.calibrated

    def to_dict(self) -> dict:
        return {
            "loss_name": self.loss_name,
            "loss": self.loss,
            "flags": self.flags,
            "standard_calibrated": self.standard.calibrated,
            "standard_evidence": self.standard.to_dict(),
            "zero_in_argmin_symmetrized": self.zero_in_argmin_symmetrized,
            "symmetrized_evidence": {
                "S_at_zero": self.symmetrized_at_zero,
                "S_min": self.symmetrized_min,
                "gap": self.symmetrized_gap,
                "argmin": self.argmin,
            },
            "adversarially_calibrated": self.adversarially_calibrated,
            "failed_clauses": list(self.failed_clauses),
            "zero_one_like": self.zero_one_like,
            "measured_limits": list(self.measured_limits),
            "verdict_rule": self.verdict_rule,
        }


def check_standard_calibration(loss: MarginLoss, search: SearchConfig | None = None) -> StandardCalibration:
    """Convex losses: ``phi'(0) < 0``. Others: every near-minimizer predicts the majority label."""
    if loss.is_convex:
        h = DERIVATIVE_STEP
        d0 = float((loss(h) - loss(-h)) / (2 * h))
        return StandardCalibration(d0 < DERIVATIVE_THRESHOLD, "derivative", derivative_at_zero=d0)

    failures = []
    for eta in ETA_GRID:
        if eta == 0.5:
            continue
        _, summ = optimal_conditional_risk(loss, float(eta), search)
        wrong = summ.has_negative if eta > 0.5 else summ.has_positive
        if wrong:
            failures.append((float(eta), summ.finite_min, summ.finite_max))
    return StandardCalibration(not failures, "argmin_sign", sign_failures=tuple(failures))


def check_zero_one_like(loss: MarginLoss) -> bool:
    """Limits exactly (1, 0) and the ``lam + psi(. - tau)`` form with ``psi`` odd."""
    return loss.has_shifted_odd_form and loss.limits == (1.0, 0.0)


def _measured_limits(loss: MarginLoss) -> tuple[float, float]:
    return float(loss(-LIMIT_PROBE)), float(loss(LIMIT_PROBE))


def check_adversarial_calibration(
    loss: MarginLoss, search: SearchConfig | None = None
) -> tuple[bool | None, CalibrationReport]:
    """Adversarial verdict plus the full report; ``None`` means inconclusive."""
    report = audit(loss, search)
    return report.adversarially_calibrated, report


def audit(loss: MarginLoss, search: SearchConfig | None = None) -> CalibrationReport:
    std = check_standard_calibration(loss, search)
    s_min, summ = optimal_conditional_risk(loss, 0.5, search)
    s0 = float(loss(0.0))
    zero_in = summ.zero_in
    flags_ok = loss.is_decreasing and loss.is_strictly_decreasing_near_zero

    failed = []
    if not std.calibrated:
        failed.append("standard_calibration")
    if not flags_ok:
        failed.append("decreasing_flags")
    if zero_in:
        failed.append("zero_not_in_argmin")

    necessary_fails = (not std.calibrated) or zero_in
    if necessary_fails:
        adv = False
    elif not flags_ok:
        adv = None
    else:
        adv = True

    if not std.calibrated:
        rule = RULE_NOT_STANDARD
    elif loss.is_convex:
        rule = RULE_CONVEX
    elif loss.is_odd_plus_constant:
        rule = RULE_ODD
    elif zero_in:
        rule = RULE_NECESSARY
    elif not flags_ok:
        rule = RULE_INCONCLUSIVE
    elif loss.has_shifted_odd_form:
        rule = RULE_SHIFTED
    else:
        rule = RULE_SUFFICIENT

    limits = _measured_limits(loss)
    return CalibrationReport(
        loss_name=loss.name,
        loss=loss.to_dict(),
        flags=loss.flags,
        standard=std,
        zero_in_argmin_symmetrized=zero_in,
        symmetrized_at_zero=s0,
        symmetrized_min=s_min,
        symmetrized_gap=s0 - s_min,
        adversarially_calibrated=adv,
        failed_clauses=tuple(failed),
        zero_one_like=check_zero_one_like(loss),
        measured_limits=tuple(x if math.isfinite(x) else None for x in limits),
        verdict_rule=rule,
        argmin=summ.to_dict(),
    )
