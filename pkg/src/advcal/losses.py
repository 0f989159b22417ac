"""Margin-loss zoo, conditional risks and their infimum over the extended reals.

A margin loss is a nonnegative function ``phi`` of the signed margin ``y * f(x)``.
Extended-real arguments are plain Python floats, so ``math.inf`` and
``-math.inf`` stand for the two points at infinity; comparisons already follow
``-inf < finite < +inf``.

The zoo::

    hinge            max(1 - t, 0)
    logistic         log(1 + exp(-t))
    square           (1 - t)^2
    exponential      exp(-t)
    sigmoid          1 / (1 + exp(t))                 = 1/2 + psi_sig(t)
    ramp             1/2 * clip(1 - t, 0, 2)          = 1/2 + psi_ramp(t)
    shifted_sigmoid  lam + psi_sig(t - tau)           (lam = 1/2 gives 1/(1 + exp(t - tau)))
    shifted_ramp     lam + psi_ramp(t - tau)

with the odd parts ``psi_sig(u) = 1/(1 + exp(u)) - 1/2`` and
``psi_ramp(u) = 1/2 * clip(-u, -1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, DomainError, NumericError

__all__ = [
    "KINDS",
    "MarginLoss",
    "ReferenceLoss",
    "ZERO_ONE",
    "ZERO_ONE_LEQ",
    "SearchConfig",
    "ArgminSummary",
    "make_loss",
    "zoo",
    "get_loss",
    "eval_loss",
    "symmetrized",
    "conditional_risk",
    "optimal_conditional_risk",
    "sign",
]

KINDS = (
    "hinge",
    "logistic",
    "square",
    "exponential",
    "sigmoid",
    "ramp",
    "shifted_sigmoid",
    "shifted_ramp",
)
_CONVEX = {"hinge", "logistic", "square", "exponential"}
_ODD_FAMILY = {"sigmoid", "ramp", "shifted_sigmoid", "shifted_ramp"}
_SHIFTED = {"shifted_sigmoid", "shifted_ramp"}

# default shift per kind when the caller does not give one
DEFAULT_TAU = {"shifted_sigmoid": 1.0, "shifted_ramp": 0.5}


def sign(v):
    """Sign with the convention ``sign(0) = +1``."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def _psi_sigmoid(u):
    return expit(-u) - 0.5


def _psi_ramp(u):
    return 0.5 * np.clip(-u, -1.0, 1.0)


@dataclass(frozen=True)
class MarginLoss:
    """A member of the zoo, evaluated as ``phi(t)`` on (arrays of) margins.

    ``tau`` and ``lam`` are only meaningful for the odd family; ``lam`` is the
    constant in ``phi = lam + psi(. - tau)``.
    """

    name: str
    kind: str
    tau: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown loss kind {self.kind!r}")
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ConfigurationError(f"tau must be finite and >= 0, got {self.tau}")
        if self.kind in _SHIFTED:
            if self.lam < 0.5 or not math.isfinite(self.lam):
                # psi >= -1/2 for both odd parts, so lam >= 1/2 keeps phi >= 0
                raise ConfigurationError(f"{self.kind} needs lambda >= 0.5, got {self.lam}")
        elif self.kind in _ODD_FAMILY:
            if self.tau != 0.0 or self.lam != 0.5:
                raise ConfigurationError(f"{self.kind} is fixed at tau=0, lambda=0.5")
        elif self.tau != 0.0 or self.lam != 0.0:
            raise ConfigurationError(f"{self.kind} takes no tau/lambda")

    # -- evaluation -----------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "hinge":
            return np.maximum(1.0 - t, 0.0)
        if k == "logistic":
            return np.logaddexp(0.0, -t)
        if k == "square":
            return (1.0 - t) ** 2
        if k == "exponential":
            with np.errstate(over="ignore"):
                return np.exp(-t)
        if k == "sigmoid":
            return expit(-t)
        if k == "ramp":
            return 0.5 * np.clip(1.0 - t, 0.0, 2.0)
        if k == "shifted_sigmoid":
            return self.lam + _psi_sigmoid(t - self.tau)
        return self.lam + _psi_ramp(t - self.tau)

    def derivative(self, t):
        """Derivative where smooth; a fixed subgradient at kinks."""
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "hinge":
            return np.where(t <= 1.0, -1.0, 0.0)
        if k == "logistic":
            return -expit(-t)
        if k == "square":
            return -2.0 * (1.0 - t)
        if k == "exponential":
            return -np.exp(-t)
        if k == "sigmoid":
            return -expit(-t) * expit(t)
        if k == "ramp":
            return np.where(np.abs(t) <= 1.0, -0.5, 0.0)
        u = t - self.tau
        if k == "shifted_sigmoid":
            return -expit(-u) * expit(u)
        return np.where(np.abs(u) <= 1.0, -0.5, 0.0)

    def psi(self, u):
        """Odd part of an odd-family loss."""
        if self.kind not in _ODD_FAMILY:
            raise ConfigurationError(f"{self.kind} has no odd decomposition")
        u = np.asarray(u, dtype=float)
        return _psi_sigmoid(u) if self.kind.endswith("sigmoid") else _psi_ramp(u)

    def value(self, alpha: float) -> float:
        """``phi`` at an extended real; the points at infinity use the limits."""
        if alpha == math.inf:
            return self.limits[1]
        if alpha == -math.inf:
            return self.limits[0]
        return float(self(alpha))

    def pointwise(self, y, v):
        return self(np.asarray(y, dtype=float) * np.asarray(v, dtype=float))

    # -- derived structure ---------------------------------------------
    @property
    def limits(self) -> tuple[float, float]:
        """(value at -inf, value at +inf)."""
        k = self.kind
        if k == "square":
            return (math.inf, math.inf)
        if k in _CONVEX:
            return (math.inf, 0.0)
        return (self.lam + 0.5, self.lam - 0.5)

    @property
    def is_convex(self) -> bool:
        return self.kind in _CONVEX

    @property
    def is_decreasing(self) -> bool:
        return self.kind != "square"

    @property
    def is_strictly_decreasing_near_zero(self) -> bool:
        if self.kind == "shifted_ramp":
            # psi_ramp(. - tau) is flat outside |t - tau| < 1
            return self.tau < 1.0
        return True

    @property
    def has_shifted_odd_form(self) -> bool:
        """``phi = lam + psi(. - tau)`` with ``psi`` odd, ``tau >= 0``."""
        return self.kind in _ODD_FAMILY

    @property
    def is_odd_plus_constant(self) -> bool:
        return self.kind in _ODD_FAMILY and self.tau == 0.0

    @property
    def flags(self) -> dict:
        return {
            "is_convex": self.is_convex,
            "is_decreasing": self.is_decreasing,
            "is_strictly_decreasing_near_zero": self.is_strictly_decreasing_near_zero,
            "is_odd_plus_constant": self.is_odd_plus_constant,
        }

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau": self.tau, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "MarginLoss":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigurationError("loss description needs a 'kind' field")
        extra = set(data) - {"kind", "tau", "lambda", "name"}
        if extra:
            raise ConfigurationError(f"unexpected loss fields: {sorted(extra)}")
        return make_loss(data["kind"], tau=data.get("tau"), lam=data.get("lambda"), name=data.get("name"))


@dataclass(frozen=True)
class ReferenceLoss:
    """The two 0/1 losses. Neither is a margin loss: both look at ``(y, v)``."""

    kind: str
    name: str = field(default="")

    def __post_init__(self):
        if self.kind not in ("zero_one", "zero_one_leq"):
            raise ConfigurationError(f"unknown reference loss {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def pointwise(self, y, v):
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "zero_one":
            return (y * sign(v) <= 0).astype(float)
        return (y * v <= 0).astype(float)


ZERO_ONE = ReferenceLoss("zero_one")
ZERO_ONE_LEQ = ReferenceLoss("zero_one_leq")

AnyLoss = Union[MarginLoss, ReferenceLoss]


def make_loss(kind: str, tau: float | None = None, lam: float | None = None, name: str | None = None) -> MarginLoss:
    """Build a zoo loss, filling the per-kind defaults for tau and lambda."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown loss kind {kind!r}; choose from {', '.join(KINDS)}")
    if kind in _SHIFTED:
        tau = DEFAULT_TAU[kind] if tau is None else float(tau)
        lam = 0.5 if lam is None else float(lam)
    elif kind in _ODD_FAMILY:
        tau = 0.0 if tau is None else float(tau)
        lam = 0.5 if lam is None else float(lam)
    else:
        tau = 0.0 if tau is None else float(tau)
        lam = 0.0 if lam is None else float(lam)
    if name is None:
        name = f"{kind}(tau={tau:g})" if kind in _SHIFTED else kind
    return MarginLoss(name=name, kind=kind, tau=tau, lam=lam)


def zoo() -> list[MarginLoss]:
    """The eight losses audited by default."""
    return [make_loss(k) for k in KINDS]


def get_loss(name: str, tau: float | None = None, lam: float | None = None) -> AnyLoss:
    """Resolve a loss by kind name (``zero_one`` / ``zero_one_leq`` included)."""
    if name in ("zero_one", "zero_one_leq"):
        return ReferenceLoss(name)
    return make_loss(name, tau=tau, lam=lam)


def eval_loss(loss: MarginLoss, t: float) -> float:
    if not math.isfinite(t):
        raise DomainError("eval_loss takes a finite margin; use MarginLoss.value for +-inf")
    return float(loss(t))


def symmetrized(loss: MarginLoss, alpha: float) -> float:
    """``S(alpha) = phi(alpha)/2 + phi(-alpha)/2``, the conditional risk at eta = 1/2."""
    return 0.5 * loss.value(alpha) + 0.5 * loss.value(-alpha)


def _check_eta(eta: float) -> None:
    if not (0.0 <= eta <= 1.0):
        raise DomainError(f"eta must lie in [0, 1], got {eta}")


def _cond_risk_array(loss: AnyLoss, eta: float, alpha):
    alpha = np.asarray(alpha, dtype=float)
    pos = loss.pointwise(1.0, alpha)
    neg = loss.pointwise(-1.0, alpha)
    # 0 * inf must count as 0 at eta in {0, 1}
    out = np.zeros(np.broadcast(pos, neg).shape)
    if eta > 0:
        out = out + eta * pos
    if eta < 1:
        out = out + (1.0 - eta) * neg
    return out


def conditional_risk(loss: AnyLoss, eta: float, alpha: float) -> float:
    """``eta * L(+1, alpha) + (1 - eta) * L(-1, alpha)`` for any extended real alpha."""
    _check_eta(eta)
    if isinstance(loss, MarginLoss) and math.isinf(alpha):
        pos, neg = loss.value(alpha), loss.value(-alpha)
        return (eta * pos if eta > 0 else 0.0) + ((1.0 - eta) * neg if eta < 1 else 0.0)
    return float(_cond_risk_array(loss, eta, alpha))


@dataclass(frozen=True)
class SearchConfig:
    """Grid bound/step, golden-section tolerance and near-minimizer tolerance."""

    bound: float = 50.0
    step: float = 0.01
    refine_tol: float = 1e-10
    argmin_tol: float = 1e-7

    def grid(self) -> np.ndarray:
        n = int(round(self.bound / self.step))
        return np.arange(-n, n + 1) * self.step


@dataclass(frozen=True)
class ArgminSummary:
    """Which extended reals come within ``tol`` of the minimum."""

    value: float
    argmin: float
    tol: float
    zero_in: bool
    pos_inf_in: bool
    neg_inf_in: bool
    finite_count: int
    finite_min: float | None
    finite_max: float | None
    has_positive: bool  # some near-minimizer has sign +1 (alpha = 0 included)
    has_negative: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmin": _json_float(self.argmin),
            "tol": self.tol,
            "zero_in": self.zero_in,
            "pos_inf_in": self.pos_inf_in,
            "neg_inf_in": self.neg_inf_in,
            "finite_count": self.finite_count,
            "finite_min": self.finite_min,
            "finite_max": self.finite_max,
            "has_positive": self.has_positive,
            "has_negative": self.has_negative,
        }


def _json_float(x: float):
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return x


def _golden(fun, a: float, b: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


@lru_cache(maxsize=64)
def _grid_parts(loss: AnyLoss, search: SearchConfig):
    grid = search.grid()
    pos = loss.pointwise(1.0, grid)
    neg = loss.pointwise(-1.0, grid)
    for a in (grid, pos, neg):
        a.flags.writeable = False
    return grid, pos, neg


def optimal_conditional_risk(
    loss: AnyLoss, eta: float, search: SearchConfig | None = None
) -> tuple[float, ArgminSummary]:
    """Infimum of the conditional risk over the extended reals.

    Uniform grid on ``[-B, B]``, golden-section refinement on the bracket around
    the best grid point, and both points at infinity.
    """
    _check_eta(eta)
    search = search or SearchConfig()
    grid, pos, neg = _grid_parts(loss, search)
    vals = np.zeros_like(grid)
    if eta > 0:
        vals = vals + eta * pos
    if eta < 1:
        vals = vals + (1.0 - eta) * neg
    if not np.all(np.isfinite(vals)):
        bad = grid[~np.isfinite(vals)][0]
        raise NumericError(f"{loss.name}: non-finite conditional risk at alpha={bad}")

    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    x_ref, v_ref = _golden(lambda a: float(_cond_risk_array(loss, eta, a)), lo, hi, search.refine_tol)

    v_pinf = conditional_risk(loss, eta, math.inf)
    v_ninf = conditional_risk(loss, eta, -math.inf)
    # the points at infinity come first so they win exact ties
    candidates = [(v_pinf, math.inf), (v_ninf, -math.inf), (float(vals[k]), float(grid[k])), (v_ref, x_ref)]
    best, where = min(candidates, key=lambda c: c[0])

    thresh = best + search.argmin_tol
    near = grid[vals <= thresh]
    if v_ref <= thresh:
        near = np.append(near, x_ref)
    pos_inf_in = v_pinf <= thresh
    neg_inf_in = v_ninf <= thresh
    zero_in = conditional_risk(loss, eta, 0.0) <= thresh
    summary = ArgminSummary(
        value=best,
        argmin=where,
        tol=search.argmin_tol,
        zero_in=bool(zero_in),
        pos_inf_in=bool(pos_inf_in),
        neg_inf_in=bool(neg_inf_in),
        finite_count=int(near.size),
        finite_min=float(near.min()) if near.size else None,
        finite_max=float(near.max()) if near.size else None,
        has_positive=bool(pos_inf_in or zero_in or np.any(near >= 0)),
        has_negative=bool(neg_inf_in or np.any(near < 0)),
    )
    return best, summary
