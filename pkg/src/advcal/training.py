"""Clamped subgradient descent on the adversarial surrogate risk of grid classifiers.

The objective ``sum_i m_i * max_{face k meets B(x_i, ε)} phi(y_i v_k)`` is a
finite max of smooth (or piecewise linear) terms, so a subgradient puts
``m_i * phi'(y_i v_k*) * y_i`` on the maximizing faces of each atom.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, PreconditionError
from .finite_instance import ProblemInstance, adversarial_bayes_risk, optimal_attack
from .grid_world import (
    Axis,
    BallIndex,
    GridClassifier,
    auto_axes,
    cover_classifier,
)
from .losses import MarginLoss, optimal_conditional_risk, sign

__all__ = [
    "TrainConfig",
    "TrajectoryRecord",
    "TrainResult",
    "pathological_sequence",
    "adv_surrogate_subgradient",
    "train",
    "verify_pseudo_consistency",
    "verify_realizable_consistency",
    "PseudoConsistencyReport",
    "RealizableReport",
]

SCHEDULES = ("constant", "inv_sqrt")
INITS = ("zeros", "pathological", "cover", "random")
TIE_TOL = 1e-12
TIE_BREAKS = ("split", "lowest")


def pathological_sequence(inst: ProblemInstance, n: float, pad: float | None = None) -> GridClassifier:
    """The classifier ``h_n`` for the three-point family ``(0,+1) / (-a,-1) / (a,-1)``.

    ``+1/n`` on ``Z1 = [-ε, -a+ε]``, ``-1/n`` on ``Z2 = [a-ε, ε]``, ``+1`` strictly
    between them and ``-1`` elsewhere. The grid has edges exactly at the four
    breakpoints, so the closed zones and the open middle are represented as stated.
    """
    a, eps = _three_point_params(inst)
    if not n > 0:
        raise PreconditionError(f"n must be positive, got {n}")
    pad = eps / 2 if pad is None else pad
    edges = (-a - eps - pad, -eps, -a + eps, a - eps, eps, a + eps + pad)
    ax = Axis(edges)
    z1, z2 = 1.0 / n, -1.0 / n
    # faces: p(lo) o p(-ε) o p(-a+ε) o p(a-ε) o p(ε) o p(hi)
    values = [-1, -1, z1, z1, z1, 1, z2, z2, z2, -1, -1]
    return GridClassifier((ax,), np.array(values, dtype=float), -1.0)


def _three_point_params(inst: ProblemInstance) -> tuple[float, float]:
    if inst.dim != 1 or inst.n != 3:
        raise PreconditionError("pathological sequence needs the 1D three-point instance")
    by_x = sorted(inst.atoms, key=lambda at: at.x[0])
    left, mid, right = by_x
    a = right.x[0]
    eps = inst.epsilon
    shape_ok = (
        mid.x[0] == 0.0 and mid.y == 1 and left.y == -1 and right.y == -1
        and left.x[0] == -a and math.isclose(mid.mass, 0.5) and math.isclose(left.mass, 0.25)
    )
    if not shape_ok:
        raise PreconditionError("instance is not the three-point family {(0,+1,1/2), (-a,-1,1/4), (a,-1,1/4)}")
    if not eps < a < 2 * eps:
        raise PreconditionError(f"need epsilon < a < 2 epsilon, got a={a}, epsilon={eps}")
    return a, eps


def adv_surrogate_subgradient(f: GridClassifier, loss: MarginLoss, inst: ProblemInstance,
                              index: BallIndex | None = None, tie_break: str = "split") -> np.ndarray:
    """Subgradient w.r.t. face values.

    With ``tie_break="split"`` faces tied for an atom's inner max (within
    ``TIE_TOL``) share its weight equally, so faces that start equal and see
    the same atoms stay equal. ``"lowest"`` puts all of it on the lowest index.
    """
    if tie_break not in TIE_BREAKS:
        raise ConfigurationError(f"tie_break must be one of {TIE_BREAKS}")
    bi = index if index is not None else BallIndex(f, inst)
    return _subgradient(f.values.ravel(), loss, bi, tie_break).reshape(f.values.shape)


def _subgradient(v: np.ndarray, loss: MarginLoss, bi: BallIndex, tie_break: str = "split",
                 tie_tol: float = TIE_TOL):
    z = bi.labels[:, None] * v[bi.index]
    vals = np.where(bi.valid, loss(z), -np.inf)
    if tie_break == "lowest":
        # padding repeats the last face, so argmax already favors real entries
        active = np.zeros(vals.shape, dtype=bool)
        active[np.arange(len(vals)), np.argmax(vals, axis=1)] = True
    else:
        active = vals >= vals.max(axis=1, keepdims=True) - tie_tol
    w = active / active.sum(axis=1, keepdims=True)
    coef = w * (bi.masses * bi.labels)[:, None] * loss.derivative(z)
    g = np.zeros_like(v)
    np.add.at(g, bi.index[active], coef[active])
    return g


@dataclass
class TrainConfig:
    loss: MarginLoss
    instance: ProblemInstance
    axes: tuple | None = None
    step: float = 0.5
    schedule: str = "constant"
    iterations: int = 10_000
    init: str = "zeros"
    init_param: object = None  # n for pathological, atom indices for cover, seed for random
    clamp: float = 20.0
    log_every: int | None = None
    tie_break: str = "split"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not self.step > 0:
            raise ConfigurationError("step must be > 0")
        if not self.clamp > 0:
            raise ConfigurationError("clamp must be > 0")
        if self.schedule not in SCHEDULES:
            raise ConfigurationError(f"schedule must be one of {SCHEDULES}")
        if self.init not in INITS:
            raise ConfigurationError(f"init must be one of {INITS}")
        if self.tie_break not in TIE_BREAKS:
            raise ConfigurationError(f"tie_break must be one of {TIE_BREAKS}")


@dataclass
class TrajectoryRecord:
    iteration: list = field(default_factory=list)
    surrogate_risk: list = field(default_factory=list)
    adv01_risk: list = field(default_factory=list)
    qstar_risk: list = field(default_factory=list)
    qstar_surrogate: list = field(default_factory=list)
    max_update: list = field(default_factory=list)
    bayes_risk: float = float("nan")

    def append(self, t, sur, adv, q01, qsur, upd):
        self.iteration.append(int(t))
        self.surrogate_risk.append(float(sur))
        self.adv01_risk.append(float(adv))
        self.qstar_risk.append(float(q01))
        self.qstar_surrogate.append(float(qsur))
        self.max_update.append(float(upd))

    def __len__(self):
        return len(self.iteration)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "surrogate_risk", "adv01_risk", "qstar_risk", "max_update"])
        for row in zip(self.iteration, self.surrogate_risk, self.adv01_risk, self.qstar_risk, self.max_update):
            w.writerow([row[0], *[repr(x) for x in row[1:]]])
        return buf.getvalue()


@dataclass
class TrainResult:
    trajectory: TrajectoryRecord
    classifier: GridClassifier
    runtime: float = 0.0

    @property
    def final(self) -> dict:
        tr = self.trajectory
        return {
            "surrogate_risk": tr.surrogate_risk[-1],
            "adv01_risk": tr.adv01_risk[-1],
            "qstar_risk": tr.qstar_risk[-1],
            "bayes_risk": tr.bayes_risk,
        }


def _initial_classifier(cfg: TrainConfig) -> GridClassifier:
    inst, M = cfg.instance, cfg.clamp
    if cfg.init == "pathological":
        n = 10.0 if cfg.init_param is None else float(cfg.init_param)
        f = pathological_sequence(inst, n)
        if cfg.axes is not None:
            raise ConfigurationError("pathological init uses its own breakpoint-aligned grid")
        return f
    axes = tuple(cfg.axes) if cfg.axes is not None else auto_axes(inst)
    if cfg.init == "zeros":
        return GridClassifier.constant(axes, 0.0)
    if cfg.init == "cover":
        cover = cfg.init_param
        if cover is None:
            cover = adversarial_bayes_risk(inst).witness
        return cover_classifier(inst, cover, M, axes=axes)
    rng = np.random.default_rng(0 if cfg.init_param is None else int(cfg.init_param))
    shape = tuple(ax.n_faces for ax in axes)
    return GridClassifier(axes, rng.uniform(-1.0, 1.0, size=shape), -M)


def _qstar_lookup(f: GridClassifier, inst: ProblemInstance):
    """Face indices (or -1 for outside) of the optimal-attack locations."""
    plan = optimal_attack(inst)
    dist = plan.distribution()
    flat_idx, labels, masses = [], [], []
    shape = f.values.shape
    for x, y, w in dist:
        idx = tuple(ax.locate(float(c)) for ax, c in zip(f.axes, np.atleast_1d(x)))
        flat_idx.append(-1 if any(i is None for i in idx) else int(np.ravel_multi_index(idx, shape)))
        labels.append(y)
        masses.append(w)
    return np.array(flat_idx), np.array(labels, dtype=float), np.array(masses)


def train(cfg: TrainConfig) -> TrainResult:
    """Run ``f <- clamp(f - step_t * g_t, -M, M)`` and log risks along the way."""
    t0 = time.perf_counter()
    loss, inst, M = cfg.loss, cfg.instance, cfg.clamp
    f0 = _initial_classifier(cfg)
    bi = BallIndex(f0, inst)
    q_idx, q_y, q_m = _qstar_lookup(f0, inst)
    v = np.clip(f0.values.ravel().copy(), -M, M)
    outside = f0.outside
    T = int(cfg.iterations)
    every = cfg.log_every or max(1, math.ceil(T / 200))

    traj = TrajectoryRecord(bayes_risk=adversarial_bayes_risk(inst).value)

    def log(t, upd):
        z = bi.labels[:, None] * v[bi.index]
        sur = float(bi.masses @ loss(z).max(axis=1))
        adv = float(bi.masses @ (sign(v[bi.index]) != bi.labels[:, None]).any(axis=1))
        qv = np.where(q_idx >= 0, v[np.maximum(q_idx, 0)], outside)
        q01 = float(q_m @ (sign(qv) != q_y))
        qsur = float(q_m @ loss(q_y * qv))
        traj.append(t, sur, adv, q01, qsur, upd)
        return sur

    initial = log(0, 0.0)
    for t in range(T):
        g = _subgradient(v, loss, bi, cfg.tie_break)
        eta = cfg.step if cfg.schedule == "constant" else cfg.step / math.sqrt(t + 1)
        new = np.clip(v - eta * g, -M, M)
        upd = float(np.max(np.abs(new - v)))
        v = new
        if (t + 1) % every == 0 or t + 1 == T:
            sur = log(t + 1, upd)
            if initial > 0 and sur > 10 * initial:
                raise DivergenceError(f"surrogate risk {sur} exceeds 10x its initial value {initial}", traj)

    f = GridClassifier(f0.axes, v.reshape(f0.values.shape), outside)
    return TrainResult(traj, f, time.perf_counter() - t0)


@dataclass
class PseudoConsistencyReport:
    status: str  # "pass", "fail" or "inconclusive"
    qstar_risk: float
    adv01_risk: float
    bayes_risk: float
    consistency_gap: float
    surrogate_gap: float
    tol: float = 0.01

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_pseudo_consistency(traj: TrajectoryRecord, inst: ProblemInstance, tol: float = 0.01,
                              converge_tol: float = 1e-4) -> PseudoConsistencyReport:
    """Risk under the optimal attack should reach the adversarial Bayes risk.

    The gap between the adversarial 0/1 risk and the Bayes risk is only
    reported: it may stay large.
    """
    bayes = traj.bayes_risk if math.isfinite(traj.bayes_risk) else adversarial_bayes_risk(inst).value
    sur_gap = traj.surrogate_risk[-1] - min(traj.surrogate_risk)
    q = traj.qstar_risk[-1]
    adv = traj.adv01_risk[-1]
    if sur_gap >= converge_tol:
        status = "inconclusive"
    else:
        status = "pass" if abs(q - bayes) <= tol else "fail"
    return PseudoConsistencyReport(status, q, adv, bayes, adv - bayes, sur_gap, tol)


@dataclass
class RealizableReport:
    passed: bool
    adv01_risk: float
    surrogate_risk: float
    loss_infimum: float
    tol: float
    result: TrainResult = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "adv01_risk": self.adv01_risk,
            "surrogate_risk": self.surrogate_risk,
            "loss_infimum": self.loss_infimum,
            "tol": self.tol,
        }


def verify_realizable_consistency(inst: ProblemInstance, loss: MarginLoss, iterations: int = 20_000,
                                  step: float = 1.0, tol: float = 0.01, **kwargs) -> RealizableReport:
    """Train from zeros on an ε-realisable instance; both risks must reach their floors."""
    bayes = adversarial_bayes_risk(inst).value
    if bayes > 0:
        raise PreconditionError(f"instance is not epsilon-realisable (adversarial Bayes risk {bayes})")
    inf_phi, _ = optimal_conditional_risk(loss, 1.0)
    res = train(TrainConfig(loss, inst, step=step, iterations=iterations, **kwargs))
    adv = res.trajectory.adv01_risk[-1]
    sur = res.trajectory.surrogate_risk[-1]
    passed = adv <= tol and sur <= inf_phi + tol
    return RealizableReport(passed, adv, sur, inf_phi, tol, res)

