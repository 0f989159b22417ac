"""Piecewise-constant classifiers on 1D/2D grids with exact adversarial risks.

A grid with edges ``e_0 < ... < e_n`` along an axis partitions ``[e_0, e_n]``
into ``2n + 1`` faces: the edge points ``{e_k}`` (even face index ``2k``) and
the open cells ``(e_k, e_k+1)`` (odd index ``2k + 1``). In 2D faces are
products of per-axis faces (open rectangles, open segments, vertices). A
classifier stores one value per face plus one value for everything outside
the closed box, so it is defined at every point and the supremum over a
closed ball is an exact finite maximum over the faces that the ball meets.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError
from .finite_instance import AttackPlan, ProblemInstance, build_conflict_graph
from .losses import MarginLoss, ReferenceLoss, sign

__all__ = [
    "Axis",
    "GridClassifier",
    "SaturationBound",
    "BallIndex",
    "auto_axes",
    "ball_faces",
    "adv_zero_one_risk",
    "adv_surrogate_risk",
    "risk_under_distribution",
    "cover_classifier",
]

TOUCH_TOL = 1e-12


@dataclass(frozen=True)
class Axis:
    edges: tuple

    def __post_init__(self):
        e = tuple(float(x) for x in self.edges)
        if len(e) < 2:
            raise ConfigurationError("an axis needs at least one cell")
        if any(not math.isfinite(x) for x in e) or any(b <= a for a, b in zip(e, e[1:])):
            raise ConfigurationError("axis edges must be finite and strictly increasing")
        object.__setattr__(self, "edges", e)

    @classmethod
    def uniform(cls, lo: float, hi: float, cells: int) -> "Axis":
        if not lo < hi or cells < 1:
            raise ConfigurationError(f"need lo < hi and cells >= 1, got ({lo}, {hi}, {cells})")
        return cls(tuple(np.linspace(lo, hi, int(cells) + 1)))

    @property
    def lo(self) -> float:
        return self.edges[0]

    @property
    def hi(self) -> float:
        return self.edges[-1]

    @property
    def cells(self) -> int:
        return len(self.edges) - 1

    @property
    def n_faces(self) -> int:
        return 2 * self.cells + 1

    @property
    def is_uniform(self) -> bool:
        return np.allclose(self.edges, np.linspace(self.lo, self.hi, self.cells + 1), rtol=0, atol=1e-12)

    def face_bounds(self):
        """Per-face ``(lower, upper, is_point)`` arrays."""
        e = np.asarray(self.edges)
        j = np.arange(self.n_faces)
        lower = e[j // 2]
        upper = e[np.minimum((j + 1) // 2, self.cells)]
        return lower, upper, j % 2 == 0

    def face_centers(self) -> np.ndarray:
        lower, upper, _ = self.face_bounds()
        return 0.5 * (lower + upper)

    def locate(self, x: float) -> int | None:
        """Face index containing ``x``; ``None`` outside ``[lo, hi]``."""
        e = self.edges
        if x < e[0] - TOUCH_TOL or x > e[-1] + TOUCH_TOL:
            return None
        k = int(np.searchsorted(e, x))
        if k < len(e) and abs(e[k] - x) <= TOUCH_TOL:
            return 2 * k
        if k > 0 and abs(e[k - 1] - x) <= TOUCH_TOL:
            return 2 * (k - 1)
        return 2 * k - 1

    def refined(self) -> "Axis":
        e = np.asarray(self.edges)
        out = np.empty(2 * e.size - 1)
        out[0::2] = e
        out[1::2] = 0.5 * (e[:-1] + e[1:])
        return Axis(tuple(out))

    def to_dict(self) -> dict:
        d = {"lo": self.lo, "hi": self.hi, "cells": self.cells}
        if not self.is_uniform:
            d["edges"] = list(self.edges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Axis":
        if "edges" in d:
            return cls(tuple(d["edges"]))
        return cls.uniform(float(d["lo"]), float(d["hi"]), int(d["cells"]))


def _axis_gaps(axis: Axis, c: float):
    lower, upper, is_point = axis.face_bounds()
    below = c < lower
    above = c > upper
    gap = np.where(below, lower - c, np.where(above, c - upper, 0.0))
    if_point = np.abs(c - lower)
    gap = np.where(is_point, if_point, gap)
    inside_open = (~is_point) & (c > lower) & (c < upper)
    attained = is_point | inside_open
    return gap, attained


def ball_faces(axes, center, eps: float, metric: str) -> np.ndarray:
    """Boolean mask (face grid shape) of faces meeting the closed ball ``B(center, eps)``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    gaps, att = zip(*(_axis_gaps(ax, c) for ax, c in zip(axes, center)))
    if len(axes) == 1:
        dist, attained = gaps[0], att[0]
    else:
        g0, g1 = np.meshgrid(gaps[0], gaps[1], indexing="ij")
        a0, a1 = np.meshgrid(att[0], att[1], indexing="ij")
        dist = np.sqrt(g0 * g0 + g1 * g1) if metric == "euclidean" else np.maximum(g0, g1)
        attained = a0 & a1
    # a face whose nearest point is in the face is hit when the ball reaches it;
    # otherwise the nearest point is on an open side and the ball must pass it
    return np.where(attained, dist <= eps + TOUCH_TOL, dist < eps - TOUCH_TOL)


@dataclass(frozen=True, eq=False)
class GridClassifier:
    """Real-valued ``f`` that is constant on each face of a 1D/2D grid."""

    axes: tuple
    values: np.ndarray
    outside: float = -1.0

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(axes) not in (1, 2):
            raise ConfigurationError("grid classifiers are 1D or 2D")
        vals = np.array(self.values, dtype=float)
        shape = tuple(ax.n_faces for ax in axes)
        if vals.shape != shape:
            if vals.size == math.prod(shape):
                vals = vals.reshape(shape)
            else:
                raise ConfigurationError(f"values have shape {vals.shape}, expected faces {shape}")
        if not np.all(np.isfinite(vals)) or not math.isfinite(self.outside):
            raise ConfigurationError("classifier values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "outside", float(self.outside))

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, axes, c: float) -> "GridClassifier":
        axes = tuple(axes)
        return cls(axes, np.full(tuple(ax.n_faces for ax in axes), float(c)), float(c))

    @classmethod
    def from_cells(cls, axes, cell_values, outside: float = -1.0) -> "GridClassifier":
        """Lower-closed cells ``[e_k, e_k+1)``; the top edge joins the last cell."""
        axes = tuple(axes)
        cv = np.asarray(cell_values, dtype=float).reshape(tuple(ax.cells for ax in axes))
        idx = [np.minimum(np.arange(ax.n_faces) // 2, ax.cells - 1) for ax in axes]
        vals = cv[np.ix_(*idx)]
        return cls(axes, vals, outside)

    def with_values(self, values) -> "GridClassifier":
        return GridClassifier(self.axes, values, self.outside)

    def refined(self) -> "GridClassifier":
        """Same function on a grid with every cell halved."""
        new_axes = tuple(ax.refined() for ax in self.axes)
        maps = []
        for ax in new_axes:
            j = np.arange(ax.n_faces)
            maps.append(np.where(j % 4 == 0, j // 2, 2 * (j // 4) + 1))
        return GridClassifier(new_axes, self.values[np.ix_(*maps)], self.outside)

    # -- evaluation -----------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def n_faces(self) -> int:
        return self.values.size

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = tuple(ax.locate(float(c)) for ax, c in zip(self.axes, x))
        if any(i is None for i in idx):
            return self.outside
        return float(self.values[idx])

    def covers_ball(self, center, eps: float) -> bool:
        center = np.atleast_1d(center)
        return all(ax.lo - TOUCH_TOL <= c - eps and c + eps <= ax.hi + TOUCH_TOL for ax, c in zip(self.axes, center))

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dimension": self.dim,
            "layout": "faces",
            "axes": [ax.to_dict() for ax in self.axes],
            "values": self.values.ravel().tolist(),
            "outside": self.outside,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GridClassifier":
        axes = tuple(Axis.from_dict(a) for a in d["axes"])
        if d.get("layout", "faces") == "cells":
            return cls.from_cells(axes, d["values"], d.get("outside", -1.0))
        return cls(axes, np.asarray(d["values"], dtype=float), d.get("outside", -1.0))

    def to_csv(self) -> str:
        """One row per face: face centre coordinates, face kind, value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: self.dim]
        w.writerow([*names, "kind", "value"])
        centers = [ax.face_centers() for ax in self.axes]
        kinds = [np.where(np.arange(ax.n_faces) % 2 == 0, "p", "o") for ax in self.axes]
        for idx in np.ndindex(self.values.shape):
            coords = [repr(float(centers[a][i])) for a, i in enumerate(idx)]
            kind = "".join(kinds[a][i] for a, i in enumerate(idx))
            w.writerow([*coords, kind, repr(float(self.values[idx]))])
        return buf.getvalue()


class BallIndex:
    """Flat face indices met by each atom's ε-ball, padded into one matrix.

    Padding slots repeat the row's last face, so a row maximum (and the first
    index attaining it) is unaffected.
    """

    def __init__(self, f: GridClassifier, inst: ProblemInstance):
        rows = []
        for i, a in enumerate(inst.atoms):
            if len(a.x) != f.dim:
                raise DomainError(f"atom {i} has dimension {len(a.x)}, grid has {f.dim}")
            if not f.covers_ball(a.x, inst.epsilon):
                raise DomainError(f"grid box does not contain the ball of atom {i} at {a.x}")
            mask = ball_faces(f.axes, a.x, inst.epsilon, inst.metric)
            idx = np.flatnonzero(mask.ravel())
            if idx.size == 0:
                raise DomainError(f"ball of atom {i} meets no face")
            rows.append(idx)
        width = max(r.size for r in rows)
        self.index = np.array([np.pad(r, (0, width - r.size), mode="edge") for r in rows])
        self.sizes = np.array([r.size for r in rows])
        self.valid = np.arange(width)[None, :] < self.sizes[:, None]
        self.labels = inst.labels
        self.masses = inst.masses
        self.rows = rows
        self.shape = f.values.shape

    def ball_values(self, f: GridClassifier) -> np.ndarray:
        return f.values.ravel()[self.index]


def _index(f: GridClassifier, inst: ProblemInstance, index: BallIndex | None) -> BallIndex:
    return index if index is not None else BallIndex(f, inst)


def adv_zero_one_risk(f: GridClassifier, inst: ProblemInstance, index: BallIndex | None = None) -> float:
    """Mass of atoms whose closed ball contains a point predicted with the wrong sign."""
    bi = _index(f, inst, index)
    v = bi.ball_values(f)
    wrong = sign(v) != bi.labels[:, None]
    return float(bi.masses @ wrong.any(axis=1))


def adv_surrogate_risk(f: GridClassifier, loss: MarginLoss, inst: ProblemInstance,
                       index: BallIndex | None = None) -> float:
    """``sum_i m_i * max over the ball of phi(y_i f)``."""
    bi = _index(f, inst, index)
    v = bi.ball_values(f)
    return float(bi.masses @ loss(bi.labels[:, None] * v).max(axis=1))


def _as_atoms(Q):
    if isinstance(Q, ProblemInstance):
        return [(a.x, a.y, a.mass) for a in Q.atoms]
    if isinstance(Q, AttackPlan):
        return Q.distribution()
    return list(Q)


def risk_under_distribution(f: GridClassifier, Q, loss) -> float:
    """Plain (non-adversarial) risk ``sum mass * L(y, f(position))`` under ``Q``."""
    total = 0.0
    for x, y, w in _as_atoms(Q):
        v = f(x)
        if isinstance(loss, ReferenceLoss):
            total += w * float(loss.pointwise(y, v))
        else:
            total += w * float(loss(y * v))
    return total


@dataclass(frozen=True)
class SaturationBound:
    """Finite stand-in ``M`` for the values ``+-inf``."""

    M: float = 20.0

    def __post_init__(self):
        if not self.M > 0:
            raise ConfigurationError("saturation bound must be > 0")

    def check(self, loss: MarginLoss, tol: float = 1e-6) -> bool:
        low = loss.limits[0]
        ok_hi = float(loss(self.M)) <= tol
        ok_lo = True if math.isinf(low) else float(loss(-self.M)) >= low - tol
        return ok_hi and ok_lo

    @classmethod
    def for_loss(cls, loss: MarginLoss, tol: float = 1e-6, start: float = 1.0) -> "SaturationBound":
        M = start
        while not cls(M).check(loss, tol):
            M *= 2.0
            if M > 1e6:
                raise ConfigurationError(f"{loss.name}: no saturation bound up to 1e6")
        return cls(M)


def auto_axes(inst: ProblemInstance, width: float | None = None) -> tuple:
    """Box = atoms' bounding box inflated by ε plus one cell; cell width ε/10 by default."""
    pts = inst.positions
    eps = inst.epsilon
    if width is None:
        width = eps / 10.0 if eps > 0 else _fallback_width(pts)
    axes = []
    for k in range(inst.dim):
        lo = float(pts[:, k].min()) - eps - width
        hi = float(pts[:, k].max()) + eps + width
        cells = max(1, int(math.ceil((hi - lo) / width - 1e-9)))
        axes.append(Axis.uniform(lo, lo + cells * width, cells))
    return tuple(axes)


def _fallback_width(pts: np.ndarray) -> float:
    diffs = np.abs(pts[:, None, :] - pts[None, :, :])
    nz = diffs[diffs > 0]
    return float(nz.min()) / 4.0 if nz.size else 0.25


def cover_classifier(inst: ProblemInstance, cover, M: SaturationBound | float = 20.0,
                     axes=None, max_refinements: int = 10) -> GridClassifier:
    """``+M`` on uncovered positive balls, ``-M`` on uncovered negative balls, ``-M`` elsewhere.

    Erring at most on the cover, the classifier's adversarial 0/1 risk is at
    most the cover's mass, with equality for a minimum cover. The auto grid is
    refined until no face meets two opposite-label uncovered balls.
    """
    M = M.M if isinstance(M, SaturationBound) else float(M)
    graph = build_conflict_graph(inst)
    cover = frozenset(int(c) for c in cover)
    if not graph.is_cover(cover):
        raise PreconditionError(f"{sorted(cover)} is not a vertex cover of the conflict graph")
    free_pos = [a.x for i, a in enumerate(inst.atoms) if i not in cover and a.y == 1]
    free_neg = [a.x for i, a in enumerate(inst.atoms) if i not in cover and a.y == -1]

    grid_axes = tuple(axes) if axes is not None else auto_axes(inst)
    for _ in range(max_refinements + 1):
        shape = tuple(ax.n_faces for ax in grid_axes)
        plus = np.zeros(shape, dtype=bool)
        minus = np.zeros(shape, dtype=bool)
        for x in free_pos:
            plus |= ball_faces(grid_axes, x, inst.epsilon, inst.metric)
        for x in free_neg:
            minus |= ball_faces(grid_axes, x, inst.epsilon, inst.metric)
        if not np.any(plus & minus):
            values = np.where(plus, M, -M)
            return GridClassifier(grid_axes, values, -M)
        if axes is not None:
            raise PreconditionError("given grid is too coarse to separate the uncovered balls")
        grid_axes = tuple(ax.refined() for ax in grid_axes)
    raise PreconditionError("could not separate uncovered balls after refinement")
