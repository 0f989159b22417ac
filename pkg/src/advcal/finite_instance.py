"""Exact adversarial Bayes 0/1 risk on finite labelled distributions.

Two atoms of opposite labels whose ε-balls meet (distance <= 2ε) cannot both be
classified robustly: any classifier errs on at least one of them at their
midpoint. Conversely, erring exactly on a vertex cover of these conflicts is
achievable. The adversarial Bayes risk is therefore the minimum-mass vertex
cover of the bipartite conflict graph, i.e. a min cut, and the max flow that
certifies it doubles as an optimal attack: each unit of flow pairs positive
and negative mass at a common midpoint.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp

from .errors import ConfigurationError, InvariantViolation, ResourceError

__all__ = [
    "METRICS",
    "Atom",
    "ProblemInstance",
    "ConflictGraph",
    "Move",
    "AttackPlan",
    "RiskReport",
    "DualityReport",
    "distance",
    "build_conflict_graph",
    "adversarial_bayes_risk",
    "brute_force_bayes_risk",
    "optimal_attack",
    "standard_bayes_risk",
    "verify_strong_duality",
    "random_instance",
    "load_instance",
    "parse_instance",
]

METRICS = ("euclidean", "chebyshev")
_METRIC_ALIASES = {"l2": "euclidean", "euclidean": "euclidean", "linf": "chebyshev", "chebyshev": "chebyshev"}
_METRIC_JSON = {"euclidean": "l2", "chebyshev": "linf"}

MASS_TOL = 1e-9
GEOM_TOL = 1e-9
BRUTE_FORCE_MAX_ATOMS = 20


def distance(a, b, metric: str) -> float:
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if metric == "euclidean":
        return float(np.sqrt(np.sum(diff * diff)))
    return float(np.max(diff)) if diff.size else 0.0


@dataclass(frozen=True)
class Atom:
    x: tuple
    y: int
    mass: float


@dataclass(frozen=True)
class ProblemInstance:
    """Weighted labelled atoms, a metric with the midpoint property, and ε."""

    atoms: tuple
    metric: str = "euclidean"
    epsilon: float = 0.0

    def __post_init__(self):
        metric = _METRIC_ALIASES.get(self.metric)
        if metric is None:
            raise ConfigurationError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "metric", metric)
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        atoms = tuple(Atom(tuple(float(c) for c in np.atleast_1d(a.x)), int(a.y), float(a.mass)) for a in atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ConfigurationError("instance has no atoms")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigurationError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        dim = len(atoms[0].x)
        for i, a in enumerate(atoms):
            if len(a.x) != dim or dim == 0:
                raise ConfigurationError(f"atoms[{i}].x: dimension {len(a.x)} != {dim}")
            if not all(math.isfinite(c) for c in a.x):
                raise ConfigurationError(f"atoms[{i}].x: non-finite coordinate")
            if a.y not in (-1, 1):
                raise ConfigurationError(f"atoms[{i}].y: label must be +1 or -1, got {a.y}")
            if not (a.mass > 0 and math.isfinite(a.mass)):
                raise ConfigurationError(f"atoms[{i}].mass: must be > 0, got {a.mass}")
        total = sum(a.mass for a in atoms)
        if abs(total - 1.0) > MASS_TOL:
            raise ConfigurationError(f"atom masses sum to {total!r}, expected 1")

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return len(self.atoms[0].x)

    @property
    def positions(self) -> np.ndarray:
        return np.array([a.x for a in self.atoms], dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.array([a.y for a in self.atoms], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms], dtype=float)

    def with_epsilon(self, epsilon: float) -> "ProblemInstance":
        return ProblemInstance(self.atoms, self.metric, epsilon)

    def to_dict(self) -> dict:
        return {
            "metric": _METRIC_JSON[self.metric],
            "epsilon": self.epsilon,
            "atoms": [{"x": list(a.x), "y": a.y, "mass": a.mass} for a in self.atoms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def parse_instance(data) -> ProblemInstance:
    """Validate a decoded instance document, naming the offending field."""
    if not isinstance(data, dict):
        raise ConfigurationError("instance: expected a JSON object")
    for key in ("metric", "epsilon", "atoms"):
        if key not in data:
            raise ConfigurationError(f"instance: missing field {key!r}")
    if not isinstance(data["atoms"], list):
        raise ConfigurationError("instance.atoms: expected a list")
    atoms = []
    for i, a in enumerate(data["atoms"]):
        if not isinstance(a, dict):
            raise ConfigurationError(f"atoms[{i}]: expected an object")
        for key in ("x", "y", "mass"):
            if key not in a:
                raise ConfigurationError(f"atoms[{i}]: missing field {key!r}")
        x = a["x"] if isinstance(a["x"], list) else [a["x"]]
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in x):
            raise ConfigurationError(f"atoms[{i}].x: expected numbers")
        if a["y"] not in (1, -1) or isinstance(a["y"], bool):
            raise ConfigurationError(f"atoms[{i}].y: label must be 1 or -1")
        if not isinstance(a["mass"], (int, float)) or isinstance(a["mass"], bool):
            raise ConfigurationError(f"atoms[{i}].mass: expected a number")
        atoms.append(Atom(tuple(x), a["y"], a["mass"]))
    eps = data["epsilon"]
    if not isinstance(eps, (int, float)) or isinstance(eps, bool):
        raise ConfigurationError("instance.epsilon: expected a number")
    return ProblemInstance(tuple(atoms), data["metric"], float(eps))


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_instance(data)


# ---------------------------------------------------------------------------
# conflict graph


@dataclass(frozen=True)
class ConflictGraph:
    positive: tuple  # atom indices with label +1
    negative: tuple
    weights: tuple  # per atom index
    edges: tuple  # (i, j) with i positive, j negative
    midpoints: dict  # (i, j) -> coordinate tuple

    def is_cover(self, cover) -> bool:
        s = set(cover)
        return all(i in s or j in s for i, j in self.edges)


def build_conflict_graph(inst: ProblemInstance) -> ConflictGraph:
    pts = inst.positions
    pos = tuple(i for i, a in enumerate(inst.atoms) if a.y == 1)
    neg = tuple(i for i, a in enumerate(inst.atoms) if a.y == -1)
    edges, mids = [], {}
    for i in pos:
        for j in neg:
            if distance(pts[i], pts[j], inst.metric) <= 2 * inst.epsilon:
                z = tuple(float(c) for c in (pts[i] + pts[j]) / 2.0)
                for k in (i, j):
                    if distance(z, pts[k], inst.metric) > inst.epsilon + GEOM_TOL:
                        raise InvariantViolation(f"midpoint of ({i}, {j}) is not within epsilon of atom {k}")
                edges.append((i, j))
                mids[(i, j)] = z
    return ConflictGraph(pos, neg, tuple(inst.masses.tolist()), tuple(edges), mids)


# ---------------------------------------------------------------------------
# reports


@dataclass
class RiskReport:
    value: float
    method: str  # "mincut", "brute_force" or "dual_attack"
    witness: object
    runtime: float = 0.0

    def to_dict(self, include_runtime: bool = False) -> dict:
        w = self.witness
        if isinstance(w, AttackPlan):
            w = w.to_dict()
        elif isinstance(w, (set, frozenset, tuple)):
            w = sorted(w)
        elif isinstance(w, list):
            w = [sorted(c) for c in w]
        d = {"value": self.value, "method": self.method, "witness": w}
        if include_runtime:
            d["runtime"] = self.runtime
        return d


@dataclass(frozen=True)
class Move:
    source: int
    dest: tuple
    label: int
    mass: float


@dataclass
class AttackPlan:
    """A label-preserving coupling of ``P`` with an attacked ``Q``, as mass moves."""

    moves: list
    epsilon: float
    metric: str

    def distribution(self) -> list:
        """Atoms ``(position, label, mass)`` of ``Q``, merged on exact position and label."""
        acc = {}
        for m in self.moves:
            key = (m.dest, m.label)
            acc[key] = acc.get(key, 0.0) + m.mass
        return [(pos, y, w) for (pos, y), w in acc.items()]

    def is_feasible(self, inst: ProblemInstance, tol: float = GEOM_TOL) -> bool:
        return not self.violations(inst, tol)

    def violations(self, inst: ProblemInstance, tol: float = GEOM_TOL) -> list:
        out = []
        moved = np.zeros(inst.n)
        for k, m in enumerate(self.moves):
            src = inst.atoms[m.source]
            if m.label != src.y:
                out.append(f"move {k}: label {m.label} != source label {src.y}")
            if distance(m.dest, src.x, inst.metric) > inst.epsilon + tol:
                out.append(f"move {k}: length exceeds epsilon")
            if m.mass < 0:
                out.append(f"move {k}: negative mass")
            moved[m.source] += m.mass
        for i, a in enumerate(inst.atoms):
            if abs(moved[i] - a.mass) > tol:
                out.append(f"atom {i}: moved mass {moved[i]!r} != atom mass {a.mass!r}")
        return out

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "metric": _METRIC_JSON.get(self.metric, self.metric),
            "moves": [{"source": m.source, "dest": list(m.dest), "label": m.label, "mass": m.mass} for m in self.moves],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dim = len(self.moves[0].dest) if self.moves else 1
        w.writerow(["source_index", *[f"dest_{k}" for k in range(dim)], "label", "mass"])
        for m in self.moves:
            w.writerow([m.source, *[repr(c) for c in m.dest], m.label, repr(m.mass)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# min cut


def _max_flow(inst: ProblemInstance, graph: ConflictGraph):
    big = 1.0 + float(inst.masses.sum())
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    for i in graph.positive:
        G.add_edge("s", i, capacity=graph.weights[i])
    for j in graph.negative:
        G.add_edge(j, "t", capacity=graph.weights[j])
    for i, j in graph.edges:
        G.add_edge(i, j, capacity=big)
    value, flow = nx.maximum_flow(G, "s", "t", flow_func=edmonds_karp)
    return G, float(value), flow


def _source_side(G: nx.DiGraph, flow: dict, tol: float = 1e-12) -> set:
    """Nodes reachable from the source in the residual network."""
    seen = {"s"}
    queue = deque(["s"])
    while queue:
        u = queue.popleft()
        for v in G.successors(u):
            if v not in seen and G[u][v]["capacity"] - flow[u][v] > tol:
                seen.add(v)
                queue.append(v)
        for v in G.predecessors(u):
            if v not in seen and flow[v][u] > tol:
                seen.add(v)
                queue.append(v)
    return seen


def adversarial_bayes_risk(inst: ProblemInstance) -> RiskReport:
    """Minimum-mass vertex cover of the conflict graph via max flow / min cut.

    The witness is the cover read off the canonical cut whose source side is
    everything reachable from the source in the residual network.
    """
    t0 = time.perf_counter()
    graph = build_conflict_graph(inst)
    if not graph.edges:
        return RiskReport(0.0, "mincut", frozenset(), time.perf_counter() - t0)
    G, value, flow = _max_flow(inst, graph)
    S = _source_side(G, flow)
    cover = frozenset([i for i in graph.positive if i not in S] + [j for j in graph.negative if j in S])
    cover_mass = float(sum(graph.weights[k] for k in cover))
    if not graph.is_cover(cover) or abs(cover_mass - value) > MASS_TOL:
        raise InvariantViolation(
            "min cut does not match its vertex cover", {"flow": value, "cover_mass": cover_mass}
        )
    return RiskReport(cover_mass, "mincut", cover, time.perf_counter() - t0)


def brute_force_bayes_risk(inst: ProblemInstance) -> RiskReport:
    """Enumerate every subset of atoms as the misclassified set; keep the lightest cover.

    The witness lists every cover attaining the minimum (within 1e-12).
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX_ATOMS:
        raise ResourceError(f"brute force is limited to {BRUTE_FORCE_MAX_ATOMS} atoms, got {n}")
    t0 = time.perf_counter()
    graph = build_conflict_graph(inst)
    masks = np.arange(1 << n, dtype=np.int64)
    feasible = np.ones(masks.size, dtype=bool)
    for i, j in graph.edges:
        feasible &= ((masks >> i) & 1).astype(bool) | ((masks >> j) & 1).astype(bool)
    bits = (masks[:, None] >> np.arange(n)) & 1
    mass = bits @ inst.masses
    mass = np.where(feasible, mass, np.inf)
    best = float(mass.min())
    winners = masks[mass <= best + 1e-12]
    covers = [frozenset(k for k in range(n) if (m >> k) & 1) for m in winners.tolist()]
    return RiskReport(best, "brute_force", covers, time.perf_counter() - t0)


def optimal_attack(inst: ProblemInstance) -> AttackPlan:
    """Move each unit of max flow on a conflict edge to the edge's midpoint.

    Mass carried by no flow stays in place as a zero-length move.
    """
    graph = build_conflict_graph(inst)
    moves = []
    moved = np.zeros(inst.n)
    if graph.edges:
        _, _, flow = _max_flow(inst, graph)
        for i, j in graph.edges:
            w = float(flow[i][j])
            if w <= 0:
                continue
            z = graph.midpoints[(i, j)]
            moves.append(Move(i, z, 1, w))
            moves.append(Move(j, z, -1, w))
            moved[i] += w
            moved[j] += w
    for k, a in enumerate(inst.atoms):
        rest = a.mass - moved[k]
        if rest > 1e-15:
            moves.append(Move(k, a.x, a.y, rest))
    return AttackPlan(moves, inst.epsilon, inst.metric)


def standard_bayes_risk(atoms) -> float:
    """``sum over locations of total * min(eta, 1 - eta)``, grouping exact positions.

    Accepts a ProblemInstance, an AttackPlan, or ``(position, label, mass)`` triples.
    """
    if isinstance(atoms, ProblemInstance):
        atoms = [(a.x, a.y, a.mass) for a in atoms.atoms]
    elif isinstance(atoms, AttackPlan):
        atoms = atoms.distribution()
    pos, neg = {}, {}
    for x, y, w in atoms:
        key = tuple(float(c) for c in np.atleast_1d(x))
        bucket = pos if y == 1 else neg
        bucket[key] = bucket.get(key, 0.0) + w
    return float(sum(min(pos.get(k, 0.0), neg.get(k, 0.0)) for k in set(pos) | set(neg)))


@dataclass
class DualityReport:
    mincut: float
    brute_force: float
    dual_attack: float
    cover: list
    attack: AttackPlan = field(repr=False)
    tol: float = 1e-9

    @property
    def holds(self) -> bool:
        vals = (self.mincut, self.brute_force, self.dual_attack)
        return max(vals) - min(vals) <= self.tol

    def to_dict(self) -> dict:
        return {
            "mincut": self.mincut,
            "brute_force": self.brute_force,
            "dual_attack": self.dual_attack,
            "cover": self.cover,
            "holds": self.holds,
            "tol": self.tol,
        }


def verify_strong_duality(inst: ProblemInstance, tol: float = 1e-9) -> DualityReport:
    """Check min cut = brute force = standard Bayes risk of the optimal attack."""
    primal = adversarial_bayes_risk(inst)
    oracle = brute_force_bayes_risk(inst)
    plan = optimal_attack(inst)
    bad = plan.violations(inst)
    if bad:
        raise InvariantViolation("optimal attack is not an adversarial distribution: " + "; ".join(bad))
    dual = standard_bayes_risk(plan)
    report = DualityReport(primal.value, oracle.value, dual, sorted(primal.witness), plan, tol)
    if not report.holds:
        raise InvariantViolation(
            "strong duality check failed",
            {"mincut": primal.value, "brute_force": oracle.value, "dual_attack": dual},
        )
    return report


def random_instance(rng: np.random.Generator, n_max: int = 8, dim: int | None = None,
                    metric: str | None = None, epsilon: float | None = None, spread: float = 2.0) -> ProblemInstance:
    """A small random instance for fuzzing; positions uniform in ``[0, spread]^d``."""
    n = int(rng.integers(2, n_max + 1))
    dim = int(rng.integers(1, 3)) if dim is None else dim
    metric = metric or METRICS[int(rng.integers(0, 2))]
    epsilon = float(rng.choice([0.3, 0.6, 1.0])) if epsilon is None else epsilon
    pts = rng.uniform(0.0, spread, size=(n, dim)).round(6)
    labels = rng.choice([-1, 1], size=n)
    w = rng.uniform(0.05, 1.0, size=n)
    w = w / w.sum()
    atoms = tuple(Atom(tuple(p), int(y), float(m)) for p, y, m in zip(pts, labels, w))
    return ProblemInstance(atoms, metric, epsilon)

