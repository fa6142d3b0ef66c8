"""Label-efficient multiclass learners.

Each learner takes an unlabeled sample plus a metered :class:`LabeledOracle`
and returns a classifier and the ordered ledger of label queries it issued.

* :func:`single_linkage_learn`: radius-graph components, query the largest.
* :func:`hierarchical_learn`: single-linkage tree, random queries, pure pruning.
* :func:`robust_sphere_learn`: project to the sphere, drop sparse points,
  link the rest, query the largest components.
* :func:`plane_detection_learn`: find empty half-balls, read planes off them,
  query the most populated sign-vector cells.

:func:`agnostic_wrap` reruns any of them with majority-vote group labels.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .clustering import (
    NearestClusterClassifier,
    coarsest_pure_pruning,
    mark_active,
    project_to_sphere,
    radius_components,
    single_linkage_dendrogram,
)
from .errors import (
    BudgetExhaustedError,
    DegenerateInstanceError,
    EmptyLevelSetError,
    InfeasibleRadiusError,
    InvalidInputError,
    NoPlanesDetectedError,
    PartialResultError,
)
from .problems import Sample

ALGORITHMS = ("sl", "hier", "sphere", "planes")
AGNOSTIC_PURITY = 0.75
DEDUP_ANGLE = math.radians(2.0)


# --------------------------------------------------------------------------
# query bookkeeping

@dataclass
class LedgerEntry:
    step: int
    point_index: int
    label: int
    purpose: str


@dataclass
class QueryLedger:
    entries: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.entries)

    def record(self, index, label, purpose):
        self.entries.append(LedgerEntry(len(self.entries), int(index), int(label), purpose))

    def rows(self):
        return [(e.step, e.point_index, e.label, e.purpose) for e in self.entries]


class _Querier:
    """Wraps the oracle so every answer lands in the ledger.

    A budget error is re-raised as :class:`PartialResultError` carrying the
    ledger collected so far.
    """

    def __init__(self, oracle, ledger):
        self.oracle = oracle
        self.ledger = ledger

    def __call__(self, index, purpose):
        try:
            y = self.oracle.query(int(index))
        except BudgetExhaustedError as exc:
            raise PartialResultError(str(exc), ledger=self.ledger) from exc
        self.ledger.record(index, y, purpose)
        return y


class FirstMember:
    """Realizable group labeling: one query on the smallest member index."""

    t = 1

    def label(self, ask, members, key, purpose):
        return ask(int(np.min(members)), purpose)


class DeepestMember:
    """Realizable cell labeling: one query on the member farthest from every
    detected plane, ties to the smaller index.

    Points in a thin strip between a detected plane and the true one share a
    cell with the wrong class; the deepest member stays clear of such strips.
    """

    t = 1

    def __init__(self, depth):
        self.depth = np.asarray(depth, dtype=float)

    def label(self, ask, members, key, purpose):
        members = np.sort(np.asarray(members))
        return ask(int(members[int(np.argmax(self.depth[members]))]), purpose)


class MajorityVote:
    """Agnostic group labeling: ``t`` seeded draws, majority, ties to smaller class."""

    def __init__(self, t: int, seed: int = 0):
        if t < 1:
            raise InvalidInputError("t_per_group must be at least 1")
        self.t = int(t)
        self.seed = int(seed)

    def label(self, ask, members, key, purpose):
        members = np.sort(np.asarray(members))
        rng = np.random.default_rng([self.seed, int(key)])
        picks = rng.choice(members, size=self.t, replace=len(members) < self.t)
        votes = [ask(int(i), purpose) for i in picks]
        vals, counts = np.unique(votes, return_counts=True)
        return int(vals[np.argmax(counts)])


def _points(sample):
    X = sample.points if isinstance(sample, Sample) else sample
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 1:
        raise InvalidInputError("sample must be a non-empty (n, d) array")
    return X


def _stop_mass(epsilon, n):
    return math.ceil(epsilon * n / 4)


def _label_largest(assignment, sizes, counted, stop, labeler, ask, purpose):
    """Query clusters in id order (size-descending) until unlabeled mass <= stop.

    ``counted`` is the per-cluster mass that counts toward the stopping rule.
    """
    labels = {}
    unlabeled = int(np.sum(counted))
    for cid in range(len(sizes)):
        if unlabeled <= stop:
            break
        members = np.flatnonzero(assignment == cid)
        labels[cid] = labeler.label(ask, members, cid, purpose)
        unlabeled -= int(counted[cid])
    return labels


# --------------------------------------------------------------------------
# classifiers

class ClusterClassifier:
    """Nearest labeled cluster; ``metric='angular'`` projects queries to the sphere."""

    def __init__(self, kind, points, assignment, labels, metric="euclidean", diagnostics=None):
        self.kind = kind
        self.points = np.asarray(points, dtype=float)
        self.assignment = np.asarray(assignment, dtype=np.int64)
        self.labels = {int(k): int(v) for k, v in labels.items() if v >= 0}
        self.metric = metric
        self.diagnostics = diagnostics or {}
        self._nn = NearestClusterClassifier(self.points, self.assignment, self.labels, metric)

    def predict(self, X):
        return self._nn.predict(np.atleast_2d(X))

    def to_dict(self):
        keep = np.isin(self.assignment, list(self.labels))
        return {"kind": self.kind, "metric": self.metric,
                "points": self.points[keep].tolist(),
                "assignment": self.assignment[keep].tolist(),
                "labels": {str(k): v for k, v in self.labels.items()}}


class PlaneClassifier:
    """Sign-vector cell lookup with a seeded pseudo-random label for unknown cells."""

    kind = "planes"

    def __init__(self, centers, directions, cell_labels, n_classes, seed=0, diagnostics=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.directions = np.atleast_2d(np.asarray(directions, dtype=float))
        self.cell_labels = dict(cell_labels)
        self.n_classes = int(n_classes)
        self.seed = int(seed)
        self.diagnostics = diagnostics or {}
        self._offsets = np.sum(self.centers * self.directions, axis=1)

    def sign_vectors(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(X @ self.directions.T - self._offsets >= 0, 1, -1).astype(np.int8)

    def _fallback(self, key: bytes) -> int:
        h = hashlib.blake2b(key, digest_size=8, key=self.seed.to_bytes(8, "little", signed=True))
        return int.from_bytes(h.digest(), "little") % self.n_classes

    def predict(self, X):
        S = self.sign_vectors(X)
        out = np.empty(len(S), dtype=np.int64)
        cache = {}
        for i, row in enumerate(S):
            key = row.tobytes()
            if key not in cache:
                y = self.cell_labels.get(key)
                cache[key] = self._fallback(key) if y is None else y
            out[i] = cache[key]
        return out

    def to_dict(self):
        return {"kind": self.kind, "centers": self.centers.tolist(),
                "directions": self.directions.tolist(), "n_classes": self.n_classes,
                "seed": self.seed,
                "cells": [[list(np.frombuffer(k, dtype=np.int8).astype(int)), v]
                          for k, v in sorted(self.cell_labels.items())]}


def classifier_from_dict(data):
    if data["kind"] == "planes":
        cells = {np.asarray(k, dtype=np.int8).tobytes(): int(v) for k, v in data["cells"]}
        return PlaneClassifier(data["centers"], data["directions"], cells,
                               data["n_classes"], data["seed"])
    labels = {int(k): int(v) for k, v in data["labels"].items()}
    return ClusterClassifier(data["kind"], data["points"], data["assignment"], labels,
                             data["metric"])


# --------------------------------------------------------------------------
# learners

def single_linkage_learn(sample, oracle, r_c: float, epsilon: float,
                         labeler=None):
    if not 0 < epsilon < 1:
        raise InvalidInputError("epsilon must lie in (0, 1)")
    X = _points(sample)
    labeler = labeler or FirstMember()
    ledger = QueryLedger()
    ask = _Querier(oracle, ledger)
    comp = radius_components(X, r_c, "euclidean")
    labels = _label_largest(comp.assignment, comp.sizes, comp.sizes,
                            _stop_mass(epsilon, len(X)), labeler, ask, "cluster")
    diag = {"clusters": comp.n_clusters, "labeled_clusters": len(labels)}
    return ClusterClassifier("sl", X, comp.assignment, labels, "euclidean", diag), ledger


def hierarchical_learn(sample, oracle, t: int, seed: int = 0,
                       purity_threshold: float = 1.0):
    X = _points(sample)
    n = len(X)
    if not 1 <= t <= n:
        raise InvalidInputError("need 1 <= t <= n")
    ledger = QueryLedger()
    ask = _Querier(oracle, ledger)
    tree = single_linkage_dendrogram(X, "euclidean")
    picks = np.random.default_rng(seed).choice(n, size=int(t), replace=False)
    labeled = {int(i): ask(i, "random") for i in picks}
    pruning = coarsest_pure_pruning(tree, labeled, purity_threshold)
    labels = {cid: y for cid, y in enumerate(pruning.node_labels) if y >= 0}
    diag = {"clusters": pruning.n_clusters, "labeled_clusters": len(labels),
            "queried": sorted(labeled)}
    return ClusterClassifier("hier", X, pruning.assignment, labels, "euclidean", diag), ledger


def activity_threshold(d, r_a, epsilon, c_lb, c_ub):
    return c_lb / (2.0 * c_ub) * geo.cap_measure(d, r_a) * epsilon


def robust_sphere_learn(sample, oracle, r_c: float, epsilon: float, c_lb: float,
                        c_ub: float, tau: float | None = None, labeler=None):
    if not 0 < epsilon < 1:
        raise InvalidInputError("epsilon must lie in (0, 1)")
    if r_c <= 0:
        raise InvalidInputError("connection radius must be positive")
    X = _points(sample)
    n, d = X.shape
    labeler = labeler or FirstMember()
    ledger = QueryLedger()
    ask = _Querier(oracle, ledger)
    V = project_to_sphere(X)
    r_a = r_c / 2.0
    if tau is None:
        tau = activity_threshold(d, r_a, epsilon, c_lb, c_ub)
    mask = mark_active(V, r_a, min(tau, 1.0))
    if tau > 1.0 or not mask.active.any():
        raise DegenerateInstanceError("no point is active at the given activity threshold")
    idx = np.flatnonzero(mask.active)
    comp = radius_components(V[idx], r_c, "angular", strict=True)
    assignment = np.full(n, -1, dtype=np.int64)
    assignment[idx] = comp.assignment
    # members are reported in original sample indices
    labels = {}
    unlabeled = len(idx)
    stop = _stop_mass(epsilon, n)
    for cid in range(comp.n_clusters):
        if unlabeled <= stop:
            break
        labels[cid] = labeler.label(ask, idx[comp.assignment == cid], cid, "cluster")
        unlabeled -= int(comp.sizes[cid])
    diag = {"clusters": comp.n_clusters, "labeled_clusters": len(labels),
            "active": int(len(idx)), "r_a": r_a, "tau": float(tau)}
    clf = ClusterClassifier("sphere", V, assignment, labels, "angular", diag)
    return clf, ledger


def choose_connection_radius(instance, epsilon: float) -> float:
    """Largest ``r_c = 2 r_a`` meeting both activation-radius constraints for every class."""
    if instance.kind != "one_vs_all":
        raise InvalidInputError("connection radius is defined for one-vs-all instances")
    c_lb, c_ub = instance.certified.c_lb, instance.certified.c_ub
    eps_t = c_lb / c_ub * epsilon
    best = math.inf
    for i in range(instance.n_classes):
        try:
            gap1 = (geo.cap_radius(instance, i, 0.75 * eps_t, "lower")
                    - geo.cap_radius(instance, i, epsilon, "upper"))
            gap2 = (geo.cap_radius(instance, i, 0.0, "upper")
                    - geo.cap_radius(instance, i, 0.25 * eps_t, "upper"))
        except EmptyLevelSetError as exc:
            raise InfeasibleRadiusError(f"epsilon={epsilon} too large: {exc}; use a smaller epsilon") from exc
        r_a = min(0.6 * gap1, 0.5 * gap2)
        if r_a <= 0:
            raise InfeasibleRadiusError(
                f"no positive activation radius for class {i} at epsilon={epsilon}; "
                "use a smaller epsilon")
        best = min(best, r_a)
    return 2.0 * best


# --------------------------------------------------------------------------
# half-ball direction search

def _halfball_count(off, w):
    return int(np.count_nonzero(off @ w > 0))


def _arc_counts(theta_sorted, phi):
    """Points with angle strictly within pi/2 of each phi."""
    ext = np.concatenate([theta_sorted - 2 * np.pi, theta_sorted, theta_sorted + 2 * np.pi])
    lo = np.searchsorted(ext, phi - np.pi / 2, side="right")
    hi = np.searchsorted(ext, phi + np.pi / 2, side="left")
    return hi - lo


def _sweep_2d(off):
    """Exact minimizer of the half-ball count in the plane.

    The count is piecewise constant in the direction angle and changes only
    where the boundary passes through an in-ball point. Between breakpoints it
    is constant on open arcs, and the minimum over all directions equals the
    minimum over those arcs, so only arc midpoints are scored; this keeps every
    point off the boundary. Returns the midpoint of the widest minimal arc.
    Exact when no two in-ball points are collinear with the center; with such
    collinear pairs a breakpoint direction can undercut every open arc.
    """
    perp = np.arctan2(off[:, 0], -off[:, 1])
    phi = np.sort(np.concatenate([perp, np.where(perp > 0, perp - np.pi, perp + np.pi)]))
    width = np.diff(np.concatenate([phi, [phi[0] + 2 * np.pi]]))
    arcs = np.flatnonzero(width > 1e-12)
    mids = phi[arcs] + width[arcs] / 2
    theta = np.sort(np.arctan2(off[:, 1], off[:, 0]))
    approx = _arc_counts(theta, np.where(mids > np.pi, mids - 2 * np.pi, mids))
    short = np.flatnonzero(approx <= approx.min() + 1)
    dirs = np.column_stack([np.cos(mids[short]), np.sin(mids[short])])
    exact = np.count_nonzero(off @ dirs.T > 0, axis=0)
    best = int(exact.min())
    hits = np.flatnonzero(exact == best)
    k = hits[int(np.argmax(width[arcs[short[hits]]]))]
    return dirs[k], best


def _descend(off, w, steps, rng):
    d = len(w)

    def score(v):
        s = off @ v
        return (int(np.count_nonzero(s > 0)), float(np.sum(s[s > 0])))

    best = score(w)
    step = 0.5
    for _ in range(steps):
        improved = False
        for a in rng.permutation(d):
            for sgn in (1.0, -1.0):
                v = w.copy()
                v[a] += sgn * step
                nv = np.linalg.norm(v)
                if nv == 0:
                    continue
                v /= nv
                sc = score(v)
                if sc < best:
                    w, best, improved = v, sc, True
        if not improved:
            step *= 0.5
            if step < 1e-6:
                break
    return w, best[0]


def min_halfball_direction(samples, center, r: float, method: str = "auto",
                           n_directions: int = 64, steps: int = 100, seed: int = 0):
    """Direction ``w`` minimizing ``|{y : |y - x| <= r, w.(y - x) > 0}|``.

    ``method='sweep'`` (d = 2) is exact; ``'random'`` tries ``n_directions``
    random starts plus the direction away from the local mean and refines the
    best by coordinate descent. The returned count is exact for the returned
    direction.
    """
    Y = np.atleast_2d(np.asarray(samples, dtype=float))
    x = np.asarray(center, dtype=float)
    d = x.size
    off = Y - x
    dist = np.linalg.norm(off, axis=1)
    off = off[(dist <= r) & (dist > 0)]
    if method == "auto":
        method = "sweep" if d == 2 else "random"
    if len(off) == 0:
        w = np.zeros(d)
        w[0] = 1.0
        return w, 0
    if method == "sweep":
        if d != 2:
            raise InvalidInputError("the exact sweep is two-dimensional")
        return _sweep_2d(off)
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((n_directions, d))
    mean = off.mean(axis=0)
    if np.linalg.norm(mean) > 0:
        starts = np.vstack([-mean, starts])
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)
    counts = np.count_nonzero(off @ starts.T > 0, axis=0)
    w0 = starts[int(np.argmin(counts))]
    w, c = _descend(off, w0, steps, rng)
    return w, _halfball_count(off, w)


# --------------------------------------------------------------------------
# plane detection

@dataclass(eq=False)
class PlaneSet:
    centers: np.ndarray
    directions: np.ndarray
    counts: np.ndarray
    radius: float

    def __len__(self):
        return len(self.counts)


def halfball_mass(c_lb, r, d):
    """Lower bound on the probability mass of an interior half-ball of radius r."""
    return 0.5 * c_lb * r ** d * geo.unit_ball_volume(d)


def default_alpha(epsilon, m, d, R, D, c_lb):
    return epsilon ** 2 / (m ** 2 * 2 ** d * R ** 2 * D ** (2 * d)
                           * geo.unit_ball_volume(d) ** 2 * c_lb ** 2)


def _inside_domain(X, r, domain):
    lo, hi, shape = domain
    if shape == "ball":
        return 1.0 - np.linalg.norm(X, axis=1) >= r
    return np.all((X - lo >= r) & (hi - X >= r), axis=1)


def _dedup(centers, dirs, counts, r):
    order = np.lexsort((np.arange(len(counts)), counts))
    keep = []
    for i in order:
        dup = False
        for j in keep:
            ang = math.acos(min(1.0, abs(float(dirs[i] @ dirs[j]))))
            if ang > DEDUP_ANGLE:
                continue
            if (abs(dirs[j] @ (centers[i] - centers[j])) <= r / 10
                    and abs(dirs[i] @ (centers[j] - centers[i])) <= r / 10):
                dup = True
                break
        if not dup:
            keep.append(int(i))
    return np.array(keep, dtype=np.int64)


def detect_planes(X, r, tau, domain, method="auto", n_directions=64, steps=100, seed=0):
    n, d = X.shape
    eligible = np.flatnonzero(_inside_domain(X, r, domain))
    tree = cKDTree(X)
    neigh = tree.query_ball_point(X[eligible], r * (1 + 1e-9))
    centers, dirs, counts = [], [], []
    for i, nb in zip(eligible, neigh):
        w, c = min_halfball_direction(X[nb], X[i], r, method, n_directions, steps,
                                      seed=[seed, int(i)])
        if c < tau * n:
            centers.append(X[i])
            dirs.append(w)
            counts.append(c)
    if not counts:
        return PlaneSet(np.empty((0, d)), np.empty((0, d)), np.empty(0, np.int64), r), 0
    centers, dirs, counts = np.array(centers), np.array(dirs), np.array(counts)
    keep = _dedup(centers, dirs, counts, r)
    return PlaneSet(centers[keep], dirs[keep], counts[keep], r), len(counts)


def plane_detection_learn(sample, oracle, r: float, tau: float, L: int, domain,
                          seed: int = 0, method: str = "auto", n_directions: int = 64,
                          steps: int = 100, labeler=None):
    """``domain`` is ``(lo, hi, shape)`` with shape ``'box'`` or ``'ball'``."""
    if not 0 < tau < 1:
        raise InvalidInputError("tau must lie in (0, 1)")
    if r <= 0 or L < 1:
        raise InvalidInputError("need r > 0 and L >= 1")
    X = _points(sample)
    ledger = QueryLedger()
    ask = _Querier(oracle, ledger)
    planes, raw = detect_planes(X, r, tau, domain, method, n_directions, steps, seed)
    if len(planes) == 0:
        raise NoPlanesDetectedError("no half-ball fell below the detection threshold")
    clf = PlaneClassifier(planes.centers, planes.directions, {}, L, seed)
    if labeler is None:
        labeler = DeepestMember(np.min(np.abs(X @ clf.directions.T - clf._offsets), axis=1))
    S = clf.sign_vectors(X)
    keys, inverse, sizes = np.unique(S, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    first = np.full(len(keys), len(X))
    np.minimum.at(first, inverse, np.arange(len(X)))
    order = np.lexsort((first, -sizes))
    if len(order) < L:
        ledger.notes.append(f"only {len(order)} nonempty cells for {L} classes; querying all")
    cell_labels = {}
    for rank, c in enumerate(order[:L]):
        members = np.flatnonzero(inverse == c)
        cell_labels[keys[c].tobytes()] = labeler.label(ask, members, rank, "cell")
    clf.cell_labels = cell_labels
    clf.diagnostics = {"planes": len(planes), "raw_detections": raw, "cells": len(keys),
                       "cell_sizes": sizes[order].tolist()}
    return clf, ledger, planes


# --------------------------------------------------------------------------
# agnostic wrapper

def run_learner(algorithm, sample, oracle, labeler=None, **params):
    """Dispatch by algorithm id; returns ``(classifier, ledger, extra)``."""
    if algorithm == "sl":
        clf, led = single_linkage_learn(sample, oracle, params["r_c"], params["epsilon"],
                                        labeler=labeler)
        return clf, led, None
    if algorithm == "hier":
        purity = AGNOSTIC_PURITY if isinstance(labeler, MajorityVote) else 1.0
        clf, led = hierarchical_learn(sample, oracle, params["t"], params.get("seed", 0),
                                      params.get("purity_threshold", purity))
        return clf, led, None
    if algorithm == "sphere":
        clf, led = robust_sphere_learn(sample, oracle, params["r_c"], params["epsilon"],
                                       params["c_lb"], params["c_ub"], params.get("tau"),
                                       labeler=labeler)
        return clf, led, None
    if algorithm == "planes":
        return plane_detection_learn(sample, oracle, params["r"], params["tau"], params["L"],
                                     params["domain"], params.get("seed", 0),
                                     params.get("method", "auto"),
                                     params.get("n_directions", 64), params.get("steps", 100),
                                     labeler=labeler)
    raise InvalidInputError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def agnostic_wrap(algorithm, sample, oracle, t_per_group: int, seed: int = 0, **params):
    """Run ``algorithm`` with majority-vote labels of ``t_per_group`` draws per group.

    The hierarchical learner has no per-group labeling step; its wrapper keeps
    the ``t`` random queries and relaxes pruning purity to a 3/4 majority.
    """
    return run_learner(algorithm, sample, oracle, MajorityVote(t_per_group, seed), **params)
