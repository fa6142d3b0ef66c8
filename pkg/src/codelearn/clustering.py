"""Radius graphs, single-linkage trees, prunings, activity marking and
nearest-cluster classification.

Two metrics are supported: ``euclidean`` and ``angular`` (great-circle angle
between unit vectors). Neighbor search goes through a k-d tree on the chord
length, then every candidate pair is re-measured with the exact metric so the
resulting graphs do not depend on the tree's rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidInputError

METRICS = ("euclidean", "angular")
_UNIT_TOL = 1e-9
_SEARCH_SLACK = 1e-9


def _check_metric(metric):
    if metric not in METRICS:
        raise InvalidInputError(f"metric must be one of {METRICS}")


def _as_points(points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or len(X) < 1:
        raise InvalidInputError("need a non-empty (n, d) point array")
    return X


def _check_unit(X):
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > _UNIT_TOL):
        raise InvalidInputError("angular metric needs unit-norm points")


def project_to_sphere(points):
    X = _as_points(points)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InvalidInputError("cannot project the origin to the sphere")
    return X / norms


def pair_distance(A, B, metric="euclidean"):
    """Row-wise distance between equal-shape arrays ``A`` and ``B``."""
    if metric == "euclidean":
        return np.sqrt(np.sum((A - B) ** 2, axis=-1))
    return np.arccos(np.clip(np.sum(A * B, axis=-1), -1.0, 1.0))


def _chord(r, metric):
    if metric == "euclidean":
        return r
    return 2.0 * math.sin(min(r, math.pi) / 2.0)


def radius_edges(X, r, metric="euclidean", strict=False):
    """All pairs ``i < j`` with dist <= r (or < r when ``strict``)."""
    if r <= 0 or len(X) < 2:
        return np.empty((0, 2), dtype=np.intp)
    tree = cKDTree(X)
    pairs = tree.query_pairs(_chord(r, metric) * (1 + _SEARCH_SLACK) + _SEARCH_SLACK,
                             output_type="ndarray")
    if not len(pairs):
        return pairs.reshape(0, 2)
    dist = pair_distance(X[pairs[:, 0]], X[pairs[:, 1]], metric)
    keep = dist < r if strict else dist <= r
    return pairs[keep]


def _ordered_labels(raw):
    """Relabel so ids run by decreasing size, ties by smallest member index."""
    raw = np.asarray(raw)
    n_raw = int(raw.max()) + 1
    sizes = np.bincount(raw, minlength=n_raw)
    first = np.full(n_raw, len(raw))
    np.minimum.at(first, raw, np.arange(len(raw)))
    order = np.lexsort((first, -sizes))
    remap = np.empty(n_raw, dtype=np.int64)
    remap[order] = np.arange(n_raw)
    return remap[raw], sizes[order]


@dataclass(eq=False)
class RadiusGraphClusters:
    assignment: np.ndarray
    sizes: np.ndarray
    radius: float
    metric: str = "euclidean"

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cid)

    def partition(self) -> frozenset:
        return partition_of(self.assignment)


def partition_of(assignment) -> frozenset:
    groups = {}
    for i, c in enumerate(np.asarray(assignment).tolist()):
        groups.setdefault(c, []).append(i)
    return frozenset(frozenset(g) for g in groups.values())


def radius_components(points, r_c: float, metric: str = "euclidean",
                      strict: bool = False) -> RadiusGraphClusters:
    _check_metric(metric)
    X = _as_points(points)
    if r_c <= 0:
        raise InvalidInputError("connection radius must be positive")
    if metric == "angular":
        _check_unit(X)
    n = len(X)
    edges = radius_edges(X, r_c, metric, strict)
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    assignment, sizes = _ordered_labels(raw)
    return RadiusGraphClusters(assignment, sizes, float(r_c), metric)


# --------------------------------------------------------------------------
# single linkage

class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def minimum_spanning_edges(X, metric="euclidean"):
    """Prim's algorithm on the complete graph; returns (i, j, weight) arrays."""
    n = len(X)
    if n == 1:
        return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    link = np.zeros(n, dtype=np.intp)
    src, dst, wt = [], [], []
    cur = 0
    for _ in range(n - 1):
        in_tree[cur] = True
        d = pair_distance(X, X[cur][None, :], metric)
        closer = (d < best) & ~in_tree
        best[closer] = d[closer]
        link[closer] = cur
        best[in_tree] = np.inf
        nxt = int(np.argmin(best))
        src.append(int(link[nxt]))
        dst.append(nxt)
        wt.append(float(best[nxt]))
        cur = nxt
    return np.array(src), np.array(dst), np.array(wt)


@dataclass(eq=False)
class Dendrogram:
    """Single-linkage merge tree.

    Leaves are nodes ``0..n-1``; merge ``k`` creates node ``n + k`` from
    ``children[k]`` at ``heights[k]``. Heights are nondecreasing.
    """

    n: int
    children: np.ndarray
    heights: np.ndarray
    sizes: np.ndarray
    metric: str = "euclidean"

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    def n_nodes(self) -> int:
        return 2 * self.n - 1

    def cut(self, r: float, strict: bool = False) -> RadiusGraphClusters:
        """Clusters linked by merges at height <= r (< r when ``strict``)."""
        uf = UnionFind(2 * self.n - 1)
        keep = self.heights < r if strict else self.heights <= r
        for k in np.flatnonzero(keep):
            a, b = self.children[k]
            uf.union(int(a), self.n + int(k))
            uf.union(int(b), self.n + int(k))
        raw = np.array([uf.find(i) for i in range(self.n)])
        _, raw = np.unique(raw, return_inverse=True)
        assignment, sizes = _ordered_labels(raw)
        return RadiusGraphClusters(assignment, sizes, float(r), self.metric)

    def leaves_of(self, node: int) -> np.ndarray:
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            if v < self.n:
                out.append(v)
            else:
                stack.extend(self.children[v - self.n].tolist())
        return np.sort(np.array(out, dtype=np.int64))

    def parents(self) -> np.ndarray:
        par = np.full(2 * self.n - 1, -1, dtype=np.int64)
        for k, (a, b) in enumerate(self.children):
            par[a] = par[b] = self.n + k
        return par


def single_linkage_dendrogram(points, metric: str = "euclidean") -> Dendrogram:
    _check_metric(metric)
    X = _as_points(points)
    if metric == "angular":
        _check_unit(X)
    n = len(X)
    src, dst, wt = minimum_spanning_edges(X, metric)
    order = np.argsort(wt, kind="stable")
    uf = UnionFind(n)
    node_of = list(range(n))
    children = np.zeros((max(n - 1, 0), 2), dtype=np.int64)
    heights = np.zeros(max(n - 1, 0))
    sizes = np.zeros(max(n - 1, 0), dtype=np.int64)
    for k, e in enumerate(order):
        ra, rb = uf.find(int(src[e])), uf.find(int(dst[e]))
        a, b = sorted((node_of[ra], node_of[rb]))
        children[k] = (a, b)
        heights[k] = wt[e]
        root = uf.union(ra, rb)
        sizes[k] = uf.size[root]
        node_of[root] = n + k
    return Dendrogram(n, children, heights, sizes, metric)


@dataclass(eq=False)
class Pruning:
    nodes: list
    node_labels: list
    assignment: np.ndarray
    purity_threshold: float

    @property
    def n_clusters(self) -> int:
        return len(self.nodes)


def _majority(counts):
    total = counts.sum()
    if total == 0:
        return -1, 1.0
    k = int(np.argmax(counts))
    return k, counts[k] / total


def coarsest_pure_pruning(tree: Dendrogram, labeled: dict,
                          purity_threshold: float = 1.0) -> Pruning:
    """Shallowest antichain whose nodes are label-pure up to ``purity_threshold``.

    Nodes without labeled members count as pure; their label is -1 and
    classification routes them to the nearest labeled node.
    """
    if not labeled:
        raise InvalidInputError("pruning needs at least one labeled point")
    if not 0.5 < purity_threshold <= 1.0:
        raise InvalidInputError("purity threshold must lie in (0.5, 1]")
    classes = sorted({int(v) for v in labeled.values()})
    col = {c: j for j, c in enumerate(classes)}
    n = tree.n
    counts = np.zeros((2 * n - 1, len(classes)), dtype=np.int64)
    for i, y in labeled.items():
        counts[int(i), col[int(y)]] += 1
    for k, (a, b) in enumerate(tree.children):
        counts[n + k] = counts[a] + counts[b]

    nodes, labels = [], []
    stack = [tree.root]
    while stack:
        v = stack.pop()
        j, frac = _majority(counts[v])
        if v < n or frac >= purity_threshold:
            nodes.append(v)
            labels.append(classes[j] if j >= 0 else -1)
        else:
            a, b = tree.children[v - n]
            stack.extend([int(b), int(a)])
    # deterministic order: by smallest leaf
    firsts = [int(tree.leaves_of(v).min()) for v in nodes]
    order = np.argsort(firsts, kind="stable")
    nodes = [nodes[i] for i in order]
    labels = [labels[i] for i in order]
    assignment = np.empty(n, dtype=np.int64)
    for cid, v in enumerate(nodes):
        assignment[tree.leaves_of(v)] = cid
    return Pruning(nodes, labels, assignment, float(purity_threshold))


# --------------------------------------------------------------------------
# activity

@dataclass(eq=False)
class ActivityMask:
    active: np.ndarray
    counts: np.ndarray
    r_a: float
    tau: float

    @property
    def threshold(self) -> float:
        return self.tau * len(self.active)


def neighbor_counts(V, r, metric="angular"):
    """Per-point count of points within ``r`` (self included), exact."""
    tree = cKDTree(V)
    chord = _chord(r, metric)
    hi = tree.query_ball_point(V, chord * (1 + _SEARCH_SLACK) + _SEARCH_SLACK, return_length=True)
    lo = tree.query_ball_point(V, max(chord * (1 - _SEARCH_SLACK) - _SEARCH_SLACK, 0.0),
                               return_length=True)
    counts = np.asarray(lo, dtype=np.int64).copy()
    unsure = np.flatnonzero(np.asarray(hi) != np.asarray(lo))
    if unsure.size:
        near = tree.query_ball_point(V[unsure], chord * (1 + _SEARCH_SLACK) + _SEARCH_SLACK)
        for i, nb in zip(unsure, near):
            nb = np.asarray(nb, dtype=np.intp)
            dist = pair_distance(V[nb], V[i][None, :], metric)
            counts[i] = int(np.count_nonzero(dist <= r))
    return counts


def mark_active(points_on_sphere, r_a: float, tau: float) -> ActivityMask:
    V = _as_points(points_on_sphere)
    _check_unit(V)
    if not 0 < tau <= 1:
        raise InvalidInputError("tau must lie in (0, 1]")
    if r_a < 0:
        raise InvalidInputError("activation radius must be nonnegative")
    counts = neighbor_counts(V, r_a, "angular")
    return ActivityMask(counts >= tau * len(V), counts, float(r_a), float(tau))


# --------------------------------------------------------------------------
# nearest-cluster classification

@dataclass(eq=False)
class LabeledClustering:
    points: np.ndarray
    assignment: np.ndarray
    labels: dict
    metric: str = "euclidean"
    ledger: list = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0


class NearestClusterClassifier:
    """Label of the labeled cluster nearest to ``x``; ties go to the smaller id.

    Points with ``assignment < 0`` (e.g. inactive points) are ignored. For the
    angular metric, queries are first projected to the unit sphere.
    """

    def __init__(self, points, assignment, labels: dict, metric: str = "euclidean"):
        _check_metric(metric)
        labels = {int(k): int(v) for k, v in labels.items() if v is not None and v >= 0}
        if not labels:
            raise InvalidInputError("no labeled cluster")
        X = _as_points(points)
        assignment = np.asarray(assignment)
        keep = np.isin(assignment, list(labels))
        self.metric = metric
        self.points = X[keep]
        self.cluster = assignment[keep].astype(np.int64)
        self.label_of = labels
        self._labels = np.array([labels[c] for c in self.cluster], dtype=np.int64)
        self._tree = cKDTree(self.points)

    def _prep(self, X):
        X = _as_points(X)
        return project_to_sphere(X) if self.metric == "angular" else X

    def nearest_cluster(self, X) -> np.ndarray:
        X = self._prep(X)
        k = min(2, len(self.points))
        dist, idx = self._tree.query(X, k=k)
        if k == 1:
            return self.cluster[idx]
        out = self.cluster[idx[:, 0]]
        near_tie = np.flatnonzero(dist[:, 1] - dist[:, 0] <= 1e-9 * (1 + dist[:, 0]))
        for i in near_tie:
            cand = self._tree.query_ball_point(X[i], dist[i, 1] * (1 + 1e-9) + 1e-12)
            cand = np.asarray(cand, dtype=np.intp)
            exact = pair_distance(self.points[cand], X[i][None, :], self.metric)
            best = exact.min()
            out[i] = self.cluster[cand[exact == best]].min()
        return out

    def predict(self, X) -> np.ndarray:
        cid = self.nearest_cluster(X)
        return np.array([self.label_of[int(c)] for c in cid], dtype=np.int64)


def nearest_cluster_classify(clusters: LabeledClustering, x):
    clf = NearestClusterClassifier(clusters.points, clusters.assignment, clusters.labels,
                                   clusters.metric)
    out = clf.predict(np.atleast_2d(x))
    return int(out[0]) if np.ndim(x) == 1 else out
