"""Certified synthetic problem instances, samplers and metered label oracles.

Four families are built constructively so that every certificate field can be
re-verified:

* ``ecoc``: well-separated balls or boxes on a grid, with enough parallel
  axis-aligned planes in every gap that class codewords are far apart.
* ``manifold``: the same layout, but data lives on arcs or flat patches.
* ``one_vs_all``: disjoint caps of the unit ball.
* ``boundary_features``: occupied cells of an axis-aligned arrangement with
  empty holes that every plane borders.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import geometry as geo
from .errors import (
    BudgetExhaustedError,
    GenerationError,
    InvalidInputError,
    NoClassError,
    SamplerEfficiencyError,
)
from .geometry import CodeMatrix, Hyperplane

KINDS = ("ecoc", "manifold", "one_vs_all", "boundary_features")
LAYOUTS = ("staircase2d", "grid2d", "axis_grid_d", "single_cell")
MIN_ACCEPTANCE = 1e-4
_ON_SUPPORT_TOL = 1e-9


@dataclass
class Certificate:
    margin: float | None = None
    beta: int = 0
    b_min: float | None = None
    R: float | None = None
    c_lb: float | None = None
    c_ub: float | None = None
    support_volume: float | None = None
    diameter: float | None = None
    thickness: float | None = None
    level: float | None = None
    radius: float | None = None
    component_count: int | None = None
    doubling_dimension: int | None = None


@dataclass(eq=False)
class ProblemInstance:
    kind: str
    d: int
    planes: list
    code: CodeMatrix
    certified: Certificate
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    regions: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    domain_shape: str = "box"

    @property
    def n_classes(self) -> int:
        return self.code.L

    @property
    def m(self) -> int:
        return len(self.planes)

    def digest(self) -> str:
        from .io import instance_to_dict
        blob = json.dumps(instance_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def codewords(self, points) -> np.ndarray:
        return geo.predict_codeword(self.planes, np.atleast_2d(points))

    def labels(self, points) -> np.ndarray:
        """Ground-truth class of each point; -1 outside the support."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        return _LABELERS[self.kind](self, X)

    def in_domain(self, points, margin: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(points)
        if self.domain_shape == "ball":
            return np.linalg.norm(X, axis=1) <= 1.0 - margin
        return np.all((X - self.domain_lo >= margin) & (self.domain_hi - X >= margin), axis=1)


@dataclass(eq=False)
class Sample:
    points: np.ndarray
    seed: int
    instance_id: str = ""

    def __len__(self):
        return len(self.points)


@dataclass(eq=False)
class HeldOutSet:
    points: np.ndarray
    labels: np.ndarray


# --------------------------------------------------------------------------
# labelers

def _label_ecoc(inst, X):
    out = np.full(len(X), -1, dtype=np.int64)
    for k, reg in enumerate(inst.regions):
        c = np.asarray(reg["center"])
        h = reg["half"]
        if reg["shape"] == "ball":
            hit = np.sum((X - c) ** 2, axis=1) <= h * h
        else:
            hit = np.all(np.abs(X - c) <= h, axis=1)
        out[hit & (out < 0)] = reg["label"]
    return out


def _label_manifold(inst, X):
    out = np.full(len(X), -1, dtype=np.int64)
    for reg in inst.regions:
        out[_on_patch(reg, X) & (out < 0)] = reg["label"]
    return out


def _on_patch(reg, X):
    c = np.asarray(reg["center"])
    off = X - c
    axes = reg["axes"]
    other = np.ones(X.shape[1], dtype=bool)
    other[axes] = False
    flat = np.all(np.abs(off[:, other]) <= _ON_SUPPORT_TOL, axis=1)
    h = reg["half"]
    if reg["shape"] == "arc":
        a, q = axes
        rad = np.hypot(off[:, a], off[:, q])
        return flat & (np.abs(rad - h) <= _ON_SUPPORT_TOL) & (off[:, q] >= -_ON_SUPPORT_TOL)
    return flat & np.all(np.abs(off[:, axes]) <= h + _ON_SUPPORT_TOL, axis=1)


def _label_ova(inst, X):
    W, b = geo._plane_arrays(inst.planes)
    inside = (X @ W.T > b) & (np.linalg.norm(X, axis=1) <= 1.0)[:, None]
    out = np.full(len(X), -1, dtype=np.int64)
    hit = inside.any(axis=1)
    out[hit] = np.argmax(inside[hit], axis=1)
    return out


def _label_by_codeword(inst, X):
    cw = inst.codewords(X)
    lookup = {row.tobytes(): i for i, row in enumerate(inst.code.rows)}
    out = np.array([lookup.get(r.tobytes(), -1) for r in cw], dtype=np.int64)
    out[~inst.in_domain(X)] = -1
    return out


_LABELERS = {
    "ecoc": _label_ecoc,
    "manifold": _label_manifold,
    "one_vs_all": _label_ova,
    "boundary_features": _label_by_codeword,
}


# --------------------------------------------------------------------------
# generators

def _grid_shape(d, N):
    if d == 1:
        return (N,)
    n0 = math.ceil(math.sqrt(N))
    return (n0, math.ceil(N / n0))


def _fit_cell_side(d, shape, g):
    """Largest cell side whose grid bounding box has diameter <= 1."""
    A = sum(k * k for k in shape) + (d - len(shape))
    B = sum(2 * k * (k - 1) * g for k in shape)
    C = sum(((k - 1) * g) ** 2 for k in shape)
    if C >= 1.0:
        return 0.0
    return (-B + math.sqrt(B * B - 4 * A * (C - 1.0))) / (2 * A)


def _grid_layout(d, N, g, beta, seed):
    """Cell boxes and gap planes shared by the ECOC and manifold families."""
    if N < 1:
        raise InvalidInputError("need at least one component")
    if g <= 0:
        raise InvalidInputError("margin g must be positive")
    shape = _grid_shape(d, N)
    s_fit = _fit_cell_side(d, shape, g)
    if s_fit <= 0:
        raise GenerationError(f"{N} regions with gap {g} do not fit in unit diameter")
    s = min(s_fit, g)
    ext = np.full(d, s)
    for a, k in enumerate(shape):
        ext[a] = k * s + (k - 1) * g
    lo = -ext / 2
    rng = np.random.default_rng(seed)
    cells = []
    for idx in itertools.product(*[range(k) for k in reversed(shape)]):
        idx = tuple(reversed(idx))
        if len(cells) == N:
            break
        clo = lo.copy()
        for a, i in enumerate(idx):
            clo[a] = lo[a] + i * (s + g)
        cells.append((idx, clo, clo + s))
    k_planes = 2 * beta + d + 1
    planes = []
    jitter = g / (4 * (k_planes + 1))
    for a, k in enumerate(shape):
        for i in range(k - 1):
            start = lo[a] + i * (s + g) + s
            pos = start + g * (np.arange(1, k_planes + 1) / (k_planes + 1))
            pos = pos + rng.uniform(-jitter, jitter, size=k_planes)
            for p in pos:
                w = np.zeros(d)
                w[a] = 1.0
                planes.append(Hyperplane(w, float(p)))
    if not planes:
        w = np.zeros(d)
        w[0] = 1.0
        planes.append(Hyperplane(w, float(lo[0] - 1.0)))
    return shape, s, lo, lo + ext, cells, planes


def _codes_from_centers(planes, centers):
    return CodeMatrix(geo.predict_codeword(planes, np.asarray(centers)))


def generate_ecoc(d: int, N: int, g: float, seed: int = 0, shape: str = "ball",
                  beta: int = 0) -> ProblemInstance:
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    if shape not in ("ball", "box"):
        raise InvalidInputError("shape must be 'ball' or 'box'")
    _, s, lo, hi, cells, planes = _grid_layout(d, N, g, beta, seed)
    half = s / 2
    regions = []
    for k, (idx, clo, chi) in enumerate(cells):
        regions.append({"shape": shape, "center": ((clo + chi) / 2).tolist(),
                        "half": half, "cell": list(idx), "label": k})
    code = _codes_from_centers(planes, [r["center"] for r in regions])
    vol_region = geo._ball_volume(d) * half ** d if shape == "ball" else s ** d
    vol = N * vol_region
    cert = Certificate(
        margin=float(g), beta=beta, c_lb=1.0 / vol, c_ub=1.0 / vol,
        support_volume=vol, diameter=float(np.linalg.norm(hi - lo)),
        thickness=1.0 if shape == "ball" else math.sqrt(d),
        level=1.0 / vol, radius=half, component_count=N, doubling_dimension=None,
    )
    return ProblemInstance("ecoc", d, planes, code, cert, lo, hi, regions,
                           {"generator": "ecoc", "d": d, "N": N, "g": g, "seed": seed,
                            "shape": shape, "beta": beta})


def generate_ecoc_manifold(d_ambient: int, d_intrinsic: int, N: int, g: float,
                           seed: int = 0) -> ProblemInstance:
    if d_intrinsic > d_ambient or d_intrinsic < 1:
        raise InvalidInputError("need 1 <= d_intrinsic <= d_ambient")
    if d_intrinsic == d_ambient:
        return generate_ecoc(d_ambient, N, g, seed)
    d = d_ambient
    _, s, lo, hi, cells, planes = _grid_layout(d, N, g, 0, seed)
    half = s / 2
    # axis 0 always spans the patch so adjacent components sit exactly g apart
    extra = list(range(d - d_intrinsic + 1, d)) if d_intrinsic > 1 else [d - 1]
    regions = []
    for k, (idx, clo, chi) in enumerate(cells):
        center = (clo + chi) / 2
        if d_intrinsic == 1:
            reg = {"shape": "arc", "axes": [0, d - 1]}
        else:
            reg = {"shape": "patch", "axes": [0] + extra}
        reg.update({"center": center.tolist(), "half": half, "cell": list(idx), "label": k})
        regions.append(reg)
    code = _codes_from_centers(planes, [r["center"] for r in regions])
    measure = math.pi * half if d_intrinsic == 1 else s ** d_intrinsic
    cert = Certificate(
        margin=float(g), beta=0, support_volume=N * measure,
        diameter=float(np.linalg.norm(hi - lo)), radius=half,
        component_count=N, doubling_dimension=d_intrinsic,
    )
    return ProblemInstance("manifold", d, planes, code, cert, lo, hi, regions,
                           {"generator": "manifold", "d_ambient": d, "d_intrinsic": d_intrinsic,
                            "N": N, "g": g, "seed": seed})


def _random_rotation(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _spread_directions(d, L, rng):
    if L == 1:
        dirs = np.eye(d)[:1]
    elif L <= d + 1:
        # regular simplex inside span(e_0..e_{L-1}) of R^L, embedded in R^d
        P = np.eye(L) - 1.0 / L
        basis, _ = np.linalg.qr(P[:, : L - 1])
        pts = P @ basis
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        dirs = np.zeros((L, d))
        dirs[:, : L - 1] = pts
    elif L <= 2 * d:
        full = np.concatenate([np.eye(d), -np.eye(d)])
        order = [a for pair in zip(range(d), range(d, 2 * d)) for a in pair]
        dirs = full[order[:L]]
    else:
        pool = rng.standard_normal((4096, d))
        pool /= np.linalg.norm(pool, axis=1, keepdims=True)
        chosen = [0]
        best = pool @ pool[0]
        for _ in range(L - 1):
            j = int(np.argmin(best))
            chosen.append(j)
            best = np.maximum(best, pool @ pool[j])
        dirs = pool[chosen]
    return dirs @ _random_rotation(d, rng).T


def make_one_vs_all(W, b, params=None) -> ProblemInstance:
    """One-vs-all instance on the unit ball with uniform density on the caps.

    Caps are not required to be disjoint here; ``verify_assumptions`` reports it.
    """
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    L, d = W.shape
    planes = [Hyperplane(w / np.linalg.norm(w), bi) for w, bi in zip(W, b)]
    vol = float(sum(geo.ball_segment_volume(d, bi) for bi in b))
    cert = Certificate(b_min=float(b.min()), c_lb=1.0 / vol, c_ub=1.0 / vol,
                       support_volume=vol, diameter=2.0, component_count=L,
                       level=1.0 / vol)
    return ProblemInstance("one_vs_all", d, planes, CodeMatrix.one_vs_all(L), cert,
                           -np.ones(d), np.ones(d), [], dict(params or {}), "ball")


def generate_one_vs_all(d: int, L: int, b_min: float, seed: int = 0,
                        slack: float = 0.02) -> ProblemInstance:
    if d < 2 or L < 1:
        raise InvalidInputError("need d >= 2 and L >= 1")
    if not 0 < b_min < 1:
        raise InvalidInputError("b_min must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    W = _spread_directions(d, L, rng)
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    b = b_min
    if L > 1:
        G = np.clip(W @ W.T, -1, 1)
        theta = float(np.arccos(G[np.triu_indices(L, 1)]).min())
        if theta <= slack:
            raise GenerationError(f"cannot separate {L} caps in dimension {d}")
        b = max(b_min, math.cos((theta - slack) / 2))
    if b >= 1.0 - 1e-9:
        raise GenerationError(f"cannot place {L} disjoint caps with b_min={b_min} in d={d}")
    return make_one_vs_all(W, np.full(L, b),
                           {"generator": "one_vs_all", "d": d, "L": L, "b_min": b_min,
                            "seed": seed, "slack": slack})


def _boundary_layout(layout, d):
    """Plane positions per axis, empty cells and domain for each canonical layout."""
    if layout == "staircase2d":
        if d != 2:
            raise InvalidInputError("staircase2d is two-dimensional")
        S = 1 / math.sqrt(2)
        cuts = [[S / 3, 2 * S / 3]] * 2
        holes = {(0, 2), (2, 0)}
        lo, hi = np.zeros(2), np.full(2, S)
        witnesses = [(0, 0, (1, 2)), (0, 1, (1, 0)), (1, 0, (2, 1)), (1, 1, (0, 1))]
        r_max = S / 6
    elif layout == "grid2d":
        if d != 2:
            raise InvalidInputError("grid2d is two-dimensional")
        S = 1 / math.sqrt(2)
        cuts = [[S * k / 5 for k in range(1, 5)]] * 2
        holes = {(1, 1), (1, 3), (3, 1), (3, 3)}
        lo, hi = np.zeros(2), np.full(2, S)
        witnesses = [(0, 0, (0, 1)), (0, 1, (2, 1)), (0, 2, (2, 1)), (0, 3, (4, 1)),
                     (1, 0, (1, 0)), (1, 1, (1, 2)), (1, 2, (1, 2)), (1, 3, (1, 4))]
        r_max = S / 10
    elif layout == "axis_grid_d":
        H = 1 / (2 * math.sqrt(d))
        t = H / 3
        cuts = [[-t, t]] * d
        holes = {(1,) * d}
        lo, hi = np.full(d, -H), np.full(d, H)
        witnesses = []
        for a in range(d):
            for j, side in ((0, 0), (1, 2)):
                cell = [1] * d
                cell[a] = side
                witnesses.append((a, j, tuple(cell)))
        r_max = t
    elif layout == "single_cell":
        H = 1 / (2 * math.sqrt(d))
        cuts = [[0.0]] + [[]] * (d - 1)
        holes = {(1,) + (0,) * (d - 1)}
        lo, hi = np.full(d, -H), np.full(d, H)
        witnesses = [(0, 0, (0,) + (0,) * (d - 1))]
        r_max = H
    else:
        raise InvalidInputError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    return cuts, holes, lo, hi, witnesses, r_max


def generate_boundary_features(d: int, layout: str, R: float, seed: int = 0) -> ProblemInstance:
    cuts, holes, lo, hi, witnesses, r_max = _boundary_layout(layout, d)
    if not 0 < R <= r_max + 1e-15:
        raise GenerationError(f"R={R} violates the {layout} constraint 0 < R <= {r_max:.6g}")
    planes, plane_index = [], {}
    for a, positions in enumerate(cuts):
        for j, p in enumerate(positions):
            w = np.zeros(d)
            w[a] = 1.0
            plane_index[(a, j)] = len(planes)
            planes.append(Hyperplane(w, float(p)))
    edges = [np.concatenate([[lo[a]], cuts[a], [hi[a]]]) for a in range(d)]
    cells, occupied = [], []
    for idx in itertools.product(*[range(len(c) + 1) for c in cuts]):
        clo = np.array([edges[a][i] for a, i in enumerate(idx)])
        chi = np.array([edges[a][i + 1] for a, i in enumerate(idx)])
        cw = geo.predict_codeword(planes, (clo + chi) / 2)
        cell = {"cell": list(idx), "lo": clo.tolist(), "hi": chi.tolist(),
                "codeword": cw.tolist(), "occupied": idx not in holes, "label": -1}
        if cell["occupied"]:
            cell["label"] = len(occupied)
            occupied.append(cell)
        cells.append(cell)
    code = CodeMatrix(np.array([c["codeword"] for c in occupied]))
    wit = []
    for a, j, class_cell in witnesses:
        cell = next(c for c in occupied if tuple(c["cell"]) == class_cell)
        center = (np.asarray(cell["lo"]) + np.asarray(cell["hi"])) / 2
        center[a] = cuts[a][j]
        wit.append({"plane": plane_index[(a, j)], "center": center.tolist(),
                    "label": cell["label"]})
    vol = float(sum(np.prod(np.subtract(c["hi"], c["lo"])) for c in occupied))
    cert = Certificate(R=float(R), c_lb=1.0 / vol, c_ub=1.0 / vol, support_volume=vol,
                       diameter=float(np.linalg.norm(hi - lo)),
                       component_count=len(occupied), level=1.0 / vol)
    return ProblemInstance("boundary_features", d, planes, code, cert, lo, hi,
                           cells + [{"witnesses": wit}],
                           {"generator": "boundary_features", "d": d, "layout": layout,
                            "R": R, "seed": seed})


def boundary_cells(inst):
    return [r for r in inst.regions if "cell" in r]


def boundary_witnesses(inst):
    for r in inst.regions:
        if "witnesses" in r:
            return r["witnesses"]
    return []


def generate(kind: str, seed: int = 0, **params) -> ProblemInstance:
    """Dispatch on ``kind`` with generator keyword parameters."""
    if kind == "ecoc":
        return generate_ecoc(seed=seed, **params)
    if kind == "manifold":
        return generate_ecoc_manifold(seed=seed, **params)
    if kind == "one_vs_all":
        return generate_one_vs_all(seed=seed, **params)
    if kind == "boundary_features":
        return generate_boundary_features(seed=seed, **params)
    raise InvalidInputError(f"unknown instance kind {kind!r}")


# --------------------------------------------------------------------------
# sampling

def _uniform_ball(rng, n, d):
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.random((n, 1)) ** (1.0 / d)


def _rejection(rng, n, propose, accept, batch=None):
    out, got, tried = [], 0, 0
    batch = batch or max(1024, 2 * n)
    while got < n:
        cand = propose(batch)
        ok = accept(cand)
        tried += batch
        got += int(ok.sum())
        out.append(cand[ok])
        if tried >= 1e6 and got / tried < MIN_ACCEPTANCE:
            raise SamplerEfficiencyError(
                f"rejection acceptance {got / tried:.2e} below {MIN_ACCEPTANCE:g}")
        if got == 0 and tried >= 1e6:
            raise SamplerEfficiencyError("rejection sampler accepted no points")
    return np.concatenate(out)[:n]


def _sample_points(inst, n, rng):
    d = inst.d
    if inst.kind == "ecoc":
        which = rng.integers(len(inst.regions), size=n)
        X = np.empty((n, d))
        for k, reg in enumerate(inst.regions):
            idx = np.flatnonzero(which == k)
            if not idx.size:
                continue
            c, h = np.asarray(reg["center"]), reg["half"]
            box = lambda m: c + rng.uniform(-h, h, size=(m, d))  # noqa: E731
            if reg["shape"] == "ball":
                acc = lambda Y: np.sum((Y - c) ** 2, axis=1) <= h * h  # noqa: E731
            else:
                acc = lambda Y: np.ones(len(Y), dtype=bool)  # noqa: E731
            X[idx] = _rejection(rng, idx.size, box, acc)
        return X
    if inst.kind == "manifold":
        which = rng.integers(len(inst.regions), size=n)
        X = np.empty((n, d))
        for k, reg in enumerate(inst.regions):
            idx = np.flatnonzero(which == k)
            c, h, axes = np.asarray(reg["center"]), reg["half"], reg["axes"]
            pts = np.tile(c, (idx.size, 1))
            if reg["shape"] == "arc":
                phi = rng.uniform(0.0, math.pi, size=idx.size)
                pts[:, axes[0]] += h * np.cos(phi)
                pts[:, axes[1]] += h * np.sin(phi)
            else:
                pts[:, axes] += rng.uniform(-h, h, size=(idx.size, len(axes)))
            X[idx] = pts
        return X
    if inst.kind == "one_vs_all":
        return _rejection(rng, n, lambda m: _uniform_ball(rng, m, d),
                          lambda Y: inst.labels(Y) >= 0)
    lo, hi = inst.domain_lo, inst.domain_hi
    return _rejection(rng, n, lambda m: rng.uniform(lo, hi, size=(m, d)),
                      lambda Y: inst.labels(Y) >= 0)


def draw_sample(instance: ProblemInstance, n: int, seed: int) -> Sample:
    if n < 1:
        raise InvalidInputError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    return Sample(_sample_points(instance, int(n), rng), seed, instance.digest())


def make_heldout(instance: ProblemInstance, size: int, seed: int) -> HeldOutSet:
    # separate stream from draw_sample(seed)
    rng = np.random.default_rng([int(seed), 0x4E1D])
    X = _sample_points(instance, int(size), rng)
    return HeldOutSet(X, instance.labels(X))


# --------------------------------------------------------------------------
# oracle

class LabeledOracle:
    """Metered label oracle over a fixed sample.

    With ``eta > 0`` each sample index is flipped, independently and once and
    for all, to a uniformly random other class with probability ``eta``.
    """

    def __init__(self, instance, points, eta: float = 0.0, noise_seed: int = 0,
                 budget: int | None = None):
        if not 0.0 <= eta < 1.0:
            raise InvalidInputError("eta must lie in [0, 1)")
        self.instance = instance
        self.points = np.asarray(points.points if isinstance(points, Sample) else points)
        self.eta = float(eta)
        self.noise_seed = int(noise_seed)
        self.budget = budget
        self.query_count = 0
        self._truth = instance.labels(self.points)

    def _noisy(self, true_label: int, key) -> int:
        if self.eta == 0.0:
            return true_label
        rng = np.random.default_rng([self.noise_seed, *key])
        if rng.random() >= self.eta:
            return true_label
        other = int(rng.integers(self.instance.n_classes - 1))
        return other if other < true_label else other + 1

    def _charge(self):
        if self.budget is not None and self.query_count >= self.budget:
            raise BudgetExhaustedError(f"label budget {self.budget} exhausted")
        self.query_count += 1

    def true_label(self, index: int) -> int:
        return int(self._truth[index])

    def query(self, index: int) -> int:
        index = int(index)
        y = int(self._truth[index])
        if y < 0:
            raise NoClassError(f"sample point {index} lies outside the support")
        self._charge()
        return self._noisy(y, (0, index))

    def query_point(self, x) -> int:
        x = np.asarray(x, dtype=float)
        y = int(self.instance.labels(x)[0])
        if y < 0:
            raise NoClassError("point lies outside the support")
        self._charge()
        digest = hashlib.sha256(x.tobytes()).digest()
        return self._noisy(y, (1, int.from_bytes(digest[:8], "little")))


def query_label(oracle: LabeledOracle, target) -> int:
    """Query by sample index (int) or by point (array)."""
    if np.isscalar(target) and float(target).is_integer():
        return oracle.query(int(target))
    return oracle.query_point(target)


# --------------------------------------------------------------------------
# certification

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class AssumptionReport:
    kind: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.checks]


def _min_cross_distance(X, y):
    best = math.inf
    classes = np.unique(y)
    for i, j in itertools.combinations(classes, 2):
        A, B = X[y == i], X[y == j]
        for start in range(0, len(A), 512):
            D = np.sum((A[start:start + 512, None, :] - B[None]) ** 2, axis=-1)
            best = min(best, float(np.sqrt(D.min())))
    return best


def _general_position(inst):
    d = inst.d
    W, b = geo._plane_arrays(inst.planes)
    axis_aligned = np.all(np.sum(np.abs(W) > 0, axis=1) == 1)
    if axis_aligned:
        axes = np.argmax(np.abs(W), axis=1)
        offsets = b * np.sign(W[np.arange(len(W)), axes])
        dup = len({(int(a), float(o)) for a, o in zip(axes, offsets)}) != len(W)
        worst = len(set(axes.tolist()))
        return (not dup and worst <= d,
                f"axis-aligned: at most {worst} planes meet, duplicates={dup}")
    combos = math.comb(len(W), d + 1)
    if combos > 100_000:
        return True, f"skipped: {combos} subsets"
    for S in itertools.combinations(range(len(W)), d + 1):
        A = np.column_stack([W[list(S)], -b[list(S)]])
        if np.linalg.matrix_rank(W[list(S)]) == np.linalg.matrix_rank(A):
            return False, f"planes {S} share a point"
    return True, f"no {d + 1} planes meet among {len(W)}"


def _box_gap(lo1, hi1, lo2, hi2):
    gap = np.maximum(0.0, np.maximum(np.subtract(lo1, hi2), np.subtract(lo2, hi1)))
    return float(np.linalg.norm(gap))


def verify_assumptions(instance: ProblemInstance, mc_budget: int = 20000,
                       seed: int = 0, tol: float = 0.05) -> AssumptionReport:
    inst = instance
    rng = np.random.default_rng(seed)
    X = _sample_points(inst, mc_budget, rng)
    y = inst.labels(X)
    cert = inst.certified
    checks = [Check("support", bool(np.all(y >= 0)),
                    f"{int(np.sum(y < 0))} of {len(y)} sampled points off the support")]

    if inst.kind in ("ecoc", "manifold"):
        m = _min_cross_distance(X[: min(len(X), 6000)], y[: min(len(X), 6000)])
        checks.append(Check("a_margin", m >= cert.margin * (1 - tol),
                            f"min cross-class distance {m:.6g} vs certified {cert.margin:.6g}"))
        need = 2 * cert.beta + inst.d + 1
        dmin = inst.code.min_distance()
        checks.append(Check("b_hamming", dmin >= need or inst.code.L < 2,
                            f"min codeword distance {dmin}, need {need}"))
        ok, msg = _general_position(inst)
        checks.append(Check("c_general_position", ok, msg))
    elif inst.kind == "one_vs_all":
        dmin = inst.code.min_distance()
        checks.append(Check("b_hamming", inst.code.L < 2 or dmin == 2,
                            f"one-vs-all codeword distance {dmin}"))
        W, b = geo._plane_arrays(inst.planes)
        worst = math.inf
        for i, j in itertools.combinations(range(len(W)), 2):
            gap = float(geo.angle(W[i], W[j])) - math.acos(b[i]) - math.acos(b[j])
            worst = min(worst, gap)
        probe = _uniform_ball(rng, mc_budget, inst.d)
        double = int(np.sum(np.sum(probe @ W.T > b, axis=1) > 1))
        checks.append(Check("d_caps_disjoint", worst > 0 and double == 0,
                            f"angular slack {worst:.4g}, {double} probe points in two caps"))
    else:
        checks.append(Check("b_hamming", inst.code.L >= 1, f"{inst.code.L} distinct codewords"))
        checks.append(_check_witnesses(inst, rng))
        checks.append(_check_empty_separation(inst))

    if cert.c_lb is not None:
        counts = np.bincount(y[y >= 0], minlength=inst.n_classes)
        vols = _class_volumes(inst)
        worst = 0.0
        for k in range(inst.n_classes):
            p = cert.c_lb * vols[k]
            se = math.sqrt(max(p * (1 - p), 1e-300) / len(X))
            worst = max(worst, abs(counts[k] / len(X) - p) / se)
        checks.append(Check("f_density", worst <= 4.0,
                            f"largest class-mass deviation {worst:.2f} standard errors"))
    if cert.diameter is not None:
        limit = 2.0 if inst.kind == "one_vs_all" else 1.0
        span = _diameter_estimate(X)
        checks.append(Check("g_diameter",
                            cert.diameter <= limit + 1e-12 and span <= cert.diameter + 1e-9,
                            f"sampled span {span:.4g}, certified {cert.diameter:.4g}"))
    return AssumptionReport(inst.kind, checks)


def _diameter_estimate(X):
    # farthest-point sweeps from a few starts give a tight lower bound
    best = 0.0
    for start in (0, len(X) // 2):
        p = X[start]
        for _ in range(3):
            dist = np.linalg.norm(X - p, axis=1)
            j = int(np.argmax(dist))
            best = max(best, float(dist[j]))
            p = X[j]
    return best


def _class_volumes(inst):
    d = inst.d
    if inst.kind == "ecoc":
        vols = np.zeros(inst.n_classes)
        for reg in inst.regions:
            h = reg["half"]
            vols[reg["label"]] += geo._ball_volume(d) * h ** d if reg["shape"] == "ball" else (2 * h) ** d
        return vols
    if inst.kind == "one_vs_all":
        return np.array([geo.ball_segment_volume(d, p.b) for p in inst.planes])
    vols = np.zeros(inst.n_classes)
    for c in boundary_cells(inst):
        if c["occupied"]:
            vols[c["label"]] += float(np.prod(np.subtract(c["hi"], c["lo"])))
    return vols


def _check_witnesses(inst, rng, count=10_000):
    R = inst.certified.R
    rows = {r.tobytes() for r in inst.code.rows}
    bad = []
    wit = boundary_witnesses(inst)
    covered = {w["plane"] for w in wit}
    for w in wit:
        j, ci = w["plane"], inst.code.rows[w["label"]]
        flipped = ci.copy()
        flipped[j] = -flipped[j]
        if flipped.tobytes() in rows:
            bad.append(f"plane {j}: flipped codeword is a class")
            continue
        pts = np.asarray(w["center"]) + R * _uniform_ball(rng, count, inst.d)
        cw = inst.codewords(pts)
        ok = np.all((cw == ci).all(axis=1) | (cw == flipped).all(axis=1))
        if not ok:
            bad.append(f"plane {j}: ball leaves the two cells")
    missing = set(range(inst.m)) - covered
    if missing:
        bad.append(f"planes without witness: {sorted(missing)}")
    return Check("e_witness_balls", not bad, "; ".join(bad) or f"{len(wit)} witness balls verified")


def _check_empty_separation(inst):
    R = inst.certified.R
    empty = [c for c in boundary_cells(inst) if not c["occupied"]]
    worst = math.inf
    for a, b in itertools.combinations(empty, 2):
        if a["codeword"] != b["codeword"]:
            worst = min(worst, _box_gap(a["lo"], a["hi"], b["lo"], b["hi"]))
    return Check("e_empty_separation", worst >= R,
                 f"closest distinct empty regions {worst:.4g} apart, R={R:.4g}")


def certificate_dict(cert: Certificate) -> dict:
    return asdict(cert)


def certificate_from_dict(d: dict) -> Certificate:
    names = {f.name for f in fields(Certificate)}
    return Certificate(**{k: v for k, v in d.items() if k in names})
