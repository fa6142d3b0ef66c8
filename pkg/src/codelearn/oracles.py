"""Independent reference computations.

Nothing here calls the quadrature, samplers, neighbor searches or direction
minimizers it is used to check. Samplers are written from scratch, integrals
use :mod:`scipy.integrate` / :mod:`scipy.special`, and graph or count checks are
plain O(n^2) loops.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

K_SIGMA = 4.0


@dataclass
class MCReport:
    estimate: float
    standard_error: float
    sample_count: int
    target: float | None = None
    k: float = K_SIGMA

    @property
    def deviation(self) -> float:
        if self.target is None:
            return float("nan")
        return abs(self.estimate - self.target)

    @property
    def passed(self) -> bool:
        if self.target is None:
            return True
        return self.deviation <= self.k * self.standard_error + 1e-15


def _binomial_report(hits, count, target):
    p = hits / count
    return MCReport(p, math.sqrt(p * (1 - p) / count), int(count), target)


# --------------------------------------------------------------------------
# samplers and closed forms

def uniform_ball(rng, count, d, radius=1.0):
    """Direction times radius * U^(1/d)."""
    g = rng.standard_normal((count, d))
    g /= np.sqrt(np.einsum("ij,ij->i", g, g))[:, None]
    return radius * g * rng.random(count)[:, None] ** (1.0 / d)


def ball_volume(d):
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)


def cap_fraction(d, r):
    """Uniform-sphere probability of a cap of angular radius r (incomplete beta)."""
    if r <= math.pi / 2:
        return 0.5 * special.betainc((d - 1) / 2, 0.5, math.sin(r) ** 2)
    return 1.0 - cap_fraction(d, math.pi - r)


def uniform_cap(rng, count, center, rho):
    """Uniform points on the sphere within angle ``rho`` of ``center``.

    The polar angle is drawn from density ``theta^(d-2)`` on [0, rho] and
    thinned by ``(sin theta / theta)^(d-2)``.
    """
    c = np.asarray(center, dtype=float)
    d = c.size
    out = []
    got = 0
    while got < count:
        m = 2 * (count - got) + 64
        theta = rho * rng.random(m) ** (1.0 / (d - 1))
        ratio = np.where(theta > 0, np.sin(theta) / np.where(theta > 0, theta, 1), 1.0)
        keep = rng.random(m) < ratio ** (d - 2)
        theta = theta[keep]
        e = rng.standard_normal((len(theta), d))
        e -= np.outer(e @ c, c)
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        out.append(np.cos(theta)[:, None] * c + np.sin(theta)[:, None] * e)
        got += len(theta)
    return np.concatenate(out)[:count]


def _cap_density(W, b, c, d, V):
    """Projected density formula on each cap, zero elsewhere."""
    proj = V @ W.T
    q = np.zeros(len(V))
    for i in range(len(b)):
        inside = proj[:, i] > b[i]
        q[inside] = c * ball_volume(d) * (1 - (b[i] / proj[inside, i]) ** d)
    return q


def _planes(instance):
    W = np.array([p.w for p in instance.planes], dtype=float)
    b = np.array([p.b for p in instance.planes], dtype=float)
    return W, b


# --------------------------------------------------------------------------
# formula checks

def mc_ball_slice(d, r, rho, count=1_000_000, seed=0, target=None, chunk=200_000):
    if count < 10_000:
        raise ValueError("need at least 10^4 samples")
    rng = np.random.default_rng(seed)
    hits = 0
    left = count
    while left:
        m = min(chunk, left)
        x1 = uniform_ball(rng, m, d, r)[:, 0]
        hits += int(np.count_nonzero((x1 >= 0) & (x1 <= rho)))
        left -= m
    return _binomial_report(hits, count, target)


def slice_exact(d, r, rho):
    """Slice probability by scipy quadrature of the cross-section volume."""
    val, _ = integrate.quad(lambda x: (r * r - x * x) ** ((d - 1) / 2), 0, rho,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return ball_volume(d - 1) * val / (ball_volume(d) * r ** d) if d > 1 else rho / (2 * r)


def band_mass_target(instance, i, rho1, rho2):
    """Integral of the projected density over {rho1 <= ang(w_i, v) <= rho2}."""
    d = instance.d
    W, b = _planes(instance)
    c = instance.certified.c_lb
    norm, _ = integrate.quad(lambda t: math.sin(t) ** (d - 2), 0, math.pi, epsabs=1e-14)

    def q_of(t):
        ct = math.cos(t)
        if ct <= b[i]:
            return 0.0
        return c * ball_volume(d) * (1 - (b[i] / ct) ** d)

    val, _ = integrate.quad(lambda t: q_of(t) * math.sin(t) ** (d - 2), rho1, rho2,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val / norm


def mc_projected_density(instance, i, band, count=1_000_000, seed=0, chunk=200_000):
    """Mass of the angular band around w_i among points drawn uniformly on K."""
    rho1, rho2 = band
    W, b = _planes(instance)
    d = instance.d
    rng = np.random.default_rng(seed)
    hits = got = 0
    while got < count:
        X = uniform_ball(rng, chunk, d)
        proj = X @ W.T
        inK = np.any(proj > b, axis=1)
        X, proj = X[inK][: count - got], proj[inK][: count - got]
        cosang = proj[:, i] / np.linalg.norm(X, axis=1)
        ang = np.arccos(np.clip(cosang, -1, 1))
        hits += int(np.count_nonzero((proj[:, i] > b[i]) & (ang >= rho1) & (ang <= rho2)))
        got += len(X)
    return _binomial_report(hits, count, band_mass_target(instance, i, rho1, rho2))


def _rejection_sample(instance, count, rng):
    lo, hi = instance.domain_lo, instance.domain_hi
    out, got = [], 0
    while got < count:
        if instance.domain_shape == "ball":
            X = uniform_ball(rng, 4 * count, instance.d)
        else:
            X = lo + (hi - lo) * rng.random((4 * count, instance.d))
        X = X[instance.labels(X) >= 0]
        out.append(X)
        got += len(X)
    return np.concatenate(out)[:count]


def _instance_points(instance, count, seed):
    rng = np.random.default_rng(seed)
    if instance.kind == "manifold":
        from .problems import draw_sample
        return draw_sample(instance, count, seed).points
    return _rejection_sample(instance, count, rng)


def _points_for_pairs(instance, pair_count):
    L = max(instance.n_classes, 2)
    return int(math.ceil(math.sqrt(2 * pair_count / (1 - 1 / L)))) + 8


def brute_margin(instance, pair_count=100_000, seed=0):
    """Smallest distance over at least ``pair_count`` cross-class pairs; inf for one class."""
    if instance.n_classes < 2:
        return math.inf
    X = _instance_points(instance, _points_for_pairs(instance, pair_count), seed)
    y = instance.labels(X)
    best = math.inf
    for i in range(len(X)):
        other = y[i + 1:] != y[i]
        if other.any():
            diff = X[i + 1:][other] - X[i]
            best = min(best, float(np.sqrt(np.min(np.sum(diff * diff, axis=1)))))
    return best


def segment_crossings(instance, pair_count=10_000, seed=0):
    """Fraction of sampled cross-class pairs that sit on opposite sides of every plane
    where their codewords disagree; returns (fraction, pairs checked)."""
    rng = np.random.default_rng(seed)
    L = max(instance.n_classes, 2)
    X = _instance_points(instance, int(2.5 * pair_count * L / (L - 1)) + 64, seed)
    y = instance.labels(X)
    W, b = _planes(instance)
    half = len(X) // 2
    A, B = X[:half], X[half:2 * half]
    ya, yb = y[:half], y[half:2 * half]
    cross = np.flatnonzero(ya != yb)
    if cross.size == 0:
        return 1.0, 0
    pick = rng.choice(cross, size=min(pair_count, cross.size), replace=False)
    code = instance.code.rows
    ha = A[pick] @ W.T - b
    hb = B[pick] @ W.T - b
    differ = code[ya[pick]] != code[yb[pick]]
    ok = np.all(~differ | (ha * hb < 0), axis=1) & differ.any(axis=1)
    return float(ok.mean()), int(len(pick))


# --------------------------------------------------------------------------
# clusterability

def _rho(b, c, d, lam):
    """Closed-form angular radius of {projected density >= lam} with constant c."""
    base = 1 - lam / (c * ball_volume(d))
    if base <= 0:
        return None
    arg = b * base ** (-1.0 / d)
    return None if arg > 1 else math.acos(arg)


def _tangent_probe(center, angle, rng):
    e = rng.standard_normal(center.size)
    e -= (e @ center) * center
    e /= np.linalg.norm(e)
    return math.cos(angle) * center + math.sin(angle) * e


def _cap_mass(rng, v, radius, W, b, c, d, m):
    U = uniform_cap(rng, m, v, radius)
    q = _cap_density(W, b, c, d, U)
    frac = cap_fraction(d, radius)
    return frac * q.mean(), frac * q.std(ddof=1) / math.sqrt(m)


def check_clusterability(instance, epsilon, r_c=None, r_a=None, tau=None, gamma=None,
                         mc_budget=20_000, seed=0, probes=8):
    """Spot-check the five clusterability properties for level-``epsilon`` caps.

    Defaults: ``r_a = r_c / 2``, ``tau = eps~ V(r_a) / 2``,
    ``gamma = eps~ V(r_c / 3) / 4`` with ``eps~ = (c_lb / c_ub) epsilon``.
    Returns ``{property: (passed, detail)}``.
    """
    d = instance.d
    W, b = _planes(instance)
    c_lb, c_ub = instance.certified.c_lb, instance.certified.c_ub
    eps_t = c_lb / c_ub * epsilon
    if r_a is None:
        r_a = r_c / 2
    if tau is None:
        tau = eps_t * cap_fraction(d, r_a) / 2
    if gamma is None:
        gamma = eps_t * cap_fraction(d, r_c / 3) / 4
    rng = np.random.default_rng(seed)
    report = {}

    rho_A = [_rho(bi, c_ub, d, epsilon) for bi in b]
    rho_0 = [_rho(bi, c_ub, d, 0.0) for bi in b]
    ok1 = all(r is not None for r in rho_A)
    report["1_connected"] = (ok1, "every level-epsilon set is a nonempty cap" if ok1
                             else "some level-epsilon set is empty")
    if not ok1:
        return report

    worst2 = worst3 = math.inf
    worst5 = -math.inf
    pass2 = pass3 = pass5 = True
    for i in range(len(b)):
        w = W[i]
        for _ in range(probes):
            v = _tangent_probe(w, min(rho_A[i] + r_c / 3, math.pi), rng)
            est, se = _cap_mass(rng, v, r_a, W, b, c_lb, d, mc_budget)
            worst2 = min(worst2, est / (tau + gamma))
            pass2 &= est - K_SIGMA * se > tau + gamma
            v = _tangent_probe(w, rho_A[i], rng)
            est, se = _cap_mass(rng, v, r_c / 3, W, b, c_lb, d, mc_budget)
            worst3 = min(worst3, est / gamma)
            pass3 &= est - K_SIGMA * se > gamma
            v = _tangent_probe(w, rho_0[i] - r_a, rng)
            est, se = _cap_mass(rng, v, r_a, W, b, c_ub, d, mc_budget)
            worst5 = max(worst5, est / max(tau - gamma, 1e-300))
            pass5 &= tau - gamma > 0 and est + K_SIGMA * se < tau - gamma
    report["2_dense_near"] = (bool(pass2), f"min mass / (tau + gamma) = {worst2:.4g}")
    report["3_dense_inside"] = (bool(pass3), f"min mass / gamma = {worst3:.4g}")
    gaps = [r0 - r_a - ra for r0, ra in zip(rho_0, rho_A)]
    ok4 = r_c <= 2 * r_a * (1 + 1e-12) and min(gaps) > 0
    report["4_separated"] = (bool(ok4), f"r_c / (2 r_a) = {r_c / (2 * r_a):.4g}, "
                                        f"min cap-to-S gap {min(gaps):.4g}")
    report["5_sparse_in_S"] = (bool(pass5), f"max mass / (tau - gamma) = {worst5:.4g}")
    return report


def grid_search_radius(instance, epsilon, steps=200_001):
    """Largest r_a on a grid meeting both activation constraints; returns r_c = 2 r_a."""
    d = instance.d
    _, b = _planes(instance)
    c_lb, c_ub = instance.certified.c_lb, instance.certified.c_ub
    eps_t = c_lb / c_ub * epsilon
    gaps = []
    for bi in b:
        radii = [_rho(bi, c_lb, d, 0.75 * eps_t), _rho(bi, c_ub, d, epsilon),
                 _rho(bi, c_ub, d, 0.0), _rho(bi, c_ub, d, 0.25 * eps_t)]
        if any(v is None for v in radii):
            raise ValueError("a level set is empty at this epsilon")
        gaps.append((radii[0] - radii[1], radii[2] - radii[3]))
    # any feasible r_a is below both gaps, so the grid spans [0, max gap]
    bound = min(max(g1, g2) for g1, g2 in gaps)
    if bound <= 0:
        raise ValueError("no positive activation radius")
    grid = np.linspace(0, bound, steps)
    ok = np.ones(steps, dtype=bool)
    for g1, g2 in gaps:
        ok &= (5 / 3 * grid <= g1) & (2 * grid <= g2)
    return 2 * float(grid[np.flatnonzero(ok).max()]), 2 * bound / (steps - 1)


# --------------------------------------------------------------------------
# brute-force clustering references

def _dist_matrix(X, metric):
    if metric == "angular":
        return np.arccos(np.clip(X @ X.T, -1, 1))
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def bfs_components(points, r, metric="euclidean", strict=False):
    """Partition of the radius graph by breadth-first search on the full adjacency."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    D = _dist_matrix(X, metric)
    adj = D < r if strict else D <= r
    seen = np.zeros(len(X), dtype=bool)
    parts = []
    for s in range(len(X)):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u] & ~seen):
                seen[v] = True
                comp.append(int(v))
                queue.append(int(v))
        parts.append(frozenset(comp))
    return frozenset(parts)


def brute_active_counts(V, r_a):
    V = np.asarray(V, dtype=float)
    A = np.arccos(np.clip(V @ V.T, -1, 1))
    np.fill_diagonal(A, 0.0)  # self is always in its own ball
    return np.count_nonzero(A <= r_a, axis=1)


def brute_min_halfball(samples, center, r):
    """Minimum half-ball count over every boundary direction through an in-ball point (d=2)."""
    off = np.atleast_2d(np.asarray(samples, dtype=float)) - np.asarray(center, dtype=float)
    dist = np.sqrt(np.sum(off * off, axis=1))
    off = off[(dist <= r) & (dist > 0)]
    if len(off) == 0:
        return 0
    best = len(off)
    scale = np.sqrt(np.sum(off * off, axis=1))
    for p in off:
        for n in (np.array([p[1], -p[0]]), np.array([-p[1], p[0]])):
            n = n / math.hypot(n[0], n[1])
            # the boundary point itself and anything within rounding of the
            # line count as on the boundary, never on the open side
            best = min(best, int(np.count_nonzero(off @ n > 1e-12 * scale)))
    return best


def brute_nearest_label(points, assignment, labels, x, metric="euclidean"):
    """Label of the labeled cluster nearest to x; ties go to the smaller cluster id."""
    P = np.asarray(points, dtype=float)
    x = np.asarray(x, dtype=float)
    if metric == "angular":
        x = x / np.linalg.norm(x)
        dist = np.arccos(np.clip(P @ x, -1, 1))
    else:
        dist = np.sqrt(np.sum((P - x) ** 2, axis=1))
    best = None
    for cid in sorted(labels):
        members = np.asarray(assignment) == cid
        if not members.any():
            continue
        dm = dist[members].min()
        if best is None or dm < best[0]:
            best = (dm, cid)
    return labels[best[1]]


def ball_mass_ratios(X, centers, radii):
    """Empirical P(B(x, 2r)) / P(B(x, r)) for each (center, radius)."""
    out = []
    for x, r in zip(centers, radii):
        dist = np.sqrt(np.sum((X - x) ** 2, axis=1))
        inner = np.count_nonzero(dist <= r)
        out.append(np.count_nonzero(dist <= 2 * r) / inner if inner else math.nan)
    return np.array(out)


# --------------------------------------------------------------------------
# plane recovery

def match_planes(instance, centers, directions, max_angle_deg=5.0, max_offset=0.05):
    """For each true plane, whether some detected plane is within the angle and
    the detected center lies within ``max_offset`` of the true plane."""
    W, b = _planes(instance)
    C = np.atleast_2d(centers)
    Dn = np.atleast_2d(directions)
    ang = np.degrees(np.arccos(np.clip(np.abs(W @ Dn.T), 0, 1)))
    off = np.abs(C @ W.T - b).T
    return [bool(np.any((ang[j] <= max_angle_deg) & (off[j] <= max_offset)))
            for j in range(len(b))]


def function_gap_bound(d, r, alpha, D=1.0):
    return (2 * D + math.sqrt(2 ** d * math.pi / d) * r / 2) * math.sqrt(alpha)


def detected_within_bound(instance, centers, directions, alpha, r, grid=41):
    """Each detected plane h^(x) = w^.(x - x^) is within the function-gap bound
    of some true plane (either orientation) on a probe grid over the domain."""
    W, b = _planes(instance)
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(instance.domain_lo, instance.domain_hi)]
    probe = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, instance.d)
    D = float(np.linalg.norm(instance.domain_hi - instance.domain_lo))
    bound = function_gap_bound(instance.d, r, alpha, D)
    true_vals = probe @ W.T - b
    out = []
    for c, w in zip(np.atleast_2d(centers), np.atleast_2d(directions)):
        h = (probe - c) @ w
        gap = np.minimum(np.abs(true_vals - h[:, None]).max(axis=0),
                         np.abs(true_vals + h[:, None]).max(axis=0))
        out.append(bool(gap.min() <= bound))
    return out, bound
