"""Exact geometric primitives.

Codewords and Hamming decoding, hyperplanes, unit-ball / spherical-cap /
ball-slice measures, and the projected-density bounds for one-vs-all
instances on the unit ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLevelSetError, InstanceInvariantError, InvalidInputError

QUAD_TOL = 1e-9
QUAD_MAX_DEPTH = 60


# --------------------------------------------------------------------------
# codes

def as_codeword(bits) -> np.ndarray:
    c = np.asarray(bits)
    if c.ndim != 1:
        raise InvalidInputError("a codeword is a 1-D sequence of signs")
    if not np.all((c == 1) | (c == -1)):
        raise InvalidInputError("codeword entries must be +1 or -1")
    return c.astype(np.int8)


@dataclass(eq=False)
class CodeMatrix:
    """L x m sign matrix whose rows are class codewords."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows))
        if rows.size and not np.all((rows == 1) | (rows == -1)):
            raise InvalidInputError("code matrix entries must be +1 or -1")
        rows = rows.astype(np.int8)
        if len({r.tobytes() for r in rows}) != len(rows):
            raise InvalidInputError("code matrix rows must be distinct")
        self.rows = rows

    @property
    def L(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def one_vs_all(cls, L: int) -> "CodeMatrix":
        return cls(2 * np.eye(L, dtype=np.int8) - 1)

    def min_distance(self) -> int:
        if self.L < 2:
            return self.m
        d = (self.rows[:, None, :] != self.rows[None, :, :]).sum(-1)
        return int(d[np.triu_indices(self.L, 1)].min())


def hamming_distance(a, b) -> int:
    a, b = as_codeword(a), as_codeword(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    return int(np.count_nonzero(a != b))


@dataclass(eq=False)
class Hyperplane:
    """``h(x) = w.x - b`` with unit ``w``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.b = float(self.b)
        if abs(np.linalg.norm(self.w) - 1.0) > 1e-12:
            raise InvalidInputError("hyperplane direction must be unit norm")

    @property
    def d(self) -> int:
        return self.w.size

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.w - self.b


def _plane_arrays(planes):
    W = np.array([p.w for p in planes], dtype=float)
    b = np.array([p.b for p in planes], dtype=float)
    return W, b


def predict_codeword(planes, x) -> np.ndarray:
    """Sign vector of ``x`` (or each row of ``x``); sign(0) is +1."""
    W, b = _plane_arrays(planes)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != W.shape[1]:
        raise InvalidInputError("point dimension does not match the planes")
    return np.where(x @ W.T - b >= 0.0, 1, -1).astype(np.int8)


def decode(predicted, code: CodeMatrix):
    """Nearest codeword in Hamming distance; ties go to the smallest class."""
    p = np.asarray(predicted)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != code.m:
        raise InvalidInputError("codeword length does not match the code matrix")
    dist = (p[:, None, :] != code.rows[None, :, :]).sum(-1)
    out = np.argmin(dist, axis=1)
    return int(out[0]) if single else out


# --------------------------------------------------------------------------
# measures

def _ball_volume(d: int) -> float:
    # v_0 = 1, v_1 = 2, v_d = 2 pi / d * v_{d-2}
    v = [1.0, 2.0]
    for k in range(2, d + 1):
        v.append(2.0 * math.pi / k * v[k - 2])
    return v[d]


def unit_ball_volume(d: int) -> float:
    if int(d) != d or d < 1:
        raise InvalidInputError("dimension must be a positive integer")
    return _ball_volume(int(d))


def _sin_power_integral(k: int) -> float:
    """int_0^pi sin^k, by the Wallis recurrence."""
    a, b = math.pi, 2.0
    if k == 0:
        return a
    for j in range(2, k + 1):
        a, b = b, (j - 1) / j * a
    return b


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL,
                     max_depth: int = QUAD_MAX_DEPTH) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth + 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth + 1))

    return rec(a, b, fa, fm, fb, whole, tol, 0)


def cap_measure(d: int, r: float) -> float:
    """Uniform-sphere probability of a cap of angular radius ``r`` in R^d."""
    if int(d) != d or d < 2:
        raise InvalidInputError("cap_measure needs d >= 2")
    if not 0.0 <= r <= math.pi:
        raise InvalidInputError("angular radius must lie in [0, pi]")
    k = int(d) - 2
    total = _sin_power_integral(k)
    part = adaptive_simpson(lambda t: math.sin(t) ** k, 0.0, float(r),
                            tol=0.5 * QUAD_TOL * total)
    return min(1.0, max(0.0, part / total))


def ball_slice_probability(d: int, r: float, rho: float) -> float:
    """P(X_1 in [0, rho]) for X uniform on the radius-``r`` ball in R^d."""
    if int(d) != d or d < 1:
        raise InvalidInputError("dimension must be a positive integer")
    if r <= 0:
        raise InvalidInputError("radius must be positive")
    if rho < 0 or rho > r:
        raise InvalidInputError("slice width must lie in [0, r]")
    d = int(d)
    ratio = _ball_volume(d - 1) / _ball_volume(d)
    e = 0.5 * (d - 1)
    u = min(1.0, rho / r)
    integral = adaptive_simpson(lambda s: max(0.0, 1.0 - s * s) ** e, 0.0, u,
                                tol=QUAD_TOL / ratio)
    return ratio * integral


def ball_slice_bounds(d: int, r: float, rho: float) -> tuple[float, float]:
    if int(d) != d or d < 1:
        raise InvalidInputError("dimension must be a positive integer")
    if r <= 0:
        raise InvalidInputError("radius must be positive")
    if rho < 0 or rho > r / math.sqrt(2.0) * (1 + 1e-12):
        raise InvalidInputError("bounds need 0 <= rho <= r / sqrt(2)")
    t = rho / r
    return (math.sqrt(d / (2.0 ** d * math.pi)) * t,
            math.sqrt((d + 1) / (2.0 * math.pi)) * t)


def ball_segment_volume(d: int, b: float) -> float:
    """Volume of {x in unit ball of R^d : x_1 > b} for b in [0, 1]."""
    return _ball_volume(d) * (0.5 - ball_slice_probability(d, 1.0, b))


# --------------------------------------------------------------------------
# sphere objects

@dataclass(eq=False)
class SphericalCap:
    center: np.ndarray
    angular_radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if abs(np.linalg.norm(self.center) - 1) > 1e-12:
            raise InvalidInputError("cap center must be a unit vector")
        if not 0 <= self.angular_radius <= math.pi:
            raise InvalidInputError("angular radius must lie in [0, pi]")

    def contains(self, v):
        return angle(v, self.center) <= self.angular_radius

    def measure(self) -> float:
        return cap_measure(self.center.size, self.angular_radius)


@dataclass(eq=False)
class HalfBall:
    center: np.ndarray
    radius: float
    direction: np.ndarray = field(default=None)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.direction = np.asarray(self.direction, dtype=float)
        if self.radius <= 0:
            raise InvalidInputError("half-ball radius must be positive")
        if abs(np.linalg.norm(self.direction) - 1) > 1e-12:
            raise InvalidInputError("half-ball direction must be a unit vector")

    def contains(self, y):
        off = np.asarray(y, dtype=float) - self.center
        return (np.linalg.norm(off, axis=-1) <= self.radius) & (off @ self.direction > 0)

    def count(self, points) -> int:
        return int(np.count_nonzero(self.contains(points)))


def angle(u, v):
    """``arccos(u.v)`` with the argument clipped to [-1, 1]."""
    return np.arccos(np.clip(np.asarray(u, dtype=float) @ np.asarray(v, dtype=float), -1.0, 1.0))


# --------------------------------------------------------------------------
# projected density (one-vs-all on the unit ball)

def projected_density(W, b, c: float, d: int, V) -> np.ndarray:
    """``c v_d (1 - (b_i / w_i.v)^d)`` on cap i, zero off every cap.

    This is the density of ``x / |x|`` relative to the uniform probability
    measure on the sphere when ``x`` has density ``c`` on the cap union.
    The radial integral of ``r^(d-1)`` contributes ``1/d``, which cancels the
    sphere's surface area ``d v_d``. ``V`` is (n, d) unit vectors. Raises if a
    vector sits in two caps.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    proj = V @ np.asarray(W, dtype=float).T
    inside = proj > np.asarray(b)
    if np.any(inside.sum(axis=1) > 1):
        raise InstanceInvariantError("direction lies in two caps at once")
    q = np.zeros(len(V))
    rows, cols = np.nonzero(inside)
    ratio = np.asarray(b)[cols] / proj[rows, cols]
    q[rows] = c * _ball_volume(d) * (1.0 - ratio ** d)
    return q


def _ova_params(instance):
    W, b = _plane_arrays(instance.planes)
    cert = instance.certified
    if cert.c_lb is None or cert.c_ub is None:
        raise InvalidInputError("instance carries no density bounds")
    return W, b, cert.c_lb, cert.c_ub


def projected_density_bounds(instance, v) -> tuple[float, float]:
    W, b, c_lb, c_ub = _ova_params(instance)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvalidInputError("v must be a unit vector")
    q_low = float(projected_density(W, b, c_lb, instance.d, v)[0])
    return q_low, c_ub / c_lb * q_low


def cap_radius(instance, i: int, lam: float, side: str = "upper") -> float:
    """Angular radius of the level set {q_side >= lam} inside cap ``i``."""
    W, b, c_lb, c_ub = _ova_params(instance)
    if side not in ("upper", "lower"):
        raise InvalidInputError("side must be 'upper' or 'lower'")
    if lam < 0:
        raise InvalidInputError("level must be nonnegative")
    d = instance.d
    c = c_ub if side == "upper" else c_lb
    base = 1.0 - lam / (c * _ball_volume(d))
    if base <= 0:
        raise EmptyLevelSetError(f"level {lam} exceeds the density peak")
    arg = b[i] * base ** (-1.0 / d)
    if arg > 1.0 + 1e-12:
        raise EmptyLevelSetError(f"level {lam} exceeds the density peak of class {i}")
    return float(math.acos(min(1.0, max(-1.0, arg))))
