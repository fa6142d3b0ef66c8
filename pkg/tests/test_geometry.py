import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codelearn import geometry as geo
from codelearn import oracles
from codelearn.errors import EmptyLevelSetError, InstanceInvariantError, InvalidInputError
from codelearn.geometry import CodeMatrix, HalfBall, Hyperplane, SphericalCap

# closed form for the d=2 slice at rho = r / sqrt(2): 1/4 + 1/(2 pi)
DISK_SLICE = 0.25 + 1 / (2 * math.pi)


# --------------------------------------------------------------------------
# codes

def test_hamming_identical():
    assert geo.hamming_distance([1, -1, 1], [1, -1, 1]) == 0


def test_hamming_full_disagreement():
    assert geo.hamming_distance([1, 1], [-1, -1]) == 2


def test_one_vs_all_rows_at_distance_two():
    C = CodeMatrix.one_vs_all(5)
    for a, b in itertools.combinations(C.rows, 2):
        assert geo.hamming_distance(a, b) == 2
    assert C.min_distance() == 2


def test_hamming_length_mismatch():
    with pytest.raises(InvalidInputError):
        geo.hamming_distance([1, 1], [1, 1, 1])


def test_codeword_rejects_zero():
    with pytest.raises(InvalidInputError):
        geo.as_codeword([1, 0, -1])


def test_code_matrix_rows_distinct():
    with pytest.raises(InvalidInputError):
        CodeMatrix(np.array([[1, -1], [1, -1]]))


@pytest.mark.parametrize("m", range(1, 7))
def test_hamming_is_metric_exhaustive(m):
    words = np.array(list(itertools.product([-1, 1], repeat=m)))
    D = (words[:, None, :] != words[None, :, :]).sum(-1)
    assert np.all(D >= 0)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    # D[a, c] <= D[a, b] + D[b, c] for every triple
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :])
    for a, b in [(0, len(words) - 1), (0, len(words) // 2)]:
        assert geo.hamming_distance(words[a], words[b]) == D[a, b]


def test_hyperplane_requires_unit_normal():
    with pytest.raises(InvalidInputError):
        Hyperplane([1.0, 1.0], 0.0)


def test_predict_positive_side():
    assert geo.predict_codeword([Hyperplane([1.0, 0.0], 0.0)], [0.5, 0.0]).tolist() == [1]


def test_predict_on_plane_is_plus_one():
    assert geo.predict_codeword([Hyperplane([1.0, 0.0], 0.5)], [0.5, 3.0]).tolist() == [1]


def test_predict_quadrant():
    planes = [Hyperplane([1.0, 0.0], 0.0), Hyperplane([0.0, 1.0], 0.0)]
    assert geo.predict_codeword(planes, [-1.0, 1.0]).tolist() == [-1, 1]


def test_predict_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        geo.predict_codeword([Hyperplane([1.0, 0.0], 0.0)], [1.0, 2.0, 3.0])


def test_decode_exact_match():
    C = CodeMatrix(np.array([[1, 1, 1], [1, -1, -1], [-1, -1, 1]]))
    assert geo.decode([-1, -1, 1], C) == 2


def test_decode_one_vs_all():
    assert geo.decode([1, -1, -1], CodeMatrix.one_vs_all(3)) == 0


def test_decode_nearest_row():
    C = CodeMatrix(np.array([[1, 1, 1, 1], [1, 1, -1, -1], [-1, 1, 1, 1], [-1, -1, 1, -1]]))
    # distance 1 from row 0, distance 2 from row 2
    assert geo.decode([1, -1, 1, 1], C) == 0


def test_decode_tie_equidistant():
    C = CodeMatrix(np.array([[1, 1, -1], [-1, -1, -1], [1, -1, 1]]))
    # (1, -1, -1) is at distance 1 from rows 0, 1 and 2
    assert geo.decode([1, -1, -1], C) == 0
    C2 = CodeMatrix(np.array([[-1, -1, -1], [1, 1, -1], [1, -1, 1]]))
    assert geo.decode([1, -1, -1], C2) == 0


def test_decode_vectorised_matches_scalar():
    rng = np.random.default_rng(3)
    C = CodeMatrix(np.unique(rng.choice([-1, 1], size=(6, 7)), axis=0))
    P = rng.choice([-1, 1], size=(50, 7))
    assert geo.decode(P, C).tolist() == [geo.decode(p, C) for p in P]


def test_decode_stable_under_duplicated_column():
    rng = np.random.default_rng(1)
    planes = [Hyperplane(w / np.linalg.norm(w), b) for w, b in
              zip(rng.standard_normal((4, 2)), rng.uniform(-0.3, 0.3, 4))]
    X = rng.uniform(-1, 1, (300, 2))
    C = CodeMatrix(np.unique(geo.predict_codeword(planes, X), axis=0))
    base = geo.decode(geo.predict_codeword(planes, X), C)
    planes2 = planes + [planes[1]]
    C2 = CodeMatrix(np.column_stack([C.rows, C.rows[:, 1]]))
    assert np.array_equal(base, geo.decode(geo.predict_codeword(planes2, X), C2))


# --------------------------------------------------------------------------
# volumes and measures

@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(d, expected):
    assert geo.unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d", range(1, 16))
def test_unit_ball_volume_matches_gamma(d):
    assert geo.unit_ball_volume(d) == pytest.approx(oracles.ball_volume(d), rel=1e-12)


def test_unit_ball_volume_rejects_zero():
    with pytest.raises(InvalidInputError):
        geo.unit_ball_volume(0)


@pytest.mark.parametrize("d", [2, 3, 4, 7, 12])
def test_cap_measure_hemisphere(d):
    assert geo.cap_measure(d, math.pi / 2) == pytest.approx(0.5, abs=1e-9)


def test_cap_measure_two_sphere_closed_form():
    assert geo.cap_measure(3, math.pi / 3) == pytest.approx(0.25, abs=1e-9)


def test_cap_measure_circle_arc():
    assert geo.cap_measure(2, math.pi / 4) == pytest.approx(0.25, abs=1e-9)


def test_cap_measure_endpoints():
    assert geo.cap_measure(5, 0.0) == 0.0
    assert geo.cap_measure(5, math.pi) == pytest.approx(1.0, abs=1e-12)


def test_cap_measure_rejects_bad_radius():
    with pytest.raises(InvalidInputError):
        geo.cap_measure(3, 4.0)


@pytest.mark.parametrize("d", [2, 3, 5, 9])
def test_cap_measure_against_incomplete_beta(d):
    for r in np.linspace(0.01, math.pi - 0.01, 15):
        assert geo.cap_measure(d, r) == pytest.approx(oracles.cap_fraction(d, r), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.floats(0, math.pi), st.floats(0, math.pi))
def test_cap_measure_monotone_and_symmetric(d, r1, r2):
    lo, hi = sorted((r1, r2))
    assert geo.cap_measure(d, lo) <= geo.cap_measure(d, hi) + 1e-12
    assert geo.cap_measure(d, math.pi - r1) == pytest.approx(1 - geo.cap_measure(d, r1), abs=2e-9)


def test_slice_zero_width():
    assert geo.ball_slice_probability(4, 1.0, 0.0) == 0.0


def test_slice_interval():
    assert geo.ball_slice_probability(1, 1.0, 0.3) == pytest.approx(0.15, abs=1e-12)


def test_slice_disk_closed_form():
    assert geo.ball_slice_probability(2, 1.0, 1 / math.sqrt(2)) == pytest.approx(DISK_SLICE, abs=1e-9)


def test_slice_half_ball():
    assert geo.ball_slice_probability(6, 2.0, 2.0) == pytest.approx(0.5, abs=1e-9)


def test_slice_rejects_wide():
    with pytest.raises(InvalidInputError):
        geo.ball_slice_probability(3, 1.0, 1.1)


def test_slice_scale_invariant():
    assert geo.ball_slice_probability(4, 3.0, 0.6) == pytest.approx(
        geo.ball_slice_probability(4, 1.0, 0.2), abs=1e-12)


@pytest.mark.parametrize("d", range(1, 11))
def test_slice_against_scipy_quadrature(d):
    for u in (0.05, 0.3, 0.7, 1.0):
        assert geo.ball_slice_probability(d, 1.0, u) == pytest.approx(
            oracles.slice_exact(d, 1.0, u), abs=1e-9)


def test_slice_bounds_interval():
    lo, hi = geo.ball_slice_bounds(1, 1.0, 0.5)
    assert lo == pytest.approx(0.5 / math.sqrt(2 * math.pi), rel=1e-12)
    assert hi == pytest.approx(0.5 / math.sqrt(math.pi), rel=1e-12)
    assert (round(lo, 4), round(hi, 4)) == (0.1995, 0.2821)


def test_slice_bounds_zero():
    assert geo.ball_slice_bounds(5, 1.0, 0.0) == (0.0, 0.0)


def test_slice_bounds_disk_contain_exact():
    lo, hi = geo.ball_slice_bounds(2, 1.0, 1 / math.sqrt(2))
    assert (round(lo, 4), round(hi, 4)) == (0.2821, 0.4886)
    assert lo <= DISK_SLICE <= hi


def test_slice_bounds_precondition():
    with pytest.raises(InvalidInputError):
        geo.ball_slice_bounds(3, 1.0, 0.75)


@pytest.mark.parametrize("d", range(1, 11))
def test_slice_within_bounds_grid(d):
    for u in np.linspace(1e-3, 1 / math.sqrt(2), 40):
        lo, hi = geo.ball_slice_bounds(d, 1.0, u)
        assert lo <= geo.ball_slice_probability(d, 1.0, u) <= hi


@pytest.mark.parametrize("d", [2, 3, 5, 8])
def test_slice_monte_carlo(d):
    exact = geo.ball_slice_probability(d, 1.0, 0.35)
    rep = oracles.mc_ball_slice(d, 1.0, 0.35, 1_000_000, seed=11 + d, target=exact)
    assert rep.passed, rep


def test_segment_volume_closed_form_d3():
    b = 0.5
    assert geo.ball_segment_volume(3, b) == pytest.approx(math.pi * (1 - b) ** 2 * (2 + b) / 3, rel=1e-9)


def test_adaptive_simpson_polynomial_exact():
    assert geo.adaptive_simpson(lambda x: x ** 3 - x, 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)


# --------------------------------------------------------------------------
# sphere objects

def test_cap_validation():
    with pytest.raises(InvalidInputError):
        SphericalCap([1.0, 1.0, 0.0], 0.3)
    with pytest.raises(InvalidInputError):
        SphericalCap([1.0, 0.0, 0.0], -0.1)


def test_cap_contains_and_measure():
    cap = SphericalCap([0.0, 0.0, 1.0], math.pi / 3)
    assert cap.contains(np.array([0.0, 0.0, 1.0]))
    assert not cap.contains(np.array([1.0, 0.0, 0.0]))
    assert cap.measure() == pytest.approx(0.25, abs=1e-9)


def test_halfball_open_face():
    hb = HalfBall([0.0, 0.0], 1.0, [0.0, 1.0])
    pts = np.array([[0.0, 0.5], [0.5, 0.0], [0.0, -0.5], [0.0, 1.0], [0.0, 1.01]])
    assert hb.contains(pts).tolist() == [True, False, False, True, False]
    assert hb.count(pts) == 2


def test_halfball_validation():
    with pytest.raises(InvalidInputError):
        HalfBall([0.0, 0.0], 0.0, [1.0, 0.0])
    with pytest.raises(InvalidInputError):
        HalfBall([0.0, 0.0], 1.0, [1.0, 1.0])


def test_angle_clips():
    v = np.array([1.0, 1e-17])
    assert geo.angle(v, v * (1 + 1e-15)) == 0.0


# --------------------------------------------------------------------------
# projected density

def test_density_at_cap_center(antipodal_caps):
    inst = antipodal_caps
    c = inst.certified.c_lb
    lo, hi = geo.projected_density_bounds(inst, np.array([0.0, 0.0, 1.0]))
    expected = c * geo.unit_ball_volume(3) * (1 - 0.5 ** 3)
    assert lo == pytest.approx(expected, rel=1e-12)
    assert hi == pytest.approx(expected, rel=1e-12)


def test_density_vanishes_at_rim(antipodal_caps):
    v = np.array([math.sqrt(0.75), 0.0, 0.5])
    lo, hi = geo.projected_density_bounds(antipodal_caps, v)
    assert lo == pytest.approx(0.0, abs=1e-12) and hi == pytest.approx(0.0, abs=1e-12)


def test_density_zero_outside(antipodal_caps):
    assert geo.projected_density_bounds(antipodal_caps, np.array([1.0, 0.0, 0.0])) == (0.0, 0.0)


def test_density_rejects_overlapping_caps():
    from codelearn.problems import make_one_vs_all
    inst = make_one_vs_all(np.array([[0.0, 0.0, 1.0], [0.0, 0.6, 0.8]]), np.array([0.5, 0.5]))
    with pytest.raises(InstanceInvariantError):
        geo.projected_density_bounds(inst, np.array([0.0, 0.3, 0.95393920141694566]))


def test_density_integrates_to_one(three_caps):
    # total projected mass over the sphere equals one
    inst = three_caps
    total = sum(oracles.band_mass_target(inst, i, 0.0, math.acos(p.b))
                for i, p in enumerate(inst.planes))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_density_ratio_bounds():
    from codelearn.problems import make_one_vs_all
    inst = make_one_vs_all(np.array([[1.0, 0.0]]), np.array([0.3]))
    inst.certified.c_ub = 2 * inst.certified.c_lb
    lo, hi = geo.projected_density_bounds(inst, np.array([1.0, 0.0]))
    assert hi == pytest.approx(2 * lo, rel=1e-14)


def test_cap_radius_level_zero(three_caps):
    b = three_caps.planes[1].b
    assert geo.cap_radius(three_caps, 1, 0.0) == pytest.approx(math.acos(b), abs=1e-15)


def test_cap_radius_round_trip():
    from codelearn.problems import make_one_vs_all
    inst = make_one_vs_all(np.array([[0.0, 1.0]]), np.array([0.5]))
    inst.certified.c_lb = inst.certified.c_ub = 1.0
    lam = geo.unit_ball_volume(2) * (1 - (0.5 / 0.6) ** 2)
    rho = geo.cap_radius(inst, 0, lam)
    assert math.cos(rho) == pytest.approx(0.6, abs=1e-12)
    v = np.array([math.sin(rho), math.cos(rho)])
    assert geo.projected_density_bounds(inst, v)[0] == pytest.approx(lam, abs=1e-9)


def test_cap_radius_near_peak(three_caps):
    inst = three_caps
    peak = inst.certified.c_ub * geo.unit_ball_volume(3) * (1 - inst.planes[0].b ** 3)
    assert 0 < geo.cap_radius(inst, 0, peak * (1 - 1e-9)) < 1e-3
    with pytest.raises(EmptyLevelSetError):
        geo.cap_radius(inst, 0, peak * 1.001)


def test_cap_radius_decreasing(three_caps):
    lams = np.linspace(0, 1.5, 30)
    radii = [geo.cap_radius(three_caps, 2, lam) for lam in lams]
    assert all(a > b for a, b in zip(radii, radii[1:]))


def test_upper_radius_dominates_lower():
    from codelearn.problems import make_one_vs_all
    inst = make_one_vs_all(np.array([[0.0, 0.0, 1.0]]), np.array([0.4]))
    inst.certified.c_ub = 1.5 * inst.certified.c_lb
    peak_lower = inst.certified.c_lb * geo.unit_ball_volume(3) * (1 - 0.4 ** 3)
    for lam in np.linspace(0, 0.99 * peak_lower, 25):
        assert geo.cap_radius(inst, 0, lam, "upper") >= geo.cap_radius(inst, 0, lam, "lower")
