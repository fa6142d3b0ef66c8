import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codelearn import io
from codelearn import problems as P
from codelearn.errors import (BudgetExhaustedError, GenerationError, InvalidInputError,
                              NoClassError)


# --------------------------------------------------------------------------
# generators certify their own assumptions

@pytest.mark.parametrize("params", [
    dict(d=2, N=3, g=0.3),
    dict(d=1, N=4, g=0.1),
    dict(d=3, N=2, g=0.2, shape="box"),
    dict(d=2, N=2, g=0.25, beta=1),
])
def test_ecoc_assumptions(params):
    inst = P.generate_ecoc(seed=1, **params)
    report = P.verify_assumptions(inst, mc_budget=8000, seed=2)
    assert report.passed, report.checks
    assert inst.n_classes == params["N"]


@pytest.mark.parametrize("dims", [(3, 1), (3, 2), (5, 2)])
def test_manifold_assumptions(dims):
    inst = P.generate_ecoc_manifold(dims[0], dims[1], 3, 0.2, seed=0)
    report = P.verify_assumptions(inst, mc_budget=6000)
    assert report.passed, report.checks
    assert inst.certified.doubling_dimension == dims[1]


def test_manifold_full_dimension_is_ecoc():
    assert P.generate_ecoc_manifold(2, 2, 3, 0.3).kind == "ecoc"


@pytest.mark.parametrize("d,L", [(2, 2), (3, 3), (3, 6), (4, 9)])
def test_one_vs_all_assumptions(d, L):
    inst = P.generate_one_vs_all(d, L, 0.4, seed=3)
    report = P.verify_assumptions(inst, mc_budget=8000)
    assert report.passed, report.checks
    assert inst.code.min_distance() == 2


def test_one_vs_all_offset_raised_for_disjointness():
    inst = P.generate_one_vs_all(2, 4, 0.1, seed=0)
    # four directions 90 degrees apart: caps need cos((pi/2 - 0.02) / 2)
    assert inst.planes[0].b == pytest.approx(math.cos((math.pi / 2 - 0.02) / 2), rel=1e-9)


def test_one_vs_all_rejects_bad_offset():
    with pytest.raises(InvalidInputError):
        P.generate_one_vs_all(3, 2, 1.2)


def test_overlapping_caps_fail_check():
    inst = P.make_one_vs_all(np.array([[1.0, 0.0], [0.8, 0.6]]), np.array([0.2, 0.2]))
    assert not P.verify_assumptions(inst, mc_budget=4000)["d_caps_disjoint"].passed


@pytest.mark.parametrize("layout,d,R", [("staircase2d", 2, 0.1), ("grid2d", 2, 0.05),
                                        ("axis_grid_d", 3, 0.05), ("single_cell", 4, 0.2)])
def test_boundary_features_assumptions(layout, d, R):
    inst = P.generate_boundary_features(d, layout, R)
    report = P.verify_assumptions(inst, mc_budget=8000)
    assert report.passed, report.checks
    assert len(P.boundary_witnesses(inst)) >= inst.m


def test_staircase_structure():
    inst = P.generate_boundary_features(2, "staircase2d", 0.1)
    assert inst.m == 4
    assert inst.n_classes == 7
    assert sum(not c["occupied"] for c in P.boundary_cells(inst)) == 2


def test_boundary_radius_limit():
    with pytest.raises(GenerationError):
        P.generate_boundary_features(2, "staircase2d", 0.2)


def test_unknown_layout():
    with pytest.raises(InvalidInputError):
        P.generate_boundary_features(2, "spiral", 0.1)


def test_ecoc_too_crowded():
    with pytest.raises(GenerationError):
        P.generate_ecoc(2, 16, 0.5)


def test_bad_margin_check_detects_overclaim(ecoc3):
    inst = P.generate_ecoc(2, 3, 0.3, seed=0)
    inst.certified.margin = 0.6
    assert not P.verify_assumptions(inst, mc_budget=4000)["a_margin"].passed


def test_wrong_density_fails():
    inst = P.generate_boundary_features(2, "staircase2d", 0.1)
    inst.certified.c_lb *= 1.3
    assert not P.verify_assumptions(inst, mc_budget=20000)["f_density"].passed


def test_generate_dispatch():
    inst = P.generate("one_vs_all", seed=4, d=3, L=2, b_min=0.5)
    assert inst.kind == "one_vs_all"
    with pytest.raises(InvalidInputError):
        P.generate("mystery")


# --------------------------------------------------------------------------
# labels and sampling

def test_ecoc_labels_centers(ecoc3):
    centers = np.array([r["center"] for r in ecoc3.regions])
    assert ecoc3.labels(centers).tolist() == [0, 1, 2]


def test_ecoc_gap_is_off_support(ecoc3):
    c0, c1 = (np.asarray(ecoc3.regions[k]["center"]) for k in (0, 1))
    assert ecoc3.labels((c0 + c1) / 2).tolist() == [-1]


def test_ecoc_decoding_agrees_with_regions(ecoc3):
    S = P.draw_sample(ecoc3, 2000, 5)
    from codelearn.geometry import decode
    assert np.array_equal(decode(ecoc3.codewords(S.points), ecoc3.code), ecoc3.labels(S.points))


def test_ova_labels():
    inst = P.make_one_vs_all(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.5, 0.5]))
    X = np.array([[0.9, 0.0], [-0.7, 0.1], [0.0, 0.0], [0.5, 0.0], [1.5, 0.0]])
    assert inst.labels(X).tolist() == [0, 1, -1, -1, -1]


def test_sample_deterministic(three_caps):
    a = P.draw_sample(three_caps, 500, 9).points
    b = P.draw_sample(three_caps, 500, 9).points
    assert np.array_equal(a, b)
    assert not np.array_equal(a, P.draw_sample(three_caps, 500, 10).points)


def test_heldout_independent_of_sample(ecoc3):
    S = P.draw_sample(ecoc3, 300, 4)
    H = P.make_heldout(ecoc3, 300, 4)
    assert not np.array_equal(S.points, H.points)
    assert np.all(H.labels >= 0)


@pytest.mark.parametrize("kind,params", [
    ("ecoc", dict(d=2, N=3, g=0.3)), ("manifold", dict(d_ambient=3, d_intrinsic=1, N=2, g=0.2)),
    ("one_vs_all", dict(d=3, L=3, b_min=0.5)),
    ("boundary_features", dict(d=2, layout="grid2d", R=0.05)),
])
def test_samples_lie_on_support(kind, params):
    inst = P.generate(kind, seed=0, **params)
    assert np.all(inst.labels(P.draw_sample(inst, 3000, 1).points) >= 0)


def test_sample_size_validated(ecoc3):
    with pytest.raises(InvalidInputError):
        P.draw_sample(ecoc3, 0, 1)


def test_ecoc_classes_balanced(ecoc3):
    y = ecoc3.labels(P.draw_sample(ecoc3, 30000, 2).points)
    frac = np.bincount(y) / len(y)
    # equal-volume components, 4 standard errors
    assert np.all(np.abs(frac - 1 / 3) <= 4 * math.sqrt(2 / 9 / len(y)))


# --------------------------------------------------------------------------
# oracle

def test_oracle_counts_and_labels(ecoc3):
    S = P.draw_sample(ecoc3, 50, 0)
    O = P.LabeledOracle(ecoc3, S)
    truth = ecoc3.labels(S.points)
    assert [O.query(i) for i in range(10)] == truth[:10].tolist()
    assert O.query_count == 10


def test_oracle_budget(ecoc3):
    O = P.LabeledOracle(ecoc3, P.draw_sample(ecoc3, 10, 0), budget=3)
    for i in range(3):
        O.query(i)
    with pytest.raises(BudgetExhaustedError):
        O.query(3)
    assert O.query_count == 3


def test_oracle_off_support(ecoc3):
    O = P.LabeledOracle(ecoc3, np.zeros((1, 2)) + 5)
    with pytest.raises(NoClassError):
        O.query(0)
    assert O.query_count == 0


def test_query_label_dispatch(ecoc3):
    S = P.draw_sample(ecoc3, 20, 0)
    O = P.LabeledOracle(ecoc3, S)
    assert P.query_label(O, 3) == ecoc3.labels(S.points[3])[0]
    assert P.query_label(O, S.points[4]) == ecoc3.labels(S.points[4])[0]
    assert O.query_count == 2


def test_noise_is_persistent_and_near_eta():
    inst = P.generate_one_vs_all(3, 4, 0.5, seed=0)
    S = P.draw_sample(inst, 20000, 0)
    O = P.LabeledOracle(inst, S, eta=0.2, noise_seed=7)
    got = np.array([O.query(i) for i in range(len(S))])
    again = np.array([O.query(i) for i in range(200)])
    assert np.array_equal(got[:200], again)
    truth = inst.labels(S.points)
    rate = np.mean(got != truth)
    assert abs(rate - 0.2) <= 4 * math.sqrt(0.16 / len(S))
    flipped = got[got != truth]
    # flips land on every other class roughly uniformly
    assert set(np.unique(flipped)) == {0, 1, 2, 3}


def test_oracle_rejects_eta():
    with pytest.raises(InvalidInputError):
        P.LabeledOracle(P.generate_ecoc(2, 2, 0.3), np.zeros((1, 2)), eta=1.0)


# --------------------------------------------------------------------------
# files

@pytest.mark.parametrize("kind,params", [
    ("ecoc", dict(d=2, N=3, g=0.3)), ("manifold", dict(d_ambient=4, d_intrinsic=2, N=3, g=0.2)),
    ("one_vs_all", dict(d=3, L=3, b_min=0.5)),
    ("boundary_features", dict(d=2, layout="staircase2d", R=0.1)),
])
def test_instance_round_trip(tmp_path, kind, params):
    inst = P.generate(kind, seed=3, **params)
    path = tmp_path / "inst.json"
    io.save_instance(inst, path)
    back = io.load_instance(path)
    assert back.digest() == inst.digest()
    X = P.draw_sample(inst, 400, 1).points
    assert np.array_equal(back.labels(X), inst.labels(X))
    io.save_instance(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_schema_version_checked(tmp_path):
    data = io.instance_to_dict(P.generate_ecoc(2, 2, 0.3))
    data["schema_version"] = 99
    with pytest.raises(InvalidInputError):
        io.instance_from_dict(data)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(1, 4), st.integers(0, 2**31 - 1), st.booleans())
def test_points_csv_round_trip(tmp_path_factory, n, d, seed, labeled):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * 10.0 ** rng.integers(-8, 8, size=(n, d))
    y = rng.integers(0, 5, size=n) if labeled else None
    path = tmp_path_factory.mktemp("pts") / "p.csv"
    io.save_points(path, X, y)
    X2, y2 = io.load_points(path)
    assert np.array_equal(X, X2)
    assert (y2 is None) if y is None else np.array_equal(y, y2)
