import json
import math

import numpy as np
import pytest

from codelearn import cli, io
from codelearn import problems as P
from codelearn.errors import InvalidInputError
from codelearn.harness import (RESULT_COLUMNS, ExperimentConfig, derive_seeds, emit_report,
                               load_results, noisy_heldout_labels, resolve_params,
                               run_experiment, summarize)

ECOC = {"kind": "ecoc", "d": 2, "N": 3, "g": 0.3, "seed": 0}


def _cfg(**kw):
    base = dict(instance=ECOC, algorithm="sl", n=800, params={"epsilon": 0.1},
                heldout_size=1000, repetitions=2, seed_base=3)
    base.update(kw)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------
# config

def test_config_validation():
    with pytest.raises(InvalidInputError):
        _cfg(algorithm="svm").validate()
    with pytest.raises(InvalidInputError):
        _cfg(params={}).validate()
    with pytest.raises(InvalidInputError):
        _cfg(instance=None).validate()
    with pytest.raises(InvalidInputError):
        _cfg(eta=1.0).validate()


def test_config_round_trip_and_digest():
    cfg = _cfg()
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.digest() == cfg.digest()
    assert _cfg(seed_base=4).digest() != cfg.digest()


def test_seeds_differ_per_stream_and_rep():
    a, b = derive_seeds(0, 0), derive_seeds(0, 1)
    assert len(set(a.values())) == 4
    assert a != b and a == derive_seeds(0, 0)


def test_resolve_defaults():
    inst = P.generate(**ECOC)
    assert resolve_params(_cfg(), inst)["r_c"] == pytest.approx(0.15)
    bf = P.generate_boundary_features(2, "staircase2d", 0.1)
    p = resolve_params(_cfg(algorithm="planes", params={"alpha": 0.01}), bf)
    assert p["r"] == pytest.approx(0.05) and p["L"] == 7 and p["tau"] > 0


def test_noisy_heldout_rate():
    inst = P.generate_one_vs_all(3, 3, 0.5)
    y = np.zeros(50_000, dtype=np.int64)
    noisy = noisy_heldout_labels(inst, y, 0.1, 1)
    assert abs(np.mean(noisy != 0) - 0.1) < 4 * math.sqrt(0.09 / len(y))
    assert noisy_heldout_labels(inst, y, 0.0, 1) is y


# --------------------------------------------------------------------------
# runs and reports

def test_run_experiment_sl():
    res = run_experiment(_cfg())
    assert [r.rep for r in res] == [0, 1]
    assert all(r.ok and r.labels_used == 3 and r.error == 0.0 for r in res)


def test_failures_are_recorded_not_raised():
    res = run_experiment(_cfg(instance={"kind": "ecoc", "d": 2, "N": 16, "g": 0.5}))
    assert all(not r.ok and "GenerationError" in r.status for r in res)


def test_tiny_radius_needs_more_labels():
    # a tiny radius splits the components, so a small epsilon needs more labels
    res = run_experiment(_cfg(params={"epsilon": 0.01, "r_c": 0.001}, repetitions=1))
    assert res[0].ok and res[0].labels_used > 3


def test_report_files(tmp_path):
    cfg = _cfg()
    res = run_experiment(cfg)
    files = emit_report(res, tmp_path, [cfg])
    rows = load_results(files["results"])
    assert len(rows) == 2 and rows[0]["labels_used"] == 3
    header = files["results"].read_text().splitlines()[0].split(",")
    assert tuple(header) == RESULT_COLUMNS
    assert "runtime_ms" in files["timing"].read_text()
    assert len(files["ledger"].read_text().splitlines()) == 1 + 6
    assert len(files["classifiers"]) == 2
    s = summarize(res, [cfg])[0]
    assert s["success_fraction"] == 1.0 and s["max_labels"] == 3


def test_reports_are_byte_identical(tmp_path):
    blobs = []
    for k in range(2):
        files = emit_report(run_experiment(_cfg(algorithm="hier", params={"t": 20})),
                            tmp_path / str(k))
        blobs.append((files["results"].read_bytes(), files["ledger"].read_bytes()))
    assert blobs[0] == blobs[1]


def test_classifier_file_reloads(tmp_path):
    from codelearn.learners import classifier_from_dict
    res = run_experiment(_cfg(repetitions=1))
    files = emit_report(res, tmp_path)
    clf = classifier_from_dict(io.read_json(files["classifiers"][0]))
    X = P.make_heldout(P.generate(**ECOC), 200, 0).points
    assert np.array_equal(clf.predict(X), res[0].classifier.predict(X))


# --------------------------------------------------------------------------
# command line

def test_cli_gen_sample_run(tmp_path, capsys):
    inst = tmp_path / "i.json"
    assert cli.main(["gen", "--kind", "ecoc", "--d", "2", "--N", "3", "--g", "0.3",
                     "--out", str(inst)]) == 0
    pts = tmp_path / "s.csv"
    assert cli.main(["sample", "--instance", str(inst), "--n", "50", "--labels",
                     "--out", str(pts)]) == 0
    X, y = io.load_points(pts)
    assert X.shape == (50, 2) and set(y) <= {0, 1, 2}
    out = tmp_path / "run"
    assert cli.main(["run", "--instance", str(inst), "--algo", "sl", "--n", "600",
                     "--eps", "0.1", "--heldout", "500", "--out", str(out)]) == 0
    assert "labels=3" in capsys.readouterr().out
    assert (out / "summary.txt").exists()


def test_cli_error_exit_code(tmp_path, capsys):
    code = cli.main(["gen", "--kind", "boundary_features", "--layout", "staircase2d",
                     "--R", "0.5", "--out", str(tmp_path / "x.json")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_bench(tmp_path):
    cfg = _cfg(repetitions=2, max_labels=3, max_error=0.1).to_dict()
    path = tmp_path / "bench.json"
    io.write_json({"configs": [cfg], "min_success": 0.9}, path)
    assert cli.main(["bench", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    assert len(load_results(tmp_path / "b" / "results.csv")) == 2


def test_cli_verify_quick(capsys):
    assert cli.main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL " not in out and "0 failure(s)" in out
