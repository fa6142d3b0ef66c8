"""Experiment configs, repeated runs, error estimation and report files.

A run is a pure function of its :class:`ExperimentConfig`: every random stream
(sample, label noise, held-out set, learner) is derived from
``SeedSequence([seed_base, repetition])``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import learners as lr
from .errors import CodelearnError, InvalidInputError
from .io import SCHEMA_VERSION, load_instance, write_json
from .problems import LabeledOracle, draw_sample, generate, make_heldout

RESULT_COLUMNS = ("config_digest", "rep", "seed", "kind", "algorithm", "d", "n",
                  "labels_used", "error", "error_noisy", "clusters", "planes", "status")
TIMING_COLUMNS = ("config_digest", "rep", "runtime_ms")


@dataclass
class ExperimentConfig:
    instance: dict | None = None
    instance_path: str | None = None
    algorithm: str = "sl"
    n: int = 1000
    params: dict = field(default_factory=dict)
    eta: float = 0.0
    t_per_group: int | None = None
    heldout_size: int = 10_000
    repetitions: int = 1
    seed_base: int = 0
    max_labels: int | None = None
    max_error: float | None = None

    def validate(self):
        if (self.instance is None) == (self.instance_path is None):
            raise InvalidInputError("give exactly one of instance and instance_path")
        if self.algorithm not in lr.ALGORITHMS:
            raise InvalidInputError(f"unknown algorithm {self.algorithm!r}")
        if self.repetitions < 1 or self.n < 1 or self.heldout_size < 1:
            raise InvalidInputError("repetitions, n and heldout_size must be positive")
        if not 0 <= self.eta < 1:
            raise InvalidInputError("eta must lie in [0, 1)")
        if self.t_per_group is not None and self.t_per_group < 1:
            raise InvalidInputError("t_per_group must be positive")
        need = {"sl": ("epsilon",), "hier": ("t",), "sphere": ("epsilon",), "planes": ()}
        missing = [k for k in need[self.algorithm] if self.params.get(k) is None]
        if missing:
            raise InvalidInputError(f"{self.algorithm} needs parameters {missing}")
        return self

    def to_dict(self):
        out = asdict(self)
        out["schema_version"] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data.pop("schema_version", None)
        return cls(**data).validate()

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def load_instance(self):
        if self.instance_path is not None:
            return load_instance(self.instance_path)
        params = dict(self.instance)
        return generate(params.pop("kind"), **params)


@dataclass
class RunResult:
    config_digest: str
    rep: int
    seed: int
    kind: str
    algorithm: str
    d: int
    n: int
    labels_used: int
    error: float
    error_noisy: float
    runtime_ms: float
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)
    ledger: list = field(default_factory=list)
    classifier: object = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def derive_seeds(seed_base: int, rep: int) -> dict:
    state = np.random.SeedSequence([int(seed_base), int(rep)]).generate_state(4)
    names = ("sample", "noise", "heldout", "learner")
    return {k: int(v) for k, v in zip(names, state)}


def estimate_error(classifier, heldout) -> float:
    if len(heldout.labels) == 0:
        raise InvalidInputError("held-out set is empty")
    pred = classifier.predict(heldout.points)
    return float(np.mean(pred != heldout.labels))


def noisy_heldout_labels(instance, labels, eta, seed):
    """Held-out labels under the same uniform-flip noise model as the oracle."""
    if eta == 0:
        return labels
    rng = np.random.default_rng([int(seed), 0xF11B])
    flip = rng.random(len(labels)) < eta
    shift = rng.integers(1, instance.n_classes, size=len(labels))
    return np.where(flip, (labels + shift) % instance.n_classes, labels)


def resolve_params(config, instance) -> dict:
    """Fill algorithm parameters left unset from the instance certificate."""
    p = dict(config.params)
    cert = instance.certified
    alg = config.algorithm
    if alg == "sl" and p.get("r_c") is None:
        if cert.margin is None:
            raise InvalidInputError("r_c not given and the instance has no certified margin")
        p["r_c"] = cert.margin / 2
    if alg == "sphere":
        if p.get("r_c") is None:
            p["r_c"] = lr.choose_connection_radius(instance, p["epsilon"])
        p.setdefault("c_lb", cert.c_lb)
        p.setdefault("c_ub", cert.c_ub)
    if alg == "planes":
        if p.get("r") is None:
            if cert.R is None:
                raise InvalidInputError("r not given and the instance has no certified R")
            p["r"] = cert.R / 2
        if p.get("tau") is None:
            if p.get("alpha") is None:
                p["alpha"] = lr.default_alpha(p.get("epsilon", 0.1), instance.m, instance.d,
                                              cert.R, cert.diameter, cert.c_lb)
            p["tau"] = p["alpha"] * lr.halfball_mass(cert.c_lb, p["r"], instance.d) / 2
        p.setdefault("L", instance.n_classes)
        p["domain"] = (instance.domain_lo, instance.domain_hi, instance.domain_shape)
    return p


def run_once(config, instance, rep) -> RunResult:
    seeds = derive_seeds(config.seed_base, rep)
    base = dict(config_digest=config.digest(), rep=rep, seed=seeds["sample"],
                kind=instance.kind, algorithm=config.algorithm, d=instance.d, n=config.n)
    start = time.perf_counter()
    try:
        params = resolve_params(config, instance)
        params.setdefault("seed", seeds["learner"])
        sample = draw_sample(instance, config.n, seeds["sample"])
        oracle = LabeledOracle(instance, sample, config.eta, seeds["noise"])
        labeler = None
        if config.t_per_group is not None:
            labeler = lr.MajorityVote(config.t_per_group, seeds["learner"])
        clf, ledger, _ = lr.run_learner(config.algorithm, sample, oracle, labeler, **params)
        held = make_heldout(instance, config.heldout_size, seeds["heldout"])
        err = estimate_error(clf, held)
        noisy = noisy_heldout_labels(instance, held.labels, config.eta, seeds["noise"])
        err_noisy = float(np.mean(clf.predict(held.points) != noisy))
        if ledger.total != oracle.query_count:
            raise CodelearnError("ledger total disagrees with the oracle meter")
        return RunResult(**base, labels_used=oracle.query_count, error=err,
                         error_noisy=err_noisy,
                         runtime_ms=(time.perf_counter() - start) * 1e3,
                         diagnostics=dict(clf.diagnostics), ledger=ledger.rows(),
                         classifier=clf)
    except CodelearnError as exc:
        ledger = getattr(exc, "ledger", None)
        return RunResult(**base, labels_used=ledger.total if ledger else 0,
                         error=math.nan, error_noisy=math.nan,
                         runtime_ms=(time.perf_counter() - start) * 1e3,
                         status=f"{type(exc).__name__}: {exc}",
                         ledger=ledger.rows() if ledger else [])


def run_experiment(config: ExperimentConfig, instance=None) -> list:
    config.validate()
    try:
        instance = instance if instance is not None else config.load_instance()
    except CodelearnError as exc:
        digest = config.digest()
        return [RunResult(digest, rep, derive_seeds(config.seed_base, rep)["sample"],
                          (config.instance or {}).get("kind", "?"), config.algorithm,
                          0, config.n, 0, math.nan, math.nan, 0.0,
                          status=f"{type(exc).__name__}: {exc}")
                for rep in range(config.repetitions)]
    return [run_once(config, instance, rep) for rep in range(config.repetitions)]


def is_success(result, config) -> bool:
    if not result.ok:
        return False
    if config.max_labels is not None and result.labels_used > config.max_labels:
        return False
    if config.max_error is not None and result.error > config.max_error:
        return False
    return True


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def result_row(r: RunResult) -> list:
    diag = r.diagnostics or {}
    return [r.config_digest, r.rep, r.seed, r.kind, r.algorithm, r.d, r.n, r.labels_used,
            _fmt(r.error), _fmt(r.error_noisy), diag.get("clusters", ""),
            diag.get("planes", ""), r.status]


def summarize(results, configs=None) -> list:
    """Per config digest: runs, ok runs, median error, max labels, success fraction."""
    by_digest = {}
    for r in results:
        by_digest.setdefault(r.config_digest, []).append(r)
    cfg = {c.digest(): c for c in (configs or [])}
    rows = []
    for digest, rs in by_digest.items():
        errs = [r.error for r in rs if r.ok]
        c = cfg.get(digest)
        succ = sum(is_success(r, c) if c else r.ok for r in rs)
        rows.append({
            "config_digest": digest, "algorithm": rs[0].algorithm, "runs": len(rs),
            "ok": sum(r.ok for r in rs),
            "median_error": float(np.median(errs)) if errs else math.nan,
            "max_labels": max(r.labels_used for r in rs),
            "success_fraction": succ / len(rs),
        })
    return rows


def emit_report(results, path, configs=None) -> dict:
    """Write results.csv, timing.csv, ledger.csv, summary.txt and per-run classifiers.

    ``results.csv`` holds only seed-determined values, so repeated runs of one
    config give byte-identical files; wall-clock times go to ``timing.csv``.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = {"results": out / "results.csv", "timing": out / "timing.csv",
             "ledger": out / "ledger.csv", "summary": out / "summary.txt"}
    with open(files["results"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow(result_row(r))
    with open(files["timing"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in results:
            w.writerow([r.config_digest, r.rep, f"{r.runtime_ms:.3f}"])
    with open(files["ledger"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("config_digest", "rep", "step", "point_index", "label", "purpose"))
        for r in results:
            for row in r.ledger:
                w.writerow([r.config_digest, r.rep, *row])
    lines = [f"{'config':16}  {'alg':6}  {'runs':>4}  {'ok':>4}  {'median_err':>10}  "
             f"{'max_labels':>10}  {'success':>7}"]
    for s in summarize(results, configs):
        lines.append(f"{s['config_digest']:16}  {s['algorithm']:6}  {s['runs']:>4}  "
                     f"{s['ok']:>4}  {s['median_error']:>10.4f}  {s['max_labels']:>10}  "
                     f"{s['success_fraction']:>7.3f}")
    files["summary"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    for r in results:
        if r.classifier is not None:
            p = out / f"classifier_{r.config_digest}_{r.rep}.json"
            write_json(r.classifier.to_dict(), p)
            files.setdefault("classifiers", []).append(p)
    return files


def load_results(path) -> list:
    """Parse results.csv back into typed dicts."""
    ints = {"rep", "seed", "d", "n", "labels_used"}
    floats = {"error", "error_noisy"}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in ints:
            row[k] = int(row[k])
        for k in floats:
            row[k] = float(row[k])
    return rows
