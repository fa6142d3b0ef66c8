"""Instance, sample and config files.

Instances and configs are JSON with a ``schema_version`` field. Python's float
repr is the shortest string that round-trips, so values reload bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .geometry import CodeMatrix, Hyperplane

SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def instance_to_dict(inst) -> dict:
    from .problems import certificate_dict
    return _plain({
        "schema_version": SCHEMA_VERSION,
        "kind": inst.kind,
        "d": inst.d,
        "planes": [{"w": p.w, "b": p.b} for p in inst.planes],
        "code": inst.code.rows.astype(int),
        "certified": certificate_dict(inst.certified),
        "domain": {"shape": inst.domain_shape, "lo": inst.domain_lo, "hi": inst.domain_hi},
        "regions": inst.regions,
        "params": inst.params,
    })


def instance_from_dict(data: dict):
    from .problems import ProblemInstance, certificate_from_dict
    if data.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported schema version {data.get('schema_version')!r}")
    planes = [Hyperplane(np.asarray(p["w"], dtype=float), p["b"]) for p in data["planes"]]
    dom = data["domain"]
    return ProblemInstance(
        kind=data["kind"], d=int(data["d"]), planes=planes,
        code=CodeMatrix(np.asarray(data["code"])),
        certified=certificate_from_dict(data["certified"]),
        domain_lo=np.asarray(dom["lo"], dtype=float),
        domain_hi=np.asarray(dom["hi"], dtype=float),
        regions=data.get("regions", []), params=data.get("params", {}),
        domain_shape=dom.get("shape", "box"),
    )


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_instance(inst, path) -> None:
    write_json(instance_to_dict(inst), path)


def load_instance(path):
    return instance_from_dict(read_json(path))


def save_points(path, points, labels=None) -> None:
    X = np.atleast_2d(points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = [f"x{j}" for j in range(X.shape[1])]
        if labels is not None:
            header.append("label")
        w.writerow(header)
        for i, row in enumerate(X):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(int(labels[i]))
            w.writerow(out)


def load_points(path):
    """Return ``(points, labels)``; labels is None for unlabeled files."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    labeled = header[-1] == "label"
    d = len(header) - int(labeled)
    X = np.array([[float(v) for v in r[:d]] for r in body]).reshape(len(body), d)
    y = np.array([int(r[d]) for r in body], dtype=np.int64) if labeled else None
    return X, y
