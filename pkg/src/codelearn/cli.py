"""Command-line entry point: gen, sample, run, bench, verify."""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import io, oracles
from .errors import CodelearnError
from .harness import ExperimentConfig, emit_report, is_success, run_experiment


def _gen(args):
    kind = args.kind
    if kind == "ecoc":
        params = dict(d=args.d, N=args.N, g=args.g, shape=args.shape, beta=args.beta)
    elif kind == "manifold":
        params = dict(d_ambient=args.d, d_intrinsic=args.d_intrinsic, N=args.N, g=args.g)
    elif kind == "one_vs_all":
        params = dict(d=args.d, L=args.L, b_min=args.b_min)
    else:
        params = dict(d=args.d, layout=args.layout, R=args.R)
    from .problems import generate
    inst = generate(kind, seed=args.seed, **params)
    io.save_instance(inst, args.out)
    print(f"wrote {kind} instance with {inst.n_classes} classes and {inst.m} planes to {args.out}")
    return 0


def _sample(args):
    from .problems import draw_sample
    inst = io.load_instance(args.instance)
    s = draw_sample(inst, args.n, args.seed)
    io.save_points(args.out, s.points, inst.labels(s.points) if args.labels else None)
    print(f"wrote {args.n} points to {args.out}")
    return 0


def _run_params(args):
    p = {"epsilon": args.eps, "r_c": args.rc, "t": args.t, "r": args.r, "tau": args.tau,
         "alpha": args.alpha}
    return {k: v for k, v in p.items() if v is not None}


def _run(args):
    cfg = ExperimentConfig(instance_path=args.instance, algorithm=args.algo, n=args.n,
                           params=_run_params(args), eta=args.eta, t_per_group=args.tq,
                           heldout_size=args.heldout, repetitions=args.reps,
                           seed_base=args.seed)
    results = run_experiment(cfg)
    emit_report(results, args.out, [cfg])
    for r in results:
        print(f"rep {r.rep}: labels={r.labels_used} error={r.error:.4f} status={r.status}")
    return 0 if all(r.ok for r in results) else 1


def _bench(args):
    data = io.read_json(args.config)
    entries = data.get("configs", [data])
    configs = [ExperimentConfig.from_dict(e) for e in entries]
    required = data.get("min_success", 1.0)
    results, failed = [], False
    for cfg in configs:
        rs = run_experiment(cfg)
        results.extend(rs)
        frac = sum(is_success(r, cfg) for r in rs) / len(rs)
        failed |= frac < required
        print(f"{cfg.digest()} {cfg.algorithm}: success {frac:.3f} over {len(rs)} runs")
    emit_report(results, args.out, configs)
    return 1 if failed else 0


def verification_suite(quick: bool = False):
    """Yield (name, passed, detail) for each analytic-versus-oracle check."""
    from . import geometry as geo
    from .clustering import mark_active, radius_components, single_linkage_dendrogram
    from .learners import min_halfball_direction
    from .problems import generate_ecoc, make_one_vs_all

    count = 200_000 if quick else 1_000_000
    grid = np.linspace(1 / (12 * math.sqrt(2)), 1 / math.sqrt(2), 12)
    def inside(d, u):
        lo, hi = geo.ball_slice_bounds(d, 1.0, u)
        return lo <= geo.ball_slice_probability(d, 1.0, u) <= hi

    bad = [(d, u) for d in range(1, 11) for u in grid if not inside(d, u)]
    yield "ball-slice bounds", not bad, f"{120 - len(bad)}/120 grid points inside"
    for d in (2, 3, 5, 8):
        exact = geo.ball_slice_probability(d, 1.0, 0.4)
        rep = oracles.mc_ball_slice(d, 1.0, 0.4, count, seed=d, target=exact)
        yield f"ball-slice MC d={d}", rep.passed, f"{rep.estimate:.5f} vs {exact:.5f}"
        quad = oracles.slice_exact(d, 1.0, 0.4)
        yield f"ball-slice quadrature d={d}", abs(quad - exact) < 1e-9, f"|diff|={abs(quad - exact):.1e}"
    for d in (2, 3, 4, 7):
        for r in (0.3, 1.0, 2.5):
            a, b = geo.cap_measure(d, r), oracles.cap_fraction(d, r)
            yield f"cap measure d={d} r={r}", abs(a - b) < 1e-9, f"|diff|={abs(a - b):.1e}"
    inst = make_one_vs_all(np.array([[0, 0, 1.0], [0, 0, -1.0]]), np.array([0.5, 0.5]))
    for band in ((0.0, 0.2), (0.2, 0.4), (0.4, 0.6), (0.6, 0.8), (0.8, 1.0)):
        rep = oracles.mc_projected_density(inst, 0, band, count, seed=7)
        yield f"projected density band {band}", rep.passed, f"{rep.estimate:.5f} vs {rep.target:.5f}"
    e = generate_ecoc(2, 3, 0.3, seed=0)
    g = oracles.brute_margin(e, 100_000, seed=1)
    yield "ECOC margin", g >= 0.95 * e.certified.margin, f"{g:.4f} vs {e.certified.margin}"
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(5 if quick else 20):
        X = rng.random((int(rng.integers(2, 150)), 2))
        T = single_linkage_dendrogram(X)
        for r in rng.random(5) * 0.3:
            ok &= T.cut(r).partition() == oracles.bfs_components(X, r)
            ok &= radius_components(X, r).partition() == oracles.bfs_components(X, r)
    yield "cut / components / BFS", ok, "random sets"
    V = rng.standard_normal((400, 3))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    m = mark_active(V, 0.3, 0.02)
    yield "activity counts", bool(np.array_equal(m.counts, oracles.brute_active_counts(V, 0.3))), "400 points"
    ok = True
    for s in range(10 if quick else 50):
        Y = rng.uniform(-1, 1, (60, 2))
        _, c = min_halfball_direction(Y, Y[0], 1.0)
        ok &= c == oracles.brute_min_halfball(Y, Y[0], 1.0)
    yield "half-ball sweep", ok, "random balls"


def _verify(args):
    failures = 0
    for name, passed, detail in verification_suite(args.quick):
        failures += not passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:36}  {detail}")
    print(f"{failures} failure(s)")
    return 1 if failures else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="codelearn", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a certified instance file")
    g.add_argument("--kind", required=True,
                   choices=["ecoc", "manifold", "one_vs_all", "boundary_features"])
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--N", type=int, default=2)
    g.add_argument("--g", type=float, default=0.3)
    g.add_argument("--shape", default="ball", choices=["ball", "box"])
    g.add_argument("--beta", type=int, default=0)
    g.add_argument("--d-intrinsic", type=int, default=1)
    g.add_argument("--L", type=int, default=2)
    g.add_argument("--b-min", type=float, default=0.5)
    g.add_argument("--layout", default="staircase2d")
    g.add_argument("--R", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen)

    s = sub.add_parser("sample", help="draw a sample CSV from an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--labels", action="store_true", help="append the true label column")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_sample)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--instance", required=True)
    r.add_argument("--algo", required=True, choices=["sl", "hier", "sphere", "planes"])
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--eps", type=float)
    r.add_argument("--rc", type=float)
    r.add_argument("--t", type=int)
    r.add_argument("--r", type=float)
    r.add_argument("--tau", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--eta", type=float, default=0.0)
    r.add_argument("--tq", type=int, help="labels per group (majority vote)")
    r.add_argument("--heldout", type=int, default=10_000)
    r.add_argument("--reps", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_run)

    b = sub.add_parser("bench", help="run every config in a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=_bench)

    v = sub.add_parser("verify", help="check analytic formulas against oracles")
    v.add_argument("--quick", action="store_true")
    v.set_defaults(func=_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CodelearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
