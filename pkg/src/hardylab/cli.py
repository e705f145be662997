"""Command-line entry point: reproducible experiments with CSV + manifest."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import atoms, geometry, harmonic, maximal, potentials, semigroup
from .geometry import Cube
from .potentials import Potential
from .semigroup import FKConfig

EXPERIMENTS = (
    "kato-check",
    "omega-profile",
    "oscillation",
    "kernel-bounds",
    "perturbation-check",
    "decompose",
    "growth",
    "approx-identity",
)


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int = 3
    paths: int = 4000
    steps: int = 1024
    seed: int = 0
    k_max: int = 12
    horizon: float = 64.0
    tau_list: tuple = (4.0, 6.0, 8.0, 10.0)
    n_list: tuple = (4, 5, 6)
    t: float = 0.5
    mu_stub: float | None = None
    zeta: float = 1.0
    u2: str = "const:1"
    resolution: int = 16
    out: str = "."

    def to_json(self):
        d = asdict(self)
        d["tau_list"] = list(self.tau_list)
        d["n_list"] = list(self.n_list)
        return d


def _fmt(x):
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_manifest(cfg: ExperimentConfig, out_dir, outputs, wall):
    hashed = {k: v for k, v in cfg.to_json().items() if k != "out"}
    cfg_json = json.dumps(hashed, sort_keys=True)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_json(),
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
        "wall_time_s": wall,
    }
    path = os.path.join(out_dir, f"{cfg.experiment}.manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _fk(cfg: ExperimentConfig) -> FKConfig:
    return FKConfig(paths=cfg.paths, steps=cfg.steps, seed=cfg.seed)


def run_kato_check(cfg, out_dir):
    ex = potentials.example_potential(cfg.k_max, cfg.dim)
    report = potentials.kato_sup_estimate(ex.potential, d=cfg.dim,
                                          tail_bound=ex.tail_bound)
    rows = [
        (i, *p, v) for i, (p, v) in enumerate(zip(report.probes, report.values))
    ]
    path = os.path.join(out_dir, "kato-check.csv")
    coords = [f"x{i}" for i in range(cfg.dim)]
    _write_csv(path, ["probe", *coords, "value"], rows)
    summary = os.path.join(out_dir, "kato-check.summary.json")
    with open(summary, "w") as fh:
        json.dump({"sup": report.sup, "finite": report.finite,
                   "tail_bound": report.tail_bound, "k_max": cfg.k_max},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path, summary]


def run_omega_profile(cfg, out_dir):
    ex = potentials.example_potential(cfg.k_max, cfg.dim)
    fk = _fk(cfg)
    rows = []
    for n in cfg.n_list:
        x = np.zeros(cfg.dim)
        x[0] = 2.0**n
        est = harmonic.omega(ex.potential, x, cfg.horizon, fk)
        rows.append((n, x[0], est.value, est.stderr, est.tail_bound))
    est0 = harmonic.omega(ex.potential, np.zeros(cfg.dim), cfg.horizon, fk)
    rows.append((0, 0.0, est0.value, est0.stderr, est0.tail_bound))
    path = os.path.join(out_dir, "omega-profile.csv")
    _write_csv(path, ["n", "x1", "omega", "stderr", "tail_bound"], rows)
    return [path]


def run_oscillation(cfg, out_dir):
    ex = potentials.example_potential(cfg.k_max, cfg.dim)
    fk = _fk(cfg)
    rows = []
    for tau in cfg.tau_list:
        for r in harmonic.oscillation_experiment(
                ex.potential, cfg.n_list, tau, cfg.horizon, fk, d=cfg.dim):
            rows.append((r.n, r.tau, r.inf_D, r.sup_C, r.gap, r.stderr,
                         r.tail_bound, int(r.conclusive)))
    path = os.path.join(out_dir, "oscillation.csv")
    _write_csv(path, ["n", "tau", "inf_D", "sup_C", "gap", "stderr",
                      "tail_bound", "conclusive"], rows)
    return [path]


def run_kernel_bounds(cfg, out_dir):
    ex = potentials.example_potential(min(cfg.k_max, 6), cfg.dim)
    fk = _fk(cfg)
    rng = np.random.default_rng(cfg.seed)
    base = np.zeros(cfg.dim)
    base[0] = 4.0
    rows = []
    qs, logs = [], []
    for i in range(24):
        t = float(np.exp(rng.uniform(math.log(0.05), math.log(1.0))))
        x = base + rng.uniform(-1.0, 1.0, cfg.dim)
        y = base + rng.uniform(-1.0, 1.0, cfg.dim)
        est = semigroup.fk_kernel(ex.potential, t, x, y, fk)
        cap = (4.0 * math.pi * t) ** (-cfg.dim / 2.0)
        q = float(((x - y) ** 2).sum()) / t
        rows.append((i, t, q, est.value, est.stderr, cap,
                     int(est.value - 3 * est.stderr <= cap)))
        if est.value > 0:
            qs.append(q)
            logs.append(math.log(est.value * t ** (cfg.dim / 2.0)))
    slope, intercept = np.polyfit(qs, logs, 1)
    kappa1 = math.exp(intercept)
    kappa2 = -1.0 / slope if slope < 0 else math.inf
    path = os.path.join(out_dir, "kernel-bounds.csv")
    _write_csv(path, ["case", "t", "dist_sq_over_t", "value", "stderr",
                      "gauss_cap", "cap_ok"], rows)
    summary = os.path.join(out_dir, "kernel-bounds.summary.json")
    with open(summary, "w") as fh:
        json.dump({"kappa1_hat": kappa1, "kappa2_hat": kappa2,
                   "note": "empirical fit; existence constants have no "
                           "reference values"},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path, summary]


def _parse_u2(spec_str, dim):
    kind, _, arg = spec_str.partition(":")
    if kind == "const":
        return Potential(background=float(arg))
    if kind == "cube":
        w, cx, r = (float(v) for v in arg.split(","))
        center = (cx,) + (0.0,) * (dim - 1)
        return Potential(terms=((w, Cube(center, r)),))
    raise ValueError(f"unknown perturbation spec: {spec_str!r}")


def run_perturbation_check(cfg, out_dir):
    u2 = _parse_u2(cfg.u2, cfg.dim)
    fk = _fk(cfg)
    x = np.zeros(cfg.dim)
    y = np.zeros(cfg.dim)
    y[0] = 0.5
    if u2.terms:
        x = np.asarray(u2.terms[0][1].center) + np.array(
            [-2.0 * u2.terms[0][1].radius] + [0.0] * (cfg.dim - 1))
        y = np.asarray(u2.terms[0][1].center) + np.array(
            [2.0 * u2.terms[0][1].radius] + [0.0] * (cfg.dim - 1))
    quad = semigroup.QuadConfig(inner_paths=max(500, cfg.paths // 8),
                                inner_steps=max(32, cfg.steps // 8))
    res = semigroup.perturbation_residual(
        Potential(), u2, cfg.t, x, y, fk, quad)
    path = os.path.join(out_dir, "perturbation-check.csv")
    _write_csv(path, ["t", "residual", "stderr", "lhs", "rhs"],
               [(cfg.t, res.residual, res.stderr, res.lhs, res.rhs)])
    return [path]


def run_decompose(cfg, out_dir):
    Q = Cube((0.0,) * cfg.dim, 1.0)
    K = Cube((0.0,) * cfg.dim, 0.125)

    def w(pts):
        pts = np.asarray(pts)
        dist = np.linalg.norm(pts - np.asarray(K.center), axis=-1)
        return 1.0 - 0.25 * np.clip(dist / Q.diameter, 0.0, 1.0) ** 0.5

    # two-piece atom with weighted cancellation against w and unit size
    mass = atoms.integrate_against(((1.0, K),), w)
    inner = Cube(K.center, K.radius / 2.0)
    mass_inner = atoms.integrate_against(((1.0, inner),), w)
    ratio = mass / mass_inner
    beta = 1.0 / (K.volume * (ratio - 1.0))
    a = atoms.Atom(K, atoms.KIND_OMEGA_Q,
                   ((ratio * beta, inner), (-beta, K)))
    res = atoms.telescope(a, Q, omega_fn=w)
    rows = [
        (i, lam, at.kind, at.support.radius)
        for i, (lam, at) in enumerate(res.decomposition.terms)
    ]
    path = os.path.join(out_dir, "decompose.csv")
    _write_csv(path, ["piece", "coefficient", "kind", "support_radius"], rows)
    jpath = os.path.join(out_dir, "decompose.pieces.json")
    with open(jpath, "w") as fh:
        json.dump(res.decomposition.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path, jpath]


def run_growth(cfg, out_dir):
    mu = cfg.mu_stub if cfg.mu_stub is not None else 1.1
    fit = maximal.growth_experiment(cfg.n_list, max(cfg.tau_list[0], 4.0),
                                    lambda n: mu, zeta=cfg.zeta, d=cfg.dim)
    rows = [(r.n, r.mu_n, r.L_n, r.nodes, r.refinement_delta)
            for r in fit.rows]
    path = os.path.join(out_dir, "growth.csv")
    _write_csv(path, ["n", "mu_n", "L_n", "nodes", "refinement_delta"], rows)
    summary = os.path.join(out_dir, "growth.summary.json")
    with open(summary, "w") as fh:
        json.dump({"alpha": fit.alpha, "beta": fit.beta,
                   "gamma": fit.gamma,
                   "ci_low": fit.ci_low, "ci_high": fit.ci_high,
                   "strictly_increasing": fit.strictly_increasing},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path, summary]


def run_approx_identity(cfg, out_dir):
    f_pieces = ((1.0, Cube((0.0,) * cfg.dim, 1.0)),)
    bbox = Cube((0.0,) * cfg.dim, 1.5)
    fk = _fk(cfg)
    U0 = Potential()
    UV = potentials.example_potential(min(cfg.k_max, 6), cfg.dim).potential
    rows = []
    for t in (1e-1, 1e-2, 1e-3):
        r0 = semigroup.approx_identity_error(U0, f_pieces, t, fk, bbox,
                                             res=cfg.resolution)
        rows.append(("free", t, r0.interior_sup, r0.boundary_sup, 0.0))
    for t in (1e-1, 1e-3):
        rv = semigroup.approx_identity_error(UV, f_pieces, t, fk, bbox,
                                             res=max(6, cfg.resolution // 2))
        rows.append(("example", t, rv.interior_sup, rv.boundary_sup,
                     rv.max_stderr))
    path = os.path.join(out_dir, "approx-identity.csv")
    _write_csv(path, ["potential", "t", "interior_sup", "boundary_sup",
                      "max_stderr"], rows)
    return [path]


RUNNERS = {
    "kato-check": run_kato_check,
    "omega-profile": run_omega_profile,
    "oscillation": run_oscillation,
    "kernel-bounds": run_kernel_bounds,
    "perturbation-check": run_perturbation_check,
    "decompose": run_decompose,
    "growth": run_growth,
    "approx-identity": run_approx_identity,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="hardylab",
        description="Desk-scale experiments on Schrodinger heat kernels, "
                    "harmonic weights, and local atomic decompositions.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", default=None,
                   help="output directory (default: $HARDYLAB_OUTDIR or .)")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kmax", type=int, default=None, dest="k_max")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--tau", default=None,
                   help="comma-separated shift parameters, each > 3")
    p.add_argument("--n", default=None, help="comma-separated cube indices")
    p.add_argument("--mu-stub", type=float, default=None, dest="mu_stub")
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--u2", default=None,
                   help="perturbation: const:<v> or cube:<w>,<cx>,<r>")
    p.add_argument("--resolution", type=int, default=None)
    return p


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    cfg = ExperimentConfig(experiment=args.experiment)
    for k, v in base.items():
        if k == "experiment":
            continue
        if not hasattr(cfg, k):
            raise SystemExit(f"unknown config field: {k!r}")
        setattr(cfg, k, v)
    for name in ("dim", "paths", "steps", "seed", "k_max", "horizon", "t",
                 "mu_stub", "zeta", "u2", "resolution", "out"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if args.tau is not None:
        cfg.tau_list = tuple(float(v) for v in args.tau.split(","))
    if args.n is not None:
        cfg.n_list = tuple(int(v) for v in args.n.split(","))
    if args.out is None and "out" not in base:
        cfg.out = os.environ.get("HARDYLAB_OUTDIR", ".")
    cfg.tau_list = tuple(cfg.tau_list)
    cfg.n_list = tuple(cfg.n_list)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(cfg.out, exist_ok=True)
    start = time.perf_counter()
    try:
        outputs = RUNNERS[cfg.experiment](cfg, cfg.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - start
    manifest = _write_manifest(cfg, cfg.out, outputs, wall)
    for p in outputs + [manifest]:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
