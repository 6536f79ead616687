"""Command-line front end: kernels | sample | solve | verify.

A single strict JSON document configures each run; unknown keys are
rejected.  Exit codes: 0 success, 1 verification failure, 2 configuration
error, 3 solver non-convergence.  Every output file is written through a
temp-file rename, so no partial file survives a failure, and each solve
emits a manifest recording every tolerance and seed used.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import PicardConvergenceError
from .measures import (
    EmpiricalMeasure,
    MeasurePath,
    _atomic_write,
    moment,
    path_from_csv,
    path_to_csv,
    total_mass,
    write_manifest,
)
from .specfun import (
    FracOrder,
    inverse_subordinator_density,
    mittag_leffler,
    subordinator_density,
)
from .subordinator import RngSpec, mc_exponential_functional, sample_inverse
from .transport import (
    ExplicitField,
    InteractionField,
    SolverConfig,
    attraction_field,
    repulsion_field,
    solve_linear,
    solve_nonlinear,
    solve_with_source,
)
from .verify import run_checks

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3


class ConfigError(ValueError):
    pass


def _require_keys(obj: dict, allowed: set, required: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as handle:
            cfg = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _parse_measure(spec: dict, where: str) -> EmpiricalMeasure:
    _require_keys(spec, {"kind", "point", "points", "mass", "masses", "low", "high", "n", "path"}, {"kind"}, where)
    kind = spec["kind"]
    if kind == "dirac":
        return EmpiricalMeasure.dirac(spec.get("point", [0.0]), spec.get("mass", 1.0))
    if kind == "two-dirac":
        pts = np.asarray(spec.get("points", [[-1.0], [1.0]]), dtype=float)
        masses = np.asarray(spec.get("masses", [0.5, 0.5]), dtype=float)
        return EmpiricalMeasure(points=pts, weights=masses)
    if kind == "uniform-grid":
        low = np.atleast_1d(np.asarray(spec["low"], dtype=float))
        high = np.atleast_1d(np.asarray(spec["high"], dtype=float))
        n = int(spec["n"])
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(low, high)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        mass = float(spec.get("mass", 1.0))
        return EmpiricalMeasure(points=pts, weights=np.full(pts.shape[0], mass / pts.shape[0]))
    if kind == "file":
        path = path_from_csv(spec["path"], FracOrder(1.0))
        return path.measures[0]
    raise ConfigError(f"unknown measure kind {kind!r} in {where}")


def _parse_velocity(spec: dict):
    _require_keys(
        spec, {"kind", "value", "matrix", "offset", "bound", "lip"}, {"kind"}, "velocity"
    )
    kind = spec["kind"]
    if kind == "constant":
        value = np.atleast_1d(np.asarray(spec.get("value", [1.0]), dtype=float))
        return ExplicitField(
            func=lambda x, t: np.broadcast_to(value, x.shape).copy(),
            bound=float(np.linalg.norm(value)),
            lip=0.0,
        )
    if kind == "damping":
        return ExplicitField(func=lambda x, t: -x, bound=float(spec.get("bound", 10.0)), lip=1.0)
    if kind == "affine":
        matrix = np.asarray(spec["matrix"], dtype=float)
        offset = np.atleast_1d(np.asarray(spec.get("offset", np.zeros(matrix.shape[0])), dtype=float))
        lip = float(np.linalg.norm(matrix, 2))
        return ExplicitField(
            func=lambda x, t: x @ matrix.T + offset,
            bound=float(spec.get("bound", 10.0)),
            lip=lip,
        )
    if kind == "attraction":
        return attraction_field(lip=float(spec.get("lip", 1.0)))
    if kind == "repulsion":
        return repulsion_field()
    raise ConfigError(f"unknown velocity kind {kind!r}")


_SOLVER_KEYS = {
    "q_h",
    "q_g",
    "eps_tail",
    "ode_step",
    "picard_tol",
    "picard_max_iters",
    "t_ext",
    "bl_cap",
}


def _parse_solver_config(cfg: dict, beta: FracOrder, times, seed: int) -> SolverConfig:
    solver = cfg.get("solver", {})
    _require_keys(solver, _SOLVER_KEYS, set(), "solver")
    return SolverConfig(beta=beta, times=tuple(times), seed=seed, **solver)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_kernels(cfg: dict, out_dir: str, seed: int) -> int:
    _require_keys(cfg, {"betas", "s_grid", "t_grid", "z_grid"}, set(), "config")
    betas = [float(b) for b in cfg.get("betas", [0.3, 0.5, 0.7])]
    s_grid = [float(s) for s in cfg.get("s_grid", np.linspace(0.0, 4.0, 21))]
    t_grid = [float(t) for t in cfg.get("t_grid", [0.5, 1.0, 2.0])]
    z_grid = [float(z) for z in cfg.get("z_grid", np.linspace(-5.0, 2.0, 15))]

    def write_kernels(handle):
        writer = csv.writer(handle)
        writer.writerow(["beta", "s", "t", "g", "h"])
        for b in betas:
            beta = FracOrder(b)
            for t in t_grid:
                for s in s_grid:
                    g = subordinator_density(beta, s, t) if s > 0.0 else float("nan")
                    h = inverse_subordinator_density(beta, s, t)
                    writer.writerow([b, s, t, repr(g), repr(h)])

    def write_ml(handle):
        writer = csv.writer(handle)
        writer.writerow(["beta", "z", "value"])
        for b in betas:
            beta = FracOrder(b)
            for z in z_grid:
                writer.writerow([b, z, repr(mittag_leffler(beta, z))])

    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "kernels.csv"), write_kernels)
    _atomic_write(os.path.join(out_dir, "mittag_leffler.csv"), write_ml)
    return EXIT_OK


def cmd_sample(cfg: dict, out_dir: str, seed: int) -> int:
    _require_keys(
        cfg,
        {"beta", "times", "gammas", "lambdas", "n", "dtau", "seed"},
        {"beta", "times"},
        "config",
    )
    beta = FracOrder(float(cfg["beta"]))
    times = [float(t) for t in cfg["times"]]
    gammas = [float(g) for g in cfg.get("gammas", [1.0, 2.0])]
    lambdas = [float(l) for l in cfg.get("lambdas", [])]
    n = int(cfg.get("n", 10_000))
    dtau = float(cfg.get("dtau", 1e-3))
    records = []
    for k, t in enumerate(times):
        draws = sample_inverse(beta, t, dtau, RngSpec(seed, stream_id=k), size=n)
        for g in gammas:
            vals = draws**g
            records.append(
                {
                    "beta": beta.beta,
                    "t": t,
                    "gamma": g,
                    "estimate": float(vals.mean()),
                    "stderr": float(vals.std(ddof=1) / math.sqrt(n)),
                    "n": n,
                    "seed": seed,
                }
            )
        for lam in lambdas:
            est, se = mc_exponential_functional(
                beta, lam, t, max(n, 100), RngSpec(seed, stream_id=1000 + k), dtau=dtau
            )
            records.append(
                {
                    "beta": beta.beta,
                    "t": t,
                    "lambda": lam,
                    "estimate": est,
                    "stderr": se,
                    "n": n,
                    "seed": seed,
                }
            )

    os.makedirs(out_dir, exist_ok=True)

    def write(handle):
        for rec in records:
            handle.write(json.dumps(rec, sort_keys=True) + "\n")

    _atomic_write(os.path.join(out_dir, "samples.jsonl"), write)
    return EXIT_OK


def cmd_solve(cfg: dict, out_dir: str, seed: int) -> int:
    _require_keys(
        cfg,
        {"problem", "beta", "times", "velocity", "initial", "solver", "source", "seed"},
        {"problem", "beta", "times", "velocity", "initial"},
        "config",
    )
    problem = cfg["problem"]
    if problem not in ("linear", "nonlinear", "source"):
        raise ConfigError(f"unknown problem {problem!r}")
    beta = FracOrder(float(cfg["beta"]))
    times = [float(t) for t in cfg["times"]]
    mu0 = _parse_measure(cfg["initial"], "initial")
    field = _parse_velocity(cfg["velocity"])
    solver_cfg = _parse_solver_config(cfg, beta, times, seed)

    os.makedirs(out_dir, exist_ok=True)
    picard_log = None
    if problem == "linear":
        if not isinstance(field, ExplicitField):
            raise ConfigError("linear problem needs an explicit velocity")
        path = solve_linear(beta, field, mu0, solver_cfg)
    elif problem == "nonlinear":
        if not isinstance(field, InteractionField):
            raise ConfigError("nonlinear problem needs an interaction kernel")
        try:
            path = solve_nonlinear(beta, field, mu0, solver_cfg)
        except PicardConvergenceError as exc:

            def write_trace(handle):
                for k, dist in enumerate(exc.trace, start=1):
                    handle.write(json.dumps({"sweep": k, "sup_dbl": dist}) + "\n")

            _atomic_write(os.path.join(out_dir, "picard.jsonl"), write_trace)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        picard_log = path.diagnostics.get("picard_log")
    else:
        if "source" not in cfg:
            raise ConfigError("source problem needs a 'source' block")
        if not isinstance(field, ExplicitField):
            raise ConfigError("source problem needs an explicit velocity")
        nu = _parse_measure(cfg["source"], "source")
        gamma_path = MeasurePath(
            times=np.array([0.0, times[-1]]), measures=[nu, nu], beta=beta
        )
        path = solve_with_source(beta, field, mu0, gamma_path, solver_cfg)

    path_to_csv(path, os.path.join(out_dir, "path.csv"))
    if picard_log is not None:

        def write_log(handle):
            for entry in picard_log:
                handle.write(json.dumps(entry, sort_keys=True) + "\n")

        _atomic_write(os.path.join(out_dir, "picard.jsonl"), write_log)

    manifest = {
        "tool": {"name": "fractrans", "version": __version__},
        "problem": problem,
        "beta": beta.beta,
        "times": times,
        "seed": seed,
        "solver": {
            "q_h": solver_cfg.q_h,
            "q_g": solver_cfg.q_g,
            "eps_tail": solver_cfg.eps_tail,
            "ode_step": solver_cfg.ode_step,
            "picard_tol": solver_cfg.picard_tol,
            "picard_max_iters": solver_cfg.picard_max_iters,
            "t_ext": solver_cfg.t_ext,
            "bl_cap": solver_cfg.bl_cap,
        },
        "outputs": {
            "total_mass": [total_mass(m) for m in path.measures],
            "first_moment": [moment(m, 1) for m in path.measures],
            "second_moment": [moment(m, 2) for m in path.measures],
        },
        "diagnostics": {
            k: v for k, v in path.diagnostics.items() if k != "picard_log"
        },
    }
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return EXIT_OK


def cmd_verify(cfg: dict, out_dir: str, seed: int) -> int:
    _require_keys(cfg, {"eps_tail"}, set(), "config")
    report = run_checks(cfg)
    os.makedirs(out_dir, exist_ok=True)

    def write(handle):
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")

    _atomic_write(os.path.join(out_dir, "verify.json"), write)
    for check in report["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        print(f"{status} {check['name']}: achieved {check['achieved']:.3e} "
              f"(target {check['target']:.3g} +/- {check['tolerance']:.3g})")
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fractrans",
        description="Fractional-in-time measure transport: kernels, samplers, solvers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("kernels", "tabulate the subordinator kernels and Mittag-Leffler values"),
        ("sample", "Monte Carlo estimates for the internal clock"),
        ("solve", "run a transport solver"),
        ("verify", "run the self-verification suite"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (reserved)")

    args = parser.parse_args(argv)
    handlers = {
        "kernels": cmd_kernels,
        "sample": cmd_sample,
        "solve": cmd_solve,
        "verify": cmd_verify,
    }
    try:
        cfg = _load_config(args.config) if args.config else {}
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        return handlers[args.command](cfg, args.out, seed)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
