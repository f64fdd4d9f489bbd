"""Command line: ``sfns verify | evolve {hm2d,ns3d,heat} | symmetry``.

Exit codes: 0 pass, 1 tolerance failure, 2 usage or config error,
3 solver abort, 4 inconclusive experiment.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog, symmetry
from . import grid as G
from .evolve import SolverAbort, SolverConfig, evolve_hm2d, evolve_ns3d, run_heat, write_run
from .frames import RepKind, SymplecticRep, synthesize
from .radial import profile_from_descriptor
from .verify import default_points, residual_divergence, residual_ns, residual_static_euler

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

log = logging.getLogger("sfns")


class ConfigError(ValueError):
    """Malformed or inconsistent command configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = os.environ.get("SFNS_LOG", "error").lower()
    if level not in ("error", "info", "debug"):
        level = "error"
    logging.basicConfig(level=getattr(logging, level.upper()), format="%(levelname)s %(name)s: %(message)s")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


# -- verify -------------------------------------------------------------------------

def _parse_coeffs(text):
    """Accept JSON ('{"f2": 1}') or comma-separated key=value pairs ('f2=1,g4=0')."""
    if text is None:
        return {}
    text = text.strip()
    if text.startswith("{"):
        return {k: float(v) for k, v in json.loads(text).items()}
    out = {}
    for item in filter(None, text.split(",")):
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"bad coefficient {item!r}; expected key=value")
        out[key.strip()] = float(val)
    return out


def _verify_params(args) -> dict:
    params = {}
    for key in ("lambda", "alpha", "beta", "Ra", "amplitude", "width", "j", "nu", "r_min", "r_max"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    for key in ("A", "B"):
        val = getattr(args, key)
        if val is not None:
            params[key] = list(val)
    coeffs = _parse_coeffs(args.coeffs)
    if coeffs:
        params["coeffs"] = coeffs
    return params


def cmd_verify(args) -> int:
    if args.family not in catalog.CLI_NAMES:
        log.error("unknown family %r; known: %s", args.family, ", ".join(catalog.CLI_NAMES))
        return EXIT_USAGE
    params = _verify_params(args)
    try:
        sol = catalog.build_from_name(args.family, params)
    except (ValueError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    times = args.t if args.t else [0.0]
    out = Path(args.out)
    resolved = {"command": "verify", "family": args.family, "params": params, "points": args.points,
                "seed": args.seed, "tol": args.tol, "t": times, "out": str(out), "solution": sol.describe()}
    _dump(out.with_name(out.stem + ".config.json"), resolved)
    points = default_points(sol, n=args.points, seed=args.seed)
    reports = []
    for t in times:
        batch = [residual_divergence(sol, points, tol=args.tol, t=t)]
        if sol.is_static and sol.dim == 2:
            batch.append(residual_static_euler(sol, points, tol=args.tol, t=t))
        else:
            batch.append(residual_ns(sol, t=t, points=points, tol=args.tol))
        for r in batch:
            r.meta["t"] = t
        reports.extend(batch)
    _dump(out, [r.to_dict() for r in reports])
    ok = all(r.passed for r in reports)
    for r in reports:
        log.info("%s: linf=%.3e scale=%.3e tol=%.1e passed=%s", r.check, r.linf, r.scale, r.tol, r.passed)
    print(json.dumps({"family": args.family, "passed": ok, "checks": len(reports)}))
    return EXIT_OK if ok else EXIT_FAIL


# -- evolve ---------------------------------------------------------------------------

def _grid_from(cfg: dict, dim: int) -> G.Grid:
    gcfg = cfg.get("grid", {})
    try:
        return G.Grid(dim, int(gcfg.get("n", 64)), float(gcfg.get("L", 2 * np.pi)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _profile(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config needs {key!r} (a radial profile descriptor)")
    try:
        return profile_from_descriptor(cfg[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad profile {key!r}: {exc}") from exc


def _sample_radial(g: G.Grid, profile, cutoff) -> G.GridField:
    vals = profile.value(g.radius)
    if cutoff is not None:
        vals = vals * symmetry.smooth_cutoff(g.radius, cutoff[0] * g.L, cutoff[1] * g.L)
    return G.GridField(g, np.asarray(vals, float)[None])


def _solver(cfg: dict) -> SolverConfig:
    try:
        return SolverConfig.from_dict(dict(cfg.get("solver", {})))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def _frames(cfg: dict, kind: RepKind, seed: int):
    frames = cfg.get("frames")
    if frames is None or frames == "generic":
        return symmetry.generic_frame(kind, seed)
    try:
        return np.asarray(frames["A"], float), np.asarray(frames["B"], float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad frames: {exc}") from exc


def _ns3d_initial(cfg: dict, g: G.Grid, seed: int):
    try:
        kind = RepKind.parse(cfg.get("rep", "12"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    A, B = _frames(cfg, kind, seed)
    cutoff = cfg.get("cutoff")
    phi = _sample_radial(g, _profile(cfg, "phi0"), cutoff)
    psi = _sample_radial(g, _profile(cfg, "psi0"), cutoff)
    try:
        u0 = synthesize(SymplecticRep(kind, A, B, phi, psi))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return u0, (kind, A, B)


def cmd_evolve(args) -> int:
    out = Path(args.out)
    try:
        cfg = _load_config(args.config)
        solver = _solver(cfg)
        seed = int(cfg.get("seed", 0))
        if args.kind == "hm2d":
            g = _grid_from(cfg, 2)
            phi0 = _sample_radial(g, _profile(cfg, "phi0"), cfg.get("cutoff"))
            if cfg.get("subtract_mean", True):
                phi0 = G.GridField(g, phi0.data - phi0.data.mean())
            run = lambda: evolve_hm2d(phi0, solver)  # noqa: E731
        elif args.kind == "ns3d":
            g = _grid_from(cfg, 3)
            u0, frame = _ns3d_initial(cfg, g, seed)
            with_frame = frame if cfg.get("recover_potentials", False) else None
            run = lambda: evolve_ns3d(u0, solver, frame=with_frame)  # noqa: E731
        else:
            g = _grid_from(cfg, int(cfg.get("dim", 3)))
            f0 = _sample_radial(g, _profile(cfg, "f0"), cfg.get("cutoff"))
            run = lambda: run_heat(f0, solver)  # noqa: E731
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    resolved = dict(cfg, command=f"evolve {args.kind}", solver=solver.to_dict(),
                    grid={"dim": g.dim, "n": g.n, "L": g.L}, seed=seed)
    _dump(out / "config.json", resolved)
    try:
        rec = run()
    except SolverAbort as exc:
        log.error("%s", exc)
        write_run(exc.record, out)
        return EXIT_ABORT
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    write_run(rec, out)
    print(json.dumps({"kind": args.kind, "completed": rec.completed, "snapshots": len(rec.snapshots)}))
    return EXIT_OK


# -- symmetry -------------------------------------------------------------------------

def cmd_symmetry(args) -> int:
    out = Path(args.out)
    try:
        cfg = _load_config(args.config)
        kind = RepKind.parse(cfg.get("rep", "12"))
        phi0, psi0 = _profile(cfg, "phi0"), _profile(cfg, "psi0")
        solver = _solver(cfg)
        g = _grid_from(cfg, 3)
        seed = int(cfg.get("seed", 0))
        A, B = _frames(cfg, kind, seed)
        thresholds = dict(symmetry.DEFAULT_THRESHOLDS, **cfg.get("thresholds", {}))
        cutoff = tuple(cfg.get("cutoff", (0.3, 0.5)))
        u_max = cfg.get("u_max")
        shells, ndirs = int(cfg.get("shells", 12)), int(cfg.get("ndirs", 128))
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    resolved = dict(cfg, command="symmetry", rep=kind.name, frames={"A": A, "B": B}, solver=solver.to_dict(),
                    grid={"dim": 3, "n": g.n, "L": g.L}, thresholds=thresholds, cutoff=list(cutoff),
                    u_max=u_max, shells=shells, ndirs=ndirs, seed=seed)
    _dump(out / "config.json", resolved)
    try:
        res = symmetry.run_symmetry_experiment(kind, phi0, psi0, A, B, g, solver, thresholds, cutoff,
                                               shells, ndirs, u_max)
    except SolverAbort as exc:
        log.error("%s", exc)
        return EXIT_ABORT
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    report = res.to_dict()
    report["agrees_with_prediction"] = res.verdict == res.prediction.predicted
    _dump(out / "symmetry.json", report)
    with open(out / "anisotropy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "global_anisotropy", "killed_fraction"])
        w.writerows(zip(res.times, res.series(), res.killed))
    print(json.dumps({"predicted": res.prediction.predicted, "verdict": res.verdict}))
    return EXIT_INCONCLUSIVE if res.verdict == "inconclusive" else EXIT_OK


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfns", description="Exact-solution checks, spectral solvers and symmetry experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="pointwise residual checks of a catalog solution")
    v.add_argument("--family", required=True)
    for name in ("lambda", "alpha", "beta", "Ra", "amplitude", "width", "nu", "r_min", "r_max"):
        v.add_argument(f"--{name}", type=float, dest=name)
    v.add_argument("--j", type=int)
    v.add_argument("--A", type=float, nargs=3)
    v.add_argument("--B", type=float, nargs=3)
    v.add_argument("--coeffs", help='JSON object or key=value list, e.g. "f2=1,g2=0.5"')
    v.add_argument("--t", type=float, nargs="+", help="times to check (default 0)")
    v.add_argument("--points", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--out", default="report.json")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("evolve", help="run a spectral solver from a JSON config")
    e.add_argument("kind", choices=("hm2d", "ns3d", "heat"))
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evolve)

    s = sub.add_parser("symmetry", help="radial persistence/breaking experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_symmetry)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
