"""Pseudo-spectral time integration on periodic grids.

Both nonlinear solvers use the integrating-factor RK4 scheme (Lawson form):
the viscous term is integrated exactly by the multiplier exp(-nu |xi|^2 t) and
classical RK4 handles the transformed nonlinear term. With nu = 0 this is
plain RK4.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import grid as G
from .frames import recover_potentials
from .verify import energy_report

log = logging.getLogger(__name__)

STEPPERS = ("rk4-if",)


class SolverAbort(RuntimeError):
    """Raised when the CFL limit is violated; carries the partial run record."""

    def __init__(self, msg, record):
        super().__init__(msg)
        self.record = record


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    T: float
    dealias: bool = True
    stepper: str = "rk4-if"
    snapshot_every: int = 1
    cfl_limit: float = 0.5

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.stepper not in STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ValueError("snapshot_every must be a positive integer")

    @property
    def steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9))

    @property
    def step_size(self) -> float:
        """Step actually used so that steps * step_size = T exactly."""
        n = self.steps
        return self.T / n if n else self.dt

    @classmethod
    def from_dict(cls, d: dict) -> SolverConfig:
        keys = {"nu", "dt", "T", "dealias", "stepper", "snapshot_every", "cfl_limit"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"unknown solver config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunRecord:
    kind: str
    config: SolverConfig
    snapshots: list = field(default_factory=list)  # (t, {name: GridField})
    wall_time: float = 0.0
    cfl_history: list = field(default_factory=list)
    t: list = field(default_factory=list)  # per-step diagnostics
    E: list = field(default_factory=list)
    G2: list = field(default_factory=list)
    max_div: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    completed: bool = False

    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.snapshots])

    def series(self, name: str) -> list:
        return [s[1][name] for s in self.snapshots]

    def energy(self, rule: str = "simpson"):
        """Energy balance from the per-step samples."""
        return energy_report(None, self.config.nu, times=np.array(self.t), E=self.E, G2=self.G2, rule=rule)


# -- shared stepping ---------------------------------------------------------------

def _if_rk4(state, rhs, lin, dt):
    """One Lawson RK4 step for d(state)/dt = lin*state + rhs(state); lin is diagonal."""
    E = np.exp(lin * dt)
    E2 = np.exp(lin * dt / 2)
    k1 = rhs(state)
    k2 = rhs(E2 * (state + 0.5 * dt * k1))
    k3 = rhs(E2 * state + 0.5 * dt * k2)
    k4 = rhs(E * state + dt * E2 * k3)
    return E * state + dt / 6 * (E * k1 + 2 * E2 * (k2 + k3) + k4)


def _weights(g: G.Grid) -> np.ndarray:
    k = g.k_int[-1]
    return np.broadcast_to(np.where((k == 0) | (k == g.n // 2), 1.0, 2.0), g.spectral_shape)


def _parseval(g: G.Grid, ch: np.ndarray, mult=1.0) -> float:
    """Integral over the box of |f|^2 (times a spectral multiplier) from rfft coefficients."""
    return float(np.sum(_weights(g) * mult * np.abs(ch) ** 2) * g.cell_volume / g.n**g.dim)


def _run(kind, g, state, cfg, rhs, lin, diagnose, snapshot, umax, meta=None):
    rec = RunRecord(kind, cfg, meta=dict(meta or {}))
    dt = cfg.step_size
    t0 = time.perf_counter()

    def record_diag(t, s):
        E, G2, md = diagnose(s)
        rec.t.append(t)
        rec.E.append(E)
        rec.G2.append(G2)
        rec.max_div.append(md)

    record_diag(0.0, state)
    rec.snapshots.append((0.0, snapshot(state)))
    for n in range(1, cfg.steps + 1):
        vmax = umax(state)
        cfl = dt * vmax / g.h
        rec.cfl_history.append(cfl)
        if cfl > cfg.cfl_limit:
            rec.wall_time = time.perf_counter() - t0
            raise SolverAbort(f"CFL violated at step {n}: dt*max|u|/h = {cfl:.3f} > {cfg.cfl_limit}", rec)
        state = _if_rk4(state, rhs, lin, dt)
        if not np.all(np.isfinite(state)):
            rec.wall_time = time.perf_counter() - t0
            raise SolverAbort(f"non-finite state at step {n}", rec)
        t = n * dt
        record_diag(t, state)
        if n % cfg.snapshot_every == 0 or n == cfg.steps:
            if rec.snapshots[-1][0] < t:
                rec.snapshots.append((t, snapshot(state)))
    rec.wall_time = time.perf_counter() - t0
    rec.completed = True
    log.info("%s run: %d steps in %.2fs", kind, cfg.steps, rec.wall_time)
    return rec


# -- 2D vorticity / Hasegawa-Mima form ---------------------------------------------------

def evolve_hm2d(phi0: G.GridField, cfg: SolverConfig) -> RunRecord:
    """Evolve q = lap(phi) by q_t = nu lap q - {phi, q}; snapshots hold phi and q."""
    g = phi0.grid
    if g.dim != 2 or not phi0.is_scalar:
        raise G.ShapeError("evolve_hm2d needs a scalar field on a 2D grid")
    mean = float(np.mean(phi0.data))
    if abs(mean) > 1e-10 * max(phi0.norm_inf(), 1e-300):
        raise ValueError(f"initial stream function must have zero mean (mean = {mean:.3e})")
    k1, k2 = g.xi_d
    xi2 = g.xi2
    inv = np.where(xi2 == 0, 0.0, -1.0 / np.where(xi2 == 0, 1.0, xi2))
    mask = g.dealias_mask if cfg.dealias else np.ones(g.spectral_shape, bool)
    lin = -cfg.nu * xi2

    def rhs(qh):
        ph = inv * qh
        a, b = ph * mask, qh * mask
        br = (G.ifft(g, 1j * k1 * a) * G.ifft(g, 1j * k2 * b)
              - G.ifft(g, 1j * k2 * a) * G.ifft(g, 1j * k1 * b))
        return -G.fft(g, br) * mask

    def diagnose(qh):
        ph = inv * qh
        return _parseval(g, ph, xi2), _parseval(g, qh), 0.0

    def snapshot(qh):
        return {"phi": G.GridField(g, G.ifft(g, inv * qh)[None]), "q": G.GridField(g, G.ifft(g, qh)[None])}

    def umax(qh):
        ph = inv * qh
        return float(np.max(np.hypot(G.ifft(g, 1j * k1 * ph), G.ifft(g, 1j * k2 * ph))))

    q0 = -xi2 * G.fft(g, phi0.data[0])
    return _run("hm2d", g, q0, cfg, rhs, lin, diagnose, snapshot, umax)


# -- 3D Navier-Stokes ------------------------------------------------------------------

def evolve_ns3d(u0: G.GridField, cfg: SolverConfig, frame=None, store_vorticity: bool = False) -> RunRecord:
    """Rotational-form NS: u_t = nu lap u + P(u x omega), with Leray projection P.

    ``frame`` may be ``(kind, A, B)``; snapshots then also hold the potentials
    recovered in that representation and the killed fraction.
    """
    g = u0.grid
    if g.dim != 3 or u0.components != 3:
        raise G.ShapeError("evolve_ns3d needs a vector field on a 3D grid")
    uh0 = G.fft(g, u0.data)
    proj = G.project_hat(g, uh0)
    delta = float(np.max(np.abs(G.ifft(g, proj - uh0))))
    if delta > 1e-12 * max(u0.norm_inf(), 1e-300):
        log.info("initial velocity projected; change %.3e", delta)
    xi = g.xi_d
    mask = g.dealias_mask if cfg.dealias else np.ones(g.spectral_shape, bool)
    lin = -cfg.nu * g.xi2

    def curl_hat(uh):
        return np.stack([1j * (xi[1] * uh[2] - xi[2] * uh[1]),
                         1j * (xi[2] * uh[0] - xi[0] * uh[2]),
                         1j * (xi[0] * uh[1] - xi[1] * uh[0])])

    def rhs(uh):
        um = uh * mask
        u = G.ifft(g, um)
        w = G.ifft(g, curl_hat(um))
        return G.project_hat(g, G.fft(g, G.cross(u, w)) * mask)

    def diagnose(uh):
        div = sum(1j * xi[j] * uh[j] for j in range(3))
        return _parseval(g, uh), _parseval(g, uh, g.xi2), float(np.max(np.abs(G.ifft(g, div))))

    def snapshot(uh):
        u = G.GridField(g, G.ifft(g, uh))
        out = {"u": u}
        if store_vorticity:
            out["omega"] = G.GridField(g, G.ifft(g, curl_hat(uh)))
        if frame is not None:
            kind, A, B = frame
            phi, psi, killed = recover_potentials(u, None, kind, A, B)
            out.update(phi=phi, psi=psi)
            out["killed"] = killed
        return out

    def umax(uh):
        return float(np.max(np.sqrt(np.sum(G.ifft(g, uh) ** 2, axis=0))))

    return _run("ns3d", g, proj, cfg, rhs, lin, diagnose, snapshot, umax, meta={"projection_delta": delta})


def evolve_heat(f: G.GridField, nu_t: float) -> G.GridField:
    """Exact heat semigroup exp(nu_t * lap) on the grid."""
    if nu_t < 0:
        raise ValueError("nu*t must be non-negative")
    g = f.grid
    return G.GridField(g, G.ifft(g, np.exp(-nu_t * g.xi2) * G.fft(g, f.data)))


def run_heat(f: G.GridField, cfg: SolverConfig) -> RunRecord:
    """Heat evolution sampled like a solver run (used by the command line)."""
    rec = RunRecord("heat", cfg)
    t0 = time.perf_counter()
    dt = cfg.step_size
    for n in range(cfg.steps + 1):
        t = n * dt
        if n % cfg.snapshot_every == 0 or n == cfg.steps:
            rec.snapshots.append((t, {"f": evolve_heat(f, cfg.nu * t)}))
    rec.wall_time = time.perf_counter() - t0
    rec.completed = True
    return rec


# -- output ----------------------------------------------------------------------------

def write_run(rec: RunRecord, out_dir, extra_series: dict | None = None) -> Path:
    """SFNS1 snapshot files, an index JSON and a CSV time series."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = {"kind": rec.kind, "config": rec.config.to_dict(), "wall_time": rec.wall_time,
             "completed": rec.completed, "meta": rec.meta, "snapshots": []}
    for i, (t, fields) in enumerate(rec.snapshots):
        entry = {"t": t, "files": {}}
        for name, fld in fields.items():
            if isinstance(fld, G.GridField):
                fn = f"snap_{i:05d}_{name}.sfns"
                G.write_field(out / fn, fld)
                entry["files"][name] = fn
            else:
                entry[name] = float(fld) if hasattr(fld, "__float__") else str(fld)
        index["snapshots"].append(entry)
    (out / "index.json").write_text(json.dumps(index, indent=2))
    rows = []
    if rec.t:
        es = rec.energy()
        for j, row in enumerate(es.to_rows()):
            row["cfl"] = rec.cfl_history[j - 1] if j else 0.0
            row["max_div"] = rec.max_div[j]
            rows.append(row)
    else:
        rows = [{"t": t} for t, _ in rec.snapshots]
    if extra_series:
        for key, values in extra_series.items():
            for row, v in zip(rows, values):
                row[key] = v
    if rows:
        with open(out / "series.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            w.writeheader()
            w.writerows(rows)
    return out
