"""Radial-symmetry diagnostics and persistence/breaking experiments."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import grid as G
from .evolve import SolverConfig, evolve_ns3d
from .frames import RepKind, SymplecticRep, frame_mode, synthesize
from .radial import RadialProfile, chebyshev_radii, ode_residual_terms, quartic_coefficients

DEFAULT_THRESHOLDS = {"break_factor": 10.0, "break_abs": 1e-3, "persist_factor": 3.0}
SHELL_FRACTION = 0.35


# -- sampling on spheres -------------------------------------------------------------

def fibonacci_directions(n: int) -> np.ndarray:
    """n nearly uniform unit vectors on the sphere (golden-angle spiral)."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    rho = np.sqrt(1 - z * z)
    theta = np.pi * (3 - math.sqrt(5)) * k
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def circle_directions(n: int) -> np.ndarray:
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def interpolate(f: G.GridField, points: np.ndarray, method: str = "spectral", chunk: int = 512) -> np.ndarray:
    """Values of a scalar grid field at arbitrary points.

    ``spectral`` evaluates the trigonometric interpolant exactly (Nyquist
    modes dropped); ``cubic`` uses periodic cubic-spline interpolation.
    """
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, float))
    data = f.data[0]
    if method == "cubic":
        idx = ((pts + g.L / 2) / g.h).T
        return ndimage.map_coordinates(data, idx, order=3, mode="grid-wrap")
    if method != "spectral":
        raise ValueError(f"unknown interpolation method {method!r}")
    F = np.fft.fftn(data) / data.size
    k = np.fft.fftfreq(g.n, d=1.0 / g.n)
    keep = np.abs(k) < g.n / 2
    F = F[np.ix_(*([keep] * g.dim))]
    xi = 2 * np.pi / g.L * k[keep]
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk] + g.L / 2
        E = [np.exp(1j * np.outer(p[:, j], xi)) for j in range(g.dim)]
        if g.dim == 2:
            T = F @ E[1].T  # (k1, P)
            out[s:s + chunk] = np.einsum("ap,pa->p", T, E[0]).real
        else:
            m = F.shape[0]
            T = (F.reshape(m * m, m) @ E[2].T).reshape(m, m, -1)
            T2 = np.einsum("abp,pb->ap", T, E[1])
            out[s:s + chunk] = np.einsum("ap,pa->p", T2, E[0]).real
    return out


# -- anisotropy ---------------------------------------------------------------------

@dataclass
class AnisotropyReport:
    shells: list
    per_shell: list
    global_: float
    baseline: float | None = None
    floor: float = 0.0
    ndirs: int = 0
    method: str = "spectral"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["global"] = d.pop("global_")
        return d


def anisotropy_profile(f, shells: int = 16, ndirs: int = 128, method: str = "spectral",
                       baseline: float | None = None) -> AnisotropyReport:
    """Per-shell spread of a scalar field over directions, relative to its ball rms.

    ``f`` may be one scalar GridField or a list of them on one grid, in which
    case the spreads and rms values are pooled (root-sum-square).
    """
    fields = [f] if isinstance(f, G.GridField) else list(f)
    g = fields[0].grid
    if ndirs < 128:
        raise ValueError("ndirs must be at least 128")
    dirs = fibonacci_directions(ndirs) if g.dim == 3 else circle_directions(ndirs)
    R = SHELL_FRACTION * g.L
    radii = np.arange(1, shells + 1) * R / shells
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, g.dim)
    ball = g.radius <= R
    var = np.zeros(shells)
    ms = 0.0
    for fld in fields:
        if fld.grid != g or not fld.is_scalar:
            raise G.ShapeError("anisotropy needs scalar fields on one grid")
        vals = interpolate(fld, pts, method).reshape(shells, ndirs)
        var += np.var(vals, axis=1)
        ms += float(np.mean(fld.data[0][ball] ** 2)) if np.any(ball) else 0.0
    a = np.sqrt(var) / (math.sqrt(ms) + 1e-14)
    return AnisotropyReport(radii.tolist(), a.tolist(), float(a.max()), baseline, ndirs=ndirs, method=method)


def angular_energy_fraction(f: G.GridField, rings: int = 64, nangles: int = 256) -> float:
    """Energy share of angular modes m != 0 of a 2D scalar on r <= 0.35 L.

    Rings are weighted by r (area element); interpolation is spectral.
    """
    g = f.grid
    if g.dim != 2:
        raise G.ShapeError("angular energy fraction is defined on 2D grids")
    R = SHELL_FRACTION * g.L
    r = (np.arange(rings) + 0.5) * R / rings
    dirs = circle_directions(nangles)
    pts = (r[:, None, None] * dirs[None]).reshape(-1, 2)
    vals = interpolate(f, pts).reshape(rings, nangles)
    c = np.fft.rfft(vals, axis=1)
    e = np.abs(c) ** 2 * r[:, None]
    total = float(np.sum(e))
    return float(np.sum(e[:, 1:]) / total) if total > 0 else 0.0


# -- prediction from the reduced radial systems ----------------------------------------

@dataclass
class BreakingPrediction:
    system: str
    residual_norms: list
    scale: float
    predicted: str
    exceptional_family_match: str | None = None
    predicate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _system_for(kind: RepKind, mode: str) -> str:
    if kind is RepKind.Rep11:
        return "Constraints11"
    if kind is RepKind.Rep22:
        return "Constraints22"
    return "Pair12" if mode == "aligned" else "Constraints12Perp"


def predict_breaking(kind, phi0: RadialProfile, psi0: RadialProfile, mode: str | None = None,
                     r_check: float | None = None, rel_tol: float = 1e-8) -> BreakingPrediction:
    """Persist/break prediction from the radial constraint residuals.

    Rep12 needs ``mode`` ('aligned' or 'perpendicular'). Persistence requires
    every residual to vanish (below rel_tol times the summed term magnitudes)
    on 64 Chebyshev radii, plus the coefficient condition of the
    perpendicular (1,2) and the (2,2) polynomial families.
    """
    kind = RepKind.parse(kind)
    if kind is RepKind.Rep12 and mode not in ("aligned", "perpendicular"):
        raise ValueError("Rep12 prediction needs mode 'aligned' or 'perpendicular'")
    system = _system_for(kind, mode)
    scale_len = max(phi0.scale, psi0.scale)
    r_hi = min(r_check or 10 * scale_len, phi0.r_max, psi0.r_max)
    r_lo = max(phi0.r_min, psi0.r_min)
    radii = chebyshev_radii(r_lo, r_hi, 64)
    terms = ode_residual_terms(system, phi0, psi0, radii)
    norms = [float(np.max(np.abs(sum(t)))) for t in terms]
    scale = max(float(np.max(sum(np.abs(x) for x in t))) for t in terms)
    vanish = scale == 0 or max(norms) < rel_tol * scale
    predicate = {}
    ok = vanish
    match = None
    if vanish:
        if system in ("Constraints22", "Constraints12Perp"):
            cf, cg = quartic_coefficients(phi0, radii), quartic_coefficients(psi0, radii)
            f2, f4, g2, g4 = cf["c2"], cf["c4"], cg["c2"], cg["c4"]
            size = max(abs(f2), abs(f4)) * max(abs(g2), abs(g4))
            if system == "Constraints22":
                lhs, rhs = f2 * g4, f4 * g2
                ok = abs(lhs - rhs) <= 1e-8 * max(size, 1e-300)
                predicate = {"condition": "f2*g4 = f4*g2", "f2g4": lhs, "f4g2": rhs, "holds": bool(ok)}
                match = "Poly22" if ok else None
            else:
                ok = abs(f2 * g4) <= 1e-8 * max(size, 1e-300)
                predicate = {"condition": "f2*g4 = 0", "f2g4": f2 * g4, "holds": bool(ok)}
                match = "Poly12Perp" if ok else None
        elif system == "Constraints11":
            match = "Poly11"
        else:
            match = "RadialPair12"
    return BreakingPrediction(system, norms, scale, "persist" if ok else "break", match, predicate)


# -- orthogonal transformations -------------------------------------------------------------

def rho_cyclic() -> np.ndarray:
    """x -> (x2, x3, x1)."""
    return np.array([[0.0, 1, 0], [0, 0, 1], [1, 0, 0]])


def O_r() -> np.ndarray:
    """x -> (x3, x1, x2), the inverse of ``rho_cyclic``."""
    return rho_cyclic().T


def _unit(v):
    return v / np.linalg.norm(v)


def rho_b(B) -> np.ndarray:
    """Quarter turn about the axis B (fixes B . x)."""
    b = _unit(np.asarray(B, float))
    helper = np.eye(3)[np.argmin(np.abs(b))]
    c1 = _unit(np.cross(helper, b))
    c2 = np.cross(b, c1)
    M = np.stack([c1, c2, b], axis=1)
    R = np.array([[0.0, 1, 0], [-1, 0, 0], [0, 0, 1]])
    return M @ R.T @ M.T


def rho_ab(A, B) -> np.ndarray:
    """Reflection across span(A, B)."""
    n = _unit(np.cross(np.asarray(A, float), np.asarray(B, float)))
    return np.eye(3) - 2 * np.outer(n, n)


def _check_orthogonal(Q):
    Q = np.asarray(Q, float)
    if Q.shape[0] != Q.shape[1] or np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) > 1e-12:
        raise ValueError("Q must be orthogonal to 1e-12")
    return Q


def _signed_permutation(Q):
    if np.all(np.isin(Q, (-1.0, 0.0, 1.0))) and np.all(np.sum(np.abs(Q), axis=1) == 1):
        return True
    return False


def orthogonal_conjugate(f, Q, vector: bool = False):
    """f o Q^{-1} for scalars, Q f(Q^{-1} x) for vectors (``vector=True``).

    ``f`` may be a sampler (callable on (N, d) points) or a GridField. Signed
    permutations act on grids exactly; other matrices interpolate with
    periodic cubic splines.
    """
    Q = _check_orthogonal(Q)
    if callable(f) and not isinstance(f, G.GridField):
        def conj(x):
            x = np.atleast_2d(np.asarray(x, float))
            v = np.asarray(f(x @ Q))  # rows: Q^T x
            return v @ Q.T if vector else v
        return conj
    if not isinstance(f, G.GridField):
        raise TypeError("expected a sampler or a GridField")
    g = f.grid
    if Q.shape != (g.dim, g.dim):
        raise ValueError("Q must match the grid dimension")
    if _signed_permutation(Q):
        # out(x) = f(Q^T x): output axis i reads source axis j where Q[i, j] != 0
        out = []
        for c in range(f.components):
            src = f.data[c]
            perm = [int(np.flatnonzero(Q[:, j])[0]) for j in range(g.dim)]
            arr = np.transpose(src, axes=np.argsort(perm))
            for i in range(g.dim):
                j = int(np.flatnonzero(Q[i])[0])
                if Q[i, j] < 0:
                    arr = np.roll(np.flip(arr, axis=i), 1, axis=i)
            out.append(arr)
        data = np.stack(out)
    else:
        pts = g.points @ Q  # Q^T x for each row
        idx = ((pts + g.L / 2) / g.h).T
        data = np.stack([
            ndimage.map_coordinates(f.data[c], idx, order=3, mode="grid-wrap").reshape(g.shape)
            for c in range(f.components)])
    if vector:
        data = np.einsum("ij,j...->i...", Q, data)
    return G.GridField(g, data)


# -- experiments ------------------------------------------------------------------------

def smooth_cutoff(r, r0: float, r1: float) -> np.ndarray:
    """1 for r <= r0, 0 for r >= r1, smooth (C-infinity) in between."""
    s = np.clip((np.asarray(r, float) - r0) / (r1 - r0), 0.0, 1.0)

    def bump(x):
        out = np.zeros_like(x)
        m = x > 0
        out[m] = np.exp(-1.0 / x[m])
        return out

    return bump(1 - s) / (bump(1 - s) + bump(s))


def generic_frame(kind, seed: int = 3):
    """An irrationally oriented frame, so no grid wavevector lies on a degenerate plane."""
    kind = RepKind.parse(kind)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if kind is RepKind.Rep12:
        return q[:, 2], q[:, 2]
    return q[:, 0], q[:, 1]


@dataclass
class ExperimentResult:
    prediction: BreakingPrediction
    times: list
    reports: list
    verdict: str
    thresholds: dict
    killed: list = field(default_factory=list)
    energy_balance: float = 0.0

    def series(self) -> list:
        return [r.global_ for r in self.reports]

    def to_dict(self) -> dict:
        return {
            "prediction": self.prediction.to_dict(), "verdict": self.verdict, "thresholds": self.thresholds,
            "times": self.times, "global_anisotropy": self.series(), "killed_fraction": self.killed,
            "baseline": self.reports[0].global_ if self.reports else None,
            "energy_balance": self.energy_balance,
            "reports": [r.to_dict() for r in self.reports],
        }


def verdict_from_series(series, thresholds=None) -> str:
    th = dict(DEFAULT_THRESHOLDS, **(thresholds or {}))
    base = series[0]
    peak = max(series)
    if peak > th["break_factor"] * base and peak > th["break_abs"]:
        return "break"
    if peak <= th["persist_factor"] * base:
        return "persist"
    return "inconclusive"


def run_symmetry_experiment(kind, phi0: RadialProfile, psi0: RadialProfile, A, B, grid: G.Grid,
                            cfg: SolverConfig, thresholds: dict | None = None, cutoff=(0.3, 0.5),
                            shells: int = 12, ndirs: int = 128, u_max: float | None = None) -> ExperimentResult:
    """Evolve radial potentials under NS and watch the recovered potentials' anisotropy.

    Potentials are sampled on the grid and multiplied by a smooth radial
    cutoff (1 inside cutoff[0]*L, 0 beyond cutoff[1]*L) so the initial
    velocity is smooth and periodic. With ``u_max`` both potentials are
    rescaled so that max|u0| equals it, which puts different profiles on a
    common velocity scale. The cutoff makes the flow non-exact near
    cutoff[0]*L; that defect feeds anisotropy at a rate proportional to the
    velocity scale, so persistence runs should use a weak one.
    """
    kind = RepKind.parse(kind)
    A, B = np.asarray(A, float), np.asarray(B, float)
    mode = frame_mode(A, B)
    pred = predict_breaking(kind, phi0, psi0, mode if kind is RepKind.Rep12 else None)
    chi = smooth_cutoff(grid.radius, cutoff[0] * grid.L, cutoff[1] * grid.L)
    phi = G.GridField(grid, (phi0.value(grid.radius) * chi)[None])
    psi = G.GridField(grid, (psi0.value(grid.radius) * chi)[None])
    u0 = synthesize(SymplecticRep(kind, A, B, phi, psi))
    if u_max is not None:
        peak = float(np.max(np.abs(u0.data)))
        if peak > 0:
            u0 = u0 * (u_max / peak)
    th = dict(DEFAULT_THRESHOLDS, **(thresholds or {}))
    rec = evolve_ns3d(u0, cfg, frame=(kind, A, B))
    reports, killed = [], []
    for t, snap in rec.snapshots:
        rep = anisotropy_profile([snap["phi"], snap["psi"]], shells=shells, ndirs=ndirs)
        reports.append(rep)
        killed.append(float(snap["killed"]))
    base = reports[0].global_
    for rep in reports:
        rep.baseline = base
    series = [r.global_ for r in reports]
    verdict = verdict_from_series(series, th)
    es = rec.energy()
    return ExperimentResult(pred, [t for t, _ in rec.snapshots], reports, verdict, th, killed,
                            float(np.max(es.balance_error)))
