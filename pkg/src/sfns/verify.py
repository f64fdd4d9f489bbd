"""Residual checks for divergence, static Euler, Navier-Stokes, heat and vorticity equations.

Two kinds of input are accepted:

* pointwise samplers (an ``ExactSolution`` or a callable ``x -> u``), checked with
  8th-order centered finite differences on a cloud of points;
* grid fields and snapshot series, checked with spectral derivatives.

Every check returns a ``ResidualReport`` whose ``passed`` flag means
``linf <= tol * scale``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import grid as G
from .catalog import ExactSolution
from .radial import eval_derivatives, heat_rate_derivatives, velocity_from_towers


class DivergencePrecheckError(ValueError):
    """The input velocity is not divergence-free, so the Euler/NS check is meaningless."""


class SeriesTooShortError(ValueError):
    pass


@dataclass
class ResidualReport:
    check: str
    l2: float
    linf: float
    scale: float
    tol: float
    passed: bool
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, check, residual, scale, tol, **meta) -> ResidualReport:
        res = np.asarray(residual, dtype=float)
        if res.ndim >= 2 and meta.pop("vector", True):
            mag = np.sqrt(np.sum(res**2, axis=-1))
        else:
            meta.pop("vector", None)
            mag = np.abs(res)
        linf = float(np.max(mag)) if mag.size else 0.0
        l2 = float(np.sqrt(np.mean(mag**2))) if mag.size else 0.0
        scale = float(scale)
        return cls(check, l2, linf, scale, float(tol), bool(linf <= tol * scale), meta)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


# -- finite-difference oracles ---------------------------------------------------

_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_OFFSETS = np.arange(-4, 5)


def fd_partial(f: Callable, x: np.ndarray, axis: int, h: float, second: bool = False) -> np.ndarray:
    """8th-order centered derivative of ``f`` along ``axis`` at points ``x`` (N, d)."""
    w = _D2 / h**2 if second else _D1 / h
    out = None
    for o, c in zip(_OFFSETS, w):
        if c == 0:
            continue
        xs = x.copy()
        xs[:, axis] += o * h
        v = np.asarray(f(xs), dtype=float) * c
        out = v if out is None else out + v
    return out


def fd_jacobian(f, x, h) -> np.ndarray:
    """J[n, i, j] = d f_i / d x_j."""
    return np.stack([fd_partial(f, x, j, h) for j in range(x.shape[1])], axis=-1)


def fd_laplacian(f, x, h) -> np.ndarray:
    return sum(fd_partial(f, x, j, h, second=True) for j in range(x.shape[1]))


def _curl_from_jacobian(J) -> np.ndarray:
    if J.shape[-1] == 2:
        w = J[:, 1, 0] - J[:, 0, 1]
        z = np.zeros_like(w)
        return np.stack([z, z, w], axis=-1)
    return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=-1)


def fd_curl(f, x, h) -> np.ndarray:
    return _curl_from_jacobian(fd_jacobian(f, x, h))


def fd_divergence(f, x, h) -> np.ndarray:
    J = fd_jacobian(f, x, h)
    d = x.shape[1]
    return sum(J[:, j, j] for j in range(d))


def random_ball_points(n: int, r_lo: float, r_hi: float, dim: int = 3, seed=0) -> np.ndarray:
    """Points uniform in volume in the shell r_lo <= |x| <= r_hi."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    u = rng.uniform(r_lo**dim, r_hi**dim, n)
    return v * (u ** (1.0 / dim))[:, None]


def default_points(sol: ExactSolution, n: int = 1000, seed=0, r_hi: float | None = None, h: float | None = None):
    h = h or sol.fd_step
    lo = sol.r_min + 5 * h if sol.r_min > 0 else 0.0
    hi = r_hi if r_hi is not None else sol.sampling_radius
    if np.isfinite(sol.r_max):
        hi = min(hi, sol.r_max - 5 * h)
    return random_ball_points(n, lo, hi, sol.dim, seed)


# -- sampler plumbing ---------------------------------------------------------------

def _sampler(u, t=0.0):
    if isinstance(u, ExactSolution):
        return lambda x: u.velocity(t, x)
    if callable(u):
        return u
    raise TypeError("expected an ExactSolution, a callable sampler or a GridField")


def _h(u, h):
    if h is not None:
        return h
    return u.fd_step if isinstance(u, ExactSolution) else 0.05


def laplacian_velocity(sol: ExactSolution, t, x) -> np.ndarray:
    """Closed-form Laplacian of the velocity: the representation applied to (lap phi, lap psi)."""
    x = np.atleast_2d(np.asarray(x, float))
    pts = x if x.shape[1] == 3 else np.concatenate([x, np.zeros((x.shape[0], 1))], axis=1)
    r = np.linalg.norm(pts, axis=1)
    phi, psi = sol.potentials(t)
    dp = heat_rate_derivatives(eval_derivatives(phi, r, sol.dim), 1.0)
    ds = heat_rate_derivatives(eval_derivatives(psi, r, sol.dim), 1.0)
    return velocity_from_towers(sol.kind, sol.A, sol.B, dp, ds, pts)


# -- divergence ------------------------------------------------------------------

def residual_divergence(u, points=None, tol: float = 1e-10, h: float | None = None, t: float = 0.0) -> ResidualReport:
    if isinstance(u, G.GridField):
        div = G.diff(u, "divergence").data[0]
        scale = u.norm_inf()
        return ResidualReport.build("divergence", div, scale, tol, vector=False, grid=[u.grid.dim, u.grid.n, u.grid.L])
    if points is None:
        if not isinstance(u, ExactSolution):
            raise ValueError("pointwise checks of a bare sampler need explicit points")
        points = default_points(u, h=h)
    points = np.atleast_2d(np.asarray(points, float))
    f = _sampler(u, t)
    h = _h(u, h)
    div = fd_divergence(lambda x: np.asarray(f(x))[:, : x.shape[1]], points, h)
    scale = float(np.max(np.linalg.norm(np.atleast_2d(f(points)), axis=1)))
    return ResidualReport.build("divergence", div, max(scale, 1e-300), tol, vector=False, points=len(points), h=h)


def _precheck(u, points, h, t):
    rep = residual_divergence(u, points, tol=1e-8, h=h, t=t)
    if not rep.passed:
        raise DivergencePrecheckError(
            f"velocity fails the divergence precheck: |div u| = {rep.linf:.3e}, scale {rep.scale:.3e}")


# -- static Euler ------------------------------------------------------------------

def residual_static_euler(u, points=None, tol: float = 1e-9, h: float | None = None, t: float = 0.0) -> ResidualReport:
    """curl((u.grad)u), which vanishes iff (u.grad)u is a gradient."""
    if isinstance(u, G.GridField):
        _precheck(u, None, None, t)
        adv = G.advect(u)
        c = G.diff(adv, "curl").data
        res = c[0] if u.grid.dim == 2 else c
        return ResidualReport.build("static_euler", np.moveaxis(res, 0, -1) if u.grid.dim == 3 else res,
                                    max(adv.norm_inf(), 1e-300), tol, vector=u.grid.dim == 3,
                                    grid=[u.grid.dim, u.grid.n, u.grid.L])
    if points is None:
        points = default_points(u, h=h)
    points = np.atleast_2d(np.asarray(points, float))
    h = _h(u, h)
    _precheck(u, points, h, t)
    f = _sampler(u, t)
    d = points.shape[1]
    if isinstance(u, ExactSolution):
        def lamb(x):  # omega x u; its curl equals curl((u.grad)u)
            return np.cross(u.vorticity(t, x), u.velocity(t, x))[:, :d]
    else:
        def lamb(x):
            uu = np.atleast_2d(f(x))
            return np.einsum("nij,nj->ni", fd_jacobian(lambda y: np.atleast_2d(f(y))[:, :d], x, h), uu[:, :d])
    res = fd_curl(lamb, points, h)
    if d == 2:
        res = res[:, 2]
    uu = np.atleast_2d(f(points))[:, :d]
    adv = np.einsum("nij,nj->ni", fd_jacobian(lambda y: np.atleast_2d(f(y))[:, :d], points, h), uu)
    scale = float(np.max(np.linalg.norm(adv, axis=1)))
    return ResidualReport.build("static_euler", res, max(scale, 1e-300), tol, vector=d == 3,
                                points=len(points), h=h)


# -- Navier-Stokes ------------------------------------------------------------------

def residual_ns(sol, nu: float | None = None, t: float = 0.0, points=None, tol: float = 1e-8,
                h: float | None = None, dt: float | None = None, pressures=None) -> ResidualReport:
    """u_t - nu lap u + (u.grad)u + grad P.

    For an ``ExactSolution`` the check is pointwise with the closed-form
    time derivative and pressure; without a pressure form the curl of the
    residual is checked instead. A sequence of velocity GridFields (with
    snapshot spacing ``dt``) is checked spectrally at every interior snapshot,
    using recovered pressures when none are supplied.
    """
    if isinstance(sol, ExactSolution):
        return _residual_ns_pointwise(sol, sol.nu if nu is None else nu, t, points, tol, h)
    if nu is None or dt is None:
        raise ValueError("series checks need nu and dt")
    return _residual_ns_series(list(sol), nu, dt, tol, pressures)


def _residual_ns_pointwise(sol, nu, t, points, tol, h):
    h = _h(sol, h)
    if points is None:
        points = default_points(sol, h=h)
    points = np.atleast_2d(np.asarray(points, float))
    d = points.shape[1]
    _precheck(sol, points, h, t)

    def f(x):
        return sol.velocity(t, x)[:, :d]

    def body(x):  # everything except the pressure gradient, with (u.grad)u in Lamb form
        u = sol.velocity(t, x)
        w = sol.vorticity(t, x)
        return (np.atleast_2d(sol.dudt(t, x)) - nu * laplacian_velocity(sol, t, x)
                + np.cross(w, u))[:, :d]

    u = f(points)
    adv = np.einsum("nij,nj->ni", fd_jacobian(f, points, h), u)
    lap = laplacian_velocity(sol, t, points)[:, :d]
    scale = float(np.max(np.linalg.norm(nu * lap, axis=1)) + np.max(np.linalg.norm(adv, axis=1)))
    if sol.has_pressure:
        ut = np.atleast_2d(sol.dudt(t, points))[:, :d]
        gradP = np.stack([fd_partial(lambda x: sol.pressure(t, x), points, j, h) for j in range(d)], axis=-1)
        res = ut - nu * lap + adv + gradP
        form = "full"
    else:
        res = fd_curl(body, points, h)
        res = res[:, 2] if d == 2 else res
        form = "curl"
    return ResidualReport.build("ns", res, max(scale, 1e-300), tol, vector=(form == "full" or d == 3),
                                points=len(points), h=h, t=t, nu=nu, form=form)


_DT5 = np.array([1, -8, 0, 8, -1]) / 12.0


def _time_derivative(series, i, dt):
    return sum(c * series[i + k - 2] for k, c in enumerate(_DT5) if c != 0) / dt


def _residual_ns_series(us: Sequence[G.GridField], nu, dt, tol, pressures):
    if len(us) < 5:
        raise SeriesTooShortError("NS series check needs at least 5 snapshots")
    g = us[0].grid
    data = [u.data for u in us]
    worst = []
    scale = 0.0
    for i in range(2, len(us) - 2):
        u = us[i]
        ut = _time_derivative(data, i, dt)
        lap = G.diff(u, "laplacian").data
        adv = G.advect(u).data
        P = pressures[i] if pressures is not None else recover_pressure(u)
        gp = G.diff(P, "gradient").data
        res = ut - nu * lap + adv + gp
        worst.append(res)
        scale = max(scale, float(np.max(np.abs(nu * lap)) + np.max(np.abs(adv))))
    res = np.stack(worst)  # (m, comps, ...)
    res = np.moveaxis(res, 1, -1)
    return ResidualReport.build("ns", res, max(scale, 1e-300), tol, grid=[g.dim, g.n, g.L], dt=dt, nu=nu,
                                snapshots=len(us))


# -- heat and vorticity ----------------------------------------------------------------

def residual_heat(phi_series: Sequence[G.GridField], dt: float, nu: float, tol: float = 1e-7) -> ResidualReport:
    """phi_t - nu lap phi with 5-point 4th-order time differences."""
    if len(phi_series) < 5:
        raise SeriesTooShortError("heat residual needs at least 5 snapshots")
    data = [f.data[0] for f in phi_series]
    res, scale = [], 0.0
    for i in range(2, len(data) - 2):
        ft = _time_derivative(data, i, dt)
        lap = nu * G.diff(phi_series[i], "laplacian").data[0]
        res.append(ft - lap)
        scale = max(scale, float(np.max(np.abs(ft))), float(np.max(np.abs(lap))))
    g = phi_series[0].grid
    return ResidualReport.build("heat", np.stack(res), max(scale, 1e-300), tol, vector=False,
                                grid=[g.dim, g.n, g.L], dt=dt, nu=nu)


def residual_vorticity(u_series: Sequence[G.GridField], dt: float, nu: float, omega_series=None,
                       tol: float = 1e-5) -> ResidualReport:
    """omega_t - nu lap omega + (u.grad)omega - (omega.grad)u (3D)."""
    if len(u_series) < 5:
        raise SeriesTooShortError("vorticity residual needs at least 5 snapshots")
    ws = list(omega_series) if omega_series is not None else [G.diff(u, "curl") for u in u_series]
    data = [w.data for w in ws]
    res, scale = [], 0.0
    for i in range(2, len(ws) - 2):
        u, w = u_series[i], ws[i]
        wt = _time_derivative(data, i, dt)
        lap = nu * G.diff(w, "laplacian").data
        adv = G.directional_derivative(u, w).data
        stretch = G.directional_derivative(w, u).data
        res.append(np.moveaxis(wt - lap + adv - stretch, 0, -1))
        scale = max(scale, float(np.max(np.abs(lap)) + np.max(np.abs(adv)) + np.max(np.abs(stretch))))
    g = u_series[0].grid
    return ResidualReport.build("vorticity", np.stack(res), max(scale, 1e-300), tol,
                                grid=[g.dim, g.n, g.L], dt=dt, nu=nu)


# -- pressure and energy -----------------------------------------------------------------

def recover_pressure(u: G.GridField) -> G.GridField:
    """Zero-mean P with lap P = -div((u.grad)u)."""
    div = G.diff(u, "divergence")
    if div.norm_inf() > 1e-8 * max(u.norm_inf(), 1e-300) * (2 * np.pi * u.grid.n / u.grid.L):
        raise DivergencePrecheckError(f"velocity is not divergence-free (|div u| = {div.norm_inf():.3e})")
    rhs = -G.diff(G.advect(u), "divergence")
    rhs = G.GridField(u.grid, rhs.data - rhs.data.mean())
    return G.solve_poisson(rhs)


def energy(u: G.GridField) -> float:
    """E = integral of |u|^2 over the box."""
    return float(np.sum(u.data**2) * u.grid.cell_volume)


def gradient_energy(u: G.GridField) -> float:
    """Integral of |grad u|^2 over the box, from Parseval."""
    g = u.grid
    uh = G.fft(g, u.data)
    k = g.k_int[-1]
    w = np.where((k == 0) | (k == g.n // 2), 1.0, 2.0)
    total = np.sum(w * g.xi2 * np.abs(uh) ** 2)
    return float(total * g.cell_volume / g.n**g.dim)


@dataclass
class EnergySeries:
    t: np.ndarray
    E: np.ndarray
    D: np.ndarray

    @property
    def balance_error(self) -> np.ndarray:
        """|E(t) + D(t) - E(0)| / E(0) per sample (zero when E(0) = 0)."""
        if self.E[0] == 0:
            return np.abs(self.E + self.D - self.E[0])
        return np.abs(self.E + self.D - self.E[0]) / self.E[0]

    def to_rows(self):
        return [{"t": float(a), "E": float(b), "D": float(c), "balance": float(d)}
                for a, b, c, d in zip(self.t, self.E, self.D, self.balance_error)]


def energy_report(u_series, nu: float, dt: float | None = None, times=None, rule: str = "trapezoid",
                  E=None, G2=None) -> EnergySeries:
    """E(t) = ||u||^2 and D(t) = 2 nu * integral of ||grad u||^2 over [0, t].

    Either a snapshot series or precomputed samples ``E`` and ``G2`` (the
    squared gradient norm) may be given. ``rule`` picks the time quadrature:
    ``trapezoid`` or ``simpson`` (composite Simpson on the uniform samples,
    falling back to trapezoid for the final interval of an even count).
    """
    if E is None:
        E = np.array([energy(u) for u in u_series])
        G2 = np.array([gradient_energy(u) for u in u_series])
    E = np.asarray(E, float)
    G2 = np.asarray(G2, float)
    if times is None:
        if dt is None:
            raise ValueError("energy_report needs dt or times")
        times = dt * np.arange(len(E))
    times = np.asarray(times, float)
    if rule == "trapezoid":
        D = integrate.cumulative_trapezoid(G2, times, initial=0.0)
    elif rule == "simpson":
        D = integrate.cumulative_simpson(G2, x=times, initial=0.0) if len(E) >= 3 else \
            integrate.cumulative_trapezoid(G2, times, initial=0.0)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return EnergySeries(times, E, 2 * nu * D)


__all__ = [
    "ResidualReport", "residual_divergence", "residual_static_euler", "residual_ns", "residual_heat",
    "residual_vorticity", "recover_pressure", "energy_report", "EnergySeries", "fd_partial", "fd_curl",
    "fd_jacobian", "fd_laplacian", "fd_divergence", "random_ball_points", "DivergencePrecheckError",
    "SeriesTooShortError", "laplacian_velocity", "energy", "gradient_energy",
]
