"""Closed-form static Euler and Navier-Stokes solutions built from radial potentials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .frames import RepKind, as_frame_vector, validate_frames
from .radial import (
    CompactBump, GaussianBump, Polynomial, RadialProfile, SincPair, TrigPeriodic,
    chebyshev_radii, eval_derivatives, heat_evolve_radial, heat_rate_derivatives, ode_residuals,
    velocity_closed_form, velocity_from_towers, vorticity_closed_form,
)

FAMILY_NAMES = (
    "Beltrami3D", "Poly12Perp", "Poly11", "Poly22", "StaticEuler2DBump",
    "StaticEuler2DPeriodic", "Heat2DRadial", "RadialPair12",
)

E1, E2, E3 = np.eye(3)


class PredicateError(ValueError):
    """Coefficients violate the family's defining condition."""


class OutOfRegionError(ValueError):
    def __init__(self, msg, points):
        super().__init__(msg)
        self.points = points


@dataclass(frozen=True, eq=False)
class ExactSolution:
    family: str
    kind: RepKind
    A: np.ndarray
    B: np.ndarray
    phi0: RadialProfile
    psi0: RadialProfile
    nu: float = 0.0
    decay_rate: float = 0.0
    dim: int = 3
    r_min: float = 0.0
    r_max: float = math.inf
    length_scale: float = 1.0
    pressure_form: str = "none"
    time_dependence: str = "static"
    params: dict = field(default_factory=dict)
    fd_h: float | None = None
    sample_radius: float | None = None
    potentials_fn: Callable | None = field(default=None, repr=False)
    dudt_fn: Callable | None = field(default=None, repr=False)
    pressure_fn: Callable | None = field(default=None, repr=False)

    @property
    def fd_step(self) -> float:
        """Finite-difference step suited to the solution's sharpest feature."""
        return self.fd_h if self.fd_h is not None else 0.05 * self.length_scale

    @property
    def sampling_radius(self) -> float:
        if self.sample_radius is not None:
            return self.sample_radius
        if math.isfinite(self.r_max):
            return self.r_max
        return 10 * self.length_scale

    @property
    def is_static(self) -> bool:
        return self.time_dependence == "static"

    @property
    def has_pressure(self) -> bool:
        return self.pressure_fn is not None

    def potentials(self, t: float = 0.0):
        if self.potentials_fn is None:
            return self.phi0, self.psi0
        return self.potentials_fn(t)

    def velocity(self, t, x):
        phi, psi = self.potentials(t)
        return velocity_closed_form(self.kind, self.A, self.B, phi, psi, x, self.dim)

    def vorticity(self, t, x):
        phi, psi = self.potentials(t)
        return vorticity_closed_form(self.kind, self.A, self.B, phi, psi, x, self.dim)

    def dudt(self, t, x):
        x = np.asarray(x, float)
        if self.dudt_fn is None:
            return np.zeros(x.shape[:-1] + (3,))
        return self.dudt_fn(t, x)

    def pressure(self, t, x):
        if self.pressure_fn is None:
            return None
        return self.pressure_fn(t, np.asarray(x, float))

    def describe(self) -> dict:
        return {
            "family": self.family, "kind": self.kind.value, "A": self.A.tolist(), "B": self.B.tolist(),
            "phi0": self.phi0.descriptor(), "psi0": self.psi0.descriptor(), "nu": self.nu,
            "decay_rate": self.decay_rate, "dim": self.dim, "r_min": self.r_min,
            "r_max": None if self.r_max == math.inf else self.r_max,
            "pressure_form": self.pressure_form, "time_dependence": self.time_dependence,
            "params": self.params,
        }


def _zero():
    return Polynomial((0.0,))


def _radius(x, dim):
    x = np.atleast_2d(np.asarray(x, float))
    return np.linalg.norm(x[:, :dim], axis=1)


# -- Beltrami ------------------------------------------------------------------

def make_beltrami(lam: float, alpha: float = 1.0, beta: float = 0.0, A=E3, nu: float = 0.0) -> ExactSolution:
    """Aligned Rep12 with Phi = lam*Psi and Psi = (alpha sin(lam r) + beta cos(lam r))/r.

    The velocity satisfies curl u = -lam u, so the self-advection is the
    gradient of |u|^2/2, and viscosity only damps the amplitude by
    exp(-nu lam^2 t).
    """
    if lam == 0:
        raise ValueError("Beltrami family needs lam != 0")
    if alpha == 0 and beta == 0:
        raise ValueError("Beltrami family needs (alpha, beta) != (0, 0)")
    if nu < 0:
        raise ValueError("nu must be non-negative")
    A = as_frame_vector(A)
    psi = SincPair(lam, alpha, beta)
    phi = psi.scaled(lam)
    rate = nu * lam**2

    def potentials(t):
        f = math.exp(-rate * t)
        return phi.scaled(f), psi.scaled(f)

    sol = None

    def dudt(t, x):
        return -rate * sol.velocity(t, x)

    def pressure(t, x):
        u = sol.velocity(t, x)
        return -0.5 * np.sum(np.atleast_2d(u) ** 2, axis=-1).reshape(np.shape(u)[:-1])

    sol = ExactSolution(
        "Beltrami3D", RepKind.Rep12, A, A, phi, psi, nu=nu, decay_rate=rate,
        r_min=1e-3 if beta != 0 else 0.0, length_scale=1.0 / abs(lam),
        pressure_form="-|u|^2/2", time_dependence="exp(-nu lam^2 t)" if rate else "static",
        params={"lam": lam, "alpha": alpha, "beta": beta},
        potentials_fn=potentials, dudt_fn=dudt, pressure_fn=pressure,
    )
    return sol


# -- polynomial exceptional families --------------------------------------------

def _get(coeffs, key):
    return float(coeffs.get(key, 0.0))


def make_poly_family(kind: str, coeffs: dict, A=E1, B=E2, nu: float = 0.0) -> ExactSolution:
    """Quadratic/quartic potential pairs that keep radial symmetry.

    * ``Poly12Perp``: phi = f2 r^2, psi = g4 r^4 + g2 r^2, A . B = 0, needs f2*g4 = 0.
      With nu > 0 and g4 != 0 the r^2 coefficient of psi drifts as g2 + 20 nu g4 t.
    * ``Poly11``: phi = f2 r^2, psi = g2 r^2 (rigid rotation).
    * ``Poly22``: phi = f4 r^4 + f2 r^2, psi = g4 r^4 + g2 r^2, needs f2*g4 = f4*g2;
      the r^2 coefficients drift by 20 nu f4 t and 20 nu g4 t.
    """
    A, B = as_frame_vector(A), as_frame_vector(B)
    f2, f4, g2, g4 = (_get(coeffs, k) for k in ("f2", "f4", "g2", "g4"))
    unknown = set(coeffs) - {"f0", "f2", "f4", "g0", "g2", "g4"}
    if unknown:
        raise ValueError(f"unknown coefficients {sorted(unknown)}")
    f0, g0 = _get(coeffs, "f0"), _get(coeffs, "g0")
    params = {"f0": f0, "f2": f2, "f4": f4, "g0": g0, "g2": g2, "g4": g4}
    pressure = None
    pressure_form = "none (curl form)"

    if kind == "Poly12Perp":
        rk = RepKind.Rep12
        if validate_frames(rk, A, B) != "perpendicular":
            raise ValueError("Poly12Perp needs A . B = 0 with A != B")
        if f4 != 0:
            raise PredicateError("Poly12Perp needs phi quadratic (f4 = 0)")
        if f2 * g4 != 0:
            raise PredicateError(f"Poly12Perp violates f2*g4 = 0 (f2={f2}, g4={g4})")
        phi = Polynomial.even(f0, f2)
        psi = Polynomial.even(g0, g2, g4, rates=(0.0, 20 * nu * g4, 0.0))
        drift = nu * g4 != 0
    elif kind == "Poly11":
        rk = RepKind.Rep11
        validate_frames(rk, A, B)
        if f4 != 0 or g4 != 0:
            raise PredicateError("Poly11 needs quadratic potentials (f4 = g4 = 0)")
        phi = Polynomial.even(f0, f2)
        psi = Polynomial.even(g0, g2)
        drift = False
        omega = 2 * (f2 * A + g2 * B)

        def rigid_pressure(t, x):
            x = np.asarray(x, float)
            return 0.5 * np.sum(np.cross(omega, x) ** 2, axis=-1)

        pressure = rigid_pressure
        pressure_form = "|Omega x x|^2/2, Omega = 2(f2 A + g2 B)"
    elif kind == "Poly22":
        rk = RepKind.Rep22
        validate_frames(rk, A, B)
        lhs, rhs = f2 * g4, f4 * g2
        if abs(lhs - rhs) > 1e-12 * max(abs(lhs), abs(rhs), 1e-300):
            raise PredicateError(f"Poly22 violates f2*g4 = f4*g2 ({lhs} != {rhs})")
        phi = Polynomial.even(f0, f2, f4, rates=(0.0, 20 * nu * f4, 0.0))
        psi = Polynomial.even(g0, g2, g4, rates=(0.0, 20 * nu * g4, 0.0))
        drift = nu * (f4 != 0 or g4 != 0) != 0
    else:
        raise ValueError(f"unknown polynomial family {kind!r}")

    def potentials(t):
        return phi.at(t), psi.at(t)

    def dudt(t, x):
        return velocity_closed_form(rk, A, B, phi.rate_profile(), psi.rate_profile(), x)

    return ExactSolution(
        kind, rk, A, B, phi, psi, nu=nu, length_scale=1.0, pressure_form=pressure_form,
        time_dependence="linear drift of r^2 coefficients" if drift else "static",
        params=params, potentials_fn=potentials, dudt_fn=dudt if drift else None,
        pressure_fn=pressure,
    )


# -- planar families -------------------------------------------------------------

def _planar_pressure(phi_of_t, r_lo):
    """P(r) = integral from r_lo to r of s q1(s)^2 ds (centripetal balance of a planar vortex)."""
    nodes, weights = special.roots_legendre(64)

    def pressure(t, x):
        phi = phi_of_t(t)
        r = _radius(x, 2)
        out = np.zeros(r.shape)
        for i, ri in enumerate(r):
            if ri <= r_lo:
                continue
            s = r_lo + (ri - r_lo) * 0.5 * (nodes + 1)
            q1 = eval_derivatives(phi, s, 2).q1
            out[i] = 0.5 * (ri - r_lo) * np.sum(weights * s * q1**2)
        return out if np.ndim(x) > 1 else float(out[0])

    return pressure


def make_static_euler_2d(kind: str = "Bump", **params) -> ExactSolution:
    """Planar vortex u = (-d2 phi, d1 phi) with radial phi.

    ``Bump``: phi = amplitude * T(r/Ra) with the compact template, so u = 0 for r >= Ra.
    ``Periodic``: phi = alpha sin(j r) + beta cos(j r) on the annulus [r_min, r_max].
    """
    if kind == "Bump":
        Ra = float(params.get("Ra", 1.0))
        amp = float(params.get("amplitude", 1.0))
        phi = CompactBump(amp, Ra)
        r_lo, r_hi, scale = 0.0, math.inf, Ra
        fam = "StaticEuler2DBump"
        p = {"Ra": Ra, "amplitude": amp}
    elif kind == "Periodic":
        j = params.get("j", 1)
        if int(j) != j or j <= 0:
            raise ValueError(f"Periodic family needs an integer j >= 1, got {j}")
        r_lo = float(params.get("r_min", 0.5))
        r_hi = float(params.get("r_max", 10.0))
        phi = TrigPeriodic(int(j), float(params.get("alpha", 1.0)), float(params.get("beta", 0.0)), r_lo)
        scale = 1.0 / j
        fam = "StaticEuler2DPeriodic"
        p = {"j": int(j), "alpha": phi.alpha, "beta": phi.beta, "r_min": r_lo, "r_max": r_hi}
    else:
        raise ValueError(f"unknown planar static family {kind!r}")
    return ExactSolution(
        fam, RepKind.Rep11, E3, E3, phi, _zero(), dim=2, r_min=r_lo, r_max=r_hi,
        length_scale=scale, pressure_form="integral of s q1^2 ds", params=p,
        fd_h=1e-3 * Ra if kind == "Bump" else 0.05 * min(scale, r_lo),
        sample_radius=1.2 * Ra if kind == "Bump" else None,
        pressure_fn=_planar_pressure(lambda t: phi, r_lo),
    )


def make_heat_2d(phi0: RadialProfile, nu: float) -> ExactSolution:
    """Planar Navier-Stokes flow whose stream function follows the heat equation.

    The additive gauge function of time is fixed to zero.
    """
    if isinstance(phi0, (SincPair, TrigPeriodic)) or (isinstance(phi0, Polynomial) and not phi0.is_zero()):
        raise ValueError("heat2d needs a decaying initial profile")
    if nu < 0:
        raise ValueError("nu must be non-negative")

    def phi_at(t):
        return heat_evolve_radial(phi0, nu * t, dim=2)

    def potentials(t):
        return phi_at(t), _zero()

    def dudt(t, x):
        x = np.atleast_2d(np.asarray(x, float))
        pts = np.concatenate([x[:, :2], np.zeros((x.shape[0], 1))], axis=1)
        d = eval_derivatives(phi_at(t), np.linalg.norm(pts, axis=1), 2)
        rate = heat_rate_derivatives(d, nu)
        zero = {k: np.zeros_like(v) for k, v in rate.items()}
        out = velocity_from_towers(RepKind.Rep11, E3, E3, rate, zero, pts)
        return out if np.ndim(x) > 1 else out[0]

    return ExactSolution(
        "Heat2DRadial", RepKind.Rep11, E3, E3, phi0, _zero(), nu=nu, dim=2,
        length_scale=phi0.scale, pressure_form="integral of s q1^2 ds",
        time_dependence="heat semigroup", params={"phi0": phi0.descriptor(), "nu": nu},
        potentials_fn=potentials, dudt_fn=dudt, pressure_fn=_planar_pressure(phi_at, 0.0),
    )


def make_radial_pair12(phi: RadialProfile, psi: RadialProfile, A=E3, r_check: float | None = None,
                       tol: float = 1e-8) -> ExactSolution:
    """Static Euler flow from any profile pair solving the aligned radial ODE pair."""
    A = as_frame_vector(A)
    scale = max(phi.scale, psi.scale)
    r_hi = r_check or 10 * scale
    r_lo = max(phi.r_min, psi.r_min, 1e-3 * scale)
    res, sc = ode_residuals("Pair12", phi, psi, chebyshev_radii(r_lo, r_hi), return_scale=True)
    worst = float(np.max(np.abs(res)))
    if worst > tol * max(float(np.max(sc)), 1e-300):
        raise PredicateError(f"profiles do not solve the radial pair (residual {worst:.3e})")
    return ExactSolution(
        "RadialPair12", RepKind.Rep12, A, A, phi, psi, r_min=max(phi.r_min, psi.r_min),
        length_scale=scale, pressure_form="none (curl form)",
        params={"phi": phi.descriptor(), "psi": psi.descriptor()},
    )


# -- sampling ---------------------------------------------------------------------

def sample_solution(sol: ExactSolution, t: float, points):
    """Closed-form (u, P, du/dt) at the given points; P is None without a pressure form."""
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[-1] != sol.dim:
        raise ValueError(f"points must have {sol.dim} coordinates")
    r = np.linalg.norm(pts, axis=1)
    bad = (r < sol.r_min) | (r > sol.r_max)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        raise OutOfRegionError(
            f"{idx.size} point(s) outside r in [{sol.r_min}, {sol.r_max}]: indices {idx[:10].tolist()}",
            pts[bad].tolist())
    u = sol.velocity(t, pts)
    P = sol.pressure(t, pts)
    return u, P, sol.dudt(t, pts)


# -- registry for the command line ------------------------------------------------

CLI_NAMES = ("beltrami", "poly12perp", "poly11", "poly22", "bump2d", "periodic2d", "heat2d", "radialpair12")


def build_from_name(name: str, params: dict) -> ExactSolution:
    p = dict(params)
    vec = lambda key, default: np.asarray(p.get(key, default), float)  # noqa: E731
    if name == "beltrami":
        return make_beltrami(float(p.get("lambda", 1.0)), float(p.get("alpha", 1.0)),
                             float(p.get("beta", 0.0)), vec("A", E3), float(p.get("nu", 0.0)))
    if name in ("poly12perp", "poly11", "poly22"):
        kind = {"poly12perp": "Poly12Perp", "poly11": "Poly11", "poly22": "Poly22"}[name]
        return make_poly_family(kind, dict(p.get("coeffs", {})), vec("A", E1), vec("B", E2),
                                float(p.get("nu", 0.0)))
    if name == "bump2d":
        return make_static_euler_2d("Bump", Ra=float(p.get("Ra", 1.0)), amplitude=float(p.get("amplitude", 1.0)))
    if name == "periodic2d":
        return make_static_euler_2d("Periodic", j=int(p.get("j", 1)), alpha=float(p.get("alpha", 1.0)),
                                    beta=float(p.get("beta", 0.0)), r_min=float(p.get("r_min", 0.5)),
                                    r_max=float(p.get("r_max", 10.0)))
    if name == "heat2d":
        return make_heat_2d(GaussianBump(float(p.get("amplitude", 1.0)), float(p.get("width", 1.0))),
                            float(p.get("nu", 0.01)))
    if name == "radialpair12":
        lam = float(p.get("lambda", 1.0))
        psi = SincPair(lam, float(p.get("alpha", 1.0)), float(p.get("beta", 0.0)))
        return make_radial_pair12(psi.scaled(lam), psi, vec("A", E3))
    raise ValueError(f"unknown family {name!r}; known: {', '.join(CLI_NAMES)}")
