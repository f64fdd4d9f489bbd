"""Radial profiles, their derivative towers, and the reduced radial equations.

Every profile is a scalar function of ``r = |x|``. Derivative quantities are
built from one expression set (see ``_tower``) evaluated either on exact
polynomials or on Taylor jets at the requested radii. Close to the origin,
where the ``1/r`` factors cancel catastrophically, closed-form families switch
to their even Taylor series at 0.

Notation used throughout::

    d1 = f'            q1 = f'/r          dq1 = (f'/r)'
    lap = Laplacian    dlap = lap'        qlap = lap'/r     dqlap = (lap'/r)'
    qq1 = dq1/r        qqlap = dqlap/r    lap2 = Laplacian of lap
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from numpy.polynomial import Polynomial as _Poly
from scipy import integrate, interpolate, special

from . import _jet
from .frames import RepKind, as_frame_vector

BASE_QUANTITIES = ("value", "d1", "q1", "dq1", "lap", "dlap", "qlap", "dqlap")
EXTRA_QUANTITIES = ("d2", "qq1", "dqq1", "lap2", "dlap2", "qqlap", "dqqlap", "ddqlap")

# Highest derivative of the profile each quantity needs.
REQUIRED_ORDER = {
    "value": 0, "d1": 1, "q1": 1, "d2": 2, "dq1": 2, "lap": 2, "qq1": 2,
    "dlap": 3, "qlap": 3, "dqq1": 3, "dqlap": 4, "lap2": 4, "qqlap": 4,
    "dlap2": 5, "dqqlap": 5, "ddqlap": 5,
}

JET_ORDER = 5
SERIES_TERMS = 12


class UnsupportedOrderError(ValueError):
    """The profile cannot supply the derivative order a quantity needs."""


class DomainError(ValueError):
    """Radius outside the profile's evaluation region."""


class QuadratureError(RuntimeError):
    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


def _tower(phi, D, R, dim):
    d1 = D(phi)
    q1 = R(d1)
    d2 = D(d1)
    dq1 = D(q1)
    lap = d2 + (dim - 1) * q1
    dlap = D(lap)
    qlap = R(dlap)
    dqlap = D(qlap)
    qq1 = R(dq1)
    lap2 = D(dlap) + (dim - 1) * qlap
    qqlap = R(dqlap)
    return {
        "value": phi, "d1": d1, "q1": q1, "d2": d2, "dq1": dq1, "lap": lap,
        "dlap": dlap, "qlap": qlap, "dqlap": dqlap, "qq1": qq1, "dqq1": D(qq1),
        "lap2": lap2, "dlap2": D(lap2), "qqlap": qqlap, "dqqlap": D(qqlap),
        "ddqlap": D(dqlap),
    }


def _poly_div_r(p: _Poly) -> _Poly:
    c = np.asarray(p.coef, dtype=float)
    if c.size <= 1:
        return _Poly([0.0])
    return _Poly(c[1:])


def _poly_tower(p: _Poly, dim: int) -> dict:
    return _cached_poly_tower(tuple(np.asarray(p.coef, dtype=float)), dim)


@functools.lru_cache(maxsize=256)
def _cached_poly_tower(coef: tuple, dim: int) -> dict:
    return _tower(_Poly(coef), lambda q: q.deriv(), _poly_div_r, dim)


def _jet_tower(j: _jet.Jet, r: np.ndarray, dim: int) -> dict:
    rj = _jet.Jet.variable(r, j.order)
    return _tower(j, lambda q: q.d(), lambda q: q / rj, dim)


class RadialDerivatives:
    """Values of the derivative tower at a set of radii.

    Quantities that need more derivatives than the profile provides are
    stored as ``None``; reading them raises ``UnsupportedOrderError``.
    """

    def __init__(self, r, values: dict, dim: int):
        self.r = r
        self.dim = dim
        self._values = values

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        try:
            v = self._values[name]
        except KeyError:
            raise AttributeError(name) from None
        if v is None:
            raise UnsupportedOrderError(
                f"{name} needs derivative order {REQUIRED_ORDER[name]}, not available for this profile")
        return v

    def __getitem__(self, name):
        return getattr(self, name)

    def available(self, name) -> bool:
        return self._values.get(name) is not None

    def as_dict(self) -> dict:
        return {k: v for k, v in self._values.items() if v is not None}


# -- profile families ----------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    family: ClassVar[str] = "abstract"
    max_order: ClassVar[int] = JET_ORDER

    @property
    def scale(self) -> float:
        return 1.0

    @property
    def r_min(self) -> float:
        return 0.0

    @property
    def r_max(self) -> float:
        return math.inf

    @property
    def series_radius(self) -> float:
        return 0.1 * self.scale

    def series(self) -> _Poly | None:
        """Even Taylor polynomial at r = 0, or None if the profile has none."""
        return None

    def jet(self, r: np.ndarray, order: int) -> _jet.Jet:
        raise NotImplementedError

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.jet(r, 0).value

    def params(self) -> dict:
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"family": self.family, "params": self.params()}

    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class SincPair(RadialProfile):
    """alpha*sin(lam r)/r + beta*cos(lam r)/r (Helmholtz eigenfunction, eigenvalue -lam^2)."""

    lam: float
    alpha: float = 1.0
    beta: float = 0.0
    exclusion: float = 1e-3
    family: ClassVar[str] = "SincPair"

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("SincPair needs lam != 0")

    @property
    def scale(self):
        return 1.0 / abs(self.lam)

    @property
    def r_min(self):
        return self.exclusion if self.beta != 0 else 0.0

    def series(self):
        if self.beta != 0:
            return None
        lam = self.lam
        c = np.zeros(2 * SERIES_TERMS + 1)
        for k in range(SERIES_TERMS + 1):
            c[2 * k] = self.alpha * (-1) ** k * lam ** (2 * k + 1) / math.factorial(2 * k + 1)
        return _Poly(c)

    def jet(self, r, order):
        x = _jet.Jet.variable(r, order)
        s, c = _jet.sincos(x * self.lam)
        return (s * self.alpha + c * self.beta) / x

    def value(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.alpha * np.sin(self.lam * r) + self.beta * np.cos(self.lam * r)) / r
        if self.beta == 0:
            out = np.where(r == 0, self.alpha * self.lam, out)
        return out

    def params(self):
        return {"lam": self.lam, "alpha": self.alpha, "beta": self.beta}

    def scaled(self, factor: float) -> SincPair:
        return SincPair(self.lam, self.alpha * factor, self.beta * factor, self.exclusion)

    def is_zero(self):
        return self.alpha == 0 and self.beta == 0


@dataclass(frozen=True)
class Polynomial(RadialProfile):
    """sum_k coeffs[k] r^k, optionally with linear-in-time coefficients ``rates``.

    Even polynomials are handled exactly at every radius (including r = 0).
    Odd powers are allowed for negative controls; they are evaluated only at
    r > 0.
    """

    coeffs: tuple = (0.0,)
    rates: tuple | None = None
    family: ClassVar[str] = "Polynomial"
    max_order: ClassVar[int] = 99

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.rates is not None:
            object.__setattr__(self, "rates", tuple(float(c) for c in self.rates))

    @classmethod
    def even(cls, *even_coeffs, rates=None) -> Polynomial:
        """Build from coefficients of r^0, r^2, r^4, ..."""
        def spread(cs):
            c = np.zeros(2 * len(cs) - 1) if cs else np.zeros(1)
            c[::2] = cs
            return tuple(c)
        return cls(spread(list(even_coeffs)), spread(list(rates)) if rates is not None else None)

    @property
    def poly(self) -> _Poly:
        return _Poly(self.coeffs)

    @property
    def is_even(self) -> bool:
        return all(c == 0 for c in self.coeffs[1::2])

    @property
    def r_min(self):
        return 0.0

    def coefficient(self, power: int) -> float:
        return self.coeffs[power] if power < len(self.coeffs) else 0.0

    def at(self, t: float) -> Polynomial:
        """Coefficients frozen at time t."""
        if self.rates is None:
            return Polynomial(self.coeffs)
        n = max(len(self.coeffs), len(self.rates))
        c = np.zeros(n)
        c[: len(self.coeffs)] += self.coeffs
        c[: len(self.rates)] += np.asarray(self.rates) * t
        return Polynomial(tuple(c))

    def rate_profile(self) -> Polynomial:
        return Polynomial(self.rates if self.rates is not None else (0.0,))

    def jet(self, r, order):
        r = np.asarray(r, dtype=float)
        c = np.zeros((order + 1,) + r.shape)
        p = self.poly
        for k in range(order + 1):
            c[k] = p(r) / math.factorial(k)
            p = p.deriv()
        return _jet.Jet(c)

    def value(self, r):
        return self.poly(np.asarray(r, dtype=float))

    def params(self):
        out = {"coeffs": list(self.coeffs)}
        if self.rates is not None:
            out["rates"] = list(self.rates)
        return out

    def is_zero(self):
        return all(c == 0 for c in self.coeffs) and not any(self.rates or ())


@dataclass(frozen=True)
class TrigPeriodic(RadialProfile):
    """alpha*sin(j r) + beta*cos(j r); evaluated only on r >= r_min > 0."""

    j: int
    alpha: float = 1.0
    beta: float = 0.0
    rmin: float = 0.1
    family: ClassVar[str] = "TrigPeriodic"

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError(f"TrigPeriodic needs an integer j >= 1, got {self.j}")
        if not self.rmin > 0:
            raise ValueError("TrigPeriodic needs r_min > 0")

    @property
    def scale(self):
        return 1.0 / self.j

    @property
    def r_min(self):
        return self.rmin

    def jet(self, r, order):
        x = _jet.Jet.variable(r, order)
        s, c = _jet.sincos(x * float(self.j))
        return s * self.alpha + c * self.beta

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha * np.sin(self.j * r) + self.beta * np.cos(self.j * r)

    def params(self):
        return {"j": self.j, "alpha": self.alpha, "beta": self.beta, "r_min": self.rmin}


@dataclass(frozen=True)
class GaussianBump(RadialProfile):
    """amplitude * exp(-r^2 / width^2)."""

    amplitude: float = 1.0
    width: float = 1.0
    family: ClassVar[str] = "GaussianBump"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("GaussianBump needs width > 0")

    @property
    def scale(self):
        return self.width

    def series(self):
        c = np.zeros(2 * SERIES_TERMS + 1)
        for k in range(SERIES_TERMS + 1):
            c[2 * k] = self.amplitude * (-1) ** k / (math.factorial(k) * self.width ** (2 * k))
        return _Poly(c)

    def jet(self, r, order):
        x = _jet.Jet.variable(r, order)
        return _jet.exp(x * x * (-1.0 / self.width**2)) * self.amplitude

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-(r / self.width) ** 2)

    def params(self):
        return {"amplitude": self.amplitude, "width": self.width}

    def is_zero(self):
        return self.amplitude == 0


@dataclass(frozen=True)
class CompactBump(RadialProfile):
    """amplitude * T(r/Ra) with the smooth template T(s) = exp(-1/(s(1-s))) on (0, 1).

    The template is flat at s = 0, so the profile vanishes identically near
    the origin as well as for r >= Ra.
    """

    amplitude: float = 1.0
    Ra: float = 1.0
    family: ClassVar[str] = "CompactBump"

    def __post_init__(self):
        if not self.Ra > 0:
            raise ValueError("CompactBump needs Ra > 0")

    @property
    def scale(self):
        return self.Ra

    @property
    def series_radius(self):
        return 0.005 * self.Ra

    def series(self):
        return _Poly([0.0])

    def jet(self, r, order):
        r = np.asarray(r, dtype=float)
        s = r / self.Ra
        inside = (s > 0) & (s < 1)
        c = np.zeros((order + 1,) + r.shape)
        if np.any(inside):
            x = _jet.Jet.variable(s[inside], order)
            t = _jet.exp(-1.0 / (x * (1.0 - x)))
            scale = self.amplitude / self.Ra ** np.arange(order + 1)
            c[:, inside] = t.c * scale.reshape((-1,) + (1,) * (t.c.ndim - 1))
        return _jet.Jet(c)

    def value(self, r):
        s = np.asarray(r, dtype=float) / self.Ra
        out = np.zeros_like(s)
        inside = (s > 0) & (s < 1)
        out[inside] = self.amplitude * np.exp(-1.0 / (s[inside] * (1 - s[inside])))
        return out

    def params(self):
        return {"amplitude": self.amplitude, "Ra": self.Ra}

    def is_zero(self):
        return self.amplitude == 0


@dataclass(frozen=True, eq=False)
class Tabulated(RadialProfile):
    """Even cubic-spline interpolant of samples on 0 = r_0 < r_1 < ... < r_m.

    Supplies derivatives up to order three; zero is assumed beyond r_m only
    by the heat quadrature, never by direct evaluation.
    """

    r_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    family: ClassVar[str] = "Tabulated"
    max_order: ClassVar[int] = 3

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.size < 4 or r.shape != v.shape:
            raise ValueError("Tabulated needs matching 1D arrays with at least 4 samples")
        if r[0] != 0 or np.any(np.diff(r) <= 0):
            raise ValueError("Tabulated radii must start at 0 and increase strictly")
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "values", v)
        xs = np.concatenate([-r[:0:-1], r])
        ys = np.concatenate([v[:0:-1], v])
        object.__setattr__(self, "_spline", interpolate.CubicSpline(xs, ys))

    @property
    def scale(self):
        return float(self.r_grid[-1])

    @property
    def r_max(self):
        return float(self.r_grid[-1])

    @property
    def series_radius(self):
        return float(self.r_grid[1])

    def series(self):
        sp = self._spline
        i = self.r_grid.size - 1  # piece starting at r = 0
        c3, c2, _, c0 = sp.c[:, i]
        return _Poly([c0, 0.0, c2, c3])

    def jet(self, r, order):
        r = np.asarray(r, dtype=float)
        order = min(order, 3)
        c = np.stack([self._spline(r, k) / math.factorial(k) for k in range(order + 1)])
        return _jet.Jet(c)

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self._spline(r)

    def params(self):
        return {"r": self.r_grid.tolist(), "values": self.values.tolist()}

    def is_zero(self):
        return not np.any(self.values)


FAMILIES = {cls.family: cls for cls in (SincPair, Polynomial, TrigPeriodic, GaussianBump, CompactBump, Tabulated)}


def profile_from_descriptor(desc: dict) -> RadialProfile:
    """Inverse of ``RadialProfile.descriptor``; raises ValueError on bad input.

    Parameters may sit under a ``params`` key or directly beside ``family``.
    """
    if not isinstance(desc, dict) or "family" not in desc:
        raise ValueError(f"profile descriptor needs a 'family' key: {desc!r}")
    fam = desc["family"]
    if "params" in desc:
        p = dict(desc["params"])
    else:
        p = {k: v for k, v in desc.items() if k != "family"}
    try:
        if fam == "SincPair":
            return SincPair(float(p["lam"]), float(p.get("alpha", 1.0)), float(p.get("beta", 0.0)))
        if fam == "Polynomial":
            if "even" in p:
                return Polynomial.even(*p["even"], rates=p.get("even_rates"))
            return Polynomial(tuple(p["coeffs"]), tuple(p["rates"]) if "rates" in p else None)
        if fam == "TrigPeriodic":
            return TrigPeriodic(int(p["j"]), float(p.get("alpha", 1.0)), float(p.get("beta", 0.0)),
                                float(p.get("r_min", 0.1)))
        if fam == "GaussianBump":
            return GaussianBump(float(p.get("amplitude", 1.0)), float(p.get("width", 1.0)))
        if fam == "CompactBump":
            return CompactBump(float(p.get("amplitude", 1.0)), float(p.get("Ra", 1.0)))
        if fam == "Tabulated":
            return Tabulated(np.asarray(p["r"]), np.asarray(p["values"]))
    except KeyError as exc:
        raise ValueError(f"profile {fam} missing parameter {exc}") from None
    raise ValueError(f"unknown profile family {fam!r}; known: {sorted(FAMILIES)}")


# -- evaluation ----------------------------------------------------------------

def _check_radii(p: RadialProfile, r: np.ndarray):
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise DomainError("radii must be finite and non-negative")
    bad = r > p.r_max * (1 + 1e-12)
    if np.any(bad):
        raise DomainError(f"radius {r[bad].max():.6g} beyond r_max = {p.r_max:.6g}")
    lo = p.r_min
    if isinstance(p, Polynomial) and not p.is_even:
        bad = r <= 0
        if np.any(bad):
            raise DomainError("polynomials with odd powers are evaluated only at r > 0")
    elif lo > 0 and np.any(r < lo):
        raise DomainError(f"radius {r[r < lo].min():.6g} inside the exclusion radius {lo:.6g}")


def eval_derivatives(p: RadialProfile, r, dim: int = 3) -> RadialDerivatives:
    """All tower quantities of ``p`` at radii ``r`` (scalar or array)."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    r_in = np.asarray(r, dtype=float)
    r = np.atleast_1d(r_in)
    _check_radii(p, r)
    names = BASE_QUANTITIES + EXTRA_QUANTITIES
    out = {k: np.zeros(r.shape) for k in names}

    if isinstance(p, Polynomial) and p.is_even:
        tower = _poly_tower(p.poly, dim)
        for k in names:
            out[k] = tower[k](r)
    else:
        series = p.series()
        small = r < p.series_radius if series is not None else np.zeros(r.shape, bool)
        if np.any(small):
            tower = _poly_tower(series, dim)
            for k in names:
                out[k][small] = tower[k](r[small])
        big = ~small
        if np.any(big):
            rb = r[big]
            tower = _jet_tower(p.jet(rb, JET_ORDER), rb, dim)
            for k in names:
                if tower[k].order >= 0:
                    out[k][big] = tower[k].value
    for k in names:
        if REQUIRED_ORDER[k] > p.max_order:
            out[k] = None
        elif r_in.ndim == 0:
            out[k] = float(out[k][0])
    return RadialDerivatives(r_in if r_in.ndim else float(r_in), out, dim)


def heat_rate_derivatives(d: RadialDerivatives, nu: float) -> dict:
    """Tower entries of nu*Laplacian(f), i.e. of df/dt under heat flow."""
    return {
        "value": nu * d.lap, "q1": nu * d.qlap, "qq1": nu * d.qqlap, "lap": nu * d.lap2,
        "dq1": nu * d.dqlap,
    }


# -- closed-form velocity and vorticity ----------------------------------------

def _dot(A, x):
    return x @ A


def _cross(A, x):
    return np.cross(np.broadcast_to(A, x.shape), x)


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    if dim == 2:
        x = np.concatenate([x, np.zeros((x.shape[0], 1))], axis=1)
    return x, single


def _att(B, x, d):
    """((B x grad) x grad) f = grad(B.grad f) - B lap f for radial f."""
    bx = _dot(B, x)
    return (np.outer(d["q1"], B) + (bx * d["qq1"])[:, None] * x - np.outer(d["lap"], B))


def _velocity(kind, A, B, dphi, dpsi, x):
    if kind is RepKind.Rep11:
        return _cross(A, x) * dphi["q1"][:, None] + _cross(B, x) * dpsi["q1"][:, None]
    if kind is RepKind.Rep12:
        return _cross(A, x) * dphi["q1"][:, None] + _att(B, x, dpsi)
    return _att(A, x, dphi) + _att(B, x, dpsi)


def _vorticity(kind, A, B, dphi, dpsi, x):
    def neg_att(C, d):
        return -_att(C, x, d)

    def cross_lap(C, d):
        return _cross(C, x) * d["qlap"][:, None]

    if kind is RepKind.Rep11:
        return neg_att(A, dphi) + neg_att(B, dpsi)
    if kind is RepKind.Rep12:
        return neg_att(A, dphi) + cross_lap(B, dpsi)
    return cross_lap(A, dphi) + cross_lap(B, dpsi)


def _check_2d(kind, A, B):
    e3 = np.array([0.0, 0.0, 1.0])
    if kind is not RepKind.Rep11 or np.linalg.norm(np.cross(A, e3)) > 0 or np.linalg.norm(np.cross(B, e3)) > 0:
        raise ValueError("2D closed forms exist only for Rep11 with A, B along e3")


def _tower_at(p, r, dim, names):
    d = eval_derivatives(p, r, dim)
    return {k: np.atleast_1d(getattr(d, k)) for k in names}


def velocity_closed_form(kind, A, B, phi: RadialProfile, psi: RadialProfile, x, dim: int = 3):
    """Pointwise velocity of radial potentials; 2D results are 3-vectors with zero third entry."""
    kind = RepKind.parse(kind)
    A, B = as_frame_vector(A), as_frame_vector(B)
    if dim == 2:
        _check_2d(kind, A, B)
    pts, single = _points(x, dim)
    r = np.linalg.norm(pts, axis=1)
    names = ("q1", "qq1", "lap")
    u = _velocity(kind, A, B, _tower_at(phi, r, dim, names), _tower_at(psi, r, dim, names), pts)
    return u[0] if single else u


def vorticity_closed_form(kind, A, B, phi: RadialProfile, psi: RadialProfile, x, dim: int = 3):
    kind = RepKind.parse(kind)
    A, B = as_frame_vector(A), as_frame_vector(B)
    if dim == 2:
        _check_2d(kind, A, B)
    pts, single = _points(x, dim)
    r = np.linalg.norm(pts, axis=1)
    names = ("q1", "qq1", "lap", "qlap")
    if dim == 2:
        # A . x = 0 in the plane: omega = A * (2D Laplacian of phi) + B * (...)
        dp = _tower_at(phi, r, 2, ("lap",))
        ds = _tower_at(psi, r, 2, ("lap",))
        w = np.outer(dp["lap"], A) + np.outer(ds["lap"], B)
    else:
        w = _vorticity(kind, A, B, _tower_at(phi, r, 3, names), _tower_at(psi, r, 3, names), pts)
    return w[0] if single else w


def velocity_from_towers(kind, A, B, dphi: dict, dpsi: dict, x):
    """Velocity from precomputed tower dictionaries (3D points, or 2D embedded)."""
    kind = RepKind.parse(kind)
    return _velocity(kind, as_frame_vector(A), as_frame_vector(B), dphi, dpsi, np.asarray(x, float))


# -- reduced radial systems ----------------------------------------------------

SYSTEMS = ("Pair12", "Constraints11", "Constraints22", "Constraints12Perp")


def ode_residual_terms(system: str, phi: RadialProfile, psi: RadialProfile, r, dim: int = 3):
    """Residuals of ``system`` at radii ``r`` as a list of term lists.

    Each residual is the sum of its terms; the sum of absolute term values is
    the natural scale for judging whether it vanishes.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    f = eval_derivatives(phi, r, dim)
    g = eval_derivatives(psi, r, dim)
    if system == "Pair12":
        return [
            [g.q1 * f.dq1, -f.q1 * g.dq1],
            [f.q1 * f.dq1, g.q1 * g.dqlap],
        ]
    if system == "Constraints11":
        return [
            [f.dq1 * f.qq1, f.q1 * f.dqq1],
            [g.dq1 * g.qq1, g.q1 * g.dqq1],
            [g.dq1 * f.qq1, g.q1 * f.dqq1, f.dq1 * g.qq1, f.q1 * g.dqq1],
            [f.dq1],
            [g.dq1],
        ]
    if system == "Constraints22":
        return [
            [f.d1 * f.dqlap],
            [g.dq1 * f.dlap, 2 * g.d1 * f.dqlap, -g.dlap * f.dq1],
            [f.dq1 * g.dlap, 2 * f.d1 * g.dqlap, -f.dlap * g.dq1],
            [g.d1 * g.dqlap],
        ]
    return [
        [2 * f.q1 * f.dq1],
        [g.dq1 * g.qqlap, g.q1 * g.dqqlap],
        [g.d1 * g.dqlap],
    ]


def ode_residuals(system: str, phi: RadialProfile, psi: RadialProfile, r, dim: int = 3,
                  return_scale: bool = False):
    """Left-hand sides of the chosen radial system at ``r`` (shape ``(m,) + r.shape``)."""
    terms = ode_residual_terms(system, phi, psi, r, dim)
    res = np.array([sum(t) for t in terms])
    if not return_scale:
        return res
    scale = np.array([sum(np.abs(x) for x in t) for t in terms])
    return res, scale


def chebyshev_radii(a: float, b: float, n: int = 64) -> np.ndarray:
    """Chebyshev-Gauss points mapped to [a, b], in increasing order."""
    k = np.arange(n)
    x = -np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def quartic_coefficients(p: RadialProfile, radii) -> dict:
    """Least-squares (c2, c4) with p' = 2 c2 r + 4 c4 r^3 on the given radii."""
    d = eval_derivatives(p, np.asarray(radii, float))
    r = np.atleast_1d(d.r)
    M = np.stack([2 * r, 4 * r**3], axis=1)
    sol, *_ = np.linalg.lstsq(M, np.atleast_1d(d.d1), rcond=None)
    return {"c2": float(sol[0]), "c4": float(sol[1])}


def coupling_integral(phi: RadialProfile, psi: RadialProfile, r, which: str = "phi_side",
                      dim: int = 3, tol: float = 1e-10):
    """Integral from 0 to r of the radial coupling integrand.

    phi_side: s * (2 q1[psi] qq1[phi] - 2 q1[phi] qq1[psi])
    psi_side: s * (2 q1[phi] qq1[phi] + 2 q1[psi] qqlap[psi])
    """
    if which not in ("phi_side", "psi_side"):
        raise ValueError("which must be 'phi_side' or 'psi_side'")

    def integrand(s):
        f = eval_derivatives(phi, s, dim)
        g = eval_derivatives(psi, s, dim)
        if which == "phi_side":
            return s * (2 * g.q1 * f.qq1 - 2 * f.q1 * g.qq1)
        return s * (2 * f.q1 * f.qq1 + 2 * g.q1 * g.qqlap)

    rs = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty(rs.shape)
    for i, ri in enumerate(rs):
        if ri < 0:
            raise DomainError("r must be non-negative")
        val, err, info = integrate.quad(integrand, 0.0, ri, epsabs=1e-12, epsrel=tol,
                                        limit=200, full_output=1)[:3]
        if err > max(1e-12, tol * abs(val)) * 10:
            raise QuadratureError(f"quadrature did not converge at r={ri}: error {err:.3e}", err)
        out[i] = val
    return out if np.ndim(r) else float(out[0])


# -- heat evolution ------------------------------------------------------------

GH_NODES = 160


def _poly_heat(poly: _Poly, tau: float, dim: int) -> _Poly:
    out = _Poly([0.0])
    term = poly
    k = 0
    while np.any(term.coef != 0):
        out = out + term * (tau**k / math.factorial(k))
        term = _poly_tower(term, dim)["lap"]
        k += 1
        if k > 64:
            break
    return out


def heat_quadrature(p: RadialProfile, r, tau: float, dim: int = 3, nodes: int = GH_NODES):
    """Radial values of the heat semigroup exp(tau*Laplacian) p by Gauss-Hermite quadrature.

    3D uses the 1D reduction: r*f(r) evolves by the 1D heat equation with
    the odd extension of s*f(s). 2D uses a tensor rule on the planar kernel.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if tau < 0:
        raise ValueError("diffusion time must be non-negative")
    if tau == 0:
        return _value_ext(p, r)
    y, w = special.roots_hermite(nodes)
    sq = 2.0 * math.sqrt(tau)
    if dim == 3:
        s = r[:, None] + sq * y[None, :]
        g = s * _value_ext(p, np.abs(s))
        out = (g @ w) / math.sqrt(math.pi)
        tiny = r < 1e-6 * p.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out / r
        if np.any(tiny):
            # limit r -> 0: derivative of the odd integral, g'(s) = f + s f'
            s0 = np.abs(sq * y)
            d = eval_derivatives(p, s0, 3) if p.r_max == math.inf else None
            if d is not None:
                gp = d.value + s0 * d.d1
            else:
                gp = _value_ext(p, s0) + s0 * _d1_ext(p, s0)
            out[tiny] = (gp @ w) / math.sqrt(math.pi)
        return out
    if dim == 2:
        Y1, Y2 = np.meshgrid(y, y, indexing="ij")
        W = np.outer(w, w) / math.pi
        out = np.empty(r.shape)
        for i, ri in enumerate(r):
            rad = np.hypot(ri + sq * Y1, sq * Y2)
            out[i] = np.sum(W * _value_ext(p, rad))
        return out
    raise ValueError("dim must be 2 or 3")


def _value_ext(p, r):
    """Profile value, continued by zero beyond a finite r_max."""
    r = np.asarray(r, dtype=float)
    if p.r_max == math.inf:
        return p.value(r)
    out = np.zeros_like(r)
    inside = r <= p.r_max
    out[inside] = p.value(r[inside])
    return out


def _d1_ext(p, r):
    out = np.zeros_like(r)
    inside = r <= p.r_max
    if np.any(inside):
        out[inside] = eval_derivatives(p, r[inside]).d1
    return out


def heat_evolve_radial(p: RadialProfile, nu_t: float, dim: int = 3, samples: int = 801) -> RadialProfile:
    """exp(nu_t * Laplacian) applied to a radial profile.

    Closed forms for SincPair, Polynomial and GaussianBump; CompactBump and
    Tabulated go through ``heat_quadrature`` and come back Tabulated.
    """
    if nu_t < 0:
        raise ValueError("nu*t must be non-negative")
    if isinstance(p, SincPair):
        return p.scaled(math.exp(-nu_t * p.lam**2))
    if isinstance(p, Polynomial):
        if not p.is_even or p.rates is not None:
            raise ValueError("heat evolution of polynomials needs an even, time-independent profile")
        if len(p.coeffs) > 5:
            raise ValueError("polynomial heat evolution is limited to degree <= 4")
        return Polynomial(tuple(_poly_heat(p.poly, nu_t, dim).coef))
    if isinstance(p, GaussianBump):
        w2 = p.width**2 + 4 * nu_t
        return GaussianBump(p.amplitude * (p.width**2 / w2) ** (dim / 2), math.sqrt(w2))
    if isinstance(p, (CompactBump, Tabulated)):
        if nu_t == 0:
            return p
        R = p.r_max if p.r_max < math.inf else p.scale
        R = R + 12 * math.sqrt(nu_t)
        grid = np.linspace(0.0, R, samples)
        return Tabulated(grid, heat_quadrature(p, grid, nu_t, dim))
    raise ValueError(f"{p.family} grows or oscillates at infinity; heat evolution rejected")


__all__ = [
    "RadialProfile", "SincPair", "Polynomial", "TrigPeriodic", "GaussianBump", "CompactBump",
    "Tabulated", "RadialDerivatives", "eval_derivatives", "velocity_closed_form",
    "vorticity_closed_form", "ode_residuals", "ode_residual_terms", "coupling_integral",
    "heat_evolve_radial", "heat_quadrature", "profile_from_descriptor", "chebyshev_radii",
    "UnsupportedOrderError", "DomainError", "QuadratureError",
]
