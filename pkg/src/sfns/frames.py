"""Frame vectors and the three two-potential representations of solenoidal fields.

With ``cross_grad(A, f) = (A x grad) f`` and
``cross_grad_curl(A, f) = ((A x grad) x grad) f = grad(A.grad f) - A lap f``:

* Rep11: u = (A x grad) phi + (B x grad) psi
* Rep12: u = (A x grad) phi + ((B x grad) x grad) psi
* Rep22: u = ((A x grad) x grad) phi + ((B x grad) x grad) psi

In Fourier space (wavevector xi) the two building blocks have symbols
``i A x xi`` and ``xi x (A x xi)``; both are tangent to the sphere |xi| = const,
so every synthesized field is divergence-free mode by mode.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from .grid import Grid, GridField, ShapeError, fft, ifft

log = logging.getLogger(__name__)

EPS_KILL = 1e-8
INDEPENDENCE_TOL = 1e-12


class FrameError(ValueError):
    """Frame vectors violate the representation's hypotheses."""


class RepKind(enum.Enum):
    Rep11 = "Rep11"
    Rep12 = "Rep12"
    Rep22 = "Rep22"

    @classmethod
    def parse(cls, value) -> RepKind:
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("(", "").replace(")", "").replace(",", "").replace("rep", "")
        for k in cls:
            if k.value.lower().replace("rep", "") == key:
                return k
        raise ValueError(f"unknown representation kind {value!r}")


def as_frame_vector(A) -> np.ndarray:
    a = np.asarray(A, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise FrameError(f"frame vector must be 3 finite reals, got {A!r}")
    if np.linalg.norm(a) == 0:
        raise FrameError("frame vector must be nonzero")
    return a


def frame_mode(A, B) -> str:
    """'aligned' (A = B), 'perpendicular' (A.B = 0), 'parallel' or 'independent'."""
    A, B = as_frame_vector(A), as_frame_vector(B)
    na, nb = np.linalg.norm(A), np.linalg.norm(B)
    if np.linalg.norm(A - B) <= INDEPENDENCE_TOL * na:
        return "aligned"
    if abs(A @ B) <= INDEPENDENCE_TOL * na * nb:
        return "perpendicular"
    if np.linalg.norm(np.cross(A, B)) <= INDEPENDENCE_TOL * na * nb:
        return "parallel"
    return "independent"


def validate_frames(kind: RepKind, A, B) -> str:
    mode = frame_mode(A, B)
    if kind is RepKind.Rep22 and mode in ("aligned", "parallel"):
        raise FrameError("Rep22 needs linearly independent A and B")
    if kind is RepKind.Rep12 and mode not in ("aligned", "perpendicular"):
        raise FrameError("Rep12 needs A = B (aligned) or A . B = 0 (perpendicular)")
    if kind is RepKind.Rep22 and mode == "perpendicular":
        return "independent"
    return mode


@dataclass(frozen=True, eq=False)
class SymplecticRep:
    """A representation kind, its frame (A, B) and two potentials.

    Potentials may be GridFields or radial profiles; ``None`` means zero.
    Rep11 accepts parallel frames (the planar embedding uses A = B = e3).
    """

    kind: RepKind
    A: Any
    B: Any
    phi: Any = None
    psi: Any = None
    mode: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", RepKind.parse(self.kind))
        object.__setattr__(self, "A", as_frame_vector(self.A))
        object.__setattr__(self, "B", as_frame_vector(self.B))
        object.__setattr__(self, "mode", validate_frames(self.kind, self.A, self.B))

    @property
    def aligned(self) -> bool:
        return self.mode == "aligned"


def _is_e3(A) -> bool:
    return A[0] == 0 and A[1] == 0


def _scalar(f: GridField) -> np.ndarray:
    if not f.is_scalar:
        raise ShapeError("potential must be a scalar field")
    return f.data[0]


def sample_profile(grid: Grid, profile) -> GridField:
    """Radial profile sampled at the grid's radii."""
    return GridField(grid, profile.value(grid.radius)[None])


def _potential_hat(grid: Grid, pot) -> np.ndarray:
    if pot is None:
        return np.zeros(grid.spectral_shape, dtype=complex)
    if not isinstance(pot, GridField):
        pot = sample_profile(grid, pot)
    if pot.grid != grid:
        raise ShapeError("potentials live on different grids")
    return fft(grid, _scalar(pot))


def _cross_sym(A, xi):
    """Components of A x xi for component-wise broadcast arrays xi."""
    x1, x2, x3 = xi
    return (A[1] * x3 - A[2] * x2, A[2] * x1 - A[0] * x3, A[0] * x2 - A[1] * x1)


def _att_sym(A, xi):
    """Components of xi x (A x xi) = A |xi|^2 - xi (A . xi)."""
    k2 = sum(x * x for x in xi)
    adx = sum(A[j] * xi[j] for j in range(3))
    return tuple(A[j] * k2 - xi[j] * adx for j in range(3))


def cross_grad(A, phi: GridField) -> GridField:
    """(A x grad) phi. On 2D grids A must lie along e3 and the in-plane pair (-a3 d2 phi, a3 d1 phi) is returned."""
    A = as_frame_vector(A)
    g = phi.grid
    ph = fft(g, _scalar(phi))
    if g.dim == 2:
        if not _is_e3(A):
            raise FrameError("2D cross_grad needs A along e3")
        k1, k2 = g.xi_d
        return GridField(g, ifft(g, np.stack([-1j * A[2] * k2 * ph, 1j * A[2] * k1 * ph])))
    s = _cross_sym(A, g.xi_d)
    return GridField(g, ifft(g, np.stack([1j * c * ph for c in s])))


def cross_grad_curl(A, psi: GridField) -> GridField:
    """((A x grad) x grad) psi = (A.grad) grad psi - A lap psi (3D only)."""
    A = as_frame_vector(A)
    g = psi.grid
    if g.dim != 3:
        raise FrameError("cross_grad_curl needs a 3D grid")
    sh = fft(g, _scalar(psi))
    s = _att_sym(A, g.xi_d)
    return GridField(g, ifft(g, np.stack([c * sh for c in s])))


def _grid_of(rep: SymplecticRep, grid: Grid | None) -> Grid:
    for p in (rep.phi, rep.psi):
        if isinstance(p, GridField):
            if grid is not None and p.grid != grid:
                raise ShapeError("potential grid differs from the requested grid")
            return p.grid
    if grid is None:
        raise ValueError("radial potentials need a grid to synthesize on")
    return grid


def _check_2d(rep: SymplecticRep):
    if rep.kind is not RepKind.Rep11 or not (_is_e3(rep.A) and _is_e3(rep.B)):
        raise FrameError("2D representations are Rep11 with A and B along e3")


def synthesize(rep: SymplecticRep, grid: Grid | None = None) -> GridField:
    """Velocity field of the representation on a periodic grid."""
    g = _grid_of(rep, grid)
    ph = _potential_hat(g, rep.phi)
    sh = _potential_hat(g, rep.psi)
    if g.dim == 2:
        _check_2d(rep)
        c = rep.A[2] * ph + rep.B[2] * sh
        k1, k2 = g.xi_d
        return GridField(g, ifft(g, np.stack([-1j * k2 * c, 1j * k1 * c])))
    xi = g.xi_d
    A, B = rep.A, rep.B
    if rep.kind is RepKind.Rep11:
        a, b = _cross_sym(A, xi), _cross_sym(B, xi)
        uh = [1j * a[j] * ph + 1j * b[j] * sh for j in range(3)]
    elif rep.kind is RepKind.Rep12:
        a, b = _cross_sym(A, xi), _att_sym(B, xi)
        uh = [1j * a[j] * ph + b[j] * sh for j in range(3)]
    else:
        a, b = _att_sym(A, xi), _att_sym(B, xi)
        uh = [a[j] * ph + b[j] * sh for j in range(3)]
    return GridField(g, ifft(g, np.stack(uh)))


def vorticity_of_rep(rep: SymplecticRep, grid: Grid | None = None) -> GridField:
    """Vorticity straight from the potentials (scalar on 2D grids)."""
    g = _grid_of(rep, grid)
    ph = _potential_hat(g, rep.phi)
    sh = _potential_hat(g, rep.psi)
    if g.dim == 2:
        _check_2d(rep)
        c = rep.A[2] * ph + rep.B[2] * sh
        return GridField(g, ifft(g, -g.xi2 * c)[None])
    xi = g.xi_d
    k2 = sum(x * x for x in xi)
    A, B = rep.A, rep.B

    def from_cross(C, fh):  # curl of (C x grad) f = -((C x grad) x grad) f
        s = _att_sym(C, xi)
        return [-s[j] * fh for j in range(3)]

    def from_att(C, fh):  # curl of ((C x grad) x grad) f = (C x grad) lap f
        s = _cross_sym(C, xi)
        return [-1j * s[j] * k2 * fh for j in range(3)]

    if rep.kind is RepKind.Rep11:
        parts = (from_cross(A, ph), from_cross(B, sh))
    elif rep.kind is RepKind.Rep12:
        parts = (from_cross(A, ph), from_att(B, sh))
    else:
        parts = (from_att(A, ph), from_att(B, sh))
    return GridField(g, ifft(g, np.stack([parts[0][j] + parts[1][j] for j in range(3)])))


@dataclass(frozen=True)
class KilledFraction:
    """Share of the right-hand-side energy on modes whose symbol was too small to divide by."""

    phi: float
    psi: float

    @property
    def value(self) -> float:
        return max(self.phi, self.psi)

    def __float__(self):
        return self.value

    @property
    def ill_posed(self) -> bool:
        return self.value > 0.5


def _rfft_weights(grid: Grid) -> np.ndarray:
    k = grid.k_int[-1]
    w = np.where((k == 0) | (k == grid.n // 2), 1.0, 2.0)
    return np.broadcast_to(w, grid.spectral_shape)


def _divide(num, den, energy, weights):
    """num/den on modes with |den| >= EPS_KILL*max|den|; return (quotient, killed energy share)."""
    mag = np.abs(den)
    keep = mag >= EPS_KILL * mag.max() if mag.max() > 0 else np.zeros(mag.shape, bool)
    q = np.zeros_like(num)
    q[keep] = num[keep] / den[keep]
    total = float(np.sum(weights * energy))
    killed = float(np.sum((weights * energy)[~keep])) / total if total > 0 else 0.0
    return q, killed


def recover_potentials(u: GridField, omega: GridField | None = None, kind=RepKind.Rep12,
                       A=(0, 0, 1), B=(0, 0, 1)):
    """Potentials (phi, psi) reproducing ``u`` in the given representation.

    Each mode solves the representation's 2x2 tangent-plane system; modes
    where the relevant symbol vanishes (always including xi = 0) are set to
    zero and reported through the returned ``KilledFraction``.
    """
    kind = RepKind.parse(kind)
    A, B = as_frame_vector(A), as_frame_vector(B)
    g = u.grid
    if u.components != g.dim:
        raise ShapeError("recover_potentials needs a velocity field")
    uh = fft(g, u.data)
    w = _rfft_weights(g)
    xi = g.xi_d
    k2 = sum(x * x for x in xi)

    if g.dim == 2:
        if kind is not RepKind.Rep11 or not (_is_e3(A) and _is_e3(B)):
            raise FrameError("2D recovery supports Rep11 with A, B along e3")
        k1, kk2 = xi
        wh = 1j * k1 * uh[1] - 1j * kk2 * uh[0]
        # planar flows carry the whole stream function in phi (psi = 0)
        phi_h, kp = _divide(-wh, k2 * A[2], np.abs(wh) ** 2, w)
        zero = GridField(g, np.zeros((1,) + g.shape))
        return GridField(g, ifft(g, phi_h)[None]), zero, KilledFraction(kp, 0.0)

    if omega is not None:
        if omega.grid != g or omega.components != 3:
            raise ShapeError("omega must be a 3D vector field on the velocity grid")
        wh = fft(g, omega.data)
    else:
        wh = np.stack([1j * (xi[1] * uh[2] - xi[2] * uh[1]),
                       1j * (xi[2] * uh[0] - xi[0] * uh[2]),
                       1j * (xi[0] * uh[1] - xi[1] * uh[0])])
    a, b = _cross_sym(A, xi), _cross_sym(B, xi)

    def dot(s, v):
        return sum(s[j] * v[j] for j in range(3))

    e_u = np.sum(np.abs(uh) ** 2, axis=0)
    e_w = np.sum(np.abs(wh) ** 2, axis=0)
    if kind is RepKind.Rep12:
        S = -(A @ B) * k2 + dot(A, xi) * dot(B, xi)
        phi_h, kp = _divide(1j * dot(b, uh), S, e_u, w)
        psi_h, ks = _divide(1j * dot(a, wh), -k2 * S, e_w, w)
    else:
        if frame_mode(A, B) in ("aligned", "parallel"):
            raise FrameError(f"{kind.value} recovery needs linearly independent A and B")
        axb = np.cross(A, B)
        den = k2 * dot(axb, xi)
        if kind is RepKind.Rep22:
            phi_h, kp = _divide(dot(b, uh), den, e_u, w)
            psi_h, ks = _divide(-dot(a, uh), den, e_u, w)
        else:
            phi_h, kp = _divide(-dot(b, wh), den, e_w, w)
            psi_h, ks = _divide(dot(a, wh), den, e_w, w)
    killed = KilledFraction(kp, ks)
    if killed.ill_posed:
        log.warning("potential recovery is ill-posed: killed fraction %.3f", killed.value)
    return GridField(g, ifft(g, phi_h)[None]), GridField(g, ifft(g, psi_h)[None]), killed
