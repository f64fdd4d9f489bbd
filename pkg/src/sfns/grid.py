"""Periodic-box fields, spectral transforms and differential operators.

The box is origin-centered: sample points are ``x_j = j*L/n - L/2`` so
radial test fields are centered on a grid node. All transforms use the
real-to-complex FFT over the spatial axes; field data is stored with the
component axis first, ``data.shape == (components, n, ..., n)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

OP_KINDS = ("gradient", "divergence", "curl", "laplacian", "biharmonic")


class ShapeError(ValueError):
    """Field components or dimension incompatible with the requested operation."""


def _fft_size(n: int) -> bool:
    """True for powers of two and three times a power of two (e.g. 48, 96)."""
    m = n // 3 if n % 3 == 0 else n
    return m > 0 and m & (m - 1) == 0


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    L: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n > 512 or not _fft_size(self.n):
            raise ValueError(f"n must be 2^k or 3*2^k in [8, 512], got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @cached_property
    def x1d(self) -> np.ndarray:
        return np.arange(self.n) * self.h - self.L / 2

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x1d] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def points(self) -> np.ndarray:
        """All sample points as an ``(n**dim, dim)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.coords], axis=-1)

    @cached_property
    def k_int(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, broadcastable to ``spectral_shape``."""
        ks = []
        for ax in range(self.dim):
            if ax == self.dim - 1:
                k = np.arange(self.n // 2 + 1, dtype=float)
            else:
                k = np.fft.fftfreq(self.n, d=1.0 / self.n)
            shape = [1] * self.dim
            shape[ax] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        """Physical wavevector components 2*pi*k/L."""
        return tuple(2 * np.pi / self.L * k for k in self.k_int)

    @cached_property
    def xi_d(self) -> tuple[np.ndarray, ...]:
        """Wavevector for odd derivatives: Nyquist entries zeroed."""
        out = []
        for k, x in zip(self.k_int, self.xi):
            out.append(np.where(np.abs(k) == self.n // 2, 0.0, x))
        return tuple(out)

    @cached_property
    def xi2(self) -> np.ndarray:
        return sum(x * x for x in self.xi)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.spectral_shape, dtype=bool)
        for k in self.k_int:
            keep = keep & (np.abs(k) <= self.n / 3)
        return keep


def build_grid(dim: int, n: int, L: float) -> Grid:
    return Grid(int(dim), int(n), float(L))


@dataclass(frozen=True, eq=False)
class GridField:
    grid: Grid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape == self.grid.shape:
            data = data[None]
        if data.ndim != self.grid.dim + 1 or data.shape[1:] != self.grid.shape:
            raise ShapeError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    @property
    def values(self) -> np.ndarray:
        """Scalar view (drops the component axis) or the full array."""
        return self.data[0] if self.is_scalar else self.data

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def norm_l2(self) -> float:
        """Continuous L2 norm over the box."""
        return float(np.sqrt(np.sum(self.data**2) * self.grid.cell_volume))

    def __add__(self, other: GridField) -> GridField:
        _check_same(self, other)
        return GridField(self.grid, self.data + other.data)

    def __sub__(self, other: GridField) -> GridField:
        _check_same(self, other)
        return GridField(self.grid, self.data - other.data)

    def __mul__(self, c: float) -> GridField:
        return GridField(self.grid, self.data * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> GridField:
        return GridField(self.grid, -self.data)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    @property
    def components(self) -> int:
        return self.coefficients.shape[0]


def _check_same(a: GridField, b: GridField):
    if a.grid != b.grid or a.components != b.components:
        raise ShapeError("fields live on different grids or have different components")


def sample(grid: Grid, func, components: int | None = None) -> GridField:
    """Evaluate ``func(*coords)`` on the grid; vector results are stacked."""
    out = func(*grid.coords)
    if isinstance(out, (tuple, list)):
        out = np.stack([np.broadcast_to(np.asarray(o, float), grid.shape) for o in out])
    else:
        out = np.broadcast_to(np.asarray(out, dtype=float), grid.shape)[None]
    if components is not None and out.shape[0] != components:
        raise ShapeError(f"expected {components} components, got {out.shape[0]}")
    return GridField(grid, out)


def zeros(grid: Grid, components: int = 1) -> GridField:
    return GridField(grid, np.zeros((components,) + grid.shape))


# -- transforms ---------------------------------------------------------------

def fft(grid: Grid, data: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(data, axes=grid.axes)


def ifft(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(coeffs, s=grid.shape, axes=grid.axes)


def to_spectral(f: GridField, dealias: bool = False) -> SpectralField:
    c = fft(f.grid, f.data)
    if dealias:
        c = c * f.grid.dealias_mask
    return SpectralField(f.grid, c)


def to_physical(s: SpectralField) -> GridField:
    return GridField(s.grid, ifft(s.grid, s.coefficients))


def dealias(f: GridField) -> GridField:
    return to_physical(to_spectral(f, dealias=True))


# -- spectral building blocks (operate on coefficient arrays) -----------------

def _grad_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """fh: scalar coefficients (spectral_shape) -> (dim, ...)"""
    return np.stack([1j * k * fh for k in grid.xi_d])


def _div_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    return sum(1j * grid.xi_d[j] * vh[j] for j in range(grid.dim))


def _curl_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    k1, k2, k3 = grid.xi_d
    return np.stack([
        1j * (k2 * vh[2] - k3 * vh[1]),
        1j * (k3 * vh[0] - k1 * vh[2]),
        1j * (k1 * vh[1] - k2 * vh[0]),
    ])


def diff(f: GridField, op_kind: str) -> GridField:
    """Spectrally exact derivative of the band-limited interpolant of ``f``.

    ``curl`` accepts a 3D vector, a 2D scalar ``psi`` (returning the
    in-plane vector ``curl(psi e3) = (d2 psi, -d1 psi)``) or a 2D vector
    (returning the scalar ``d1 u2 - d2 u1``).
    """
    g = f.grid
    fh = fft(g, f.data)
    if op_kind == "gradient":
        if not f.is_scalar:
            raise ShapeError("gradient needs a scalar field")
        out = _grad_hat(g, fh[0])
    elif op_kind == "divergence":
        if f.components != g.dim:
            raise ShapeError("divergence needs a vector field with dim components")
        out = _div_hat(g, fh)[None]
    elif op_kind == "curl":
        if g.dim == 3 and f.components == 3:
            out = _curl_hat(g, fh)
        elif g.dim == 2 and f.is_scalar:
            k1, k2 = g.xi_d
            out = np.stack([1j * k2 * fh[0], -1j * k1 * fh[0]])
        elif g.dim == 2 and f.components == 2:
            k1, k2 = g.xi_d
            out = (1j * k1 * fh[1] - 1j * k2 * fh[0])[None]
        else:
            raise ShapeError(f"curl undefined for {f.components} components in {g.dim}D")
    elif op_kind == "laplacian":
        out = -g.xi2 * fh
    elif op_kind == "biharmonic":
        out = g.xi2**2 * fh
    else:
        raise ValueError(f"unknown op_kind {op_kind!r}; expected one of {OP_KINDS}")
    return GridField(g, ifft(g, out))


def _dealiased_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return ifft(grid, coeffs * grid.dealias_mask)


def directional_derivative(u: GridField, w: GridField) -> GridField:
    """Dealiased ``(u . grad) w`` for any number of components of ``w``."""
    g = u.grid
    if u.components != g.dim:
        raise ShapeError("advecting velocity must have dim components")
    if w.grid != g:
        raise ShapeError("fields live on different grids")
    uu = _dealiased_physical(g, fft(g, u.data))
    wh = fft(g, w.data) * g.dealias_mask
    out = np.zeros_like(w.data)
    for j in range(g.dim):
        dj = ifft(g, 1j * g.xi_d[j] * wh)
        out += uu[j] * dj
    return GridField(g, ifft(g, fft(g, out) * g.dealias_mask))


def advect(u: GridField) -> GridField:
    """Dealiased ``(u . grad) u``."""
    return directional_derivative(u, u)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise cross product of component-first 3-vectors."""
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def project_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    xi = grid.xi_d
    k2 = sum(x * x for x in xi)
    safe = np.where(k2 == 0, 1.0, k2)
    proj = sum(xi[j] * vh[j] for j in range(grid.dim)) / safe
    return np.stack([vh[j] - xi[j] * proj for j in range(grid.dim)])


def leray_project(v: GridField) -> GridField:
    """Divergence-free part of ``v``; the mean flow passes through."""
    g = v.grid
    if v.components != g.dim:
        raise ShapeError("Leray projection needs a vector field with dim components")
    return GridField(g, ifft(g, project_hat(g, fft(g, v.data))))


def poisson_bracket(f: GridField, g_: GridField) -> GridField:
    """Dealiased ``{f, g} = d1 f d2 g - d2 f d1 g`` in 2D."""
    g = f.grid
    if g.dim != 2:
        raise ShapeError("Poisson bracket is defined for 2D grids only")
    if not (f.is_scalar and g_.is_scalar) or g_.grid != g:
        raise ShapeError("Poisson bracket needs two scalar fields on one grid")
    fh = fft(g, f.data[0]) * g.dealias_mask
    gh = fft(g, g_.data[0]) * g.dealias_mask
    k1, k2 = g.xi_d
    prod = (ifft(g, 1j * k1 * fh) * ifft(g, 1j * k2 * gh)
            - ifft(g, 1j * k2 * fh) * ifft(g, 1j * k1 * gh))
    return GridField(g, ifft(g, fft(g, prod) * g.dealias_mask)[None])


def solve_poisson(rhs: GridField) -> GridField:
    """Zero-mean solution of ``lap p = rhs``; rejects right-hand sides with nonzero mean."""
    g = rhs.grid
    if not rhs.is_scalar:
        raise ShapeError("Poisson solve needs a scalar right-hand side")
    mean = float(np.mean(rhs.data))
    if abs(mean) > 1e-10 * max(rhs.norm_inf(), 1e-300):
        raise ValueError(f"right-hand side has nonzero mean {mean:.3e}")
    rh = fft(g, rhs.data[0])
    safe = np.where(g.xi2 == 0, 1.0, g.xi2)
    ph = np.where(g.xi2 == 0, 0.0, -rh / safe)
    return GridField(g, ifft(g, ph)[None])


# -- SFNS1 binary format -------------------------------------------------------

_MAGIC = b"SFNS"
_HEADER = struct.Struct("<4sBBBId")


def to_bytes(f: GridField) -> bytes:
    g = f.grid
    head = _HEADER.pack(_MAGIC, 1, g.dim, f.components, g.n, g.L)
    return head + np.ascontiguousarray(f.data, dtype="<f8").tobytes()


def from_bytes(buf: bytes) -> GridField:
    if len(buf) < _HEADER.size:
        raise ValueError("truncated SFNS1 header")
    magic, version, dim, comps, n, L = _HEADER.unpack_from(buf)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != 1:
        raise ValueError(f"unsupported SFNS version {version}")
    g = build_grid(dim, n, L)
    count = comps * n**dim
    body = np.frombuffer(buf, dtype="<f8", count=count, offset=_HEADER.size)
    if body.size != count or len(buf) != _HEADER.size + 8 * count:
        raise ValueError("SFNS1 payload length mismatch")
    return GridField(g, body.reshape((comps,) + g.shape).astype(float))


def write_field(path, f: GridField) -> None:
    Path(path).write_bytes(to_bytes(f))


def read_field(path) -> GridField:
    return from_bytes(Path(path).read_bytes())
