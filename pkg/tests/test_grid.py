import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfns import grid as G


def test_grid_validation():
    assert G.build_grid(3, 8, 1.0).shape == (8, 8, 8)
    assert G.Grid(3, 48, 8.0).n == 48  # 3 * 2^4 is an accepted FFT size
    for bad in [(3, 7, 1.0), (3, 4, 1.0), (3, 1024, 1.0), (4, 16, 1.0), (2, 16, 0.0), (2, 40, 1.0)]:
        with pytest.raises(ValueError):
            G.Grid(*bad)


def test_coordinates_are_origin_centered():
    g = G.Grid(2, 16, 4.0)
    assert g.x1d[g.n // 2] == 0.0
    assert g.x1d[0] == -2.0
    assert np.isclose(g.h, 0.25)
    assert g.radius.min() == 0.0


@pytest.mark.parametrize("dim", [2, 3])
def test_spectral_derivatives_of_trig_modes(dim):
    g = G.Grid(dim, 16, 2 * np.pi)
    f = G.GridField(g, np.sin(2 * g.coords[0]) * np.cos(g.coords[-1]))
    grad = G.diff(f, "gradient")
    expected0 = 2 * np.cos(2 * g.coords[0]) * np.cos(g.coords[-1])
    assert np.max(np.abs(grad.data[0] - expected0)) < 1e-12
    lap = G.diff(f, "laplacian")
    assert np.max(np.abs(lap.data[0] + 5 * f.data[0])) < 1e-12
    bi = G.diff(f, "biharmonic")
    assert np.max(np.abs(bi.data[0] - 25 * f.data[0])) < 1e-11


def test_curl_of_gradient_and_divergence_of_curl_vanish():
    g = G.Grid(3, 16, 2 * np.pi)
    rng = np.random.default_rng(0)
    f = G.dealias(G.GridField(g, rng.standard_normal(g.shape)))
    assert G.diff(G.diff(f, "gradient"), "curl").norm_inf() < 1e-10
    v = G.dealias(G.GridField(g, rng.standard_normal((3,) + g.shape)))
    assert G.diff(G.diff(v, "curl"), "divergence").norm_inf() < 1e-10


def test_2d_curl_conventions():
    g = G.Grid(2, 16, 2 * np.pi)
    psi = G.GridField(g, np.sin(g.coords[0]) * np.sin(2 * g.coords[1]))
    u = G.diff(psi, "curl")
    assert u.components == 2
    assert np.allclose(u.data[0], 2 * np.sin(g.coords[0]) * np.cos(2 * g.coords[1]))
    assert np.allclose(u.data[1], -np.cos(g.coords[0]) * np.sin(2 * g.coords[1]))
    w = G.diff(u, "curl")
    assert w.is_scalar
    assert np.allclose(w.data[0], 5 * psi.data[0])  # curl of (d2 psi, -d1 psi) = -lap psi


def test_dealias_mask_removes_high_modes():
    g = G.Grid(2, 32, 2 * np.pi)
    f = G.GridField(g, np.cos(12 * g.coords[0]) + np.cos(3 * g.coords[1]))
    out = G.dealias(f)
    assert np.allclose(out.data[0], np.cos(3 * g.coords[1]), atol=1e-12)


def test_leray_projection_is_idempotent_and_divergence_free():
    g = G.Grid(3, 16, 2 * np.pi)
    rng = np.random.default_rng(1)
    v = G.GridField(g, rng.standard_normal((3,) + g.shape))
    p = G.leray_project(v)
    assert G.diff(p, "divergence").norm_inf() < 1e-10
    assert np.max(np.abs(G.leray_project(p).data - p.data)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_poisson_bracket_antisymmetry(seed):
    g = G.Grid(2, 16, 2 * np.pi)
    rng = np.random.default_rng(seed)
    f = G.dealias(G.GridField(g, rng.standard_normal(g.shape)))
    h = G.dealias(G.GridField(g, rng.standard_normal(g.shape)))
    assert G.poisson_bracket(f, f).norm_inf() < 1e-10
    fh, hf = G.poisson_bracket(f, h), G.poisson_bracket(h, f)
    assert np.max(np.abs(fh.data + hf.data)) < 1e-10 * max(fh.norm_inf(), 1.0)


def test_poisson_bracket_of_radial_functions_vanishes():
    g = G.Grid(2, 128, 16.0)  # resolved: the Gaussian tail is below round-off at the dealiasing cutoff
    f = G.GridField(g, np.exp(-g.radius**2))
    h = G.GridField(g, np.exp(-(g.radius**2) / 2))
    assert G.poisson_bracket(f, h).norm_inf() < 1e-12


def test_poisson_bracket_rejects_3d():
    g = G.Grid(3, 8, 1.0)
    with pytest.raises(G.ShapeError):
        G.poisson_bracket(G.zeros(g), G.zeros(g))


def test_solve_poisson_round_trip_and_mean_check():
    g = G.Grid(2, 32, 2 * np.pi)
    phi = G.GridField(g, np.sin(g.coords[0]) + np.cos(3 * g.coords[1]))
    rhs = G.diff(phi, "laplacian")
    assert np.max(np.abs(G.solve_poisson(rhs).data - phi.data)) < 1e-12
    with pytest.raises(ValueError):
        G.solve_poisson(G.GridField(g, np.ones(g.shape)))


def test_field_arithmetic_and_shape_errors():
    g = G.Grid(2, 8, 1.0)
    a = G.GridField(g, np.ones(g.shape))
    b = a * 2.0 - a
    assert np.all(b.data == 1.0)
    assert np.all((-a).data == -1.0)
    with pytest.raises(G.ShapeError):
        a + G.zeros(g, 2)
    with pytest.raises(ValueError):
        G.GridField(g, np.full(g.shape, np.nan))
    with pytest.raises(G.ShapeError):
        G.diff(a, "divergence")


def test_sample_stacks_vector_results():
    g = G.Grid(2, 8, 2.0)
    f = G.sample(g, lambda x, y: (x, y))
    assert f.components == 2
    assert np.array_equal(f.data[0], g.coords[0])


def test_spectral_round_trip():
    g = G.Grid(3, 8, 1.0)
    rng = np.random.default_rng(3)
    f = G.GridField(g, rng.standard_normal((3,) + g.shape))
    assert np.allclose(G.to_physical(G.to_spectral(f)).data, f.data, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([(2, 8), (2, 16), (3, 8)]), st.floats(0.5, 20.0), st.integers(1, 3))
def test_sfns1_round_trip(tmp_path_factory, shape, L, comps):
    dim, n = shape
    g = G.Grid(dim, n, L)
    data = np.random.default_rng(n).standard_normal((comps,) + g.shape)
    f = G.GridField(g, data)
    back = G.from_bytes(G.to_bytes(f))
    assert back.grid == g and np.array_equal(back.data, f.data)
    path = tmp_path_factory.mktemp("io") / "f.sfns"
    G.write_field(path, f)
    assert np.array_equal(G.read_field(path).data, f.data)


def test_sfns1_rejects_bad_headers():
    g = G.Grid(2, 8, 1.0)
    buf = bytearray(G.to_bytes(G.zeros(g)))
    with pytest.raises(ValueError):
        G.from_bytes(b"XXXX" + bytes(buf[4:]))
    with pytest.raises(ValueError):
        G.from_bytes(bytes(buf[:-8]))
