import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sfns import grid as G
from sfns import radial as R
from sfns.frames import (FrameError, RepKind, SymplecticRep, cross_grad, cross_grad_curl, frame_mode,
                         recover_potentials, synthesize, validate_frames, vorticity_of_rep)


@pytest.mark.parametrize("text,kind", [("12", RepKind.Rep12), ("(1,2)", RepKind.Rep12), ("Rep22", RepKind.Rep22),
                                       ("rep11", RepKind.Rep11), (RepKind.Rep11, RepKind.Rep11)])
def test_repkind_parse(text, kind):
    assert RepKind.parse(text) is kind


def test_repkind_parse_rejects_unknown():
    with pytest.raises(ValueError):
        RepKind.parse("13")


def test_frame_modes_and_validation():
    e1, e2, e3 = np.eye(3)
    assert frame_mode(e3, e3) == "aligned"
    assert frame_mode(e1, e2) == "perpendicular"
    assert frame_mode(e1, 2 * e1) == "parallel"
    assert frame_mode(e1, e1 + e2) == "independent"
    assert validate_frames(RepKind.Rep22, e1, e2) == "independent"
    assert validate_frames(RepKind.Rep11, e3, e3) == "aligned"
    with pytest.raises(FrameError):
        validate_frames(RepKind.Rep22, e3, e3)
    with pytest.raises(FrameError):
        validate_frames(RepKind.Rep12, e1, e1 + e2)
    with pytest.raises(FrameError):
        SymplecticRep("11", [0, 0, 0], e1)
    with pytest.raises(FrameError):
        SymplecticRep("11", [np.nan, 0, 1], e1)


def _random_potentials(g, seed):
    rng = np.random.default_rng(seed)
    smooth = np.exp(-(g.radius**2) / 2)
    phi = G.GridField(g, smooth * (1 + 0.5 * np.tanh(g.coords[0] + rng.normal())))
    psi = G.GridField(g, smooth * (1 - 0.4 * np.sin(g.coords[1] + rng.normal())))
    return phi, psi


FRAMES = {"11": ([1.0, 0.2, -0.3], [0.1, 1.0, 0.5]), "12": ([0.3, -0.4, 1.0], [0.3, -0.4, 1.0]),
          "22": ([1.0, 0.5, 0.0], [0.0, 0.4, 1.0])}


@pytest.mark.parametrize("kind", ["11", "12", "22"])
def test_synthesis_is_divergence_free_and_vorticity_matches_curl(kind):
    g = G.Grid(3, 32, 10.0)
    phi, psi = _random_potentials(g, 0)
    rep = SymplecticRep(kind, *FRAMES[kind], phi, psi)
    u = synthesize(rep)
    assert G.diff(u, "divergence").norm_inf() < 1e-10 * u.norm_inf() * g.n
    w = vorticity_of_rep(rep)
    assert np.max(np.abs(w.data - G.diff(u, "curl").data)) < 1e-9 * max(w.norm_inf(), 1.0)


@pytest.mark.parametrize("kind", ["11", "12", "22"])
def test_grid_synthesis_matches_radial_closed_form(kind):
    g = G.Grid(3, 64, 16.0)
    phi_p, psi_p = R.GaussianBump(1.0, 1.0), R.GaussianBump(-0.5, 1.3)
    A, B = FRAMES[kind]
    u = synthesize(SymplecticRep(kind, A, B, phi_p, psi_p), grid=g)
    inner = (g.radius < 4.0).ravel()
    pts = g.points[inner]
    closed = R.velocity_closed_form(kind, A, B, phi_p, psi_p, pts)
    grid_vals = u.data.reshape(3, -1)[:, inner].T
    assert np.max(np.abs(grid_vals - closed)) < 1e-9 * np.max(np.abs(closed))


def test_planar_rep11():
    g = G.Grid(2, 64, 16.0)
    e3 = [0.0, 0.0, 1.0]
    phi = G.GridField(g, np.exp(-g.radius**2) * (1 + 0.2 * g.coords[0]))
    u = synthesize(SymplecticRep("11", e3, e3, phi, None))
    assert u.components == 2
    # A x grad phi with A = e3 is (-d2 phi, d1 phi)
    grad = G.diff(phi, "gradient")
    assert np.allclose(u.data[0], -grad.data[1], atol=1e-12)
    assert np.allclose(u.data[1], grad.data[0], atol=1e-12)
    ph, ps, killed = recover_potentials(u, None, "11", e3, e3)
    assert ps.norm_inf() == 0.0  # planar flows keep psi = 0
    assert np.max(np.abs(ph.data - (phi.data - phi.data.mean()))) < 1e-12
    assert float(killed) < 1e-20
    with pytest.raises(FrameError):
        recover_potentials(u, None, "11", [1.0, 0, 0], e3)


unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array)


@settings(max_examples=15, deadline=None)
@given(unit, unit, st.integers(0, 1000))
def test_rep22_recovery_round_trip_for_random_frames(A, B, seed):
    assume(np.linalg.norm(A) > 0.2 and np.linalg.norm(B) > 0.2)
    assume(np.linalg.norm(np.cross(A, B)) > 0.2 * np.linalg.norm(A) * np.linalg.norm(B))
    g = G.Grid(3, 16, 8.0)
    phi, psi = _random_potentials(g, seed)
    u = synthesize(SymplecticRep("22", A, B, phi, psi))
    ph, ps, killed = recover_potentials(u, None, "22", A, B)
    u2 = synthesize(SymplecticRep("22", A, B, ph, ps))
    # modes with (A x B) . xi = 0 are dropped; their share is reported
    err = np.max(np.abs(u2.data - u.data)) / u.norm_inf()
    assert err < 1e-8 or float(killed) > 1e-12


def test_recovery_reports_ill_posed_fields():
    g = G.Grid(3, 16, 2 * np.pi)
    e3 = [0.0, 0.0, 1.0]
    # every mode has xi parallel to e3, where the aligned (1,2) symbol vanishes
    u = G.GridField(g, np.stack([np.sin(g.coords[2]), np.cos(2 * g.coords[2]), 0 * g.coords[2]]))
    _, _, killed = recover_potentials(u, None, "12", e3, e3)
    assert killed.ill_posed
    assert float(killed) == pytest.approx(1.0)


def test_recovery_rejects_scalars():
    g = G.Grid(3, 8, 1.0)
    with pytest.raises(G.ShapeError):
        recover_potentials(G.zeros(g), None, "12")


def _random_scalar(g, seed):
    rng = np.random.default_rng(seed)
    return G.dealias(G.GridField(g, rng.standard_normal(g.shape)))


def test_cross_grad_operators():
    g = G.Grid(3, 16, 2 * np.pi)
    A = np.array([0.3, -1.0, 0.7])
    const = G.GridField(g, np.full(g.shape, 2.5))
    assert cross_grad(A, const).norm_inf() < 1e-14 and cross_grad_curl(A, const).norm_inf() < 1e-14
    psi = _random_scalar(g, 4)
    v = cross_grad(A, psi)
    assert G.diff(v, "divergence").norm_inf() < 1e-12 * max(v.norm_inf(), 1.0) * g.n
    w = cross_grad_curl(A, psi)
    assert G.diff(w, "divergence").norm_inf() < 1e-12 * max(w.norm_inf(), 1.0) * g.n
    assert np.max(np.abs(G.diff(v, "curl").data + w.data)) < 1e-10 * w.norm_inf()
    with pytest.raises(FrameError):
        cross_grad([0, 0, 0], psi)
    with pytest.raises(FrameError):
        cross_grad([1.0, 0, 0], G.zeros(G.Grid(2, 8, 1.0)))


def test_synthesis_identities():
    g = G.Grid(3, 16, 2 * np.pi)
    A, B = np.array([1.0, 0.5, 0.0]), np.array([0.0, 0.4, 1.0])
    phi, psi = _random_scalar(g, 5), _random_scalar(g, 6)
    assert synthesize(SymplecticRep("12", A, A, G.zeros(g), G.zeros(g))).norm_inf() == 0.0
    u11 = synthesize(SymplecticRep("11", A, A, phi, phi))
    assert np.allclose(u11.data, 2 * cross_grad(A, phi).data, atol=1e-12)
    # Rep22: (B x grad) . u = -(A x B) . grad lap phi
    u22 = synthesize(SymplecticRep("22", A, B, phi, psi))
    bxgrad_u = sum(cross_grad(B, G.GridField(g, u22.data[j])).data[j] for j in range(3))
    grad_lap = G.diff(G.diff(phi, "laplacian"), "gradient").data
    rhs = -np.einsum("i,i...->...", np.cross(A, B), grad_lap)
    assert np.max(np.abs(bxgrad_u - rhs)) < 1e-9 * np.max(np.abs(rhs))
    # Rep12 with psi = 0: omega = -((A x grad) x grad) phi
    w = vorticity_of_rep(SymplecticRep("12", A, A, phi, G.zeros(g)))
    assert np.allclose(w.data, -cross_grad_curl(A, phi).data, atol=1e-10 * w.norm_inf())
    assert vorticity_of_rep(SymplecticRep("12", A, A, G.zeros(g), G.zeros(g))).norm_inf() == 0.0


@pytest.mark.parametrize("kind", ["11", "12", "22"])
def test_synthesized_modes_are_tangent_to_wavevectors(kind):
    g = G.Grid(3, 16, 2 * np.pi)
    for seed in range(10):
        u = synthesize(SymplecticRep(kind, *FRAMES[kind], _random_scalar(g, seed), _random_scalar(g, seed + 50)))
        uh = G.fft(g, u.data)
        dot = np.abs(sum(x * uh[j] for j, x in enumerate(g.xi_d)))
        mag = np.sqrt(np.sum(np.abs(uh) ** 2, axis=0)) * np.sqrt(g.xi2)
        keep = g.dealias_mask  # the potentials are band-limited to these modes
        assert np.all(dot[keep] <= 1e-12 * mag[keep] + 1e-12)
        assert G.diff(u, "divergence").norm_inf() < 1e-11 * u.norm_inf() * g.n


def test_recovery_of_zero_and_of_a_single_aligned_mode():
    g = G.Grid(3, 16, 2 * np.pi)
    e3 = [0.0, 0.0, 1.0]
    ph, ps, killed = recover_potentials(G.zeros(g, 3), None, "12", e3, e3)
    assert ph.norm_inf() == 0 and ps.norm_inf() == 0 and float(killed) == 0
    # phi = cos(x1) has xi perpendicular to A = e3, where the aligned symbol is -|xi|^2
    phi = G.GridField(g, np.cos(g.coords[0]))
    u = synthesize(SymplecticRep("12", e3, e3, phi, G.zeros(g)))
    assert np.allclose(u.data[1], -np.sin(g.coords[0]), atol=1e-13)
    ph, ps, _ = recover_potentials(u, None, "12", e3, e3)
    assert np.max(np.abs(ph.data - phi.data)) < 1e-13 and ps.norm_inf() < 1e-13
