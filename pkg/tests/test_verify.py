import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfns import catalog as C
from sfns import grid as G
from sfns import radial as R
from sfns import symmetry as S
from sfns import verify as V
from sfns.evolve import SolverConfig, evolve_ns3d
from sfns.frames import SymplecticRep, synthesize


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9), st.floats(0.01, 0.5))
def test_fd_partial_is_exact_on_degree_eight_polynomials(coeffs, h):
    p = np.polynomial.Polynomial(coeffs)
    x = np.linspace(-1, 1, 7)[:, None] * np.ones((1, 2))
    got = V.fd_partial(lambda y: p(y[:, 0]), x, 0, h)
    want = p.deriv()(x[:, 0])
    assert np.allclose(got, want, rtol=1e-8, atol=1e-8 * max(1.0, np.max(np.abs(coeffs))))


def _abc(t=0.0, nu=0.0):
    def f(x):
        x = np.atleast_2d(x)
        a, b, c = x[:, 0], x[:, 1], x[:, 2]
        return np.exp(-nu * t) * np.stack([np.sin(c) + np.cos(b), np.sin(a) + np.cos(c), np.sin(b) + np.cos(a)], 1)
    return f


def test_divergence_check_on_samplers():
    x = V.random_ball_points(100, 0.0, 2.0)
    assert V.residual_divergence(_abc(), x).passed
    rep = V.residual_divergence(lambda y: np.atleast_2d(y) ** 2, x)
    assert not rep.passed and rep.linf > 1.0
    with pytest.raises(ValueError):
        V.residual_divergence(_abc())


def test_static_euler_rejects_compressible_input():
    x = V.random_ball_points(50, 0.5, 2.0)
    with pytest.raises(V.DivergencePrecheckError):
        V.residual_static_euler(lambda y: np.atleast_2d(y), x)


def test_static_euler_passes_for_beltrami_sampler_and_fails_for_generic_rep22():
    x = V.random_ball_points(200, 0.2, 4.0, seed=3)
    assert V.residual_static_euler(_abc(), x, h=0.05).passed
    A, B = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    g1, g2 = R.GaussianBump(1.0, 1.0), R.GaussianBump(0.5, 1.3)
    rep = V.residual_static_euler(lambda y: R.velocity_closed_form("22", A, B, g1, g2, y), x, h=0.02)
    assert not rep.passed
    assert rep.linf > 1e-3 * rep.scale


@pytest.mark.parametrize("name", ["bump2d", "periodic2d", "radialpair12", "poly11"])
def test_static_families_pass_the_static_check(name):
    params = {"coeffs": {"f2": 1.0, "g2": -0.3}} if name == "poly11" else {}
    sol = C.build_from_name(name, params)
    assert V.residual_static_euler(sol, tol=1e-8).passed


def test_pointwise_ns_check_detects_wrong_viscosity():
    sol = C.make_beltrami(1.5, nu=0.05)
    assert V.residual_ns(sol, t=0.4).passed
    assert not V.residual_ns(sol, nu=0.5, t=0.4).passed


def _abc_grid(g, t, nu):
    x, y, z = g.coords
    return G.GridField(g, np.exp(-nu * t) * np.stack([np.sin(z) + np.cos(y), np.sin(x) + np.cos(z),
                                                      np.sin(y) + np.cos(x)]))


def test_series_checks_on_exact_abc_flow():
    g = G.Grid(3, 16, 2 * np.pi)
    nu, dt = 0.1, 0.01
    us = [_abc_grid(g, k * dt, nu) for k in range(7)]
    rep = V.residual_ns(us, nu=nu, dt=dt, tol=1e-8)
    assert rep.passed, rep
    assert V.residual_vorticity(us, dt, nu, tol=1e-8).passed
    assert not V.residual_ns(us, nu=2 * nu, dt=dt, tol=1e-8).passed
    with pytest.raises(V.SeriesTooShortError):
        V.residual_ns(us[:4], nu=nu, dt=dt)
    with pytest.raises(ValueError):
        V.residual_ns(us)


def test_recovered_pressure_of_beltrami_field_is_minus_half_speed_squared():
    g = G.Grid(3, 16, 2 * np.pi)
    u = _abc_grid(g, 0.0, 0.0)
    P = V.recover_pressure(u).data[0]
    want = -0.5 * np.sum(u.data**2, axis=0)
    assert np.allclose(P, want - want.mean(), atol=1e-12)
    with pytest.raises(V.DivergencePrecheckError):
        V.recover_pressure(G.GridField(g, np.stack([np.sin(g.coords[0])] * 3)))


def test_heat_series_residual():
    g = G.Grid(2, 64, 20.0)
    nu, dt = 0.2, 0.005
    series = [G.GridField(g, R.heat_evolve_radial(R.GaussianBump(1.0, 1.0), nu * k * dt, 2).value(g.radius))
              for k in range(6)]
    assert V.residual_heat(series, dt, nu).passed
    assert not V.residual_heat(series, dt, 3 * nu).passed


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_energy_balance_of_decaying_abc_flow(rule):
    g = G.Grid(3, 16, 2 * np.pi)
    nu, dt = 0.1, 0.05
    us = [_abc_grid(g, k * dt, nu) for k in range(21)]
    E0 = V.energy(us[0])
    assert E0 == pytest.approx(3 * (2 * np.pi) ** 3, rel=1e-12)
    assert V.gradient_energy(us[0]) == pytest.approx(E0, rel=1e-12)  # unit wavenumbers
    err = V.energy_report(us, nu, dt=dt, rule=rule).balance_error
    assert np.max(err) < (1e-7 if rule == "simpson" else 1e-4)
    with pytest.raises(ValueError):
        V.energy_report(us, nu, dt=dt, rule="midpoint")


def test_report_serialises_to_json():
    rep = V.ResidualReport.build("ns", np.ones((4, 3)), 2.0, 1.0, grid=np.array([3, 16, 1.0]))
    d = json.loads(rep.to_json())
    assert d["linf"] == pytest.approx(np.sqrt(3))
    assert d["passed"] is True
    assert d["meta"]["grid"] == [3.0, 16.0, 1.0]


def test_divergence_examples():
    g = G.Grid(3, 16, 2 * np.pi)
    rng = np.random.default_rng(2)
    phi = G.dealias(G.GridField(g, rng.standard_normal(g.shape)))
    u = synthesize(SymplecticRep("22", [1.0, 0, 0], [0, 1.0, 0.5], phi, phi))
    assert V.residual_divergence(u).linf < 1e-11 * u.norm_inf() * g.n
    x = V.random_ball_points(50, 0.0, 2.0)
    rep = V.residual_divergence(lambda y: np.stack([y[:, 0], 0 * y[:, 0], 0 * y[:, 0]], 1), x)
    assert rep.linf == pytest.approx(1.0, abs=1e-10)
    assert V.residual_divergence(C.make_beltrami(1.0)).linf < 1e-10


def test_static_euler_examples():
    assert V.residual_static_euler(C.build_from_name("bump2d", {}), tol=1e-9).passed
    x = V.random_ball_points(20, 0.5, 2.0)
    assert V.residual_static_euler(lambda y: np.zeros_like(np.atleast_2d(y)), x).linf == 0.0
    g = G.Grid(3, 16, 2 * np.pi)
    rng = np.random.default_rng(3)
    xi = np.sqrt(g.xi2)
    band = G.fft(g, rng.standard_normal((3,) + g.shape)) * ((xi >= 1) & (xi <= 3))
    u = G.leray_project(G.GridField(g, G.ifft(g, band)))
    rep = V.residual_static_euler(u)
    assert rep.linf > 0.1 * rep.scale


def test_ns_examples_and_negative_control():
    sol = C.make_beltrami(1.0, nu=0.1)
    for t in (0.0, 0.3):
        assert V.residual_ns(sol, t=t, tol=1e-8).passed
    zero = C.make_poly_family("Poly11", {}, nu=0.1)
    assert V.residual_ns(zero).linf == 0.0
    # random 1e-3 relative perturbation of the psi amplitude breaks Phi = lam * Psi
    delta = 1e-3 * np.random.default_rng(11).choice([-1.0, 1.0])
    phi, _ = sol.potentials(0.0)
    psi = R.SincPair(1.0, 1.0 + delta, 0.0)
    rep = V.residual_ns(replace(sol, potentials_fn=lambda t: (phi, psi), dudt_fn=None), t=0.0, tol=1e-8)
    assert rep.linf > 1e-4 * rep.scale


def test_heat_residual_detects_frozen_field():
    g = G.Grid(2, 32, 2 * np.pi)
    nu, dt = 0.3, 0.1
    phi = G.GridField(g, np.sin(g.coords[0]))
    rep = V.residual_heat([phi] * 5, dt, nu)
    assert rep.linf == pytest.approx(nu * 1.0, rel=1e-12)


def test_heat2d_solution_on_fine_grid():
    g = G.Grid(2, 256, 24.0)
    sol = C.build_from_name("heat2d", {"nu": 0.05})
    dt = 0.01
    us = []
    for k in range(5):
        u = sol.velocity(k * dt, g.points)[:, :2]
        us.append(G.GridField(g, np.moveaxis(u.reshape(*g.shape, 2), -1, 0)))
    rep = V.residual_ns(us, nu=0.05, dt=dt, tol=1e-6)
    assert rep.passed, rep


def test_vorticity_residual_of_solver_output_at_48():
    g = G.Grid(3, 48, 8.0)
    e3 = [0.0, 0.0, 1.0]
    phi = G.GridField(g, (np.exp(-g.radius**2) * (1 + 0.3 * g.coords[0]))[None])
    u0 = synthesize(SymplecticRep("12", e3, e3, phi, G.zeros(g))) * 0.5
    rec = evolve_ns3d(u0, SolverConfig(nu=0.05, dt=0.01, T=0.06, snapshot_every=1), store_vorticity=True)
    rep = V.residual_vorticity(rec.series("u"), 0.01, 0.05, rec.series("omega"))
    assert rep.passed, rep


def test_pressure_and_energy_trivial_cases():
    g = G.Grid(3, 8, 2 * np.pi)
    assert V.recover_pressure(G.zeros(g, 3)).norm_inf() == 0.0
    es = V.energy_report([G.zeros(g, 3)] * 4, 0.1, dt=0.1)
    assert np.all(es.E == 0) and np.all(es.D == 0) and np.all(es.balance_error == 0)


def test_inviscid_run_conserves_energy():
    g = G.Grid(3, 16, 2 * np.pi)
    x, y, z = g.coords
    u0 = G.GridField(g, np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), 0 * x]))
    rec = evolve_ns3d(u0, SolverConfig(nu=0.0, dt=0.01, T=0.5))
    E = np.array(rec.E)
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-8


@pytest.mark.parametrize("Q", [S.rho_cyclic(), S.rho_b([0.3, -0.5, 1.0])], ids=["cyclic", "about_B"])
def test_static_euler_residual_is_rotation_invariant(Q):
    A, B = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    g1, g2 = R.GaussianBump(1.0, 1.0), R.GaussianBump(0.5, 1.3)

    def f(y):
        return R.velocity_closed_form("22", A, B, g1, g2, y)

    x = V.random_ball_points(100, 0.2, 3.0, seed=6)
    base = V.residual_static_euler(f, x, h=0.02)
    rotated = V.residual_static_euler(S.orthogonal_conjugate(f, Q, vector=True), x @ Q.T, h=0.02)
    assert abs(rotated.linf - base.linf) < 1e-10 * base.linf
