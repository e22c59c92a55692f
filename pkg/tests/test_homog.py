"""Cell problems, effective tensors, and macroscopic wave models."""

import numpy as np
import pytest

from mswave.coeff import make_field
from mswave.fem import assemble_stiffness, l2_norm
from mswave.homog import (HomogError, WaveData, dispersive_coefficient_1d,
                          effective_wave_speed, harmonic_coordinate_1d,
                          homogenized_tensor, solve_boussinesq_1d,
                          solve_cell_problems, solve_fine_wave,
                          solve_homogenized_wave, solve_mean_zero,
                          wellprepared_initial)
from mswave.mesh import build_uniform_mesh
from mswave.timeint import make_time_grid

B0_EXACT = 1 / (32 * np.pi ** 2)  # second cell moment of 1/(2 + sin 2 pi y)


def test_harmonic_mean_1d():
    f = make_field("periodic_1d", params=[2, 1])
    cs = solve_cell_problems(f, 1024)
    a0 = homogenized_tensor(cs)
    assert abs(a0[0, 0] - 0.5) < 1e-6


def test_dispersive_coefficient_1d():
    f = make_field("periodic_1d", params=[2, 1])
    cs = solve_cell_problems(f, 1024)
    assert abs(dispersive_coefficient_1d(cs) - B0_EXACT) < 1e-6


def test_corrector_is_mean_zero_cosine():
    # chi(y) = -cos(2 pi y)/(4 pi) for the reference field
    f = make_field("periodic_1d", params=[2, 1])
    cs = solve_cell_problems(f, 512)
    y = cs.mesh.vertices[:, 0]
    chi = cs.chis[:, 0]
    np.testing.assert_allclose(chi, -np.cos(2 * np.pi * y) / (4 * np.pi),
                               atol=5e-6)
    assert abs(np.trapezoid(chi, y)) < 1e-10


def test_laminate_effective_tensor():
    # harmonic mean across layers, arithmetic mean along them
    f = make_field("laminate_2d", params=[1, 4])
    cs = solve_cell_problems(f, 64)
    a0 = homogenized_tensor(cs)
    np.testing.assert_allclose(a0, np.diag([1.6, 2.5]), atol=1e-3)


def test_voigt_reuss_bracket():
    f = make_field("piecewise_constant_sample",
                   params=[5, 0.6, 2.0, 1.1, 3.4, 0.9])
    cs = solve_cell_problems(f, 500)
    a0 = homogenized_tensor(cs)[0, 0]
    v = np.array([0.6, 2.0, 1.1, 3.4, 0.9])
    harm, arith = 1 / np.mean(1 / v), np.mean(v)
    assert harm - 1e-10 <= a0 <= arith + 1e-10
    # 1d effective coefficient is the harmonic mean exactly
    assert a0 == pytest.approx(harm, rel=1e-10)


def test_locally_periodic_slow_modulation():
    f = make_field("locally_periodic", params=[2, 1, 0.5])
    a0 = homogenized_tensor(solve_cell_problems(f, 512, slow_x=0.25))
    # slow factor (1 + 0.5 sin 2 pi x) scales the harmonic mean
    assert a0[0, 0] == pytest.approx(1.5 * 0.5, rel=1e-5)


def test_constant_field_has_no_corrector():
    f = make_field("constant", params=[0.7])
    cs = solve_cell_problems(f, 128)
    assert np.max(np.abs(cs.chis)) < 1e-12
    assert homogenized_tensor(cs)[0, 0] == pytest.approx(0.7, rel=1e-12)
    assert dispersive_coefficient_1d(cs) < 1e-20


def test_dispersive_coefficient_needs_1d():
    f = make_field("laminate_2d", params=[1, 4])
    cs = solve_cell_problems(f, 16)
    with pytest.raises(HomogError):
        dispersive_coefficient_1d(cs)


def test_solve_mean_zero_small_system():
    m = build_uniform_mesh(1, 32, periodic=True)
    S = assemble_stiffness(1.0, m, bc="periodic")
    M = np.asarray((S.matrix * 0).todense())  # weights: plain vertex mean
    w = np.ones(S.n_dofs)
    rhs = np.sin(2 * np.pi * np.arange(32) / 32)
    u = solve_mean_zero(S.matrix, w, rhs - rhs.mean())
    assert abs(w @ u) < 1e-10
    assert np.max(np.abs(S.matrix @ u - (rhs - rhs.mean()))) < 1e-9


def test_effective_wave_speed():
    assert effective_wave_speed(np.array([[0.25]])) == pytest.approx(0.5)
    assert effective_wave_speed(np.diag([1.6, 2.5])) == pytest.approx(
        np.sqrt(1.6))


def test_harmonic_coordinate_matches_closed_form():
    # G(x) = x + (1 - cos 2 pi x)/(4 pi) when a = 1/(2 + sin 2 pi x)
    f = make_field("periodic_1d", eps=1.0, params=[2, 1])
    m = build_uniform_mesh(1, 256)
    G = harmonic_coordinate_1d(f, m)
    x = m.vertices[:, 0]
    np.testing.assert_allclose(G, x + (1 - np.cos(2 * np.pi * x)) / (4 * np.pi),
                               atol=1e-5)
    assert G[0] == pytest.approx(0.0, abs=1e-14)
    assert G[-1] == pytest.approx(1.0, rel=1e-12)


def test_wellprepared_initial_constant_field_is_identity():
    f = make_field("constant", eps=0.1, params=[0.7])
    m = build_uniform_mesh(1, 64)
    g1 = lambda x: np.sin(np.pi * x[:, 0])
    u0 = wellprepared_initial(f, np.array([[0.7]]), g1, m)
    np.testing.assert_allclose(u0, g1(m.vertices), atol=1e-12)


def test_wellprepared_initial_carries_oscillation():
    eps = 1 / 16
    f = make_field("periodic_1d", eps=eps, params=[2, 1])
    m = build_uniform_mesh(1, 640)
    g1 = lambda x: np.sin(np.pi * x[:, 0])
    u0 = wellprepared_initial(f, np.array([[0.5]]), g1, m)
    # corrected data stays close to g1 but is not identical
    dev = u0 - g1(m.vertices)
    assert 0 < np.max(np.abs(dev)) < 0.5 * eps
    assert u0[0] == pytest.approx(0.0, abs=1e-12)


def test_fine_wave_constant_field_standing_wave():
    # a = 1: u = cos(pi t) sin(pi x) from g1 = sin(pi x)
    f = make_field("constant", eps=0.1, params=[1.0])
    m = build_uniform_mesh(1, 128)
    data = WaveData(g1=lambda x: np.sin(np.pi * x[:, 0]))
    grid = make_time_grid(1.0, 2e-4, n_checkpoints=4)
    tr = solve_fine_wave(f, m, data, grid, scheme="newmark")
    x = m.vertices[:, 0]
    for t, u in zip(tr.times, tr.u):
        err = l2_norm(m, u - np.cos(np.pi * t) * np.sin(np.pi * x))
        assert err < 2e-4


def test_homogenized_matches_fine_for_constant_field():
    f = make_field("constant", eps=0.1, params=[0.7])
    m = build_uniform_mesh(1, 64)
    data = WaveData(g1=lambda x: np.sin(np.pi * x[:, 0]))
    grid = make_time_grid(0.5, 1e-3, n_checkpoints=4)
    tr_f = solve_fine_wave(f, m, data, grid)
    tr_h = solve_homogenized_wave(np.array([[0.7]]), m, data, grid)
    np.testing.assert_allclose(tr_h.u, tr_f.u, atol=1e-12)


def test_boussinesq_reduces_to_homogenized_when_b0_vanishes():
    m = build_uniform_mesh(1, 64, periodic=True)
    data = WaveData(g1=lambda x: np.sin(2 * np.pi * x[:, 0]))
    grid = make_time_grid(0.5, 1e-3, n_checkpoints=4)
    a0 = np.array([[0.5]])
    tr_b = solve_boussinesq_1d(a0, 0.0, 0.1, m, data, grid)
    tr_h = solve_homogenized_wave(a0, m, data, grid, scheme="newmark",
                                  bc="periodic")
    np.testing.assert_allclose(tr_b.u, tr_h.u, atol=1e-12)


def test_boussinesq_dispersion_slows_the_wave():
    # the eps^2 b0 term lowers the frequency, so crests lag the a0 model
    m = build_uniform_mesh(1, 256, periodic=True)
    k = 4 * np.pi
    data = WaveData(g1=lambda x: np.sin(k * x[:, 0]))
    grid = make_time_grid(2.0, 1e-3, n_checkpoints=8)
    a0, b0, eps = np.array([[0.5]]), B0_EXACT, 0.2
    tr_b = solve_boussinesq_1d(a0, b0, eps, m, data, grid)
    tr_h = solve_homogenized_wave(a0, m, data, grid, scheme="newmark",
                                  bc="periodic")
    x = m.vertices[:, 0]
    c_b = 2 * np.trapezoid(tr_b.u[-1] * np.sin(k * x), x)
    c_h = 2 * np.trapezoid(tr_h.u[-1] * np.sin(k * x), x)
    om = np.sqrt(0.5) * k
    om_b = om / np.sqrt(1 + eps ** 2 * b0 * k ** 2)
    assert c_h == pytest.approx(np.cos(om * 2.0), abs=2e-3)
    assert c_b == pytest.approx(np.cos(om_b * 2.0), abs=2e-3)


def test_boussinesq_guards():
    m2 = build_uniform_mesh(2, 4, periodic=True)
    data = WaveData()
    grid = make_time_grid(0.1, 0.05)
    with pytest.raises(HomogError):
        solve_boussinesq_1d(np.diag([1.0, 1.0]), 0.1, 0.1, m2, data, grid)
    m1 = build_uniform_mesh(1, 8, periodic=True)
    with pytest.raises(HomogError):
        solve_boussinesq_1d(np.array([[0.5]]), -0.1, 0.1, m1, data, grid)
