"""Assembly, boundary handling, projections, and error norms."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from mswave.coeff import make_field
from mswave.fem import (BCError, MeshPair, SolverError, assemble_mass,
                        assemble_stiffness, error_norms, h1_norm, l2_norm,
                        l2_project, nodal_values, ritz_project, solve_spd)
from mswave.mesh import build_uniform_mesh
from mswave.timeint import Trajectory


def test_stiffness_1d_tridiagonal():
    m = build_uniform_mesh(1, 4)
    S = assemble_stiffness(1.0, m, bc="dirichlet")
    np.testing.assert_allclose(
        S.matrix.toarray(), [[8, -4, 0], [-4, 8, -4], [0, -4, 8]])


def test_mass_1d_consistent_and_lumped():
    m = build_uniform_mesh(1, 4)
    M = assemble_mass(m, bc="dirichlet")
    np.testing.assert_allclose(M.matrix.toarray() * 24,
                               [[4, 1, 0], [1, 4, 1], [0, 1, 4]])
    ML = assemble_mass(m, bc="dirichlet", lumped=True)
    np.testing.assert_allclose(ML.matrix.toarray(), np.diag([0.25] * 3))
    # both carry the total measure on the free mesh
    Mfree = assemble_mass(m, bc="free")
    assert Mfree.matrix.sum() == pytest.approx(1.0)


def test_stiffness_2d_five_point_stencil():
    m = build_uniform_mesh(2, 2)
    S = assemble_stiffness(1.0, m, bc="dirichlet")
    np.testing.assert_allclose(S.matrix.toarray(), [[4.0]])


def test_stiffness_accepts_field_scalar_matrix():
    m = build_uniform_mesh(1, 8)
    f = make_field("constant", eps=0.5, params=[0.7])
    Sf = assemble_stiffness(f, m, bc="dirichlet")
    Ss = assemble_stiffness(0.7, m, bc="dirichlet")
    Sm = assemble_stiffness(np.array([[0.7]]), m, bc="dirichlet")
    np.testing.assert_allclose(Sf.matrix.toarray(), Ss.matrix.toarray())
    np.testing.assert_allclose(Sm.matrix.toarray(), Ss.matrix.toarray())


def test_kernel_of_periodic_stiffness():
    m = build_uniform_mesh(1, 16, periodic=True)
    f = make_field("periodic_1d", eps=1 / 4, params=[2, 1])
    S = assemble_stiffness(f, m, bc="periodic")
    ones = np.ones(S.n_dofs)
    assert np.max(np.abs(S.matrix @ ones)) < 1e-13


def test_expand_restrict_roundtrip():
    m = build_uniform_mesh(1, 8)
    S = assemble_stiffness(1.0, m, bc="dirichlet")
    u = np.arange(1.0, 8.0)
    full = S.expand(u)
    assert full[0] == 0.0 and full[-1] == 0.0
    np.testing.assert_allclose(S.restrict(full), u)


def test_poisson_nodal_exactness_1d():
    # -(u')' = 1 on (0,1), u(0) = u(1) = 0: P1 nodal values are exact
    m = build_uniform_mesh(1, 4)
    u = ritz_project(1.0, m, load=lambda x: np.ones(len(x)))
    x = m.vertices[:, 0]
    np.testing.assert_allclose(u, x * (1 - x) / 2, atol=1e-14)


def test_ritz_projection_reproduces_coarse_functions():
    pair = MeshPair(build_uniform_mesh(1, 4), build_uniform_mesh(1, 8))
    w = np.array([0.0, 0.3, -0.9, 0.6, 0.0])
    u = ritz_project(1.0, pair.coarse, target=pair.interpolate(w), pair=pair)
    np.testing.assert_allclose(u, w, atol=1e-10)
    with pytest.raises(ValueError):
        ritz_project(1.0, pair.coarse)
    with pytest.raises(ValueError):
        ritz_project(1.0, pair.coarse, target=pair.interpolate(w))


def test_solve_spd_matches_dense():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((12, 12))
    A = B @ B.T + 12 * np.eye(12)
    b = rng.standard_normal(12)
    import scipy.sparse as sp
    x = solve_spd(sp.csr_matrix(A), b, tol=1e-12)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-9)


def test_solve_spd_semidefinite_gauges_mean():
    m = build_uniform_mesh(1, 16, periodic=True)
    S = assemble_stiffness(1.0, m, bc="periodic")
    rhs = np.sin(2 * np.pi * np.arange(16) / 16)
    rhs -= rhs.mean()
    u = solve_spd(S.matrix, rhs, semidefinite=True)
    assert abs(u.mean()) < 1e-12
    assert np.max(np.abs(S.matrix @ u - rhs)) < 1e-9


def test_nodal_values_paths():
    m = build_uniform_mesh(1, 4)
    np.testing.assert_allclose(nodal_values(m, None), np.zeros(5))
    np.testing.assert_allclose(nodal_values(m, lambda x: x[:, 0] ** 2),
                               m.vertices[:, 0] ** 2)
    arr = np.arange(5.0)
    np.testing.assert_allclose(nodal_values(m, arr), arr)
    with pytest.raises(ValueError):
        nodal_values(m, np.arange(4.0))


def test_l2_project_reproduces_coarse_functions():
    pair = MeshPair(build_uniform_mesh(1, 2), build_uniform_mesh(1, 4))
    hat = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
    np.testing.assert_allclose(l2_project(pair, hat), [0, 1, 0], atol=1e-12)


def test_norms_of_sine():
    m = build_uniform_mesh(1, 256)
    s = np.sin(2 * np.pi * m.vertices[:, 0])
    assert l2_norm(m, s) == pytest.approx(np.sqrt(0.5), rel=1e-4)
    assert h1_norm(m, s) == pytest.approx(np.sqrt(0.5 + 2 * np.pi ** 2),
                                          rel=1e-4)


def test_error_norms_constant_offset():
    mf = build_uniform_mesh(1, 8)
    times = np.array([0.0, 0.5, 1.0])
    base = np.zeros((3, mf.n_vertices))
    ref = Trajectory(times, base)
    approx = Trajectory(times, base + 0.25)
    rep = error_norms(ref, approx, mf)
    assert rep.linf_l2 == pytest.approx(0.25, rel=1e-12)
    assert rep.linf_h1 == pytest.approx(0.25, rel=1e-12)
    # identical trajectories have zero error
    assert error_norms(ref, ref, mf).linf_l2 == 0.0


def test_error_norms_lifts_coarse_trajectory():
    mc = build_uniform_mesh(1, 4)
    mf = build_uniform_mesh(1, 8)
    times = np.array([0.0, 1.0])
    lin = lambda msh: msh.vertices[:, 0] * 0.5
    ref = Trajectory(times, np.vstack([lin(mf), lin(mf)]))
    approx = Trajectory(times, np.vstack([lin(mc), lin(mc)]))
    rep = error_norms(ref, approx, mf, coarse_mesh=mc)
    assert rep.linf_l2 < 1e-13
    with pytest.raises(ValueError):
        error_norms(ref, approx, mf)


def test_bad_bc_label():
    m = build_uniform_mesh(1, 4)
    with pytest.raises(BCError):
        assemble_stiffness(1.0, m, bc="clamped")
