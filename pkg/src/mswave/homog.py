"""Periodic homogenization: cell problems, effective tensors, macro models.

The cell problems are solved with P1 elements on a periodic mesh of the unit
cell; the constant-function kernel is removed with a single Lagrange
multiplier enforcing zero mean, which keeps the system sparse, symmetric and
direct-solver friendly.  On top of the cell quantities sit the macroscopic
solvers: the homogenized wave equation and, in one dimension, the dispersive
(Boussinesq-type) model
    u_tt - a0 u_xx - eps^2 b0 u_ttxx = F
whose weak form turns the extra term into a modified mass matrix, so the
Newmark integrator applies unchanged.
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from . import fem, mesh as mesh_mod
from .timeint import leapfrog_run, newmark_run, cfl_timestep


class HomogError(RuntimeError):
    pass


class _CellView:
    """Pointwise evaluator of the unit-cell profile A(x_slow, y)."""

    def __init__(self, field, slow_x):
        self.field = field
        self.slow_x = slow_x
        self.dim = field.dim

    def values(self, y):
        return self.field.cell_values(y, x_slow=self.slow_x)


def default_cell_quad_order(field):
    # barycenter sampling keeps discontinuous profiles on one side per element
    if field.kind in ("laminate_2d", "piecewise_constant_sample"):
        return 1
    return 2


def solve_mean_zero(A_dof, weights, rhs, tol=1e-9):
    """Solve the semidefinite system A x = rhs subject to weights . x = 0.

    Bordered Lagrange formulation [[A, w], [w^T, 0]]; rhs may hold several
    columns.  Returns an array of the same column count.
    """
    n = A_dof.shape[0]
    # the constraint is scale invariant; a unit border column keeps the
    # bordered factorization well scaled against stiffness entries
    wv = np.asarray(weights, dtype=float)
    w = sparse.csc_matrix((wv / np.linalg.norm(wv)).reshape(-1, 1))
    Z = sparse.bmat([[A_dof, w], [w.T, None]], format="csc")
    solve = sla.splu(Z).solve
    R = np.atleast_2d(np.asarray(rhs, dtype=float).T).T
    out = np.empty_like(R)
    for j in range(R.shape[1]):
        b = np.concatenate([R[:, j], [0.0]])
        out[:, j] = solve(b)[:-1]
    # backward-error test: normalize by the attainable scale |A| |x| + |rhs|,
    # with the rhs scale taken over all columns so that a direction with a
    # vanishing load (a laminate has no corrector along the layers) does not
    # trip a 0/0 comparison
    denom = max(np.linalg.norm(R, axis=0).max(), 1e-30) \
        + np.abs(A_dof).max() * np.linalg.norm(out, axis=0)
    resid = np.linalg.norm(A_dof @ out - R, axis=0) / denom
    if np.any(resid > tol):
        raise fem.SolverError("constrained cell solve residual %.3e" % resid.max())
    return out if np.asarray(rhs).ndim > 1 else out[:, 0]


class CellSolution:
    """Correctors chi_j (vertex values on the periodic cell mesh) and context."""

    def __init__(self, chis, cell_mesh, aK, quad_order):
        self.chis = chis            # (n_vertices, d)
        self.mesh = cell_mesh
        self.aK = aK                # per-element coefficient tensors used
        self.quad_order = quad_order


def solve_cell_problems(field, n_cell, slow_x=None, quad_order=None):
    """Periodic cell problems on (0,1)^d: find chi_j with zero mean such that

        int_Y a(y) (grad chi_j + e_j) . grad w dy = 0   for all periodic w.
    """
    if quad_order is None:
        quad_order = default_cell_quad_order(field)
    d = field.dim
    cell = mesh_mod.build_uniform_mesh(d, n_cell, periodic=True)
    view = _CellView(field, slow_x)
    S = fem.assemble_stiffness(view, cell, bc="periodic", quad_order=quad_order)
    M = fem.assemble_mass(cell, bc="periodic")
    aK = fem.element_coefficients(view, cell, quad_order)

    G = fem.element_gradients(cell)
    vol = cell.element_volumes()
    # rhs_j[i] = -int a e_j . grad Phi_i
    flux = np.einsum("e,edc,eic->eid", vol, aK, G)     # (n_el, d+1, d)
    rhs_full = np.zeros((cell.n_vertices, d))
    for loc in range(d + 1):
        np.add.at(rhs_full, cell.elements[:, loc], -flux[:, loc, :])
    rhs = S.P.T @ rhs_full
    weights = M.matrix @ np.ones(M.n_dofs)
    chi_dof = solve_mean_zero(S.matrix, weights, rhs)
    chis = S.expand(chi_dof.reshape(S.n_dofs, d).T).T
    return CellSolution(chis, cell, aK, quad_order)


def homogenized_tensor(cellsol, asym_tol=1e-8):
    """a0_ij = int_Y e_i . a(y)(grad chi_j + e_j) dy, symmetrized.

    The measured asymmetry before symmetrization must stay below asym_tol.
    """
    cell = cellsol.mesh
    d = cell.dim
    G = fem.element_gradients(cell)
    vol = cell.element_volumes()
    grad_chi = np.einsum("eic,eij->ecj", G,
                         cellsol.chis[cell.elements])   # (n_el, d, d): (grad chi_j)_c
    grad_chi = grad_chi + np.broadcast_to(np.eye(d), (cell.n_elements, d, d))
    a0 = np.einsum("e,eic,ecj->ij", vol, cellsol.aK, grad_chi)
    a0 /= np.prod(cell.lengths)
    asym = np.max(np.abs(a0 - a0.T))
    if asym > asym_tol * max(1.0, np.max(np.abs(a0))):
        raise HomogError("homogenized tensor asymmetry %.3e" % asym)
    return 0.5 * (a0 + a0.T)


def dispersive_coefficient_1d(cellsol):
    """b0 = int_Y chi^2 dy via the cell mass matrix (1d only)."""
    if cellsol.mesh.dim != 1:
        raise HomogError("dispersive coefficient is a 1d quantity")
    M = fem.assemble_mass(cellsol.mesh, bc="free").matrix_full
    chi = cellsol.chis[:, 0]
    return float(chi @ (M @ chi)) / float(cellsol.mesh.lengths[0])


class WaveData:
    """Problem data: initial displacement g1, velocity g2, forcing F.

    Each entry is a callable on (n, dim) vertex coordinates, a nodal vector,
    or None (zero).  F is spatial; time-harmonic forcing is not needed here.
    """

    def __init__(self, g1=None, g2=None, F=None):
        self.g1 = g1
        self.g2 = g2
        self.F = F

    def nodal(self, msh):
        return (fem.nodal_values(msh, self.g1), fem.nodal_values(msh, self.g2),
                fem.nodal_values(msh, self.F))


def _march(M_op, S_op, data, msh, grid, scheme, track_energy=False,
           mass_shift=None):
    g1, g2, F = data.nodal(msh)
    u0, v0 = M_op.restrict(g1), M_op.restrict(g2)
    b = M_op.load(fem.assemble_mass(msh, bc="free").matrix_full @ F) \
        if np.any(F) else None
    Mmat = M_op.matrix if mass_shift is None else M_op.matrix + mass_shift
    if scheme == "leapfrog":
        traj = leapfrog_run(Mmat, S_op.matrix, (u0, v0), grid, b=b,
                            track_energy=track_energy)
    elif scheme == "newmark":
        traj = newmark_run(Mmat, S_op.matrix, (u0, v0), grid, b=b,
                           track_energy=track_energy)
    else:
        raise ValueError("scheme must be 'leapfrog' or 'newmark'")
    traj.u = M_op.expand(traj.u)
    if traj.v is not None:
        traj.v = M_op.expand(traj.v)
    return traj


def solve_fine_wave(field, msh, data, grid, scheme="leapfrog", bc="dirichlet",
                    quad_order=2, track_energy=False):
    """Fine-scale reference solve with the oscillatory coefficient itself."""
    S = fem.assemble_stiffness(field, msh, bc=bc, quad_order=quad_order)
    M = fem.assemble_mass(msh, bc=bc)
    return _march(M, S, data, msh, grid, scheme, track_energy=track_energy)


def solve_homogenized_wave(a0, msh, data, grid, scheme="leapfrog",
                           bc="dirichlet", track_energy=False):
    """Macro wave solve with the constant effective tensor a0 (scalar in 1d)."""
    S = fem.assemble_stiffness(np.atleast_2d(a0), msh, bc=bc)
    M = fem.assemble_mass(msh, bc=bc)
    return _march(M, S, data, msh, grid, scheme, track_energy=track_energy)


def solve_boussinesq_1d(a0, b0, eps, msh, data, grid, bc="periodic",
                        track_energy=False):
    """Dispersive 1d model: (M + eps^2 b0 A1) u'' + a0 A1 u = M F.

    Newmark time stepping; with b0 = 0 this reproduces the homogenized
    solve exactly (same integrator, same matrices).
    """
    if msh.dim != 1:
        raise HomogError("the dispersive model is one-dimensional")
    if b0 < 0:
        raise HomogError("b0 must be nonnegative")
    A1 = fem.assemble_stiffness(1.0, msh, bc=bc)
    M = fem.assemble_mass(msh, bc=bc)
    shift = (eps ** 2) * b0 * A1.matrix
    Smat = float(np.asarray(a0).reshape(-1)[0]) * A1.matrix
    g1, g2, F = data.nodal(msh)
    u0, v0 = M.restrict(g1), M.restrict(g2)
    b = M.load(fem.assemble_mass(msh, bc="free").matrix_full @ F) if np.any(F) else None
    traj = newmark_run(M.matrix + shift, Smat, (u0, v0), grid, b=b,
                       track_energy=track_energy)
    traj.u = M.expand(traj.u)
    if traj.v is not None:
        traj.v = M.expand(traj.v)
    return traj


def wellprepared_initial(field, a0, g1, msh, bc="dirichlet", quad_order=2,
                         tol=1e-12):
    """Initial data adapted to the fine scale: solve

        int a_eps grad g1_eps . grad v = int a0 grad g1 . grad v

    for all v in the fine space; returns vertex values of g1_eps.
    """
    S_eps = fem.assemble_stiffness(field, msh, bc=bc, quad_order=quad_order)
    S0_full = fem.assemble_stiffness(np.atleast_2d(a0), msh, bc="free").matrix_full
    g1v = fem.nodal_values(msh, g1)
    rhs = S_eps.load(S0_full @ g1v)
    if bc == "periodic":
        M = fem.assemble_mass(msh, bc=bc)
        w = M.matrix @ np.ones(M.n_dofs)
        x = solve_mean_zero(S_eps.matrix, w, rhs)
        x = x + (w @ S_eps.restrict(g1v)) / w.sum() - (w @ x) / w.sum()
    else:
        x = sla.splu(S_eps.matrix.tocsc()).solve(rhs)
    out = S_eps.expand(x)
    if bc == "dirichlet":
        # boundary values of g1 are retained (zero for admissible data)
        out[msh.boundary_vertices] = g1v[msh.boundary_vertices]
    return out


def harmonic_coordinate_1d(field, msh, quad_order=2):
    """Harmonic coordinate G on an interval: (a G')' = 0, G = x on the ends.

    Discretely G(x) = x_l + (x_r - x_l) * int_{x_l}^x a^{-1} / int a^{-1};
    returned as vertex values of the P1 solution.
    """
    if msh.dim != 1 or msh.periodic:
        raise HomogError("harmonic coordinates need a 1d Dirichlet mesh")
    S = fem.assemble_stiffness(field, msh, bc="dirichlet", quad_order=quad_order)
    x = msh.vertices[:, 0].copy()
    rhs = -S.load(S.matrix_full @ x)
    corr = sla.splu(S.matrix.tocsc()).solve(rhs)
    return x + S.expand(corr)


def effective_wave_speed(a0):
    return float(np.sqrt(np.min(np.linalg.eigvalsh(np.atleast_2d(a0)))))
