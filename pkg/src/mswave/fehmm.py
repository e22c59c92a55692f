"""Finite element heterogeneous multiscale method for the wave equation.

Macro P1 elements carry one sampling domain K_delta at their barycenter.
Micro problems constrain the deviation from the macro linearization to the
periodic (default) or zero-boundary coupling space; their unit-slope
solutions are computed once offline and combined by linearity, so the HMM
bilinear form is just a stiffness matrix assembled from per-element upscaled
tensors.  The long-time variant augments the mass matrix with the Gram
matrix of the micro correctors, which injects the effective dispersion.
"""

import numpy as np

from . import fem, mesh as mesh_mod
from .homog import solve_mean_zero, WaveData, _march


class CouplingError(ValueError):
    pass


class SamplingDomain:
    """Micro sampling box K_delta = x_K + delta (-1/2, 1/2)^d."""

    def __init__(self, x_K, delta, n_micro, eps, coupling="periodic"):
        x_K = np.atleast_1d(np.asarray(x_K, dtype=float))
        if delta < eps - 1e-12 * eps:
            raise CouplingError("sampling domain smaller than one period")
        if coupling == "periodic":
            ratio = delta / eps
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise CouplingError(
                    "periodic coupling needs delta/eps to be a positive integer")
        elif coupling != "dirichlet":
            raise CouplingError("coupling must be 'periodic' or 'dirichlet'")
        self.x_K = x_K
        self.delta = float(delta)
        self.n_micro = int(n_micro)
        self.coupling = coupling
        dom = [(x - 0.5 * delta, x + 0.5 * delta) for x in x_K]
        self.mesh = mesh_mod.build_uniform_mesh(
            len(x_K), n_micro, domain=dom, periodic=(coupling == "periodic"))


def micro_correctors(field, domain, quad_order=2):
    """Unit-slope micro correctors and the upscaled tensors of one domain.

    Returns (phi, a0_K, q_K): phi holds the d correctors as vertex values
    (mean zero under periodic coupling, zero trace under Dirichlet coupling),
    a0_K is the flux average (1/|K_d|) int a (I + grad phi), and q_K the
    corrector Gram matrix (1/|K_d|) int phi_i phi_j used by the long-time
    mass modification.
    """
    msh = domain.mesh
    d = msh.dim
    bc = "periodic" if domain.coupling == "periodic" else "dirichlet"
    S = fem.assemble_stiffness(field, msh, bc=bc, quad_order=quad_order)
    aK = fem.element_coefficients(field, msh, quad_order)
    G = fem.element_gradients(msh)
    vol = msh.element_volumes()
    flux = np.einsum("e,edc,eic->eid", vol, aK, G)
    rhs_full = np.zeros((msh.n_vertices, d))
    for loc in range(d + 1):
        np.add.at(rhs_full, msh.elements[:, loc], -flux[:, loc, :])
    rhs = S.P.T @ rhs_full
    if bc == "periodic":
        M = fem.assemble_mass(msh, bc=bc)
        w = M.matrix @ np.ones(M.n_dofs)
        phi_dof = solve_mean_zero(S.matrix, w, rhs)
    else:
        import scipy.sparse.linalg as sla
        phi_dof = sla.splu(S.matrix.tocsc()).solve(rhs)
    phi = S.expand(phi_dof.reshape(S.n_dofs, d).T).T

    vol_tot = np.prod(msh.lengths)
    grad_phi = np.einsum("eic,eij->ecj", G, phi[msh.elements])
    grad_phi = grad_phi + np.broadcast_to(np.eye(d), (msh.n_elements, d, d))
    a0_K = np.einsum("e,eic,ecj->ij", vol, aK, grad_phi) / vol_tot
    Mfull = fem.assemble_mass(msh, bc="free").matrix_full
    q_K = (phi.T @ (Mfull @ phi)) / vol_tot
    return phi, a0_K, q_K


def micro_solve(field, domain, slope, quad_order=2):
    """Micro solution u_K^h = slope . x plus the coupled corrector."""
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    phi, _, _ = micro_correctors(field, domain, quad_order)
    linear = domain.mesh.vertices @ slope
    return linear + phi @ slope


def _phase_key(field, x_K, ndigits=9):
    if field.kind == "locally_periodic":
        return tuple(np.round(x_K, 12))
    y = x_K / field.eps
    return tuple(np.round(y - np.floor(y), ndigits))


def upscaled_tensors(field, macro_mesh, delta=None, n_micro=64,
                     coupling="periodic", quad_order=2):
    """Per-macro-element tensors (a0_K, q_K) from barycenter sampling domains.

    Sampling domains whose coefficient restriction agrees up to a cell phase
    share one micro solve (deterministic cache keyed by the phase).
    """
    if delta is None:
        delta = field.eps
    centers = macro_mesh.barycenters()
    cache = {}
    d = macro_mesh.dim
    a0 = np.empty((macro_mesh.n_elements, d, d))
    qq = np.empty((macro_mesh.n_elements, d, d))
    for e, x_K in enumerate(centers):
        key = _phase_key(field, x_K)
        if key not in cache:
            dom = SamplingDomain(x_K, delta, n_micro, field.eps, coupling)
            _, a0_K, q_K = micro_correctors(field, dom, quad_order)
            cache[key] = (a0_K, q_K)
        a0[e], qq[e] = cache[key]
    return a0, qq


def assemble_B_H(field, macro_mesh, delta=None, n_micro=64,
                 coupling="periodic", bc="dirichlet", quad_order=2):
    """The HMM form B_H as a stiffness operator; also returns the tensors.

    B_H(u_H, v_H) = sum_K |K| (grad u_H)^T a0_K (grad v_H) with a0_K the
    upscaled tensor of the element's sampling domain (barycenter rule).
    """
    a0, qq = upscaled_tensors(field, macro_mesh, delta, n_micro, coupling,
                              quad_order)
    B = fem.assemble_stiffness(a0, macro_mesh, bc=bc)
    return B, (a0, qq)


def assemble_Q_mass(macro_mesh, micro_tensors, bc="dirichlet"):
    """Modified scalar product (u,v) + sum_K |K| (grad u)^T q_K (grad v).

    The increment is the Gram matrix of the micro correctors under the macro
    linearization, assembled exactly like a stiffness with tensors q_K.
    """
    _, qq = micro_tensors
    M_full = fem.assemble_mass(macro_mesh, bc="free").matrix_full
    Q_full = fem.assemble_stiffness(qq, macro_mesh, bc="free").matrix_full
    return fem.SparseOperator(macro_mesh, M_full + Q_full, bc)


def fehmm_solve(field, macro_mesh, data, grid, delta=None, n_micro=64,
                coupling="periodic", longtime=False, scheme="leapfrog",
                bc="dirichlet", track_energy=False):
    """FE-HMM wave solve; longtime switches the mass to the Q-modified one."""
    B, tensors = assemble_B_H(field, macro_mesh, delta, n_micro, coupling, bc)
    if longtime:
        M_op = assemble_Q_mass(macro_mesh, tensors, bc)
    else:
        M_op = fem.assemble_mass(macro_mesh, bc=bc)
    return _march(M_op, B, data, macro_mesh, grid, scheme,
                  track_energy=track_energy)
