"""P1 finite element assembly, projections, and discrete norms.

Assembly happens on the full vertex set first; boundary conditions are then
folded in through a sparse prolongation (Dirichlet elimination or periodic
identification), which keeps every assembled operator symmetric.  Coefficients
are evaluated pointwise at quadrature nodes, never averaged per element ahead
of time, so discontinuous fields are integrated with whatever rule the caller
picks (the barycenter rule is exact for fields that are constant per element).
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from . import mesh as mesh_mod
from .timeint import Trajectory


class SolverError(RuntimeError):
    pass


class BCError(ValueError):
    pass


# 1d rules on [0,1]: midpoint, 2-point Gauss, 3-point Gauss
_S3 = 1.0 / (2.0 * np.sqrt(3.0))
_S35 = 0.5 * np.sqrt(3.0 / 5.0)
_QUAD_1D = {
    1: (np.array([[0.5]]), np.array([1.0])),
    2: (np.array([[0.5 - _S3], [0.5 + _S3]]), np.array([0.5, 0.5])),
    3: (np.array([[0.5 - _S35], [0.5], [0.5 + _S35]]),
        np.array([5.0, 8.0, 5.0]) / 18.0),
}
# triangle rules in barycentric coordinates: barycenter, edge midpoints,
# and the 4-point degree-3 rule
_QUAD_TRI = {
    1: (np.array([[1.0, 1.0, 1.0]]) / 3.0, np.array([1.0])),
    2: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.array([1.0, 1.0, 1.0]) / 3.0),
    3: (np.array([[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                  [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]]),
        np.array([-27.0, 25.0, 25.0, 25.0]) / 48.0),
}


def quadrature(dim, order):
    table = _QUAD_1D if dim == 1 else _QUAD_TRI
    if order not in table:
        raise ValueError("quad_order must be in {1, 2, 3}")
    return table[order]


def element_gradients(mesh):
    """P1 shape gradients per element, shape (n_elements, dim+1, dim)."""
    pts = mesh.element_vertices()
    if mesh.dim == 1:
        h = (pts[:, 1, 0] - pts[:, 0, 0])[:, None]
        G = np.empty((mesh.n_elements, 2, 1))
        G[:, 0, 0], G[:, 1, 0] = -1.0, 1.0
        return G / h[:, None]
    B = np.stack([pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]], axis=-1)
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    inv = np.empty_like(B)
    inv[:, 0, 0], inv[:, 0, 1] = B[:, 1, 1], -B[:, 0, 1]
    inv[:, 1, 0], inv[:, 1, 1] = -B[:, 1, 0], B[:, 0, 0]
    inv /= det[:, None, None]
    # rows of B^{-1} are the gradients of the two local coordinates
    G = np.empty((mesh.n_elements, 3, 2))
    G[:, 1] = inv[:, 0, :]
    G[:, 2] = inv[:, 1, :]
    G[:, 0] = -G[:, 1] - G[:, 2]
    return G


def element_coefficients(field, mesh, quad_order=2):
    """Quadrature-averaged coefficient matrices per element, (n_el, d, d)."""
    lam, w = quadrature(mesh.dim, quad_order)
    pts = mesh.element_vertices()
    d = mesh.dim
    acc = np.zeros(mesh.n_elements)
    for lq, wq in zip(lam, w):
        if d == 1:
            x = pts[:, 0, 0] * (1.0 - lq[0]) + pts[:, 1, 0] * lq[0]
            acc += wq * field.values(x)
        else:
            x = np.einsum("q,eqd->ed", lq, pts)
            acc += wq * field.values(x)
    eye = np.eye(d)
    return acc[:, None, None] * eye


def _per_element_tensors(coefficient, mesh, quad_order):
    d = mesh.dim
    if hasattr(coefficient, "values"):
        # CoefficientField or any object evaluating pointwise like one
        return element_coefficients(coefficient, mesh, quad_order)
    c = np.asarray(coefficient, dtype=float)
    if c.ndim == 0:
        return np.broadcast_to(float(c) * np.eye(d), (mesh.n_elements, d, d))
    if c.shape == (d, d):
        return np.broadcast_to(c, (mesh.n_elements, d, d))
    if c.shape == (mesh.n_elements, d, d):
        return c
    raise ValueError("coefficient must be a field, scalar, (d,d), or (n_el,d,d)")


def _dof_structure(mesh, bc):
    """Prolongation P (n_vertices, n_dofs) and representative vertex picks."""
    nv = mesh.n_vertices
    if bc == "free":
        P = sparse.identity(nv, format="csr")
        pick = np.arange(nv)
    elif bc == "periodic":
        if not mesh.periodic:
            raise BCError("periodic bc on a non-periodic mesh")
        vd = mesh.vertex_dof
        P = sparse.csr_matrix((np.ones(nv), (np.arange(nv), vd)),
                              shape=(nv, mesh.n_dofs))
        _, pick = np.unique(vd, return_index=True)
    elif bc == "dirichlet":
        if mesh.periodic:
            raise BCError("dirichlet bc on a periodic mesh")
        free = np.setdiff1d(np.arange(nv), mesh.boundary_vertices)
        P = sparse.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))),
                              shape=(nv, len(free)))
        pick = free
    else:
        raise BCError("bc must be 'dirichlet', 'periodic', or 'free'")
    return P, pick


class SparseOperator:
    """Symmetric assembled form with its boundary handling.

    matrix acts on dof vectors; expand/restrict move between dof vectors and
    full vertex vectors (Dirichlet dofs expand to zero, periodic slaves copy
    their master).  matrix_full is the raw vertex-level assembly.
    """

    def __init__(self, mesh, matrix_full, bc):
        self.mesh = mesh
        self.bc = bc
        self.matrix_full = matrix_full.tocsr()
        self.P, self.pick = _dof_structure(mesh, bc)
        self.matrix = (self.P.T @ self.matrix_full @ self.P).tocsr()
        self.n_dofs = self.matrix.shape[0]

    def expand(self, u):
        return self.P @ u if np.ndim(u) == 1 else u @ self.P.T

    def restrict(self, v):
        return v[..., self.pick]

    def load(self, f_vertex):
        """Fold a vertex-level load vector onto the dofs."""
        return self.P.T @ f_vertex


def _assemble_full(mesh, local):
    nloc = mesh.dim + 1
    rows = np.repeat(mesh.elements, nloc, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, nloc)).ravel()
    A = sparse.coo_matrix((local.ravel(), (rows, cols)),
                          shape=(mesh.n_vertices, mesh.n_vertices))
    return A.tocsr()


def assemble_stiffness(coefficient, mesh, bc="dirichlet", quad_order=2):
    """SparseOperator for (a grad u, grad v).

    coefficient may be a CoefficientField, a scalar, a constant (d, d)
    matrix, or per-element (n_el, d, d) tensors (the upscaled-tensor path of
    the multiscale methods).
    """
    aK = _per_element_tensors(coefficient, mesh, quad_order)
    G = element_gradients(mesh)
    vol = mesh.element_volumes()
    local = np.einsum("e,eid,edc,ejc->eij", vol, G, aK, G)
    return SparseOperator(mesh, _assemble_full(mesh, local), bc)


def assemble_mass(mesh, bc="dirichlet", lumped=False):
    """SparseOperator for (u, v); exact P1 entries, optionally lumped."""
    vol = mesh.element_volumes()
    if mesh.dim == 1:
        base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = vol[:, None, None] * base
    if lumped:
        diag = local.sum(axis=2)
        local = np.zeros_like(local)
        idx = np.arange(mesh.dim + 1)
        local[:, idx, idx] = diag
    return SparseOperator(mesh, _assemble_full(mesh, local), bc)


def solve_spd(A, b, tol=1e-10, maxiter=None, semidefinite=False):
    """Conjugate-gradient solve with Jacobi preconditioning.

    For semidefinite systems (periodic or pure-Neumann operators whose kernel
    is the constants) b must be orthogonal to constants; the returned solution
    is gauged to zero mean.  Raises SolverError when the relative residual
    does not reach tol within 10n iterations.
    """
    A = A.tocsr() if sparse.issparse(A) else sparse.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(n)
    if semidefinite:
        s = b.sum()
        if abs(s) > 1e-8 * max(nb, 1.0):
            raise SolverError("semidefinite system: rhs not orthogonal to constants")
        b = b - s / n
    if maxiter is None:
        maxiter = 10 * n
    d = A.diagonal()
    d = np.where(np.abs(d) > 0, d, 1.0)
    M = sla.LinearOperator(A.shape, matvec=lambda x: x / d)
    x, info = sla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    res = np.linalg.norm(b - A @ x) / nb
    if info != 0 or res > 10.0 * tol:
        raise SolverError("CG did not converge: relative residual %.3e" % res)
    if semidefinite:
        x = x - x.mean()
    return x


def nodal_values(mesh, f):
    """Vertex values of f: callable on (n, dim) coordinates, array, or None."""
    if f is None:
        return np.zeros(mesh.n_vertices)
    if callable(f):
        return np.asarray(f(mesh.vertices), dtype=float).reshape(mesh.n_vertices)
    v = np.asarray(f, dtype=float)
    if len(v) != mesh.n_vertices:
        raise ValueError("nodal vector has wrong length")
    return v


class MeshPair:
    """A nested coarse/fine mesh pair with its transfer operator."""

    def __init__(self, coarse, fine):
        self.coarse = coarse
        self.fine = fine
        self.ratio = mesh_mod.check_nested(coarse, fine)
        self.P = mesh_mod.transfer_coarse_to_fine(coarse, fine)

    def interpolate(self, coarse_vertex_values):
        return self.P @ coarse_vertex_values

    def dof_transfer(self, bc):
        """Coarse-dof to fine-dof inclusion matrix for the given bc."""
        Pc, _ = _dof_structure(self.coarse, bc)
        _, pick_f = _dof_structure(self.fine, bc)
        return (self.P @ Pc).tocsr()[pick_f]

    def coarse_inner_matrix(self, M_fine_full, bc):
        """Rows are (Phi_H_i, .)_{L2} against fine vertex vectors, folded to dofs."""
        Pc, _ = _dof_structure(self.coarse, bc)
        Pf, _ = _dof_structure(self.fine, bc)
        return (Pc.T @ self.P.T @ M_fine_full @ Pf).tocsr()


def l2_project(pair, v_fine_vertex, bc="free", tol=1e-12):
    """L2 projection of a fine-mesh function onto the coarse space.

    Takes and returns vertex values; bc selects the coarse space (dirichlet
    projects onto the homogeneous subspace).
    """
    M_f = assemble_mass(pair.fine, bc="free")
    M_c = assemble_mass(pair.coarse, bc=bc)
    Pc, _ = _dof_structure(pair.coarse, bc)
    rhs = Pc.T @ (pair.P.T @ (M_f.matrix_full @ v_fine_vertex))
    p = solve_spd(M_c.matrix, rhs, tol=tol)
    return M_c.expand(p)


def ritz_project(coefficient, mesh, load=None, target=None, pair=None,
                 bc="dirichlet", quad_order=2, tol=1e-10):
    """Galerkin solution/projection in the a-energy inner product.

    Either solve the elliptic problem for a nodal load f (returns vertex
    values of the FEM solution), or project a fine-mesh function onto the
    coarse space of a MeshPair (target given as fine vertex values).
    """
    if (load is None) == (target is None):
        raise ValueError("give exactly one of load, target")
    if load is not None:
        S = assemble_stiffness(coefficient, mesh, bc=bc, quad_order=quad_order)
        M = assemble_mass(mesh, bc="free")
        b = S.load(M.matrix_full @ nodal_values(mesh, load))
        x = solve_spd(S.matrix, b, tol=tol, semidefinite=(bc == "periodic"))
        return S.expand(x)
    if pair is None:
        raise ValueError("target projection needs the mesh pair")
    S_c = assemble_stiffness(coefficient, pair.coarse, bc=bc, quad_order=quad_order)
    S_f = assemble_stiffness(coefficient, pair.fine, bc="free", quad_order=quad_order)
    Pc, _ = _dof_structure(pair.coarse, bc)
    rhs = Pc.T @ (pair.P.T @ (S_f.matrix_full @ np.asarray(target, dtype=float)))
    x = solve_spd(S_c.matrix, rhs, tol=tol, semidefinite=(bc == "periodic"))
    return S_c.expand(x)


class ErrorReport:
    """Discrete space-time error norms of a trajectory difference."""

    def __init__(self, times, l2_series, h1_series):
        self.times = times
        self.l2_series = l2_series
        self.h1_series = h1_series
        self.linf_l2 = float(np.max(l2_series))
        self.linf_h1 = float(np.max(h1_series))
        self.l2_l2 = float(np.sqrt(np.trapezoid(l2_series ** 2, times))) \
            if len(times) > 1 else float(l2_series[0])


def error_norms(ref, approx, fine_mesh, coarse_mesh=None):
    """Compare trajectories of vertex values; ref lives on fine_mesh.

    approx is transferred from coarse_mesh when given (nodal P1 interpolation)
    and linearly interpolated in time onto the reference sample times.  Norms
    are the discrete L2 and H1 norms of the fine mesh.
    """
    U_ref = ref.u
    if coarse_mesh is not None:
        P = mesh_mod.transfer_coarse_to_fine(coarse_mesh, fine_mesh)
        approx = Trajectory(approx.times, approx.u @ P.T)
    elif approx.u.shape[1] != fine_mesh.n_vertices:
        raise ValueError("approx is not on the fine mesh and no coarse mesh given")
    # matching sample grids (up to snapshot text round-off) need no
    # interpolation; resampling there would only inject 1-ulp noise
    t_scale = max(1.0, abs(float(ref.times[-1])))
    if len(approx.times) == len(ref.times) and np.allclose(
            approx.times, ref.times, rtol=0.0, atol=1e-9 * t_scale):
        U_app = approx.u
    else:
        U_app = approx.sample_at(ref.times)
    E = U_ref - U_app
    M = assemble_mass(fine_mesh, bc="free").matrix_full
    A1 = assemble_stiffness(1.0, fine_mesh, bc="free").matrix_full
    l2sq = np.einsum("kn,kn->k", E, (M @ E.T).T)
    h1sq = l2sq + np.einsum("kn,kn->k", E, (A1 @ E.T).T)
    return ErrorReport(ref.times, np.sqrt(np.maximum(l2sq, 0.0)),
                       np.sqrt(np.maximum(h1sq, 0.0)))


def l2_norm(mesh, v):
    M = assemble_mass(mesh, bc="free").matrix_full
    return float(np.sqrt(max(v @ (M @ v), 0.0)))


def h1_norm(mesh, v):
    M = assemble_mass(mesh, bc="free").matrix_full
    A1 = assemble_stiffness(1.0, mesh, bc="free").matrix_full
    return float(np.sqrt(max(v @ (M @ v) + v @ (A1 @ v), 0.0)))
