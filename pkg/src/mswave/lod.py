"""Localized orthogonal decomposition on a nested mesh pair.

The fine space splits a-orthogonally into a coarse-dimensional multiscale
part and the kernel W_h of the coarse L2 projection.  Element correctors live
in W_h restricted to patches around each coarse element and are computed from
sparse saddle-point systems with one Lagrange multiplier per coarse basis
function meeting the patch.  Patch solves are independent of each other and
accumulate by plain summation, so the corrector loop parallelizes trivially;
here it runs serially.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve

from . import fem
from . import mesh as mesh_mod
from . import homog
from .timeint import Trajectory, leapfrog_run, newmark_run


class LODError(RuntimeError):
    pass


def default_k(coarse):
    """Localization radius matched to the coarse resolution, ~ log2(N)."""
    return max(1, int(np.ceil(np.log2(coarse.N))))


class FineScale:
    """Assembled fine-scale data shared by all patch problems."""

    def __init__(self, field, pair, bc="periodic", quad_order=2):
        self.pair = pair
        self.bc = bc
        fine, coarse = pair.fine, pair.coarse
        self.S = fem.assemble_stiffness(field, fine, bc=bc, quad_order=quad_order)
        self.M = fem.assemble_mass(fine, bc=bc)
        self.T = pair.dof_transfer(bc)                      # (n_f, n_c)
        self.C = pair.coarse_inner_matrix(self.M.matrix_full, bc)
        self.n_f = self.S.n_dofs
        self.n_c = self.T.shape[1]
        # per-element local stiffness for restricted actions and energies
        aK = fem._per_element_tensors(field, fine, quad_order)
        G = fem.element_gradients(fine)
        vol = fine.element_volumes()
        self.local = np.einsum("e,eid,edc,ejc->eij", vol, G, aK, G)
        # element corners as bc dofs; -1 marks clamped (dirichlet) vertices
        v2d = np.full(fine.n_vertices, -1, dtype=int)
        rows, cols = self.S.P.nonzero()
        v2d[rows] = cols
        self.el_dof = v2d[fine.elements]
        Pc, _ = fem._dof_structure(coarse, bc)
        self.c_v2d = np.full(coarse.n_vertices, -1, dtype=int)
        rows, cols = Pc.nonzero()
        self.c_v2d[rows] = cols
        self.Pc = Pc
        self.dof_count = self._dof_counts(np.arange(fine.n_elements))
        self.fine_coarse = mesh_mod.coarse_element_map(coarse, fine)

    def _dof_counts(self, els):
        d = self.el_dof[els].ravel()
        return np.bincount(d[d >= 0], minlength=self.n_f)

    def fine_elements_of(self, coarse_els):
        return np.nonzero(np.isin(self.fine_coarse, coarse_els))[0]

    def restricted_action(self, els, vecs):
        """Stiffness restricted to the given fine elements, applied columnwise."""
        verts = self.pair.fine.elements[els]
        V = self.S.P @ vecs
        y = np.einsum("eij,ejr->eir", self.local[els], V[verts])
        out = np.zeros_like(V)
        np.add.at(out, verts, y)
        return self.S.P.T @ out

    def energy(self, els, v):
        V = self.S.P @ v
        verts = self.pair.fine.elements[els]
        return float(np.einsum("eij,ei,ej->", self.local[els], V[verts], V[verts]))


class ElementCorrector:
    """Correctors of the coarse basis functions of one coarse element.

    values holds one column per coarse dof of K, supported on the free fine
    dofs of the patch U_k(K).
    """

    def __init__(self, K, k, coarse_dofs, free, values):
        self.K = K
        self.k = k
        self.coarse_dofs = coarse_dofs
        self.free = free
        self.values = values

    def full(self, n_f):
        Q = np.zeros((n_f, len(self.coarse_dofs)))
        Q[self.free] = self.values
        return Q


def corrector_solve(field, coarse, fine, K, k, bc="periodic", fs=None,
                    quad_order=2):
    """Patch corrector problems for the coarse basis functions on element K.

    Minimizes the a-energy of Phi + Q(Phi) over the patch subject to the
    kernel constraint P_H Q = 0, enforced by Lagrange multipliers attached to
    every coarse basis function whose support meets the patch.  Fine dofs on
    the patch boundary (away from the physical boundary) are clamped.
    """
    if fs is None:
        fs = FineScale(field, fem.MeshPair(coarse, fine), bc=bc,
                       quad_order=quad_order)
    cd = fs.c_v2d[coarse.elements[K]]
    cdofs = np.unique(cd[cd >= 0])
    if fs.pair.ratio == 1 or cdofs.size == 0:
        return ElementCorrector(K, k, cdofs, np.empty(0, dtype=int),
                                np.zeros((0, len(cdofs))))
    patch = mesh_mod.element_patch(coarse, K, k)
    els = fs.fine_elements_of(patch)
    free = np.nonzero(fs._dof_counts(els) == fs.dof_count)[0]
    if free.size == 0:
        raise LODError("patch of element %d has no interior fine dofs" % K)

    rhs_full = -fs.restricted_action(fs.fine_elements_of([K]),
                                     fs.T[:, cdofs].toarray())
    Cp = fs.C[:, free].tocsr()
    lam = np.unique(Cp.nonzero()[0])
    A_ff = fs.S.matrix[free][:, free]
    kkt = sparse.bmat([[A_ff, Cp[lam].T], [Cp[lam], None]], format="csc")
    rhs = np.vstack([rhs_full[free], np.zeros((len(lam), len(cdofs)))])
    try:
        sol = splu(kkt).solve(rhs)
    except RuntimeError as exc:
        raise LODError("singular saddle system on element %d: %s" % (K, exc))
    if not np.all(np.isfinite(sol)):
        raise LODError("saddle solve on element %d returned non-finite values" % K)
    return ElementCorrector(K, k, cdofs, free, sol[:len(free)])


class MultiscaleSpace:
    """Corrected coarse space with its assembled stiffness and mass."""

    def __init__(self, fs, k, basis, stiffness, mass):
        self.fs = fs
        self.k = k
        self.basis = basis            # (n_c, n_f), rows Phi_i + Q Phi_i
        self.stiffness = stiffness
        self.mass = mass
        self.n_dofs = basis.shape[0]

    def reconstruct(self, coeff):
        """Fine vertex values of multiscale functions given by coefficients."""
        return self.fs.S.expand(np.asarray(coeff) @ self.basis)

    def project(self, fine_vertex_values):
        """L2 projection onto the multiscale space, as coefficients."""
        rhs = self.basis @ self.M_load(fine_vertex_values)
        return spsolve(self.mass.tocsc(), rhs)

    def M_load(self, v_vertex):
        return self.fs.M.load(self.fs.M.matrix_full @ np.asarray(v_vertex))


def build_ms_space(field, coarse, fine, k=0, bc="periodic", quad_order=2):
    """Assemble the multiscale basis Phi + Q_{h,k} Phi and its matrices.

    k = 0 picks the default localization ~ log2(N) of the coarse mesh.
    """
    fs = FineScale(field, fem.MeshPair(coarse, fine), bc=bc,
                   quad_order=quad_order)
    if k == 0:
        k = default_k(coarse)
    rows, cols, vals = [], [], []
    for K in range(coarse.n_elements):
        cor = corrector_solve(field, coarse, fine, K, k, bc=bc, fs=fs,
                              quad_order=quad_order)
        for j, c in enumerate(cor.coarse_dofs):
            rows.append(np.full(len(cor.free), c))
            cols.append(cor.free)
            vals.append(cor.values[:, j])
    if rows:
        Q = sparse.coo_matrix((np.concatenate(vals),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(fs.n_c, fs.n_f)).tocsr()
    else:
        Q = sparse.csr_matrix((fs.n_c, fs.n_f))
    B = (fs.T.T + Q).tocsr()
    S_ms = (B @ fs.S.matrix @ B.T).tocsr()
    M_ms = (B @ fs.M.matrix @ B.T).tocsr()
    return MultiscaleSpace(fs, k, B, S_ms, M_ms)


def lod_wave_solve(ms, data, grid, init_mode="l2_proj", scheme="leapfrog",
                   field=None, a0=None, track_energy=False):
    """Wave equation in the multiscale space.

    init_mode: zero starts from rest, l2_proj projects (g1, g2), wellprepared
    first replaces g1 by its fine-scale adapted version (needs field and a0).
    Returns the trajectory of fine vertex values; the multiscale coefficients
    ride along as traj.coarse.
    """
    fine = ms.fs.pair.fine
    g1v, g2v, Fv = data.nodal(fine)
    if init_mode == "zero":
        u0 = np.zeros(ms.n_dofs)
        v0 = np.zeros(ms.n_dofs)
    elif init_mode == "l2_proj":
        u0 = ms.project(g1v)
        v0 = ms.project(g2v)
    elif init_mode == "wellprepared":
        if field is None or a0 is None:
            raise LODError("wellprepared init needs the field and a0")
        bc = "dirichlet" if ms.fs.bc == "dirichlet" else "periodic"
        g1e = homog.wellprepared_initial(field, a0, g1v, fine, bc=bc)
        u0 = ms.project(g1e)
        v0 = ms.project(g2v)
    else:
        raise LODError("unknown init_mode %r" % (init_mode,))
    b = ms.basis @ ms.M_load(Fv) if np.any(Fv) else None
    run = leapfrog_run if scheme == "leapfrog" else newmark_run
    traj = run(ms.mass, ms.stiffness, (u0, v0), grid, b=b,
               track_energy=track_energy)
    out = Trajectory(traj.times, ms.reconstruct(traj.u),
                     energy=traj.energy, energy_times=traj.energy_times)
    out.coarse = traj.u
    return out


def corrector_decay_profile(field, coarse, fine, K, k_max, bc="periodic",
                            quad_order=2):
    """a-energy of the ideal corrector of K in the layers U_{j+1} \\ U_j.

    The corrector is computed on the full domain; the returned array sums the
    energies of the element's basis correctors per layer, j = 0 .. k_max.
    """
    fs = FineScale(field, fem.MeshPair(coarse, fine), bc=bc,
                   quad_order=quad_order)
    cor = corrector_solve(field, coarse, fine, K, coarse.n_elements, bc=bc,
                          fs=fs, quad_order=quad_order)
    Q = cor.full(fs.n_f)
    energies = np.zeros(k_max + 1)
    inner = mesh_mod.element_patch(coarse, K, 0)
    for j in range(k_max + 1):
        outer = mesh_mod.element_patch(coarse, K, j + 1)
        layer = np.setdiff1d(outer, inner)
        els = fs.fine_elements_of(layer)
        if len(els):
            energies[j] = sum(fs.energy(els, Q[:, c])
                              for c in range(Q.shape[1]))
        inner = outer
    return energies


def petrov_galerkin_elliptic(field, coarse, fine, F, bc="dirichlet",
                             quad_order=2):
    """Coarse part of the fine elliptic solution via ideal test correctors.

    Solves a(z_H, Phi_i + Q Phi_i) = (F, Phi_i + Q Phi_i) with z_H in the
    plain coarse space and full-domain correctors; the result coincides with
    the L2 projection of the fine Galerkin solution.  Returns coarse vertex
    values.
    """
    ms = build_ms_space(field, coarse, fine, k=coarse.n_elements, bc=bc,
                        quad_order=quad_order)
    fs = ms.fs
    G = (ms.basis @ fs.S.matrix @ fs.T).tocsc()
    Fv = fem.nodal_values(fine, F)
    rhs = ms.basis @ ms.M_load(Fv)
    x = spsolve(G, rhs)
    return fs.Pc @ x
