"""Structured simplicial meshes and coarse/fine transfer.

1d meshes split (x0, x1) into N segments.  2d meshes split an axis-aligned
square into N x N cells, each cut along the lower-left to upper-right
diagonal, so nested refinements of the same pattern satisfy V_H in V_h
exactly.  Periodic meshes keep the full vertex set and record the
identification of opposite boundary vertices in vertex_dof.
"""

import numpy as np
import scipy.sparse as sparse


class MeshError(ValueError):
    pass


class Mesh:
    """Uniform mesh of a box, optionally with periodic identification.

    vertices : (n_vertices, dim) coordinates
    elements : (n_elements, dim + 1) vertex indices
    vertex_dof : vertex -> dof index; periodic slaves share their master's dof
    """

    def __init__(self, dim, N, domain, periodic):
        if dim not in (1, 2):
            raise MeshError("dim must be 1 or 2")
        if N < 1:
            raise MeshError("N must be positive")
        self.dim = dim
        self.N = int(N)
        self.domain = np.asarray(domain, dtype=float).reshape(dim, 2)
        self.periodic = bool(periodic)
        lengths = self.domain[:, 1] - self.domain[:, 0]
        if np.any(lengths <= 0):
            raise MeshError("degenerate domain box")
        if dim == 2 and abs(lengths[0] - lengths[1]) > 1e-14 * lengths[0]:
            raise MeshError("2d meshes are uniform on squares")
        self.lengths = lengths
        self._build()

    def _build(self):
        N = self.N
        x0 = self.domain[:, 0]
        if self.dim == 1:
            x = np.linspace(self.domain[0, 0], self.domain[0, 1], N + 1)
            self.vertices = x.reshape(-1, 1)
            self.elements = np.column_stack([np.arange(N), np.arange(1, N + 1)])
            self.boundary_vertices = np.array([0, N])
            self.h = self.lengths[0] / N
            vd = np.arange(N + 1)
            if self.periodic:
                vd[N] = 0
                vd = _compress(vd)
            self.vertex_dof = vd
        else:
            t = np.linspace(0.0, 1.0, N + 1)
            X, Y = np.meshgrid(x0[0] + self.lengths[0] * t,
                               x0[1] + self.lengths[1] * t, indexing="xy")
            # vertex id = j*(N+1) + i with i along x, j along y
            self.vertices = np.column_stack([X.ravel(), Y.ravel()])
            i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
            i, j = i.ravel(), j.ravel()
            v00 = j * (N + 1) + i
            v10 = v00 + 1
            v01 = v00 + (N + 1)
            v11 = v01 + 1
            lower = np.column_stack([v00, v10, v11])
            upper = np.column_stack([v00, v11, v01])
            self.elements = np.empty((2 * N * N, 3), dtype=int)
            self.elements[0::2] = lower
            self.elements[1::2] = upper
            ii, jj = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="xy")
            onb = (ii == 0) | (ii == N) | (jj == 0) | (jj == N)
            self.boundary_vertices = np.nonzero(onb.ravel())[0]
            self.h = np.sqrt(2.0) * self.lengths[0] / N
            if self.periodic:
                im, jm = ii.ravel() % N, jj.ravel() % N
                vd = jm * (N + 1) + im
                vd = _compress(vd)
            else:
                vd = np.arange((N + 1) ** 2)
            self.vertex_dof = vd
        self.n_vertices = len(self.vertices)
        self.n_elements = len(self.elements)
        self.n_dofs = int(self.vertex_dof.max()) + 1
        self._vertex_incidence = None

    def element_vertices(self):
        """Coordinates per element, shape (n_elements, dim + 1, dim)."""
        return self.vertices[self.elements]

    def element_volumes(self):
        if self.dim == 1:
            return np.full(self.n_elements, self.lengths[0] / self.N)
        cell = (self.lengths[0] / self.N) ** 2
        return np.full(self.n_elements, 0.5 * cell)

    def barycenters(self):
        return self.element_vertices().mean(axis=1)

    def incidence(self):
        """Sparse (n_elements, n_dofs) 0/1 element-vertex incidence.

        Vertices are mapped through vertex_dof first, so on periodic meshes
        adjacency wraps around the identified boundary.
        """
        if self._vertex_incidence is None:
            ne, nv = self.n_elements, self.dim + 1
            rows = np.repeat(np.arange(ne), nv)
            cols = self.vertex_dof[self.elements].ravel()
            B = sparse.csr_matrix((np.ones(ne * nv), (rows, cols)),
                                  shape=(ne, self.n_dofs))
            B.data[:] = 1.0
            self._vertex_incidence = B
        return self._vertex_incidence


def _compress(vd):
    # renumber dof labels to 0..n_dofs-1 preserving order of first appearance
    uniq, inv = np.unique(vd, return_inverse=True)
    return inv


def build_uniform_mesh(dim, N, domain=None, periodic=False):
    """Uniform mesh of (x0,x1) or an axis-aligned square.

    domain defaults to the unit interval/square; in 2d pass
    ((x0, x1), (y0, y1)) with equal side lengths.
    """
    if domain is None:
        domain = [(0.0, 1.0)] * dim
    dom = np.asarray(domain, dtype=float)
    if dom.ndim == 1:
        dom = np.tile(dom, (dim, 1))
    return Mesh(dim, N, dom, periodic)


def element_patch(mesh, K, k):
    """Element indices of U_k(K): k rounds of vertex-sharing closure.

    U_0(K) = {K}; each round adds every element sharing at least one vertex
    (dof, so periodic meshes wrap) with the current patch.
    """
    if not (0 <= K < mesh.n_elements):
        raise MeshError("element index out of range")
    if k < 0:
        raise MeshError("patch radius must be >= 0")
    B = mesh.incidence()
    ind = np.zeros(mesh.n_elements, dtype=bool)
    ind[K] = True
    for _ in range(k):
        verts = B.T @ ind
        grown = (B @ (verts > 0)) > 0
        if grown.sum() == ind.sum():
            break
        ind = grown
    return np.nonzero(ind)[0]


def check_nested(coarse, fine):
    if coarse.dim != fine.dim:
        raise MeshError("dimension mismatch")
    if coarse.periodic != fine.periodic:
        raise MeshError("periodicity mismatch")
    if not np.allclose(coarse.domain, fine.domain):
        raise MeshError("domain mismatch")
    if fine.N % coarse.N != 0:
        raise MeshError("meshes are not nested (fine N not a multiple of coarse N)")
    return fine.N // coarse.N


def transfer_coarse_to_fine(coarse, fine):
    """Sparse (n_fine_vertices, n_coarse_vertices) nodal interpolation matrix.

    Exact on V_H: a coarse P1 function interpolated this way is the same
    function on the fine mesh.  Meshes must be nested.
    """
    r = check_nested(coarse, fine)
    Nc, Nf = coarse.N, fine.N
    if coarse.dim == 1:
        rows, cols, vals = [], [], []
        for i in range(Nf + 1):
            q, s = divmod(i, r)
            if s == 0:
                rows.append(i); cols.append(q); vals.append(1.0)
            else:
                w = s / r
                rows.extend([i, i]); cols.extend([q, q + 1]); vals.extend([1.0 - w, w])
        return sparse.csr_matrix((vals, (rows, cols)),
                                 shape=(fine.n_vertices, coarse.n_vertices))
    rows, cols, vals = [], [], []
    for j in range(Nf + 1):
        qj, sj = divmod(j, r)
        for i in range(Nf + 1):
            qi, si = divmod(i, r)
            fid = j * (Nf + 1) + i
            s, t = si / r, sj / r

            def cv(di, dj):
                return (qj + dj) * (Nc + 1) + (qi + di)

            if si == 0 and sj == 0:
                rows.append(fid); cols.append(cv(0, 0)); vals.append(1.0)
            elif s >= t:
                # lower triangle of the coarse cell: (v00, v10, v11)
                for c, w in ((cv(0, 0), 1.0 - s), (cv(1, 0), s - t), (cv(1, 1), t)):
                    if w != 0.0:
                        rows.append(fid); cols.append(c); vals.append(w)
            else:
                for c, w in ((cv(0, 0), 1.0 - t), (cv(0, 1), t - s), (cv(1, 1), s)):
                    if w != 0.0:
                        rows.append(fid); cols.append(c); vals.append(w)
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(fine.n_vertices, coarse.n_vertices))


def coarse_element_map(coarse, fine):
    """For each fine element, the coarse element containing it."""
    r = check_nested(coarse, fine)
    Nc, Nf = coarse.N, fine.N
    if coarse.dim == 1:
        return np.arange(Nf) // r
    e = np.arange(fine.n_elements)
    which_f = e % 2
    cell = e // 2
    ci_f, cj_f = cell % Nf, cell // Nf
    qi, si = ci_f // r, ci_f % r
    qj, sj = cj_f // r, cj_f % r
    # local barycenter decides which side of the coarse diagonal we are on
    bs = (si + np.where(which_f == 0, 2.0 / 3.0, 1.0 / 3.0)) / r
    bt = (sj + np.where(which_f == 0, 1.0 / 3.0, 2.0 / 3.0)) / r
    which_c = np.where(bs >= bt, 0, 1)
    return 2 * (qj * Nc + qi) + which_c
