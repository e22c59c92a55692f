"""Oscillatory coefficient fields.

A field describes a symmetric, uniformly elliptic coefficient a(x) built from
a unit-cell profile A(x, y) and a small period eps, evaluated as
a(x) = A(x, x/eps).  Every kind implemented here is a scalar times the
identity pointwise, but evaluation returns d x d matrices so the assembly
routines never need to know that.

Cell coordinates are wrapped with floor-based mod, so evaluation is defined
for negative coordinates and for points outside (0,1)^d; sampling domains of
the HMM solvers may protrude from the computational domain.
"""

import numpy as np


class DomainError(ValueError):
    """Raised when a field with a declared domain is evaluated outside it."""


class FieldSpecError(ValueError):
    """Raised for malformed field kind/parameter combinations."""


KINDS = ("constant", "periodic_1d", "locally_periodic", "laminate_2d",
         "piecewise_constant_sample")


def _frac(y):
    # floor-based wrap into [0,1); correct for negative arguments
    return y - np.floor(y)


class CoefficientField:
    """Coefficient a(x) = A(x, x/eps) with spectral bounds alpha, beta.

    Parameters
    ----------
    kind : one of KINDS
    eps : period of the fast variable (ignored for constant fields)
    params : 1d array of kind-specific numbers, see make_field
    alpha, beta : spectral bounds; derived from params when omitted
    domain : optional ((lo, hi), ...) box; evaluation outside raises
    """

    def __init__(self, kind, eps, params, dim, alpha, beta, domain=None):
        if kind not in KINDS:
            raise FieldSpecError("unknown coefficient kind %r" % (kind,))
        if not (0 < alpha <= beta):
            raise FieldSpecError("need 0 < alpha <= beta, got (%g, %g)" % (alpha, beta))
        self.kind = kind
        self.eps = float(eps)
        self.params = np.asarray(params, dtype=float)
        self.dim = int(dim)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.domain = None if domain is None else np.asarray(domain, dtype=float).reshape(self.dim, 2)

    # -- scalar evaluation ------------------------------------------------

    def cell_values(self, y, x_slow=None):
        """Scalar profile A(x_slow, y) on cell coordinates y, vectorized.

        y has shape (n,) in 1d or (n, 2) in 2d.  x_slow is only used by the
        locally periodic kind; it defaults to the cell itself being the whole
        story (slow factor 1).
        """
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "constant":
            base = np.broadcast_to(p[0], y.shape[:1] if y.ndim else ())
            return np.array(base, dtype=float, copy=True)
        if self.kind == "periodic_1d":
            return 1.0 / (p[0] + p[1] * np.sin(2.0 * np.pi * _frac(y)))
        if self.kind == "locally_periodic":
            fast = 1.0 / (p[0] + p[1] * np.sin(2.0 * np.pi * _frac(y)))
            if x_slow is None:
                return fast
            slow = 1.0 + p[2] * np.sin(2.0 * np.pi * np.asarray(x_slow, dtype=float))
            return slow * fast
        if self.kind == "laminate_2d":
            y1 = _frac(y[..., 0])
            return np.where(y1 < 0.5, p[0], p[1])
        if self.kind == "piecewise_constant_sample":
            n = int(p[0])
            vals = p[1:]
            if self.dim == 1:
                idx = np.minimum((_frac(y) * n).astype(int), n - 1)
                return vals[idx]
            idx0 = np.minimum((_frac(y[..., 0]) * n).astype(int), n - 1)
            idx1 = np.minimum((_frac(y[..., 1]) * n).astype(int), n - 1)
            return vals.reshape(n, n)[idx0, idx1]
        raise FieldSpecError(self.kind)

    def _check_domain(self, x):
        if self.domain is None:
            return
        pts = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, self.dim))
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        tol = 1e-12
        if np.any(pts < lo - tol) or np.any(pts > hi + tol):
            raise DomainError("evaluation point outside the declared domain")

    def values(self, x):
        """Scalar a(x) at physical points x, shape (n,) or (n, d)."""
        self._check_domain(x)
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            shape = x.shape if self.dim == 1 and x.ndim <= 1 else x.shape[:-1]
            return np.full(shape, self.params[0])
        if self.dim == 1:
            xs = x
            return self.cell_values(xs / self.eps, x_slow=xs)
        return self.cell_values(x / self.eps)

    def scaled(self, c):
        """The field c * a with spectral bounds scaled accordingly."""
        if c <= 0:
            raise FieldSpecError("scaling factor must be positive")
        f = CoefficientField.__new__(CoefficientField)
        f.kind, f.eps, f.dim, f.domain = self.kind, self.eps, self.dim, self.domain
        f.alpha, f.beta = c * self.alpha, c * self.beta
        p = self.params.copy()
        if self.kind == "constant":
            p[0] *= c
        elif self.kind in ("periodic_1d", "locally_periodic"):
            p[:2] /= c
        elif self.kind == "laminate_2d":
            p *= c
        else:
            p[1:] *= c
        f.params = p
        return f


def make_field(kind, eps=1.0, params=None, alpha=None, beta=None, domain=None, dim=None):
    """Build a CoefficientField with derived spectral bounds.

    params per kind:
      constant                  [c]
      periodic_1d               [p0, p1]        -> 1/(p0 + p1 sin 2 pi y)
      locally_periodic          [p0, p1, q]     -> (1 + q sin 2 pi x)/(p0 + p1 sin 2 pi y)
      laminate_2d               [a1, a2]        -> a1 for y1 < 1/2, a2 otherwise
      piecewise_constant_sample [n, v0, v1, ...] cell values on an n (x n) grid
    """
    if params is None:
        params = [1.0]
    p = np.asarray(params, dtype=float)
    if kind == "constant":
        dim = 1 if dim is None else int(dim)
        a, b = p[0], p[0]
    elif kind == "periodic_1d":
        dim = 1
        if p[0] - abs(p[1]) <= 0:
            raise FieldSpecError("periodic_1d needs p0 > |p1|")
        a, b = 1.0 / (p[0] + abs(p[1])), 1.0 / (p[0] - abs(p[1]))
    elif kind == "locally_periodic":
        dim = 1
        if p[0] - abs(p[1]) <= 0 or abs(p[2]) >= 1:
            raise FieldSpecError("locally_periodic needs p0 > |p1| and |q| < 1")
        a = (1.0 - abs(p[2])) / (p[0] + abs(p[1]))
        b = (1.0 + abs(p[2])) / (p[0] - abs(p[1]))
    elif kind == "laminate_2d":
        dim = 2
        if np.any(p[:2] <= 0):
            raise FieldSpecError("laminate values must be positive")
        a, b = min(p[0], p[1]), max(p[0], p[1])
    elif kind == "piecewise_constant_sample":
        n = int(p[0])
        vals = p[1:]
        if n <= 0 or vals.size not in (n, n * n):
            raise FieldSpecError("sample grid size does not match value count")
        dim = 1 if vals.size == n else 2
        if np.any(vals <= 0):
            raise FieldSpecError("sampled values must be positive")
        a, b = vals.min(), vals.max()
    else:
        raise FieldSpecError("unknown coefficient kind %r" % (kind,))
    if alpha is None:
        alpha = a
    if beta is None:
        beta = b
    return CoefficientField(kind, eps, p, dim, alpha, beta, domain=domain)


def sample_field(values, eps=1.0, domain=None):
    """Field from cell values on a uniform micro grid (1d vector or 2d array)."""
    vals = np.asarray(values, dtype=float)
    n = vals.shape[0]
    return make_field("piecewise_constant_sample", eps, np.concatenate([[n], vals.ravel()]),
                      domain=domain)


def eval_coeff(field, x):
    """Coefficient matrix a(x) at a single point, returned as (d, d)."""
    x = np.asarray(x, dtype=float)
    if field.dim == 1:
        v = field.values(np.atleast_1d(x.reshape(())) if x.ndim == 0 else x.reshape(1))
        return v.reshape(1, 1)
    v = field.values(x.reshape(1, 2))
    return float(v[0]) * np.eye(2)


def verify_spectral_bounds(field, n_samples=256):
    """Check alpha, beta against eigenvalues on a deterministic sample grid.

    Samples cell midpoints (j + 1/2)/n over one period, and for the locally
    periodic kind also a grid of slow positions over (0,1).  Returns a report
    dict with the extreme eigenvalues and a pass flag (tolerance 1e-12).
    """
    n = int(n_samples)
    ymid = (np.arange(n) + 0.5) / n
    if field.dim == 1:
        if field.kind == "locally_periodic":
            m = min(n, 64)
            xs = np.repeat((np.arange(m) + 0.5) / m, n)
            vals = field.cell_values(np.tile(ymid, m), x_slow=xs)
        else:
            vals = field.cell_values(ymid)
    else:
        m = min(n, 128)
        ym = (np.arange(m) + 0.5) / m
        Y = np.stack(np.meshgrid(ym, ym, indexing="ij"), axis=-1).reshape(-1, 2)
        vals = field.cell_values(Y)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    tol = 1e-12
    ok = (lo >= field.alpha - tol * max(1.0, abs(field.alpha))
          and hi <= field.beta + tol * max(1.0, abs(field.beta)))
    return {"min_eig": lo, "max_eig": hi,
            "alpha": field.alpha, "beta": field.beta, "ok": bool(ok)}
