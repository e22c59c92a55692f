"""1d finite difference HMM: macro flux form fed by micro wave solves.

Each macro interface x_{i+1/2} gets an effective coefficient J_unit obtained
by solving the oscillatory wave equation on a small periodic sampling domain
with linear initial data of unit slope and averaging the flux a u_x in space
(uniformly over K_delta) and time (against a smooth bump on [0, tau]).  The
time average damps the micro oscillations spectrally fast, so tau of a few
periods in the micro time scale suffices.  Macro fluxes follow by linearity:
J_{i+1/2} = J_unit_{i+1/2} (U_{i+1} - U_i)/H.
"""

import numpy as np
from scipy.integrate import quad

from . import mesh as mesh_mod
from .timeint import Trajectory, TimeGrid


class MicroCFLError(ValueError):
    pass


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


# mass of exp(-1/(1-s^2)) on (-1, 1), computed once
_BUMP_MASS = 2.0 * quad(lambda s: np.exp(-1.0 / (1.0 - s * s)), 0.0, 1.0,
                        epsabs=1e-15, epsrel=1e-13)[0]


class TemporalKernel:
    """Smooth symmetric bump psi on (0, tau) with unit integral."""

    def __init__(self, tau):
        self.tau = float(tau)
        self._scale = 2.0 / (self.tau * _BUMP_MASS)

    def psi(self, t):
        s = 2.0 * np.asarray(t, dtype=float) / self.tau - 1.0
        return self._scale * _bump(s)

    def discrete_weights(self, times):
        """Weights at sample times, renormalized to unit sum.

        The renormalization makes the discrete average reproduce constants
        exactly, which the flux of a constant coefficient relies on.
        """
        w = self.psi(times)
        return w / w.sum()


def micro_wave_flux(field, center, delta, tau, n_micro, slope=1.0,
                    dt=None, kernel=None):
    """Space-time averaged flux of the periodic micro wave problem.

    The deviation w = u - slope*x is K_delta-periodic and starts at rest;
    leapfrog with the micro CFL marches it to tau, and the returned J is the
    kernel-weighted average of the spatially averaged flux a (w_x + slope).
    """
    h = delta / n_micro
    dt_max = 0.5 * h / np.sqrt(field.beta)
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1.0 + 1e-12):
        raise MicroCFLError("micro step %.3e exceeds 0.5 h/sqrt(beta) = %.3e"
                            % (dt, dt_max))
    n_steps = max(1, int(np.ceil(tau / dt)))
    dt = tau / n_steps
    if kernel is None:
        kernel = TemporalKernel(tau)

    x_left = center - 0.5 * delta
    a_mid = field.values(x_left + h * (np.arange(n_micro) + 0.5))

    def mean_flux_and_acc(w):
        grad = (np.roll(w, -1) - w) / h + slope
        flux = a_mid * grad
        acc = (flux - np.roll(flux, 1)) / h
        return flux.mean(), acc

    weights = kernel.discrete_weights(np.arange(n_steps + 1) * dt)
    w_prev = np.zeros(n_micro)
    J0, acc = mean_flux_and_acc(w_prev)
    J = weights[0] * J0
    w_cur = w_prev + 0.5 * dt * dt * acc     # initial velocity is zero
    for step in range(1, n_steps + 1):
        Jn, acc = mean_flux_and_acc(w_cur)
        J += weights[step] * Jn
        if step < n_steps:
            w_prev, w_cur = w_cur, 2.0 * w_cur - w_prev + dt * dt * acc
    return float(J)


def precompute_flux_basis(field, N_macro, delta=None, tau=None, n_micro=128,
                          domain=(0.0, 1.0), kernel=None):
    """Unit-slope fluxes J_unit for the N interfaces of a uniform macro grid.

    Interfaces sit at the element midpoints x_{i+1/2}.  Sampling domains that
    see the same coefficient up to a cell phase share one micro solve.
    """
    if delta is None:
        delta = field.eps
    if tau is None:
        tau = 20.0 * field.eps
    x0, x1 = domain
    H = (x1 - x0) / N_macro
    centers = x0 + H * (np.arange(N_macro) + 0.5)
    cache = {}
    J = np.empty(N_macro)
    for i, c in enumerate(centers):
        if field.kind == "locally_periodic":
            key = round(c, 12)
        else:
            y = c / field.eps
            key = round(y - np.floor(y), 9)
        if key not in cache:
            cache[key] = micro_wave_flux(field, c, delta, tau, n_micro,
                                         kernel=kernel)
        J[i] = cache[key]
    return J


def fdhmm_run(field, N_macro, data, T, domain=(0.0, 1.0), bc="periodic",
              dt=None, safety=0.5, delta=None, tau=None, n_micro=128,
              n_checkpoints=None, flux_basis=None):
    """Macro flux-form leapfrog  d^2 U_i/dt^2 = (J_{i+1/2} - J_{i-1/2})/H + F.

    Returns the trajectory of vertex values on the macro mesh together with
    the mesh itself.  The macro step obeys the CFL on H (independent of eps).
    """
    if bc not in ("periodic", "dirichlet"):
        raise ValueError("bc must be 'periodic' or 'dirichlet'")
    msh = mesh_mod.build_uniform_mesh(1, N_macro, domain=[domain],
                                      periodic=(bc == "periodic"))
    H = msh.h
    if flux_basis is None:
        flux_basis = precompute_flux_basis(field, N_macro, delta, tau,
                                           n_micro, domain)
    J = np.asarray(flux_basis, dtype=float)
    if dt is None:
        dt = safety * H / np.sqrt(field.beta)
    n_steps = max(1, int(np.ceil(T / dt)))
    if n_checkpoints:
        per = max(1, int(np.ceil(n_steps / n_checkpoints)))
        n_steps = per * n_checkpoints
        stride = per
    else:
        stride = 1
    dt = T / n_steps
    grid = TimeGrid(dt, n_steps, store_stride=stride)

    g1v, g2v, Fv = data.nodal(msh)
    if bc == "periodic":
        U0, V0, F = g1v[:-1], g2v[:-1], Fv[:-1]

        def acc(U):
            flux = J * (np.roll(U, -1) - U) / H
            return (flux - np.roll(flux, 1)) / H + F
    else:
        U0, V0, F = g1v.copy(), g2v.copy(), Fv
        U0[[0, -1]] = 0.0
        V0[[0, -1]] = 0.0

        def acc(U):
            flux = J * (U[1:] - U[:-1]) / H
            out = np.zeros_like(U)
            out[1:-1] = (flux[1:] - flux[:-1]) / H + F[1:-1]
            return out

    store = set(grid.stored_steps().tolist())
    slot = {s: i for i, s in enumerate(sorted(store))}
    Usnap = np.empty((len(store), len(U0)))
    u_prev = U0.copy()
    u_cur = U0 + dt * V0 + 0.5 * dt * dt * acc(U0)
    if 0 in store:
        Usnap[slot[0]] = U0
    for step in range(1, n_steps):
        u_next = 2.0 * u_cur - u_prev + dt * dt * acc(u_cur)
        if step in store:
            Usnap[slot[step]] = u_cur
        u_prev, u_cur = u_cur, u_next
    if n_steps in store:
        Usnap[slot[n_steps]] = u_cur

    if bc == "periodic":
        Uv = Usnap[:, msh.vertex_dof]
    else:
        Uv = Usnap
    traj = Trajectory(grid.stored_times(), Uv)
    return traj, msh
