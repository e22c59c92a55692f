"""Second-order time integrators for M u'' + A u = b(t).

Leapfrog (explicit, CFL-limited) and Newmark (implicit, unconditionally
stable for beta = 1/4, gamma = 1/2).  Both factor the relevant matrix once
with sparse LU and keep per-step work at a matvec plus a triangular solve,
which keeps the discrete energy drift at roundoff level.
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sla


class TimeGridError(ValueError):
    pass


def cfl_timestep(h, beta, safety=0.5):
    """Explicit step size safety * h / sqrt(beta) for spectral bound beta."""
    if h <= 0 or beta <= 0 or safety <= 0:
        raise TimeGridError("h, beta, safety must be positive")
    return safety * h / np.sqrt(beta)


class TimeGrid:
    """n_steps uniform steps of size dt; states stored every store_stride steps."""

    def __init__(self, dt, n_steps, store_stride=1):
        if dt <= 0 or n_steps < 1:
            raise TimeGridError("need dt > 0 and n_steps >= 1")
        if n_steps % store_stride != 0:
            raise TimeGridError("store_stride must divide n_steps")
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.store_stride = int(store_stride)

    @property
    def T(self):
        return self.dt * self.n_steps

    def stored_steps(self):
        return np.arange(0, self.n_steps + 1, self.store_stride)

    def stored_times(self):
        return self.stored_steps() * self.dt


def make_time_grid(T, dt_target, n_checkpoints=None):
    """Grid reaching exactly T with dt <= dt_target.

    When n_checkpoints is given the step count is a multiple of it and
    states are stored at the checkpoints only.
    """
    if n_checkpoints is None:
        n = max(1, int(np.ceil(T / dt_target)))
        return TimeGrid(T / n, n)
    nc = int(n_checkpoints)
    per = max(1, int(np.ceil(T / (dt_target * nc))))
    return TimeGrid(T / (nc * per), nc * per, store_stride=per)


class Trajectory:
    """Sampled states of a time integration.

    times : (k,) sample times
    u : (k, n_dofs) displacement samples
    v : (k, n_dofs) velocity samples, or None when not tracked
    energy : optional (m,) discrete-energy series with its own energy_times
    """

    def __init__(self, times, u, v=None, energy=None, energy_times=None):
        self.times = np.asarray(times, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = None if v is None else np.asarray(v, dtype=float)
        self.energy = energy
        self.energy_times = energy_times

    @property
    def n_samples(self):
        return len(self.times)

    @property
    def n_dofs(self):
        return self.u.shape[1]

    def sample_at(self, t_eval):
        """Linear-in-time interpolation of u onto times t_eval, (m, n_dofs)."""
        t_eval = np.asarray(t_eval, dtype=float)
        t = self.times
        if t_eval.min() < t[0] - 1e-12 or t_eval.max() > t[-1] + 1e-12:
            raise TimeGridError("evaluation times outside the stored range")
        idx = np.clip(np.searchsorted(t, t_eval, side="right") - 1, 0, len(t) - 2)
        w = (t_eval - t[idx]) / (t[idx + 1] - t[idx])
        w = np.clip(w, 0.0, 1.0)[:, None]
        return (1.0 - w) * self.u[idx] + w * self.u[idx + 1]


def _rhs_fun(b, n):
    if b is None:
        zero = np.zeros(n)
        return lambda t: zero
    if callable(b):
        return b
    const = np.asarray(b, dtype=float)
    return lambda t: const


def _as_csc(A):
    return A.tocsc() if sparse.issparse(A) else sparse.csc_matrix(np.atleast_2d(A))


def leapfrog_run(M, A, state0, grid, b=None, track_energy=False):
    """Explicit central-difference march of M u'' + A u = b(t).

    The first step is the Taylor start
        u1 = u0 + dt v0 + dt^2/2 M^{-1}(b(0) - A u0),
    after which M(u^{n+1} - 2u^n + u^{n-1})/dt^2 + A u^n = b(t_n).  Stored
    velocities are central differences (one-sided second order at the ends).
    With track_energy the invariant
        E^{n+1/2} = 1/2 |(u^{n+1}-u^n)/dt|_M^2 + 1/2 (u^{n+1})^T A u^n
    is recorded at every step.
    """
    Mc, Ac = _as_csc(M), _as_csc(A)
    u0, v0 = (np.asarray(s, dtype=float).copy() for s in state0)
    n = len(u0)
    dt, n_steps = grid.dt, grid.n_steps
    rhs = _rhs_fun(b, n)
    solve = sla.splu(Mc).solve

    store = set(grid.stored_steps().tolist())
    k = len(store)
    U = np.empty((k, n))
    V = np.empty((k, n))
    slot = {s: i for i, s in enumerate(sorted(store))}
    energies = np.empty(n_steps) if track_energy else None

    u_prev = u0
    acc0 = solve(rhs(0.0) - Ac @ u0)
    u_cur = u0 + dt * v0 + 0.5 * dt * dt * acc0
    if 0 in store:
        U[slot[0]], V[slot[0]] = u0, v0
    if track_energy:
        d = (u_cur - u_prev) / dt
        energies[0] = 0.5 * d @ (Mc @ d) + 0.5 * u_cur @ (Ac @ u_prev)
    for step in range(1, n_steps):
        u_next = 2.0 * u_cur - u_prev + dt * dt * solve(rhs(step * dt) - Ac @ u_cur)
        if step in store:
            U[slot[step]] = u_cur
            V[slot[step]] = (u_next - u_prev) / (2.0 * dt)
        if track_energy:
            d = (u_next - u_cur) / dt
            energies[step] = 0.5 * d @ (Mc @ d) + 0.5 * u_next @ (Ac @ u_cur)
        u_prev, u_cur = u_cur, u_next
    if n_steps in store:
        U[slot[n_steps]] = u_cur
        # one-sided second-order velocity at the final time
        V[slot[n_steps]] = (u_cur - u_prev) / dt + 0.5 * dt * solve(
            rhs(n_steps * dt) - Ac @ u_cur)
    traj = Trajectory(grid.stored_times(), U, V)
    if track_energy:
        traj.energy = energies
        traj.energy_times = (np.arange(n_steps) + 0.5) * dt
    return traj


def newmark_run(M, A, state0, grid, b=None, beta=0.25, gamma=0.5,
                track_energy=False):
    """Newmark march of M u'' + A u = b(t); default parameters (1/4, 1/2).

    The average-acceleration variant is unconditionally stable and, for
    linear problems with b = 0, conserves 1/2 v^T M v + 1/2 u^T A u up to
    roundoff.  M only needs to be symmetric positive definite; it may be a
    modified (dispersive) mass matrix.
    """
    Mc, Ac = _as_csc(M), _as_csc(A)
    u, v = (np.asarray(s, dtype=float).copy() for s in state0)
    n = len(u)
    dt, n_steps = grid.dt, grid.n_steps
    rhs = _rhs_fun(b, n)
    a = sla.splu(Mc).solve(rhs(0.0) - Ac @ u)
    S = sla.splu((Mc + beta * dt * dt * Ac).tocsc()).solve

    store = set(grid.stored_steps().tolist())
    slot = {s: i for i, s in enumerate(sorted(store))}
    U = np.empty((len(store), n))
    V = np.empty((len(store), n))
    energies = np.empty(n_steps + 1) if track_energy else None

    def energy(uu, vv):
        return 0.5 * vv @ (Mc @ vv) + 0.5 * uu @ (Ac @ uu)

    if 0 in store:
        U[slot[0]], V[slot[0]] = u, v
    if track_energy:
        energies[0] = energy(u, v)
    for step in range(1, n_steps + 1):
        u_star = u + dt * v + dt * dt * (0.5 - beta) * a
        a_new = S(rhs(step * dt) - Ac @ u_star)
        u = u_star + beta * dt * dt * a_new
        v = v + dt * ((1.0 - gamma) * a + gamma * a_new)
        a = a_new
        if step in store:
            U[slot[step]], V[slot[step]] = u, v
        if track_energy:
            energies[step] = energy(u, v)
    traj = Trajectory(grid.stored_times(), U, V)
    if track_energy:
        traj.energy = energies
        traj.energy_times = np.arange(n_steps + 1) * dt
    return traj


# -- trajectory snapshots ------------------------------------------------
#
# Text format, the only stable exchange format for trajectories:
#   mswave-traj v1
#   dim n_dofs n_steps dt
#   <n_steps lines of n_dofs displacement values>
# Samples are uniformly spaced in time starting at t = 0.

SNAPSHOT_MAGIC = "mswave-traj v1"


class SnapshotError(ValueError):
    pass


def save_trajectory(path, traj, dim):
    t = traj.times
    if len(t) < 2:
        dt = 0.0
    else:
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-14):
            raise SnapshotError("snapshot format requires uniform sample times")
        dt = steps[0]
    with open(path, "w") as f:
        f.write(SNAPSHOT_MAGIC + "\n")
        f.write("%d %d %d %.17g\n" % (dim, traj.n_dofs, traj.n_samples, dt))
        for row in traj.u:
            f.write(" ".join("%.17g" % x for x in row) + "\n")


def load_trajectory(path):
    with open(path) as f:
        magic = f.readline().strip()
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotError("not a trajectory snapshot: bad magic %r" % magic)
        head = f.readline().split()
        if len(head) != 4:
            raise SnapshotError("malformed snapshot header")
        dim, n_dofs, n_steps = int(head[0]), int(head[1]), int(head[2])
        dt = float(head[3])
        U = np.empty((n_steps, n_dofs))
        for i in range(n_steps):
            row = np.array(f.readline().split(), dtype=float)
            if len(row) != n_dofs:
                raise SnapshotError("snapshot row %d has wrong length" % i)
            U[i] = row
    times = np.arange(n_steps) * dt
    traj = Trajectory(times, U)
    traj.dim = dim
    return traj
