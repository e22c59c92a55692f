"""Experiment runner: references, method sweeps, error tables, CSV output.

Configs are the flat files of the config module.  Every run compares a method
trajectory against a reference (fine solve or effective-model oracle), writes
one CSV row per sweep point with the fixed schema, and flushes after each row
so aborted sweeps leave a usable partial table.  Sweep points are independent
of each other; the loop here is serial and appends rows in sweep order.
"""

import hashlib
import os
import time as time_mod

import numpy as np

from . import coeff, fem, fehmm, fdhmm, homog, lod
from . import mesh as mesh_mod
from .config import Config, ConfigError, validate_keys, validate_choices
from .timeint import (cfl_timestep, make_time_grid, load_trajectory,
                      save_trajectory)


CSV_HEADER = ("method,dim,eps,H,h,k,delta,tau,T,dofs,wall_time_s,"
              "linf_l2,linf_h1,rate_l2,rate_h1")


class BudgetError(ConfigError):
    """Planned work exceeds budget.max_work; the run is refused up front."""


class RunRecord:
    FIELDS = ("method", "dim", "eps", "H", "h", "k", "delta", "tau", "T",
              "dofs", "wall_time_s", "linf_l2", "linf_h1", "rate_l2",
              "rate_h1")

    def __init__(self, **kw):
        for f in self.FIELDS:
            setattr(self, f, kw.pop(f, None))
        if kw:
            raise TypeError("unknown record fields %s" % sorted(kw))
        if self.dofs is not None and self.dofs <= 0:
            raise ValueError("dofs must be positive")
        for f in ("linf_l2", "linf_h1"):
            v = getattr(self, f)
            if v is not None and v < 0:
                raise ValueError("%s must be nonnegative" % f)

    def row(self):
        return ",".join(_fmt(getattr(self, f)) for f in self.FIELDS)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    return "%.10g" % v


def estimate_rate(xs, errs):
    """Pairwise and least-squares convergence rates of errs against xs.

    Pairs with a zero error get rate None (flagged, not an exception); the LS
    fit uses the positive-error points and needs at least two of them.
    """
    xs = np.asarray(xs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if len(xs) != len(errs) or len(xs) < 2:
        raise ValueError("need at least two sweep points")
    if len(np.unique(xs)) != len(xs):
        raise ValueError("sweep values must be distinct")
    pairwise = []
    for i in range(1, len(xs)):
        if errs[i - 1] <= 0.0 or errs[i] <= 0.0:
            pairwise.append(None)
        else:
            pairwise.append(float(np.log(errs[i - 1] / errs[i])
                                  / np.log(xs[i - 1] / xs[i])))
    good = errs > 0.0
    ls = None
    if np.count_nonzero(good) >= 2:
        ls = float(np.polyfit(np.log(xs[good]), np.log(errs[good]), 1)[0])
    return pairwise, ls


# named space profiles for g1, g2, F; "name" or "name:parameter"
def profile(spec, dim, bc):
    if spec is None or spec == "zero":
        return None
    name, _, arg = spec.partition(":")
    if name == "const":
        c = float(arg or 1.0)
        return lambda x: np.full(len(x), c)
    if name == "sin":
        k = int(arg or 1)
        if bc != "periodic":
            raise ConfigError("profile sin:%d needs periodic bc" % k)
        if dim == 1:
            return lambda x: np.sin(2 * np.pi * k * x[:, 0])
        return lambda x: (np.sin(2 * np.pi * k * x[:, 0])
                          * np.sin(2 * np.pi * k * x[:, 1]))
    if name == "dsin":
        k = int(arg or 1)
        if dim == 1:
            return lambda x: np.sin(np.pi * k * x[:, 0])
        return lambda x: (np.sin(np.pi * k * x[:, 0])
                          * np.sin(np.pi * k * x[:, 1]))
    if name == "mix":
        if dim != 1:
            raise ConfigError("profile mix is 1d only")
        return lambda x: (np.sin(2 * np.pi * x[:, 0])
                          + 0.5 * np.sin(4 * np.pi * x[:, 0]))
    raise ConfigError("unknown profile %r" % spec)


def _field(cfg, eps):
    kind = cfg.get_str("problem.coeff", "periodic_1d")
    params = cfg.get_floats("problem.coeff_params", [2.0, 1.0])
    dim = cfg.get_int("problem.dim", 1)
    return coeff.make_field(kind, eps, params, dim=dim)


def _data(cfg, dim, bc):
    return homog.WaveData(g1=profile(cfg.get("problem.g1"), dim, bc),
                          g2=profile(cfg.get("problem.g2"), dim, bc),
                          F=profile(cfg.get("problem.F"), dim, bc))


def _mesh(dim, N, bc):
    return mesh_mod.build_uniform_mesh(dim, N, periodic=(bc == "periodic"))


def _space_dofs(msh, bc):
    if bc == "dirichlet":
        return msh.n_vertices - len(msh.boundary_vertices)
    return msh.n_dofs


def _auto_dt(cfg, h, beta):
    dt = cfg.get_float("time.dt", 0.0)
    if dt > 0.0:
        return dt
    return cfl_timestep(h, beta, safety=0.25)


def check_budget(cfg, dofs, n_steps, label):
    budget = cfg.get_float("budget.max_work", 0.0)
    work = float(dofs) * float(n_steps)
    if budget > 0.0 and work > budget:
        raise BudgetError(
            "%s needs ~%.3g dof-steps (%d dofs x %d steps), over "
            "budget.max_work = %.3g" % (label, work, dofs, n_steps, budget))
    return work


def cache_dir(cfg):
    env = os.environ.get("MSWAVE_CACHE_DIR")
    if env:
        return env
    csv = cfg.get("output.csv")
    base = os.path.dirname(os.path.abspath(csv)) if csv else "."
    return os.path.join(base, ".mswave_cache")


def _homog_tensor(cfg, field):
    n_cell = cfg.get_int("homog.n_cell", 1024 if field.dim == 1 else 64)
    cs = homog.solve_cell_problems(field, n_cell)
    a0 = homog.homogenized_tensor(cs)
    b0 = homog.dispersive_coefficient_1d(cs) if field.dim == 1 else None
    return a0, b0


def reference_solution(cfg, eps, use_cache=True):
    """Reference trajectory per reference.kind, snapshot-cached by content.

    The cache key hashes every config value the reference depends on, so any
    change of problem, horizon, or reference resolution misses cleanly.
    """
    kind = cfg.get_str("reference.kind", "fine")
    if kind == "none":
        return None, None
    dim = cfg.get_int("problem.dim", 1)
    bc = cfg.get_str("problem.bc", "periodic")
    N = cfg.get_int("reference.N", cfg.get_int("mesh.N_fine", 0))
    if N <= 0:
        raise ConfigError("reference needs reference.N or mesh.N_fine")
    msh = _mesh(dim, N, bc)
    field = _field(cfg, eps)
    scheme = cfg.get_str("time.scheme", "newmark")
    T = cfg.get_float("time.T")
    dt = cfg.get_float("reference.dt", 0.0) or _auto_dt(cfg, msh.h, field.beta)
    ncp = cfg.get_int("time.n_checkpoints", 16)
    grid = make_time_grid(T, dt, ncp)
    check_budget(cfg, msh.n_vertices, grid.n_steps, "reference (%s)" % kind)

    tag = "kind=%s;eps=%.12g;N=%d;dt=%.12g;scheme=%s;T=%.12g;ncp=%d;%s" % (
        kind, eps, N, dt, scheme, T, ncp,
        cfg.canonical(["problem", "homog"]))
    path = os.path.join(cache_dir(cfg),
                        hashlib.sha256(tag.encode()).hexdigest()[:16] + ".traj")
    if use_cache and os.path.exists(path):
        return load_trajectory(path), msh

    data = _data(cfg, dim, bc)
    if kind == "fine":
        traj = homog.solve_fine_wave(field, msh, data, grid, scheme=scheme,
                                     bc=bc)
    elif kind == "homogenized":
        a0, _ = _homog_tensor(cfg, field)
        traj = homog.solve_homogenized_wave(a0, msh, data, grid,
                                            scheme=scheme, bc=bc)
    elif kind == "boussinesq":
        a0, b0 = _homog_tensor(cfg, field)
        traj = homog.solve_boussinesq_1d(a0, b0, eps, msh, data, grid, bc=bc)
    else:
        raise ConfigError("unknown reference.kind %r" % kind)
    if use_cache:
        os.makedirs(cache_dir(cfg), exist_ok=True)
        tmp = path + ".tmp.%d" % os.getpid()
        save_trajectory(tmp, traj, dim)
        os.replace(tmp, path)
    return traj, msh


def run_method(cfg, eps, N, data=None):
    """One method run at resolution N; returns (trajectory, mesh, info)."""
    name = cfg.require("method.name")
    dim = cfg.get_int("problem.dim", 1)
    bc = cfg.get_str("problem.bc", "periodic")
    scheme = cfg.get_str("time.scheme", "newmark")
    T = cfg.get_float("time.T")
    ncp = cfg.get_int("time.n_checkpoints", 16)
    field = _field(cfg, eps)
    if data is None:
        data = _data(cfg, dim, bc)
    info = {"dofs": None, "h": None, "k": None, "delta": None, "tau": None}

    if name in ("fine", "homogenized", "boussinesq"):
        msh = _mesh(dim, N, bc)
        dt = _auto_dt(cfg, msh.h, field.beta)
        grid = make_time_grid(T, dt, ncp)
        check_budget(cfg, msh.n_vertices, grid.n_steps, name)
        if name == "fine":
            traj = homog.solve_fine_wave(field, msh, data, grid,
                                         scheme=scheme, bc=bc)
        elif name == "homogenized":
            a0, _ = _homog_tensor(cfg, field)
            traj = homog.solve_homogenized_wave(a0, msh, data, grid,
                                                scheme=scheme, bc=bc)
        else:
            a0, b0 = _homog_tensor(cfg, field)
            traj = homog.solve_boussinesq_1d(a0, b0, eps, msh, data, grid,
                                             bc=bc)
        info.update(dofs=_space_dofs(msh, bc), h=1.0 / N)
        return traj, msh, info

    if name in ("fehmm", "fehmm_l"):
        msh = _mesh(dim, N, bc)
        delta = eps * cfg.get_float("fehmm.delta_over_eps", 1.0)
        n_micro = cfg.get_int("fehmm.n_micro", 128)
        coupling = cfg.get_str("fehmm.coupling", "periodic")
        longtime = (name == "fehmm_l") or cfg.get_bool("fehmm.longtime", False)
        dt = _auto_dt(cfg, msh.h, field.beta)
        grid = make_time_grid(T, dt, ncp)
        check_budget(cfg, msh.n_vertices, grid.n_steps, name)
        traj = fehmm.fehmm_solve(field, msh, data, grid, delta=delta,
                                 n_micro=n_micro, coupling=coupling,
                                 longtime=longtime, scheme=scheme, bc=bc)
        info.update(dofs=_space_dofs(msh, bc), h=delta / n_micro,
                    delta=delta)
        return traj, msh, info

    if name == "fdhmm":
        if dim != 1:
            raise ConfigError("fdhmm is 1d only")
        delta = eps * cfg.get_float("fdhmm.delta_over_eps", 1.0)
        tau = eps * cfg.get_float("fdhmm.tau_over_eps", 20.0)
        n_micro = cfg.get_int("fdhmm.n_micro", 128)
        field_beta = field.beta
        dt = cfg.get_float("time.dt", 0.0) or None
        dt_est = dt or 0.5 / (N * np.sqrt(field_beta))
        check_budget(cfg, N, int(np.ceil(T / dt_est)), name)
        traj, msh = fdhmm.fdhmm_run(field, N, data, T, bc=bc, dt=dt,
                                    delta=delta, tau=tau, n_micro=n_micro,
                                    n_checkpoints=ncp)
        info.update(dofs=N if bc == "periodic" else N + 1,
                    h=delta / n_micro, delta=delta, tau=tau)
        return traj, msh, info

    if name == "lod":
        N_fine = cfg.get_int("mesh.N_fine")
        coarse = _mesh(dim, N, bc)
        fine = _mesh(dim, N_fine, bc)
        k = cfg.get_int("lod.k", 0)
        ms = lod.build_ms_space(field, coarse, fine, k=k, bc=bc)
        dt = _auto_dt(cfg, coarse.h, field.beta)
        grid = make_time_grid(T, dt, ncp)
        check_budget(cfg, ms.n_dofs, grid.n_steps, name)
        traj = lod.lod_wave_solve(ms, data, grid,
                                  init_mode=cfg.get_str("lod.init_mode",
                                                        "l2_proj"),
                                  scheme=scheme, field=field,
                                  a0=_homog_tensor(cfg, field)[0]
                                  if cfg.get("lod.init_mode") == "wellprepared"
                                  else None)
        info.update(dofs=ms.n_dofs, h=1.0 / N_fine, k=ms.k)
        return traj, fine, info

    raise ConfigError("unknown method.name %r" % name)


def run_experiment(cfg):
    """Sweep the method over H or eps, compare to the reference, emit CSV."""
    if isinstance(cfg, str):
        cfg = Config.from_file(cfg)
    validate_keys(cfg)
    validate_choices(cfg)
    name = cfg.require("method.name")
    cfg.get_float("time.T")

    Hs = cfg.get_floats("sweep.H")
    epss = cfg.get_floats("sweep.eps")
    if Hs and epss:
        raise ConfigError("sweep.H and sweep.eps are mutually exclusive")
    dim = cfg.get_int("problem.dim", 1)
    base_eps = cfg.get_float("problem.eps", 0.1)
    T = cfg.get_float("time.T")

    if Hs:
        points = [(base_eps, int(round(1.0 / H)), H) for H in Hs]
    elif epss:
        points = [(e, cfg.get_int("mesh.N"), None) for e in epss]
    else:
        points = [(base_eps, cfg.get_int("mesh.N"), None)]
    for _, N, _ in points:
        if N <= 0:
            raise ConfigError("sweep produced a non-positive resolution")

    csv_path = cfg.get("output.csv")
    out = open(csv_path, "w") if csv_path else None
    if out:
        out.write(CSV_HEADER + "\n")
        out.flush()
    records = []
    sweep_vals, l2s, h1s = [], [], []
    try:
        ref_cache = {}
        for eps, N, H in points:
            if eps not in ref_cache:
                ref_cache[eps] = reference_solution(cfg, eps)
            ref, ref_mesh = ref_cache[eps]
            t0 = time_mod.perf_counter()
            traj, msh, info = run_method(cfg, eps, N)
            wall = time_mod.perf_counter() - t0
            if ref is not None:
                same = msh.n_vertices == ref_mesh.n_vertices and \
                    msh.N == ref_mesh.N
                rep = fem.error_norms(ref, traj, ref_mesh,
                                      coarse_mesh=None if same else msh)
                l2, h1 = rep.linf_l2, rep.linf_h1
            else:
                l2 = h1 = None
            sweep_vals.append(H if H is not None else eps)
            l2s.append(l2)
            h1s.append(h1)
            r_l2 = r_h1 = None
            if len(sweep_vals) >= 2 and l2 is not None:
                r_l2 = estimate_rate(sweep_vals[-2:], l2s[-2:])[0][0]
                r_h1 = estimate_rate(sweep_vals[-2:], h1s[-2:])[0][0]
            rec = RunRecord(method=name, dim=dim, eps=eps, H=H,
                            h=info["h"], k=info["k"], delta=info["delta"],
                            tau=info["tau"], T=T, dofs=info["dofs"],
                            wall_time_s=wall
                            if cfg.get_bool("output.walltime", True) else None,
                            linf_l2=l2, linf_h1=h1,
                            rate_l2=r_l2, rate_h1=r_h1)
            records.append(rec)
            if out:
                out.write(rec.row() + "\n")
                out.flush()
    finally:
        if out:
            out.close()
    if csv_path and cfg.get_bool("output.figures", True):
        from . import report
        report.convergence_figure(records, _fig_path(csv_path, "convergence"))
    return records


def _fig_path(csv_path, stem):
    base, _ = os.path.splitext(csv_path)
    return "%s_%s.png" % (base, stem)


def longtime_compare(cfg):
    """Fine solve over T0/eps^2 and checkpoint errors of the effective models.

    Returns a dict with the checkpoint times and one error series per model;
    longtime.methods may add fehmm / fehmm_l trajectories to the comparison.
    """
    if isinstance(cfg, str):
        cfg = Config.from_file(cfg)
    validate_keys(cfg)
    validate_choices(cfg)
    dim = cfg.get_int("problem.dim", 1)
    bc = cfg.get_str("problem.bc", "periodic")
    if dim != 1 or bc != "periodic":
        raise ConfigError("longtime comparison is 1d periodic")
    eps = cfg.get_float("problem.eps")
    T0 = cfg.get_float("longtime.T0", 0.5)
    T = T0 / eps ** 2
    ncp = cfg.get_int("longtime.checkpoints", 8)
    field = _field(cfg, eps)
    data = _data(cfg, dim, bc)

    N_fine = cfg.get_int("mesh.N_fine")
    fine = _mesh(1, N_fine, bc)
    dt_f = cfg.get_float("reference.dt", 0.0) or cfl_timestep(fine.h,
                                                             field.beta)
    grid_f = make_time_grid(T, dt_f, ncp)
    check_budget(cfg, fine.n_dofs, grid_f.n_steps, "long-time fine reference")
    ref = homog.solve_fine_wave(field, fine, data, grid_f, scheme="leapfrog",
                                bc=bc)

    N = cfg.get_int("mesh.N")
    msh = _mesh(1, N, bc)
    dt = cfg.get_float("time.dt", 0.0) or cfl_timestep(msh.h, field.beta)
    grid = make_time_grid(T, dt, ncp)
    a0, b0 = _homog_tensor(cfg, field)
    table = {"t": ref.times, "a0": float(a0[0, 0]), "b0": b0}

    hom = homog.solve_homogenized_wave(a0, msh, data, grid, scheme="newmark",
                                       bc=bc)
    table["err_vs_u0"] = fem.error_norms(ref, hom, fine, msh).l2_series
    bou = homog.solve_boussinesq_1d(a0, b0, eps, msh, data, grid, bc=bc)
    table["err_vs_boussinesq"] = fem.error_norms(ref, bou, fine, msh).l2_series

    extra = [m.strip() for m in
             cfg.get_str("longtime.methods", "").split(",") if m.strip()]
    for m in extra:
        if m not in ("fehmm", "fehmm_l"):
            raise ConfigError("longtime.methods accepts fehmm, fehmm_l")
        Nh = cfg.get_int("mesh.N")
        mmsh = _mesh(1, Nh, bc)
        tr = fehmm.fehmm_solve(
            field, mmsh, data, grid,
            delta=eps * cfg.get_float("fehmm.delta_over_eps", 1.0),
            n_micro=cfg.get_int("fehmm.n_micro", 128),
            coupling=cfg.get_str("fehmm.coupling", "periodic"),
            longtime=(m == "fehmm_l"), scheme="newmark", bc=bc)
        table["err_vs_" + m] = fem.error_norms(ref, tr, fine, mmsh).l2_series

    csv_path = cfg.get("output.csv")
    if csv_path:
        cols = ["t"] + [k for k in table if k.startswith("err_vs_")]
        with open(csv_path, "w") as f:
            f.write(",".join(cols) + "\n")
            for i in range(len(ref.times)):
                f.write(",".join(_fmt(float(np.asarray(table[c])[i]))
                                 for c in cols) + "\n")
        if cfg.get_bool("output.figures", True):
            from . import report
            report.longtime_figure(table, _fig_path(csv_path, "longtime"))
    return table


def verify_suite(cfg=None):
    """Fast structural self-checks; returns (name, passed, detail) triples.

    Used by the verify CLI command.  Each check is independent and cheap; a
    failing check points at the subsystem, not the concrete bug.
    """
    if cfg is None:
        cfg = Config({}, source="<defaults>")
    eps = cfg.get_float("problem.eps", 0.1)
    seed = cfg.get_int("problem.seed", 0)
    try:
        field = _field(cfg, eps)
    except Exception as exc:
        return [("coefficient build", False, str(exc))]
    out = []

    rep = coeff.verify_spectral_bounds(field, n_samples=64)
    out.append(("spectral bounds alpha <= a <= beta", rep["ok"],
                "min %.6g max %.6g" % (rep["min_eig"], rep["max_eig"])))

    if field.dim == 1:
        cs = homog.solve_cell_problems(field, 512)
        a0 = homog.homogenized_tensor(cs)[0, 0]
        vals = field.cell_values(np.linspace(0.0, 1.0, 4096, endpoint=False))
        har = 1.0 / np.mean(1.0 / vals)
        ari = np.mean(vals)
        ok = har - 1e-8 <= a0 <= ari + 1e-8
        out.append(("a0 within harmonic/arithmetic bracket", ok,
                    "a0 %.8g in [%.8g, %.8g]" % (a0, har, ari)))

    cmesh = mesh_mod.build_uniform_mesh(1, 16, periodic=True)
    cfield = coeff.make_field("constant", 0.0625, [0.7])
    B, _ = fehmm.assemble_B_H(cfield, cmesh, delta=0.0625, n_micro=32,
                              coupling="periodic", bc="periodic")
    S = fem.assemble_stiffness(0.7, cmesh, bc="periodic")
    dev = np.abs((B.matrix - S.matrix).toarray()).max()
    out.append(("constant-field B_H degeneracy", dev <= 1e-12,
                "max dev %.3e" % dev))

    J = fdhmm.micro_wave_flux(cfield, 0.3, 0.0625, 0.5, 32)
    out.append(("constant-field unit flux", abs(J - 0.7) <= 1e-12,
                "J %.15g" % J))

    msh = mesh_mod.build_uniform_mesh(1, 64, periodic=True)
    from .timeint import TimeGrid, leapfrog_run
    M = fem.assemble_mass(msh, bc="periodic")
    S1 = fem.assemble_stiffness(field if field.dim == 1 else 1.0, msh,
                                bc="periodic")
    u0 = np.sin(2 * np.pi * np.arange(64) / 64.0)
    grid = TimeGrid(2e-3, 2000, store_stride=2000)
    traj = leapfrog_run(M.matrix, S1.matrix, (u0, np.zeros(64)), grid,
                        track_energy=True)
    e = traj.energy
    drift = np.abs(e - e[0]).max() / abs(e[0])
    out.append(("leapfrog energy drift", drift <= 1e-10, "drift %.3e" % drift))

    f1 = coeff.make_field("periodic_1d", 0.125, [2.0, 1.0])
    coarse = mesh_mod.build_uniform_mesh(1, 8, periodic=True)
    fine = mesh_mod.build_uniform_mesh(1, 64, periodic=True)
    pair = fem.MeshPair(coarse, fine)
    fs = lod.FineScale(f1, pair, bc="periodic")
    ms = lod.build_ms_space(f1, coarse, fine, k=8, bc="periodic")
    worst_p = 0.0
    for K in range(coarse.n_elements):
        cor = lod.corrector_solve(f1, coarse, fine, K, 8, bc="periodic", fs=fs)
        for j in range(cor.values.shape[1]):
            q = np.zeros(fs.n_f)
            q[cor.free] = cor.values[:, j]
            pj = fem.l2_project(pair, fs.S.expand(q), bc="periodic")
            worst_p = max(worst_p, np.abs(pj).max())
    out.append(("corrector kernel constraint", worst_p <= 1e-10,
                "max projection %.3e" % worst_p))

    rng = np.random.default_rng(seed)
    Mc = fem.assemble_mass(coarse, bc="periodic")
    worst_o = 0.0
    from scipy.sparse.linalg import spsolve as _sps
    for _ in range(5):
        v = rng.standard_normal(fs.n_f)
        w = v - fs.T @ _sps(Mc.matrix.tocsc(), fs.C @ v)
        worst_o = max(worst_o, np.abs(ms.basis @ (fs.S.matrix @ w)).max())
    out.append(("multiscale orthogonality", worst_o <= 1e-9,
                "max residual %.3e" % worst_o))

    import tempfile
    from .timeint import Trajectory
    with tempfile.TemporaryDirectory() as tmp:
        t0 = Trajectory(np.arange(5) * 0.25, rng.standard_normal((5, 7)))
        p = os.path.join(tmp, "t.traj")
        save_trajectory(p, t0, 1)
        t1 = load_trajectory(p)
        ok = np.array_equal(t0.u, t1.u) and np.allclose(t0.times, t1.times)
    out.append(("snapshot round-trip", ok, "5 x 7 samples"))
    return out
