"""Command-line surface: homogenize, solve, convergence, longtime, verify."""

import argparse
import sys

import numpy as np

from . import bench, fem, homog
from .config import Config, ConfigError
from .timeint import save_trajectory


def _load(args):
    cfg = Config.from_file(args.config)
    from .config import validate_keys, validate_choices
    validate_keys(cfg)
    validate_choices(cfg)
    return cfg


def cmd_homogenize(args):
    cfg = _load(args)
    dim = cfg.get_int("problem.dim", 1)
    eps = cfg.get_float("problem.eps", 0.1)
    field = bench._field(cfg, eps)
    n_cell = cfg.get_int("homog.n_cell", 1024 if dim == 1 else 64)
    n_pts = cfg.get_int("homog.n_sample_points", 0)
    if field.kind == "locally_periodic" and n_pts > 1:
        xs = np.linspace(0.0, 1.0, n_pts)
    else:
        xs = np.array([0.0])
    rows = []
    for x in xs:
        cs = homog.solve_cell_problems(field, n_cell,
                                       slow_x=x if field.kind ==
                                       "locally_periodic" else None)
        a0 = homog.homogenized_tensor(cs)
        b0 = homog.dispersive_coefficient_1d(cs) if dim == 1 else None
        rows.append((x, a0, b0))
    lines = ["x,a0_11,a0_12,a0_22,b0"]
    for x, a0, b0 in rows:
        lines.append(",".join([
            "%.10g" % x, "%.12g" % a0[0, 0],
            "%.12g" % a0[0, 1] if dim == 2 else "",
            "%.12g" % a0[1, 1] if dim == 2 else "",
            "%.12g" % b0 if b0 is not None else ""]))
    text = "\n".join(lines) + "\n"
    path = cfg.get("output.csv")
    if path:
        with open(path, "w") as f:
            f.write(text)
        print("wrote %s (%d point%s)" % (path, len(rows),
                                         "" if len(rows) == 1 else "s"))
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve(args):
    cfg = _load(args)
    eps = cfg.get_float("problem.eps", 0.1)
    N = cfg.get_int("mesh.N")
    traj, msh, info = bench.run_method(cfg, eps, N)
    snap = cfg.get("output.snapshot")
    if snap:
        save_trajectory(snap, traj, msh.dim)
        print("wrote %s" % snap)
    line = "method=%s N=%d dofs=%s samples=%d T=%.6g" % (
        cfg.require("method.name"), N, info["dofs"], traj.n_samples,
        cfg.get_float("time.T"))
    ref, ref_mesh = bench.reference_solution(cfg, eps) \
        if cfg.get("reference.kind", "none") != "none" else (None, None)
    if ref is not None:
        same = msh.n_vertices == ref_mesh.n_vertices and msh.N == ref_mesh.N
        rep = fem.error_norms(ref, traj, ref_mesh,
                              coarse_mesh=None if same else msh)
        line += " linf_l2=%.6g linf_h1=%.6g" % (rep.linf_l2, rep.linf_h1)
    print(line)
    csv_path = cfg.get("output.csv")
    if csv_path and cfg.get_bool("output.figures", True):
        from . import report
        report.snapshot_figure(msh, traj, bench._fig_path(csv_path, "solution"))
    return 0


def cmd_convergence(args):
    cfg = _load(args)
    records = bench.run_experiment(cfg)
    xs = [r.H if r.H is not None else r.eps for r in records]
    l2 = [r.linf_l2 for r in records]
    for r in records:
        print(r.row())
    if len(records) >= 2 and all(v is not None for v in l2):
        pairwise, ls = bench.estimate_rate(xs, l2)
        print("rate_l2 pairwise: %s  ls: %s"
              % (["%.3f" % p if p is not None else "n/a" for p in pairwise],
                 "%.3f" % ls if ls is not None else "n/a"))
    return 0


def cmd_longtime(args):
    cfg = _load(args)
    table = bench.longtime_compare(cfg)
    t = np.asarray(table["t"])
    e_hom = np.asarray(table["err_vs_u0"])
    e_bou = np.asarray(table["err_vs_boussinesq"])
    print("t_final=%.6g err_vs_u0=%.6g err_vs_boussinesq=%.6g factor=%.3g"
          % (t[-1], e_hom[-1], e_bou[-1],
             e_hom[-1] / e_bou[-1] if e_bou[-1] > 0 else float("inf")))
    for m in ("fehmm", "fehmm_l"):
        key = "err_vs_" + m
        if key in table:
            print("%s final err=%.6g" % (m, np.asarray(table[key])[-1]))
    return 0


def cmd_verify(args):
    cfg = _load(args) if args.config else None
    results = bench.verify_suite(cfg)
    failed = 0
    for name, ok, detail in results:
        print("%-42s %s  (%s)" % (name, "ok" if ok else "FAIL", detail))
        failed += 0 if ok else 1
    if failed:
        print("%d check(s) failed" % failed)
        return 3
    print("all %d checks passed" % len(results))
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="mswave",
        description="multiscale wave equation solver kit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, need_cfg in (
            ("homogenize", cmd_homogenize, True),
            ("solve", cmd_solve, True),
            ("convergence", cmd_convergence, True),
            ("longtime", cmd_longtime, True),
            ("verify", cmd_verify, False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=need_cfg,
                       help="flat key=value config file")
        p.set_defaults(fn=fn)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:
        print("solver error: %s: %s" % (type(exc).__name__, exc),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
