"""Figures rendered next to the CSV tables.

The CSV stays the machine-readable contract; these plots are the quick-look
companions the runner drops alongside it.  Agg only, no display.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def convergence_figure(records, path):
    xs = np.array([r.H if r.H is not None else r.eps for r in records],
                  dtype=float)
    l2 = np.array([r.linf_l2 if r.linf_l2 else np.nan for r in records])
    h1 = np.array([r.linf_h1 if r.linf_h1 else np.nan for r in records])
    order = np.argsort(xs)
    xs, l2, h1 = xs[order], l2[order], h1[order]
    xlabel = "H" if records[0].H is not None else "eps"

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(xs, l2, "o-", label=r"$L^\infty(L^2)$")
    if np.any(np.isfinite(h1)):
        ax.loglog(xs, h1, "s-", label=r"$L^\infty(H^1)$")
    ref = np.nanmin(l2[np.isfinite(l2)]) if np.any(np.isfinite(l2)) else 1.0
    for p, style in ((1, ":"), (2, "--")):
        ax.loglog(xs, ref * (xs / xs.min()) ** p, "k" + style, lw=0.8,
                  label="slope %d" % p)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    ax.set_title("%s, dim %d" % (records[0].method, records[0].dim))
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def longtime_figure(table, path):
    t = np.asarray(table["t"])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    labels = {"err_vs_u0": "homogenized", "err_vs_boussinesq": "dispersive",
              "err_vs_fehmm": "fehmm", "err_vs_fehmm_l": "fehmm long-time"}
    for key, lab in labels.items():
        if key in table:
            ax.semilogy(t, np.asarray(table[key]), label=lab)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u_\varepsilon - \cdot\|_{L^2}$")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def snapshot_figure(msh, traj, path, n_profiles=4):
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if msh.dim == 1:
        x = msh.vertices[:, 0]
        idx = np.unique(np.linspace(0, traj.n_samples - 1,
                                    n_profiles).astype(int))
        for i in idx:
            ax.plot(x, traj.u[i], label="t = %.3g" % traj.times[i])
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.legend(fontsize=8)
    else:
        tp = ax.tripcolor(msh.vertices[:, 0], msh.vertices[:, 1],
                          msh.elements, traj.u[-1], shading="gouraud")
        fig.colorbar(tp, ax=ax)
        ax.set_title("t = %.3g" % traj.times[-1])
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
