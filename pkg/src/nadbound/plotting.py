"""Figures written next to the CSV/JSON outputs when ``--plot`` is given."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_WIDTH = 6.0
GOLDEN = (np.sqrt(5) - 1.0) / 2.0


def _figure(n_rows=1):
    fig, axes = plt.subplots(n_rows, 1, figsize=(FIG_WIDTH, FIG_WIDTH * GOLDEN * n_rows), squeeze=False)
    return fig, axes[:, 0]


def plot_rates(report, path):
    """Measured p_nm(t) against the geometric and universal bounds, one panel per (n, m)."""
    pairs = sorted({(r.n, r.m) for r in report.records})
    fig, axes = _figure(len(pairs))
    for ax, (n, m) in zip(axes, pairs):
        rows = [r for r in report.records if r.n == n and r.m == m]
        t = [r.t for r in rows]
        ax.plot(t, [r.p for r in rows], "o-", ms=3, label=f"$p_{{{n}{m}}}$")
        if n == m:
            ax.plot(t, [r.remaining_bound for r in rows], "--", label="remaining bound")
            ax.plot(t, [1.0 - r.universal_bound for r in rows], ":", label="universal")
        else:
            ax.plot(t, [r.qgt_bound for r in rows], "--", label="geometric bound")
            ax.plot(t, [r.universal_bound for r in rows], ":", label="universal")
        ax.set_ylabel("rate")
        ax.legend(loc="best", fontsize=8, frameon=False)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_integrands(report, path):
    fig, axes = _figure(1)
    ax = axes[0]
    t = np.asarray(report.times)
    for m, y in sorted(report.qgt_integrands.items()):
        ax.plot(t, y, label=f"level {m}")
    ax.plot(t, report.cd_norms, "k:", label=r"$\|H_{cd}\|$")
    ax.set_xlabel("t")
    ax.set_ylabel("integrand")
    ax.legend(loc="best", fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(trace, path):
    """Best-so-far objective of a path optimization."""
    fig, axes = _figure(1)
    ax = axes[0]
    evals, vals = zip(*trace)
    ax.step(evals, vals, where="post")
    ax.axhline(np.pi / 4, color="0.6", ls="--", lw=0.8)
    ax.set_xlabel("evaluations")
    ax.set_ylabel("path length")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
