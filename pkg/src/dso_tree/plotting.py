"""Report figures.  Matplotlib is imported on first use with the Agg backend."""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3,
                         "font.size": 9, "legend.fontsize": 8})
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_cumulative(state, path, title=None) -> Path:
    """Cumulative arrival and departure curves of every bottleneck."""
    plt = _pyplot()
    nodes = list(state.network.nodes)
    fig, axes = plt.subplots(len(nodes), 1, figsize=(6, 1.9 * len(nodes) + 0.6), squeeze=False)
    for ax, i in zip(axes[:, 0], nodes):
        A, D = state.A[i], state.D[i]
        ax.plot([float(v) for v in A.xs], [float(v) for v in A.ys], label="A (arrivals)")
        ax.plot([float(v) for v in D.xs], [float(v) for v in D.ys], "--", label="D (departures)")
        ax.set_ylabel(f"link {i}")
    axes[0, 0].legend(loc="upper left")
    axes[-1, 0].set_xlabel("clock time")
    if title:
        axes[0, 0].set_title(title)
    return _save(fig, path)


def plot_solution(solution, path) -> Path:
    """Optimal slot volumes stacked by origin, with the schedule cost curve."""
    plt = _pyplot()
    net = solution.scenario.network
    starts = [float(a) for a, _ in solution.slots]
    width = float(solution.scenario.dt)
    fig, ax = plt.subplots(figsize=(6.5, 3.2))
    bottom = [0.0] * len(starts)
    for i in net.nodes:
        vals = [float(solution.q_star[(i, k)]) for k in range(len(starts))]
        if any(vals):
            ax.bar(starts, vals, width=width, bottom=bottom, align="edge", label=f"origin {i}",
                   edgecolor="white", linewidth=0.4)
            bottom = [b + v for b, v in zip(bottom, vals)]
    ax.set_xlabel("destination arrival time")
    ax.set_ylabel("volume per slot")
    twin = ax.twinx()
    twin.plot([s + width / 2 for s in starts], [float(c) for c in solution.net.slot_cost],
              color="black", lw=1, label="slot cost")
    twin.set_ylabel("schedule cost")
    twin.grid(False)
    ax.legend(loc="upper left")
    ax.set_title(f"objective {float(solution.objective):.6g}")
    return _save(fig, path)


def plot_verification(report, path) -> Path:
    """Cost change per sample against the predicted change."""
    plt = _pyplot()
    recs = [r for r in report.records if r.error is None]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.hist([r.cost_delta for r in recs], bins=30, color="tab:blue")
    ax1.set_xlabel("total cost change")
    ax1.set_ylabel("samples")
    ax2.scatter([r.predicted_delta for r in recs], [r.cost_delta for r in recs], s=8)
    lo = min([r.cost_delta for r in recs] + [0.0])
    ax2.plot([lo, 0], [lo, 0], color="grey", lw=0.8)
    ax2.set_xlabel("predicted change")
    ax2.set_ylabel("observed change")
    fig.suptitle(f"{sum(r.passed for r in report.records)}/{len(report.records)} samples pass")
    return _save(fig, path)


def plot_convergence(rows, path, reference=None) -> Path:
    """Optimum against time step on log axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    dts = [float(dt) for dt, _ in rows]
    objs = [float(v) for _, v in rows]
    ax.plot(dts, objs, "o-", label="discretised optimum")
    if reference is not None:
        ax.axhline(float(reference), color="grey", ls="--", label="continuous optimum")
    ax.set_xscale("log")
    ax.set_xlabel("time step")
    ax.set_ylabel("objective")
    ax.legend()
    return _save(fig, path)
