"""SVG charts.  Output is deterministic: fixed hash salt, no timestamp."""
import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["learning_curves_svg", "reward_table_svg", "correlation_svg"]

_COLORS = {"full": "tab:blue", "clustered": "tab:orange"}


def _to_svg(fig):
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "clusterbandit", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def learning_curves_svg(agg_rows):
    """One panel per algorithm, full vs clustered mean normalized return with the mean min-max band."""
    algos = []
    for r in agg_rows:
        if r["algorithm"] not in algos:
            algos.append(r["algorithm"])
    fig, axes = plt.subplots(1, max(1, len(algos)), figsize=(4.2 * max(1, len(algos)), 3.4), squeeze=False,
                             sharey=True)
    for ax, algo in zip(axes[0], algos):
        for mode in ("full", "clustered"):
            rows = [r for r in agg_rows if r["algorithm"] == algo and r["mode"] == mode]
            if not rows:
                continue
            steps = [r["step"] for r in rows]
            ax.plot(steps, [r["mean_R"] for r in rows], color=_COLORS[mode], label=mode)
            ax.fill_between(steps, [r["min_R"] for r in rows], [r["max_R"] for r in rows], color=_COLORS[mode],
                            alpha=0.15, linewidth=0)
        ax.axhline(0.0, color="grey", linewidth=0.8, linestyle=":")
        ax.set_title(algo.upper())
        ax.set_xlabel("training step")
        ax.set_ylim(-1.05, 1.05)
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("normalized return")
    axes[0][0].legend(loc="lower right")
    fig.tight_layout()
    return _to_svg(fig)


def reward_table_svg(table):
    """Rewards of nearly identical states (one line per state) across the first actions."""
    fig, ax = plt.subplots(figsize=(6, 3.4))
    for i, row in enumerate(table):
        ax.plot(range(len(row)), row, marker="o", label=f"s{i + 1}")
    ax.set_xlabel("action index")
    ax.set_ylabel("reward")
    ax.set_xticks(range(table.shape[1]))
    ax.set_ylim(-1.05, 1.05)
    ax.legend(fontsize="small", ncol=5, loc="lower center")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _to_svg(fig)


def correlation_svg(rho):
    """Per-cluster correlation between state distances and reward-vector distances."""
    fig, ax = plt.subplots(figsize=(6, 3.4))
    ax.bar(range(len(rho)), rho, color="tab:blue")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("cluster")
    ax.set_ylabel("correlation")
    ax.set_ylim(-1.05, 1.05)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    return _to_svg(fig)
