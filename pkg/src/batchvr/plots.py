"""Figure rendering for convergence traces (optional report path).

CSV traces remain the primary product; these helpers render quick-look
matplotlib figures next to them when requested from the CLI.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_convergence_figure(traces, out_path, title=None):
    """Render objective (and suboptimality, when available) against both
    epoch-equivalents and wall time.

    ``traces`` maps a label to a list of TraceRecord-like objects.
    """
    any_subopt = any(
        rec.suboptimality is not None and rec.suboptimality > 0
        for recs in traces.values() for rec in recs
    )
    n_rows = 2 if any_subopt else 1
    fig, axes = plt.subplots(n_rows, 2, figsize=(9, 3.2 * n_rows), squeeze=False)
    for label, recs in traces.items():
        epochs = [r.epoch_equiv for r in recs]
        walls = [r.wall_seconds for r in recs]
        objs = [r.objective for r in recs]
        axes[0][0].plot(epochs, objs, label=label)
        axes[0][1].plot(walls, objs, label=label)
        if any_subopt:
            pts = [(e, w, s) for e, w, s in
                   zip(epochs, walls, (r.suboptimality for r in recs))
                   if s is not None and s > 0]
            if pts:
                es, ws, ss = zip(*pts)
                axes[1][0].semilogy(es, ss, label=label)
                axes[1][1].semilogy(ws, ss, label=label)
    axes[0][0].set_xlabel("epoch equivalents")
    axes[0][1].set_xlabel("wall seconds")
    for ax in axes[0]:
        ax.set_ylabel("objective")
        ax.legend(fontsize=8)
    if any_subopt:
        axes[1][0].set_xlabel("epoch equivalents")
        axes[1][1].set_xlabel("wall seconds")
        for ax in axes[1]:
            ax.set_ylabel("suboptimality")
            ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def save_batch_planner_figure(b_grid, wall_costs, b_star, out_path, title=None):
    """Wall-cost curve over average batch sizes with the planned optimum."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(b_grid, wall_costs, label="wall cost")
    ax.axvline(b_star, color="tab:orange", linestyle="--", label=f"B* = {b_star:.2f}")
    ax.set_xlabel("average batch size")
    ax.set_ylabel("wall cost per unit accuracy")
    ax.set_xscale("log")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
