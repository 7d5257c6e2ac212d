"""Figures for experiment tables and expert datasets."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle as CirclePatch  # noqa: E402
from scipy.stats import binomtest  # noqa: E402

from .expert.arm import forward_kinematics, joint_positions  # noqa: E402

MODE_LABELS = {"none": "No retrials\nor replanning", "retrials": "Retrials-only", "full": "Retrials and\nreplanning"}
MODE_COLORS = {"none": "#b0b0b0", "retrials": "#6a9fd4", "full": "#2b5d8a"}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=8)


def plot_results(table, path, title: str | None = None) -> None:
    """Success rate per mode (Wilson 95% interval) and the failure breakdown."""
    rows = table.rows
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4), gridspec_kw={"width_ratios": [1, 1.3]})
    x = np.arange(len(rows))
    rates, lo, hi = [], [], []
    for r in rows:
        ci = binomtest(r.successes, r.trials).proportion_ci(0.95, method="wilson")
        rates.append(100 * r.success_rate)
        lo.append(100 * (r.success_rate - ci.low))
        hi.append(100 * (ci.high - r.success_rate))
    ax1.bar(x, rates, yerr=[lo, hi], capsize=3, color=[MODE_COLORS.get(r.mode, "C0") for r in rows])
    for xi, v in zip(x, rates):
        ax1.text(xi, v + 2, f"{v:.1f}%", ha="center", fontsize=7)
    ax1.set_xticks(x, [MODE_LABELS.get(r.mode, r.mode) for r in rows], fontsize=7)
    ax1.set_ylim(0, 110)
    ax1.set_ylabel("success rate (%)", fontsize=8)
    _style(ax1)

    keys = sorted({k for r in rows for k in r.failure_plan_lengths}, key=lambda k: (isinstance(k, str), -k if isinstance(k, int) else 0))
    width = 0.8 / max(len(keys), 1)
    for j, k in enumerate(keys):
        ax2.bar(x + (j - (len(keys) - 1) / 2) * width, [r.failure_plan_lengths.get(k, 0) for r in rows], width,
                label=f"{k} actions" if isinstance(k, int) else "no plan")
    ax2.set_xticks(x, [MODE_LABELS.get(r.mode, r.mode) for r in rows], fontsize=7)
    ax2.set_ylabel("failures by initial plan length", fontsize=8)
    if keys:
        ax2.legend(fontsize=6, frameon=False, ncol=2)
    _style(ax2)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectories(trajs, grid, path, target=None) -> None:
    """End-effector paths in the workspace, with obstacles and the final arm pose."""
    arm = grid.arm
    reach = sum(arm.link_lengths)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    for c in grid.obstacles:
        ax.add_patch(CirclePatch((c.x, c.y), c.r, color="#d9a5a5", alpha=0.8, lw=0))
    for i, t in enumerate(trajs):
        ee = np.array([[f.x, f.y] for f in (forward_kinematics(arm, q) for q in t.states)])
        ax.plot(ee[:, 0], ee[:, 1], lw=0.8, color=f"C{i % 10}")
        ax.plot(*ee[0], "o", ms=3, color=f"C{i % 10}")
    if trajs:
        pts = joint_positions(arm, trajs[0].final_q)
        ax.plot(pts[:, 0], pts[:, 1], "-o", color="k", lw=1.5, ms=3)
    if target is not None:
        ax.plot(*target, "x", color="k", ms=6)
    ax.set_xlim(arm.base_pose[0] - reach * 1.05, arm.base_pose[0] + reach * 1.05)
    ax.set_ylim(arm.base_pose[1] - reach * 1.05, arm.base_pose[1] + reach * 1.05)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)", fontsize=8)
    ax.set_ylabel("y (m)", fontsize=8)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
