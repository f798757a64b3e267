"""Matplotlib rendering for the report subcommand (headless, file output)."""

from __future__ import annotations

from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_ratio_histogram(ratios: Sequence[float], path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(ratios), bins=min(30, max(5, len(ratios) // 5 or 5)), color="#3b6ea5")
    ax.set_xlabel("per-trial SW(alg) / SW(opt)")
    ax.set_ylabel("trials")
    ax.set_title("Competitive-ratio distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_welfare_scatter(
    sw_alg: Sequence[float], sw_opt: Sequence[float], path: str
) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(list(sw_opt), list(sw_alg), s=12, color="#a54e3b", alpha=0.7)
    lim = max(list(sw_opt) + list(sw_alg) + [1.0])
    ax.plot([0, lim], [0, lim], linestyle="--", color="grey", linewidth=1)
    ax.set_xlabel("SW(opt)")
    ax.set_ylabel("SW(alg)")
    ax.set_title("Paired welfare per trial")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_served_series(served: Sequence[float], moved: Sequence[float], path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(1, len(served) + 1), list(served), label="served", linewidth=1)
    if moved:
        ax.plot(
            range(2, len(moved) + 2), list(moved), label="movement cost", linewidth=1
        )
    ax.set_xlabel("step")
    ax.set_ylabel("mass")
    ax.set_title("Per-step served demand and movement cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
