"""Figure rendering for the experiment commands (written next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _depth_histogram(ax, records):
    depths = [r["coalescence_depth"] for r in records if r["outcome"] == "coalesced"]
    failures = sum(1 for r in records if r["outcome"] == "cutoff")
    if depths:
        ax.hist(depths, bins=min(40, max(depths) + 1), color="steelblue")
    label = f"coalesced {len(depths)}/{len(records)}"
    if failures:
        label += f", cutoff {failures}"
    ax.set_xlabel("coalescence depth")
    ax.set_ylabel("runs")
    ax.set_title(label, fontsize=9)


def render_sample(records, size: int, path) -> Path:
    fig, (ax_law, ax_hist) = plt.subplots(1, 2, figsize=(8, 3))
    counts = np.zeros(size)
    for rec in records:
        if rec["outcome"] == "coalesced":
            counts[rec["sample"]] += 1
    if counts.sum():
        ax_law.bar(np.arange(size), counts / counts.sum(), color="darkseagreen")
    ax_law.set_xlabel("state")
    ax_law.set_ylabel("frequency")
    ax_law.set_title("empirical sample law", fontsize=9)
    _depth_histogram(ax_hist, records)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def render_figure1(values, betas, records, path) -> Path:
    fig, (ax_obs, ax_beta, ax_hist) = plt.subplots(3, 1, figsize=(6, 8))
    depths = np.arange(len(values))
    ax_obs.plot(-depths, values, lw=0.7, color="gray")
    ax_obs.set_xlabel("time")
    ax_obs.set_ylabel("observation")
    ax_obs.set_title("record", fontsize=9)
    positive = np.asarray(betas) > 0
    ax_beta.semilogy(
        -np.arange(len(betas))[positive], np.asarray(betas)[positive], color="firebrick"
    )
    ax_beta.set_xlabel("time")
    ax_beta.set_ylabel("contraction of product to present")
    _depth_histogram(ax_hist, records)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def render_table1(dependence, timing_rows, path) -> Path:
    fig, (ax_dep, ax_share) = plt.subplots(1, 2, figsize=(9, 3.5))
    ns = [n for n, _ in dependence]
    vals = [max(v, 1e-300) for _, v in dependence]
    ax_dep.semilogy(ns, vals, marker="o", color="navy")
    ax_dep.set_xlabel("anchor depth")
    ax_dep.set_ylabel("pairwise dependence")

    by_depth: dict[int, list] = {}
    for n, n_samples, _, mean_share, _ in timing_rows:
        by_depth.setdefault(n, []).append((n_samples, mean_share))
    for n, points in sorted(by_depth.items()):
        points.sort()
        ax_share.plot(
            [p[0] for p in points],
            [100 * p[1] for p in points],
            marker="s",
            label=f"depth {n}",
        )
    ax_share.set_xscale("log")
    ax_share.set_xlabel("draws per anchor")
    ax_share.set_ylabel("step-1 share of CPU time (%)")
    ax_share.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
