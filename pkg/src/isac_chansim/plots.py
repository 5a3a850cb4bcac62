"""Figure rendering for run and analysis reports.

All functions render to PNG files with the non-interactive Agg backend so
they work in headless environments; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analytics import empirical_cdf

__all__ = [
    "render_cluster_map",
    "render_spread_cdfs",
    "render_indicator_curve",
]

_KIND_STYLE = {
    "shared": ("tab:blue", "o"),
    "newborn": ("tab:orange", "^"),
    "ut_target": ("tab:red", "*"),
}


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render_cluster_map(realizations, path) -> Path:
    """Top-down scatter of sensing clusters, stations, and terminals."""
    plt = _plt()
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 6))
    seen_kinds = set()
    stations = {}
    terminals = {}
    for real in realizations:
        meta = real.metadata
        if "tx_position" in meta:
            stations[real.bs_id] = meta["tx_position"]
        if "rx_position" in meta:
            terminals[real.ut_id] = meta["rx_position"]
        for cluster in meta.get("sensing_clusters", []):
            kind = cluster.kind.value
            color, marker = _KIND_STYLE.get(kind, ("gray", "."))
            ax.scatter(cluster.position.x, cluster.position.y, s=28,
                       c=color, marker=marker, alpha=0.7,
                       label=kind if kind not in seen_kinds else None)
            seen_kinds.add(kind)
    for bs_id, pos in stations.items():
        ax.scatter(pos.x, pos.y, s=140, c="black", marker="s")
        ax.annotate(f"BS{bs_id}", (pos.x, pos.y),
                    textcoords="offset points", xytext=(6, 6))
    for ut_id, pos in terminals.items():
        ax.scatter(pos.x, pos.y, s=110, c="tab:green", marker="D")
        ax.annotate(f"UT{ut_id}", (pos.x, pos.y),
                    textcoords="offset points", xytext=(6, 6))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Sensing cluster map")
    if seen_kinds:
        ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_spread_cdfs(spread_rows, path) -> Path:
    """Step CDFs of the per-link RMS spreads.

    ``spread_rows`` is the (link_id, ds, asa, zsa) table from the stats
    export.
    """
    plt = _plt()
    path = Path(path)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    panels = [
        ("RMS delay spread [ns]", [row[1] * 1e9 for row in spread_rows]),
        ("RMS azimuth spread [deg]",
         [np.degrees(row[2]) for row in spread_rows]),
        ("RMS zenith spread [deg]",
         [np.degrees(row[3]) for row in spread_rows]),
    ]
    for ax, (label, values) in zip(axes, panels):
        table = empirical_cdf(values)
        ax.step(table[:, 0], table[:, 1], where="post")
        ax.set_xlabel(label)
        ax.set_ylabel("CDF")
        ax.set_ylim(0.0, 1.02)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_indicator_curve(scores, best_k, path) -> Path:
    """Cluster-count selection curve: combined indicator with CH and DB."""
    plt = _plt()
    path = Path(path)
    ks = sorted(scores)
    ci = [scores[k].ci for k in ks]
    ch = [scores[k].ch for k in ks]
    db = [scores[k].db for k in ks]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(ks, ci, "o-", color="tab:blue", label="combined indicator")
    ax.axvline(best_k, color="tab:red", linestyle="--",
               label=f"selected K = {best_k}")
    ax.set_xlabel("cluster count K")
    ax.set_ylabel("combined indicator")
    ax.grid(True, alpha=0.3)
    twin = ax.twinx()
    ch_max = max(v for v in ch if np.isfinite(v)) if any(np.isfinite(ch)) else 1.0
    db_max = max(v for v in db if np.isfinite(v)) if any(np.isfinite(db)) else 1.0
    twin.plot(ks, [v / ch_max if np.isfinite(v) else np.nan for v in ch],
              "s:", color="tab:green", alpha=0.7, label="CH (scaled)")
    twin.plot(ks, [v / db_max if np.isfinite(v) else np.nan for v in db],
              "d:", color="tab:orange", alpha=0.7, label="DB (scaled)")
    twin.set_ylabel("scaled index value")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
