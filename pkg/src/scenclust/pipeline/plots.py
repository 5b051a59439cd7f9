"""SVG plots of a run: parameter scatters, kernel-space projections, criticality,
k-distance profiles and the best-so-far curve."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import ndimage  # noqa: E402

from ..embedding import ClusterAssignment, Embedding, k_distance_profile  # noqa: E402
from ..explorer import ExplorationLog  # noqa: E402
from .config import Branch  # noqa: E402
from .run import PipelineError, RunManifest  # noqa: E402

NOISE_COLOR = "#9e9e9e"
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#17becf", "#bcbd22", "#393b79"]

# fixed salt and no date stamp keep the SVG bytes reproducible
plt.rcParams["svg.hashsalt"] = "scenclust"
plt.rcParams["svg.fonttype"] = "path"
_SAVE = {"format": "svg", "metadata": {"Date": None}}


def cluster_colors(labels) -> list[str]:
    return [NOISE_COLOR if lab < 0 else PALETTE[lab % len(PALETTE)] for lab in labels]


def criticality_grid(points, values, bounds, bins: int = 12) -> np.ndarray:
    """Minimum value per cell of a bins x bins grid over 2-D points (nan if empty)."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    grid = np.full((bins, bins), np.nan)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    cells = np.clip(((points - lo) / (hi - lo) * bins).astype(int), 0, bins - 1)
    for (i, j), v in zip(cells, values):
        if np.isnan(grid[i, j]) or v < grid[i, j]:
            grid[i, j] = v
    return grid


def low_value_components(grid, threshold: float) -> int:
    """Number of 8-connected regions of cells with value <= threshold."""
    mask = np.nan_to_num(np.asarray(grid, dtype=float), nan=np.inf) <= threshold
    _, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    return int(n)


def _read(run_dir: Path, manifest: RunManifest, stage: str, rel: str) -> str:
    if rel not in manifest.artifacts(stage):
        raise PipelineError(stage, f"artifact {rel} is not listed in the manifest")
    path = run_dir / rel
    if not path.is_file():
        raise PipelineError(stage, f"missing artifact {rel}")
    return path.read_text()


def _legend(ax, labels):
    handles = []
    for lab in sorted(set(int(v) for v in labels)):
        name = "noise" if lab < 0 else f"cluster {lab}"
        color = NOISE_COLOR if lab < 0 else PALETTE[lab % len(PALETTE)]
        handles.append(plt.Line2D([], [], marker="o", linestyle="", color=color, label=name))
    ax.legend(handles=handles, fontsize=7, loc="best")


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def _pair_axes(dim: int):
    pairs = list(itertools.combinations(range(dim), 2)) or [(0, 0)]
    fig, axes = plt.subplots(1, len(pairs), figsize=(4 * len(pairs), 3.6), squeeze=False)
    return fig, axes[0], pairs


def plot_parameters_by_cluster(X, names, labels, title, path):
    fig, axes, pairs = _pair_axes(X.shape[1])
    colors = cluster_colors(labels)
    for ax, (i, j) in zip(axes, pairs):
        ax.scatter(X[:, i], X[:, j], c=colors, s=10)
        ax.set_xlabel(names[i])
        ax.set_ylabel(names[j])
    _legend(axes[0], labels)
    fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_embedding(coords, labels, title, path):
    fig, axes, pairs = _pair_axes(coords.shape[1])
    colors = cluster_colors(labels)
    for ax, (i, j) in zip(axes, pairs):
        ax.scatter(coords[:, i], coords[:, j], c=colors, s=10)
        ax.set_xlabel(f"c{i + 1}")
        ax.set_ylabel(f"c{j + 1}")
    _legend(axes[0], labels)
    fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_criticality(X, names, values, metric, path):
    fig, axes, pairs = _pair_axes(X.shape[1])
    order = np.argsort(-np.asarray(values))  # most critical drawn last
    for ax, (i, j) in zip(axes, pairs):
        sc = ax.scatter(X[order, i], X[order, j], c=np.asarray(values)[order], s=10,
                        cmap="viridis_r")
        ax.set_xlabel(names[i])
        ax.set_ylabel(names[j])
    fig.colorbar(sc, ax=list(axes), label=metric)
    fig.suptitle(f"{metric} summary per scenario")
    return _save(fig, path)


def plot_k_distance(profile, k, eps, title, path):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(np.arange(len(profile)), profile, lw=1.2)
    ax.axhline(eps, color="#d62728", lw=0.8, ls="--", label=f"eps = {eps:g}")
    ax.set_xlabel("points (sorted)")
    ax.set_ylabel(f"distance to neighbour {k}")
    ax.legend(fontsize=7)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_best_so_far(best, n_init, metric, path):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.step(np.arange(1, len(best) + 1), best, where="post")
    if n_init:
        ax.axvline(n_init + 0.5, color=NOISE_COLOR, lw=0.8, ls=":", label="initial design")
        ax.legend(fontsize=7)
    ax.set_xlabel("evaluations")
    ax.set_ylabel(f"best {metric}")
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(manifest: RunManifest, run_dir) -> list[Path]:
    """Write all plots of a run clustered at least once; returns the file paths."""
    run_dir = Path(run_dir)
    for stage in ("explore", "metrics", "embed", "cluster"):
        if stage not in manifest.stages:
            raise PipelineError(stage, "plots need this stage's artifacts")
    log = ExplorationLog.from_dict(json.loads(_read(run_dir, manifest, "explore",
                                                    "exploration/log.json")))
    names = log.space.names
    X = np.array([e.scenario.values for e in log.entries], dtype=float)
    row = {e.scenario.id: r for r, e in enumerate(log.entries)}
    metrics_info = manifest.info("metrics")
    metric = metrics_info["metric"]
    summaries = np.array([s["summary"] for s in metrics_info["series"]], dtype=float)
    plots_dir = run_dir / "plots"
    out = []
    for branch in Branch:
        emb_info = manifest.info("embed")[branch.value]
        cl_info = manifest.info("cluster")[branch.value]
        emb = Embedding.from_csv(_read(run_dir, manifest, "embed", emb_info["path"]))
        assignment = ClusterAssignment.from_csv(_read(run_dir, manifest, "cluster", cl_info["path"]),
                                                cl_info["eps"], cl_info["min_pts"])
        labels = np.full(len(X), -1, dtype=int)
        for sid, lab in zip(assignment.ids, assignment.labels):
            labels[row[sid]] = lab
        tag = branch.value.lower()
        title = f"{branch.value} clustering: {assignment.n_clusters} clusters"
        out.append(plot_parameters_by_cluster(X, names, labels, title,
                                              plots_dir / f"params_{tag}.svg"))
        out.append(plot_embedding(emb.coordinates, assignment.labels,
                                  f"{branch.value} kernel space",
                                  plots_dir / f"embedding_{tag}.svg"))
        k = min(cl_info["min_pts"] - 1, len(emb.ids) - 1)
        if k >= 1:
            profile = k_distance_profile(emb.coordinates, k)
            out.append(plot_k_distance(profile, k, cl_info["eps"], f"{branch.value} k-distance",
                                       plots_dir / f"kdistance_{tag}.svg"))
    out.append(plot_criticality(X, names, summaries, metric, plots_dir / "criticality.svg"))
    n_init = sum(e.scenario.source.value == "Initial" for e in log.entries)
    best = log.best_so_far if log.direction.value == "Minimize" else -log.best_so_far
    out.append(plot_best_so_far(best, n_init, metric, plots_dir / "best_so_far.svg"))
    return out
