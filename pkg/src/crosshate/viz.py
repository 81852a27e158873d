"""2-D projection of exported latents and grid-report rendering.

Coordinates are always written as data alongside the image so a plot can be
rebuilt without rerunning the projection.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from sklearn.manifold import TSNE

from .config import DataError

MIN_PROJECTION_POINTS = 10

_MARKERS = {0: "o", 1: "x"}


def project_2d(vectors: np.ndarray, seed: int = 0) -> np.ndarray:
    """Neighbor embedding of latent rows into 2-D with a fixed seed."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n = len(vectors)
    if n < MIN_PROJECTION_POINTS:
        raise DataError(
            f"projection needs at least {MIN_PROJECTION_POINTS} points, got {n}")
    perplexity = min(30.0, (n - 1) / 3)
    tsne = TSNE(n_components=2, perplexity=perplexity, random_state=seed,
                init="pca")
    return tsne.fit_transform(vectors)


def write_coordinates(path: str, rows: list, coords: np.ndarray) -> None:
    """Projected points with their platform/hate tags, one row per line."""
    if len(rows) != len(coords):
        raise DataError(f"{len(rows)} rows but {len(coords)} projected points")
    with open(path, "w") as fh:
        fh.write("platform\thate\tx\ty\n")
        for (platform, hate, _), (x, y) in zip(rows, coords):
            fh.write(f"{platform}\t{hate}\t{float(x)!r}\t{float(y)!r}\n")


def read_coordinates(path: str) -> list:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("platform\t"):
                continue
            try:
                platform, hate, x, y = line.split("\t")
                out.append((platform, int(hate), float(x), float(y)))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: bad coordinate row ({e})") from e
    return out


def plot_latents(rows: list, coords: np.ndarray, out_path: str,
                 title: str = "latent projection") -> None:
    """Scatter colored by platform, marker by hate class."""
    platforms = sorted({p for p, _, _ in rows})
    cmap = plt.get_cmap("tab10")
    colors = {p: cmap(i % 10) for i, p in enumerate(platforms)}
    fig, ax = plt.subplots(figsize=(7, 6))
    for platform in platforms:
        for hate in (0, 1):
            pts = np.array([coords[i] for i, (p, h, _) in enumerate(rows)
                            if p == platform and h == hate])
            if len(pts) == 0:
                continue
            ax.scatter(pts[:, 0], pts[:, 1], s=12, alpha=0.7,
                       color=colors[platform], marker=_MARKERS[hate],
                       label=f"{platform} / {'hate' if hate else 'non-hate'}")
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_grid_report(report, out_path: str) -> None:
    """Render the macro-F1 grid as a table image."""
    sources = sorted({s for s, _ in report.grid})
    targets = sorted({t for _, t in report.grid})
    cells = []
    for s in sources:
        row = []
        for t in targets:
            cell = report.grid.get((s, t))
            if cell is None:
                row.append("-")
            elif cell["failed"]:
                row.append("FAILED")
            else:
                row.append(f"{cell['macro_f1']:.3f}")
        cells.append(row)
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(targets),
                                    1.0 + 0.5 * len(sources)))
    ax.axis("off")
    table = ax.table(cellText=cells, rowLabels=sources, colLabels=targets,
                     loc="center", cellLoc="center")
    table.scale(1, 1.4)
    ax.set_title(f"macro-F1, source rows x target columns "
                 f"(config {report.config_digest})", fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
