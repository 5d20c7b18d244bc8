"""Figure renderers: intensity panels, band diagrams, edge dispersion, scaling.

Rendering is read-only and deterministic: fixed styles, no timestamps in
the image payload.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .readers import ReaderError, read_csv_columns, read_hgr, read_manifest  # noqa: E402

KINDS = ("fig1_panels", "bands", "edge_dispersion", "scaling")
_PNG_METADATA = {"Software": "hexwave-viz"}


@dataclass
class FigureJob:
    manifest_path: Path
    kind: str
    out_path: Path
    colormap: str = "inferno"       # perceptually uniform
    overlay: bool = True
    dpi: int = 130
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        self.manifest_path = Path(self.manifest_path)
        self.out_path = Path(self.out_path)


def _save(fig, job: FigureJob):
    job.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.out_path, dpi=job.dpi, metadata=_PNG_METADATA)
    plt.close(fig)


def render_fig1(job: FigureJob) -> dict:
    """2 x n_times intensity grid: |alpha1| top, |alpha2| bottom, wall overlaid.

    The color scale is shared across snapshot times, and the kappa = 0 level
    set from curve.csv is drawn in white on every panel.
    """
    manifest = read_manifest(job.manifest_path)
    base = job.manifest_path.parent
    times = manifest.get("snapshot_times")
    if not times:
        raise ReaderError("manifest lacks snapshot_times; not an envelope run")
    snaps = []
    for T in times:
        name = f"snapshot_T{T:g}.hgr"
        path = base / name
        if not path.exists():
            raise ReaderError(f"missing snapshot for T = {T:g}: {path}")
        snaps.append((T, read_hgr(path)))
    curve = None
    if job.overlay:
        cols = read_csv_columns(base / "curve.csv", ["X1", "X2"])
        curve = np.column_stack([cols["X1"], cols["X2"]])

    vmax = max(max(np.abs(g.components[0]).max(), np.abs(g.components[1]).max())
               for _, g in snaps)
    nt = len(snaps)
    fig, axes = plt.subplots(2, nt, figsize=(3.2 * nt, 6.4), constrained_layout=True)
    axes = np.atleast_2d(axes)
    if axes.shape != (2, nt):
        axes = axes.reshape(2, nt)
    panels = 0
    for col, (T, grid) in enumerate(snaps):
        extent = grid.extent()
        for row in range(2):
            ax = axes[row, col]
            # components are stored with x as the leading index
            img = np.abs(grid.components[row]).T
            ax.imshow(img, origin="lower", extent=extent, cmap=job.colormap,
                      vmin=0.0, vmax=vmax, interpolation="nearest", aspect="equal")
            if curve is not None:
                ax.plot(curve[:, 0], curve[:, 1], color="white", linewidth=1.0)
                ax.set_xlim(extent[0], extent[1])
                ax.set_ylim(extent[2], extent[3])
            label = r"$|\alpha_1|$" if row == 0 else r"$|\alpha_2|$"
            ax.set_title(f"{label},  T = {T:g}")
            ax.set_xlabel("$X_1$")
            ax.set_ylabel("$X_2$")
            panels += 1
    _save(fig, job)
    return {"panels": panels, "times": [T for T, _ in snaps], "vmax": float(vmax),
            "out": str(job.out_path)}


def render_bands(job: FigureJob) -> dict:
    """Band energies along the swept path, with the closest-degeneracy marker."""
    manifest = read_manifest(job.manifest_path)
    base = job.manifest_path.parent
    cols = read_csv_columns(base / "bands.csv", ["k_index", "kx", "ky", "b", "E"])
    k_index = cols["k_index"].astype(int)
    b = cols["b"].astype(int)
    E = cols["E"]
    n_bands = b.max()
    nk = k_index.max() + 1
    grid = np.full((nk, n_bands), np.nan)
    grid[k_index, b - 1] = E
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    for j in range(n_bands):
        ax.plot(np.arange(nk), grid[:, j], lw=1.2)
    marker = None
    if n_bands >= 2:
        gaps = np.min(np.diff(grid, axis=1), axis=1)
        i0 = int(np.nanargmin(gaps))
        j0 = int(np.nanargmin(np.diff(grid[i0])))
        ED = 0.5 * (grid[i0, j0] + grid[i0, j0 + 1])
        ax.plot([i0], [ED], marker="o", mfc="none", mec="crimson", ms=10, mew=1.5)
        marker = {"k_index": i0, "E": float(ED), "gap": float(gaps[i0])}
    ax.set_xlabel("path index")
    ax.set_ylabel("E")
    _save(fig, job)
    return {"marker": marker, "n_bands": int(n_bands), "out": str(job.out_path),
            "manifest_tool": manifest["tool"]}


def render_edge_dispersion(job: FigureJob) -> dict:
    """mu(k_par) scatter; in-gap decaying branches solid, doublers hollow."""
    manifest = read_manifest(job.manifest_path)
    base = job.manifest_path.parent
    cols = read_csv_columns(base / "edge_dispersion.csv",
                            ["k_par", "branch", "mu", "decay_flag", "doubler_flag"])
    gap = manifest.get("checks", {}).get("gap_edge")
    fig, ax = plt.subplots(figsize=(5.0, 4.0), constrained_layout=True)
    phys = cols["doubler_flag"] == 0
    decaying = (cols["decay_flag"] == 1) & phys
    bulk = ~decaying & phys
    ax.plot(cols["k_par"][bulk], cols["mu"][bulk], "o", ms=4, color="#888888",
            label="bulk-like")
    ax.plot(cols["k_par"][decaying], cols["mu"][decaying], "o", ms=5, color="crimson",
            label="edge (decaying)")
    ax.plot(cols["k_par"][~phys], cols["mu"][~phys], "o", ms=4, mfc="none",
            color="#4477aa", label="lattice doubler")
    if gap is not None:
        for s in (+1, -1):
            ax.axhline(s * gap, color="k", lw=0.8, ls="--")
    ax.set_xlabel(r"$k_\parallel$")
    ax.set_ylabel(r"$\mu$")
    ax.legend(loc="best", fontsize=8)
    _save(fig, job)
    return {"n_points": int(len(cols["mu"])), "gap_edge": gap, "out": str(job.out_path)}


def render_scaling(job: FigureJob) -> dict:
    """log-log sup-residual vs epsilon; the annotated slope is read, not refit."""
    manifest = read_manifest(job.manifest_path)
    base = job.manifest_path.parent
    cols = read_csv_columns(base / "scaling.csv", ["epsilon", "sup_H0", "sup_H1"])
    slope = manifest.get("checks", {}).get("slope_H0")
    fig, ax = plt.subplots(figsize=(5.0, 4.0), constrained_layout=True)
    ax.loglog(cols["epsilon"], cols["sup_H0"], "o-", label=r"$\sup_t \|\eta\|_{H^0}$")
    ax.loglog(cols["epsilon"], cols["sup_H1"], "s--", label=r"$\sup_t \|\eta\|_{H^1}$")
    if slope is not None:
        ax.annotate(f"slope = {slope:.3f}", xy=(0.05, 0.9), xycoords="axes fraction")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("sup residual norm")
    ax.legend(loc="lower right", fontsize=8)
    _save(fig, job)
    return {"slope_annotated": slope, "n_points": int(len(cols["epsilon"])),
            "out": str(job.out_path)}


RENDERERS = {
    "fig1_panels": render_fig1,
    "bands": render_bands,
    "edge_dispersion": render_edge_dispersion,
    "scaling": render_scaling,
}


def render(job: FigureJob) -> dict:
    return RENDERERS[job.kind](job)
