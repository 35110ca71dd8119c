"""Report figures rendered straight to image files.

Figures are built on ``matplotlib.figure.Figure`` with the Agg canvas, so no
pyplot state or display backend is touched.
"""

import math

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

METHOD_COLORS = {"cdsfcrf": "#1f5fa8", "zero_filled": "#c2571a"}


def _new(width, height, nrows=1, ncols=1):
    fig = Figure(figsize=(width, height), constrained_layout=True)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig, path):
    fig.savefig(path)


def _show_image(ax, img, title, vmin=0.0, vmax=1.0, cmap="gray"):
    ax.imshow(img, cmap=cmap, vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])


def plot_reconstruction(path, truth, zero_filled, recon, mask=None, scores=None):
    """Side-by-side truth / zero-filled / reconstruction / error panels.

    `scores` maps ``"zero_filled"`` and ``"cdsfcrf"`` to objects with
    ``psnr`` and ``ssim`` attributes and is appended to the titles.
    """
    scores = scores or {}

    def label(name, key):
        s = scores.get(key)
        return name if s is None else f"{name}\n{s.psnr:.2f} dB, SSIM {s.ssim:.3f}"

    panels = 5 if mask is not None else 4
    with matplotlib.rc_context(STYLE):
        fig, axes = _new(2.2 * panels, 2.6, 1, panels)
        ax = list(axes[0])
        vmax = max(1.0, float(truth.max()))
        if mask is not None:
            _show_image(ax.pop(0), mask, f"mask ({mask.mean():.1%})", 0, 1, "binary_r")
        _show_image(ax[0], truth, "truth", 0, vmax)
        _show_image(ax[1], zero_filled, label("zero-filled", "zero_filled"), 0, vmax)
        _show_image(ax[2], recon, label("CD-SFCRF", "cdsfcrf"), 0, vmax)
        err = np.abs(recon - truth)
        _show_image(ax[3], err, f"|error| (max {err.max():.3f})", 0, max(err.max(), 1e-12), "magma")
        _save(fig, path)


def plot_trace(path, trace):
    """Energy terms and gradient norm against iteration."""
    it = [t.iteration for t in trace]
    with matplotlib.rc_context(STYLE):
        fig, axes = _new(6.5, 2.6, 1, 2)
        ax0, ax1 = axes[0]
        ax0.semilogy(it, [max(t.energy.total, 1e-300) for t in trace], label="total")
        ax0.semilogy(it, [max(t.energy.unary, 1e-300) for t in trace], label="unary", lw=0.8)
        ax0.semilogy(it, [max(t.energy.pairwise, 1e-300) for t in trace], label="pairwise", lw=0.8)
        ax0.set_xlabel("iteration")
        ax0.set_ylabel("energy")
        ax0.legend(frameon=False)
        ax1.semilogy(it, [max(t.grad_norm, 1e-300) for t in trace], color="k", lw=0.8)
        ax1.set_xlabel("iteration")
        ax1.set_ylabel("gradient norm")
        _save(fig, path)


def plot_sweep(path, rows):
    """PSNR and SSIM against achieved sampling ratio, one line per method.

    `rows` are sweep table dicts with ``achieved_ratio``, ``method``,
    ``psnr``, ``ssim`` and ``status``; failed rows are skipped and infinite
    PSNR values are clipped to the plot.
    """
    ok = [r for r in rows if r.get("status", "ok") == "ok"]
    with matplotlib.rc_context(STYLE):
        fig, axes = _new(6.5, 2.6, 1, 2)
        ax0, ax1 = axes[0]
        finite = [r["psnr"] for r in ok if math.isfinite(r["psnr"])]
        ceiling = (max(finite) + 5.0) if finite else 100.0
        for method in ("zero_filled", "cdsfcrf"):
            sel = sorted((r for r in ok if r["method"] == method), key=lambda r: r["achieved_ratio"])
            if not sel:
                continue
            x = [r["achieved_ratio"] for r in sel]
            style = dict(marker="o", ms=3, color=METHOD_COLORS[method], label=method)
            ax0.plot(x, [min(r["psnr"], ceiling) for r in sel], **style)
            ax1.plot(x, [r["ssim"] for r in sel], **style)
        ax0.set_xlabel("sampling ratio")
        ax0.set_ylabel("PSNR (dB)")
        ax1.set_xlabel("sampling ratio")
        ax1.set_ylabel("SSIM")
        if ok:
            ax0.legend(frameon=False)
        _save(fig, path)


def plot_mask(path, mask):
    with matplotlib.rc_context(STYLE):
        fig, axes = _new(3.0, 3.0)
        _show_image(axes[0, 0], mask, f"{mask.shape[1]}x{mask.shape[0]}, {mask.mean():.1%} kept", 0, 1, "binary_r")
        _save(fig, path)
