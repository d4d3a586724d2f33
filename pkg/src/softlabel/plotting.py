"""Report figures: per-class retention bars and region class distributions."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# fixed metadata keeps figure bytes stable across runs
PNG_METADATA = {"Software": None}


def _class_names(n, names):
    if names is None:
        return [str(i) for i in range(n)]
    return list(names)[:n]


def _save(fig, path=None) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, metadata=PNG_METADATA)
    plt.close(fig)
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def retention_figure(reports, class_names=None, path=None) -> bytes:
    """Grouped bars of percent mass difference per class, one group member per strategy.

    Classes absent from the original are left blank.
    """
    n = len(reports[0].per_class_pct_diff)
    names = _class_names(n, class_names)
    x = np.arange(n)
    width = 0.8 / len(reports)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * n + 1.5), 3.0))
        for i, rep in enumerate(reports):
            vals = np.array([np.nan if v is None else float(v) for v in rep.per_class_pct_diff])
            ax.bar(x + (i - (len(reports) - 1) / 2) * width, vals, width, label=rep.strategy)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=60, ha="right")
        ax.set_ylabel("mass difference (%)")
        ax.set_title(f"label retention at scale {reports[0].scale}")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def region_figure(histograms, labels, class_names=None, path=None) -> bytes:
    """Normalized class distributions of one region under several encodings."""
    n = histograms[0].num_classes
    names = _class_names(n, class_names)
    x = np.arange(n)
    width = 0.8 / len(histograms)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * n + 1.5), 3.0))
        for i, (hist, label) in enumerate(zip(histograms, labels)):
            ax.bar(x + (i - (len(histograms) - 1) / 2) * width, hist.distribution(), width, label=label)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=60, ha="right")
        ax.set_ylabel("fraction of region")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def loss_map_figure(values: np.ndarray, path=None) -> bytes:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0 * values.shape[0] / max(values.shape[1], 1) + 0.4))
        im = ax.imshow(values, cmap="magma", vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_axis_off()
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        fig.tight_layout()
        return _save(fig, path)
