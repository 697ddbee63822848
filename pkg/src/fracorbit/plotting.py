"""Report figures (Agg backend, written to files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.0,
    "savefig.bbox": "tight",
}


def _figure():
    with plt.rc_context(params):
        fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path):
    with plt.rc_context(params):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_traces(path, t, values, labels, title=None):
    fig, ax = _figure()
    for j in range(values.shape[1]):
        ax.plot(t, values[:, j], label=labels[j])
    ax.set_xlabel("t")
    ax.set_ylabel("u(x_j, t)")
    if values.shape[1] <= 8:
        ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_field(path, x, times, field):
    fig, ax = _figure()
    for k, t in enumerate(times):
        ax.plot(x, field[:, k], label=f"t = {t:.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u(x, t)")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_reconstruction(path, t, gamma_true, gamma_rec):
    with plt.rc_context(params):
        fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(fig_width, 1.2 * fig_width * golden_mean))
    d = gamma_rec.shape[1]
    for k in range(d):
        if gamma_true is not None:
            ax.plot(t, gamma_true[:, k], "k-", lw=1.5, label="true" if k == 0 else None)
        ax.plot(t, gamma_rec[:, k], "--", label=f"reconstructed {k + 1}")
    ax.set_ylabel("gamma(t)")
    ax.legend(frameon=False)
    if gamma_true is not None:
        err = np.linalg.norm(gamma_rec - gamma_true, axis=1)
        ax2.semilogy(t[1:], np.maximum(err[1:], 1e-18))
        ax2.set_ylabel("|error|")
    ax2.set_xlabel("t")
    _save(fig, path)


def plot_stability(path, rows):
    fig, ax = _figure()
    alphas = sorted({r["alpha"] for r in rows})
    for a in alphas:
        vals = [r["ratio"] for r in rows if r["alpha"] == a]
        ax.semilogy([a] * len(vals), vals, "o", ms=3)
    ax.set_xlabel("alpha")
    ax.set_ylabel("stability ratio")
    _save(fig, path)
