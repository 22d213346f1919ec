"""Figure rendering for the report-producing CLI commands.

Every artifact-writing command saves a PNG next to its CSV/JSON output.
Figures are presentation aids; the delimited files remain the machine
interface and the only outputs covered by byte-determinism guarantees.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .atlas import SweepResult, Verdict, spectrum_overlays

_VERDICT_COLORS = {
    Verdict.NONEXISTENT: "#555555",
    Verdict.EXISTS_POS_ENERGY: "#c9c9c9",
    Verdict.EXISTS_NEG_ENERGY: "#8ab4d8",
    Verdict.UNKNOWN: "#ffffff",
}


def save_region_map(result: SweepResult, path) -> None:
    """Figure-1 style region map with curve and spectrum overlays."""
    na, nb = len(result.alphas), len(result.betas)
    img = np.zeros((nb, na, 3))
    lookup = {v: tuple(int(c[i:i + 2], 16) / 255 for i in (1, 3, 5))
              for v, c in _VERDICT_COLORS.items()}
    for idx, v in enumerate(result.verdicts):
        i, j = divmod(idx, nb)
        img[j, i, :] = lookup[v.verdict]
    fig, ax = plt.subplots(figsize=(7.5, 6))
    extent = (result.alphas[0], result.alphas[-1], result.betas[0], result.betas[-1])
    ax.imshow(img, origin="lower", extent=extent, aspect="auto",
              interpolation="nearest")
    xs = [s.alpha for s in result.curve_beta_L if math.isfinite(s.value)]
    ys = [s.value for s in result.curve_beta_L if math.isfinite(s.value)]
    if xs:
        ax.plot(xs, ys, "k-", lw=1.8, label="beta_L(alpha)")
    over = spectrum_overlays(result.setup, result.alphas[-1], result.betas[-1])
    for lam in over["lambda_p"]:
        ax.axvline(lam, color="k", ls=":", lw=0.7)
    for lam in over["lambda_q"]:
        ax.axhline(lam, color="k", ls=":", lw=0.7)
    if over["beta_upper_markers"]:
        mx, my = zip(*over["beta_upper_markers"])
        ax.plot(mx, my, "kv", ms=7, label="beta_U*(lambda_k(p))")
    handles = [plt.Rectangle((0, 0), 1, 1, fc=_VERDICT_COLORS[v],
                             ec="k", lw=0.4, label=v.value)
               for v in Verdict]
    ax.legend(handles=handles + ax.get_legend_handles_labels()[0],
              loc="upper right", fontsize=8, framealpha=0.9)
    ax.set_xlabel("alpha")
    ax.set_ylabel("beta")
    ax.set_title(f"nodal-solution regions, p={result.setup.p}, q={result.setup.q}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_curve(samples, which: str, path) -> None:
    xs = [s.alpha for s in samples]
    ys = [s.value for s in samples]
    finite = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if finite:
        fx, fy = zip(*finite)
        ax.plot(fx, fy, "o-", ms=4)
    ax.set_xlabel("alpha")
    ax.set_ylabel(which)
    ax.set_title(f"critical curve {which}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_solution(u, path, title: str = "solution") -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    t = np.concatenate(([0.0], u.mesh.nodes, [u.mesh.T]))
    vals = np.concatenate(([0.0], u.values, [0.0]))
    ax.plot(t, vals, "-", lw=1.4)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("u")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_margins(report, path) -> None:
    """Scatter of the inequality margins over the exponent grid."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2), sharey=False)
    ps = [row.p for row in report.pairs]
    qs = [row.q for row in report.pairs]
    for ax, margins, name in (
            (axes[0], [row.lower_margin for row in report.pairs], "lower margin"),
            (axes[1], [row.upper_margin for row in report.pairs], "upper margin")):
        sc = ax.scatter(ps, qs, c=np.log10(np.maximum(margins, 1e-300)),
                        s=18, cmap="viridis")
        fig.colorbar(sc, ax=ax, label=f"log10 {name}")
        ax.set_xlabel("p")
        ax.set_ylabel("q")
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
