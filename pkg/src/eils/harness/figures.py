"""SVG figures: recovery diagnostics, maze visitation heatmaps and the
zoomed stress/learning-rate view around the CartPole shift.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from eils.harness.records import RunRecord, by_seed  # noqa: E402

log = logging.getLogger(__name__)

ARM_COLORS = {"ppo": "tab:gray", "eils": "tab:blue", "eils-ablated": "tab:orange"}


def seed_mean(records: list[RunRecord], attr: str) -> np.ndarray:
    """Per-episode mean of ``attr`` across seeds (truncated to the shortest seed)."""
    groups = by_seed(records)
    n = min(len(v) for v in groups.values())
    return np.mean([[getattr(r, attr) for r in recs[:n]] for recs in groups.values()], axis=0)


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def recovery_figure(arms: dict[str, list[RunRecord]], shift: int, path: str | Path) -> Path | None:
    """Return, stress and learning rate versus episode, one line per arm, shift marked."""
    arms = {a: r for a, r in arms.items() if r}
    if not arms:
        log.warning("recovery figure skipped: no CartPole records")
        return None
    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    for arm, recs in arms.items():
        color = ARM_COLORS.get(arm)
        for ax, attr in zip(axes, ("ret", "sigma", "alpha")):
            ax.plot(seed_mean(recs, attr), color=color, lw=1, label=arm)
    for ax, label in zip(axes, ("return", "stress σ", "learning rate α")):
        ax.axvline(shift, color="red", ls="--", lw=1)
        ax.set_ylabel(label)
    axes[0].axhline(195, color="black", ls=":", lw=0.8)
    axes[0].legend(loc="lower right")
    axes[-1].set_xlabel("episode")
    fig.tight_layout()
    return _save(fig, Path(path))


def heatmap_figure(visits: dict[str, np.ndarray], path: str | Path) -> Path | None:
    """One visitation grid per arm on a shared log color scale."""
    visits = {a: v for a, v in visits.items() if v is not None and v.sum() > 0}
    if not visits:
        log.warning("heatmap figure skipped: no maze visit counts")
        return None
    vmax = max(float(np.log1p(v).max()) for v in visits.values())
    fig, axes = plt.subplots(1, len(visits), figsize=(4.5 * len(visits), 4.2), squeeze=False)
    for ax, (arm, grid) in zip(axes[0], visits.items()):
        # grid is indexed [x, y]; imshow wants rows = y
        im = ax.imshow(np.log1p(grid).T, origin="lower", cmap="magma", vmin=0.0, vmax=vmax)
        ax.set_title(arm)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes[0].tolist(), label="log(1 + visits)")
    return _save(fig, Path(path))


def shift_zoom_figure(records: list[RunRecord], shift: int, path: str | Path, before: int = 50, after: int = 100) -> Path | None:
    """Zoom on the shift: per-episode stress and learning rate on twin axes."""
    if not records:
        log.warning("shift-zoom figure skipped: no eils records")
        return None
    sigma, alpha = seed_mean(records, "sigma"), seed_mean(records, "alpha")
    lo, hi = max(0, shift - before), min(len(sigma), shift + after)
    if lo >= hi:
        log.warning("shift-zoom figure skipped: shift episode %d outside the run", shift)
        return None
    ep = np.arange(lo, hi)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(ep, sigma[lo:hi], color="tab:red", label="σ")
    ax.set_ylabel("stress σ", color="tab:red")
    ax2 = ax.twinx()
    ax2.plot(ep, alpha[lo:hi], color="tab:blue", label="α")
    ax2.set_ylabel("learning rate α", color="tab:blue")
    ax.axvline(shift, color="red", ls="--", lw=1)
    ax.set_xlabel("episode")
    fig.tight_layout()
    return _save(fig, Path(path))
