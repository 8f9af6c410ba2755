"""Figures written next to the JSON artifacts (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .monoid import Kind  # noqa: E402

COLOURS = {"ok": "#4c9a2a", "violation": "#c0392b", "inconclusive": "#e1a23b"}
# no timestamps or version strings, so reruns give the same bytes
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def _as_float(m, v) -> float:
    # lex pairs are drawn by their leading coordinate
    return float(v[0] if m.kind is Kind.LEX_PAIR else v)


def status_figure(checks, path: Path) -> Path:
    """One bar per check, coloured by status; the bar length is the number
    of decided items when the stats carry one."""
    names = [c.name for c in checks]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    y = np.arange(len(names))
    ax.barh(y, np.ones(len(names)), color=[COLOURS[c.status] for c in checks])
    ax.set_yticks(y, names, fontsize=8)
    ax.set_xticks([])
    ax.invert_yaxis()
    handles = [plt.Rectangle((0, 0), 1, 1, color=col) for col in COLOURS.values()]
    ax.legend(handles, list(COLOURS), loc="lower right", fontsize=7, frameon=False)
    ax.set_title("check status")
    return _save(fig, path)


def distance_figure(space, path: Path) -> Path:
    m = space.monoid
    mat = np.array([[_as_float(m, v) for v in row] for row in space.rows])
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    im = left.imshow(mat, cmap="viridis")
    fig.colorbar(im, ax=left, shrink=0.8)
    left.set_title(f"distances ({len(space)} points)")
    upper = mat[np.triu_indices(len(mat), 1)]
    right.hist(upper, bins=min(30, max(5, len(set(upper.tolist())))), color="#34495e")
    right.set_xlabel("distance")
    right.set_ylabel("pairs")
    return _save(fig, path)


def pair_figure(g, left, right, a: int, eps, path: Path, title: str) -> Path:
    """Distance between the two images of x against d(a, x)."""
    m = g.monoid
    xs, ys = [], []
    for x, y in left.pairs.items():
        if x in right.pairs:
            xs.append(_as_float(m, g.d(a, x)))
            ys.append(_as_float(m, g.d(y, right.pairs[x])))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(xs, ys, s=14, color="#2c3e50")
    e = _as_float(m, eps)
    grid = np.linspace(0, max(xs + [e]) * 1.05, 100)
    ax.plot(grid, np.clip(e - grid, 0, None), "--", color="#c0392b", lw=1, label="eps - d(a,x)")
    ax.axvline(e, color="#7f8c8d", lw=0.8)
    ax.set_xlabel("d(a, x)")
    ax.set_ylabel("distance between images")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
