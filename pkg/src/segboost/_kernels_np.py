"""Pure-numpy fallback for the hot superpixel kernel.

Kept in lockstep with ``_speedups.pyx``: both walk centers in the same order
and use the same float64 expressions, so results are bitwise identical.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def slic_iterate(
    img: np.ndarray,
    cx: np.ndarray,
    cy: np.ndarray,
    ccol: np.ndarray,
    spatial_scale: float,
    win: int,
    iters: int,
) -> np.ndarray:
    """Run the assign/update loop and return the final per-pixel center ids.

    img is (h, w, c) float64, centers are float64 arrays, ``spatial_scale`` is
    the squared compactness-over-step weight applied to pixel distances, and
    ``win`` is the half-width of the search window around each center.
    """
    h, w, c = img.shape
    k = cx.shape[0]
    cx = cx.copy()
    cy = cy.copy()
    ccol = ccol.copy()
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    flat_y = np.repeat(np.arange(h, dtype=np.float64), w)
    flat_x = np.tile(np.arange(w, dtype=np.float64), h)
    assign = np.zeros((h, w), dtype=np.int32)

    for _ in range(iters):
        best = np.full((h, w), np.inf, dtype=np.float64)
        assign.fill(-1)
        for ci in range(k):
            y0 = max(0, int(math.floor(cy[ci])) - win)
            y1 = min(h, int(math.floor(cy[ci])) + win + 1)
            x0 = max(0, int(math.floor(cx[ci])) - win)
            x1 = min(w, int(math.floor(cx[ci])) + win + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            sub = img[y0:y1, x0:x1]
            d = (sub[:, :, 0] - ccol[ci, 0]) ** 2
            for ch in range(1, c):
                d = d + (sub[:, :, ch] - ccol[ci, ch]) ** 2
            dy = (ys[y0:y1] - cy[ci]) ** 2
            dx = (xs[x0:x1] - cx[ci]) ** 2
            d = d + spatial_scale * (dy[:, None] + dx[None, :])
            bwin = best[y0:y1, x0:x1]
            awin = assign[y0:y1, x0:x1]
            better = d < bwin
            bwin[better] = d[better]
            awin[better] = ci

        # Pixels missed by every window: nearest center spatially, first wins.
        if (assign == -1).any():
            miss = np.flatnonzero(assign.ravel() == -1)
            my = flat_y[miss]
            mx = flat_x[miss]
            dist = (my[:, None] - cy[None, :]) ** 2 + (mx[:, None] - cx[None, :]) ** 2
            assign.ravel()[miss] = np.argmin(dist, axis=1).astype(np.int32)

        flat = assign.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        live = counts > 0
        sy = np.bincount(flat, weights=flat_y, minlength=k)
        sx = np.bincount(flat, weights=flat_x, minlength=k)
        cy[live] = sy[live] / counts[live]
        cx[live] = sx[live] / counts[live]
        for ch in range(c):
            sc = np.bincount(flat, weights=img[:, :, ch].ravel(), minlength=k)
            ccol[live, ch] = sc[live] / counts[live]

    return assign
