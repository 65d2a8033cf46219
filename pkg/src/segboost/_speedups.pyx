# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled superpixel kernel.

Mirrors ``_kernels_np`` exactly: same center order, same float64 expressions,
same tie-breaking, so the two backends produce bitwise-identical assignments.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

BACKEND = "compiled"


def slic_iterate(
    double[:, :, ::1] img,
    cnp.ndarray[cnp.float64_t, ndim=1] cx_in,
    cnp.ndarray[cnp.float64_t, ndim=1] cy_in,
    cnp.ndarray[cnp.float64_t, ndim=2] ccol_in,
    double spatial_scale,
    int win,
    int iters,
):
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    cdef int c = img.shape[2]
    cdef int k = cx_in.shape[0]

    cdef double[::1] cx = cx_in.copy()
    cdef double[::1] cy = cy_in.copy()
    cdef double[:, ::1] ccol = np.ascontiguousarray(ccol_in).copy()

    assign_arr = np.zeros((h, w), dtype=np.int32)
    best_arr = np.empty((h, w), dtype=np.float64)
    cdef int[:, ::1] assign = assign_arr
    cdef double[:, ::1] best = best_arr

    counts_arr = np.empty(k, dtype=np.float64)
    sy_arr = np.empty(k, dtype=np.float64)
    sx_arr = np.empty(k, dtype=np.float64)
    scol_arr = np.empty((k, c), dtype=np.float64)
    cdef double[::1] counts = counts_arr
    cdef double[::1] sy = sy_arr
    cdef double[::1] sx = sx_arr
    cdef double[:, ::1] scol = scol_arr

    cdef int it, ci, y, x, ch, y0, y1, x0, x1, a
    cdef double d, dy2, dx2, diff, bestd
    cdef int bestc
    cdef double inf = np.inf

    for it in range(iters):
        for y in range(h):
            for x in range(w):
                best[y, x] = inf
                assign[y, x] = -1

        for ci in range(k):
            y0 = <int>floor(cy[ci]) - win
            if y0 < 0:
                y0 = 0
            y1 = <int>floor(cy[ci]) + win + 1
            if y1 > h:
                y1 = h
            x0 = <int>floor(cx[ci]) - win
            if x0 < 0:
                x0 = 0
            x1 = <int>floor(cx[ci]) + win + 1
            if x1 > w:
                x1 = w
            if y0 >= y1 or x0 >= x1:
                continue
            for y in range(y0, y1):
                dy2 = (y - cy[ci]) * (y - cy[ci])
                for x in range(x0, x1):
                    diff = img[y, x, 0] - ccol[ci, 0]
                    d = diff * diff
                    for ch in range(1, c):
                        diff = img[y, x, ch] - ccol[ci, ch]
                        d = d + diff * diff
                    dx2 = (x - cx[ci]) * (x - cx[ci])
                    d = d + spatial_scale * (dy2 + dx2)
                    if d < best[y, x]:
                        best[y, x] = d
                        assign[y, x] = ci

        # Pixels missed by every window: nearest center spatially, first wins.
        for y in range(h):
            for x in range(w):
                if assign[y, x] == -1:
                    bestd = inf
                    bestc = 0
                    for ci in range(k):
                        dy2 = (y - cy[ci]) * (y - cy[ci])
                        dx2 = (x - cx[ci]) * (x - cx[ci])
                        d = dy2 + dx2
                        if d < bestd:
                            bestd = d
                            bestc = ci
                    assign[y, x] = bestc

        for ci in range(k):
            counts[ci] = 0.0
            sy[ci] = 0.0
            sx[ci] = 0.0
            for ch in range(c):
                scol[ci, ch] = 0.0
        for y in range(h):
            for x in range(w):
                a = assign[y, x]
                counts[a] = counts[a] + 1.0
                sy[a] = sy[a] + y
                sx[a] = sx[a] + x
                for ch in range(c):
                    scol[a, ch] = scol[a, ch] + img[y, x, ch]
        for ci in range(k):
            if counts[ci] > 0.0:
                cy[ci] = sy[ci] / counts[ci]
                cx[ci] = sx[ci] / counts[ci]
                for ch in range(c):
                    ccol[ci, ch] = scol[ci, ch] / counts[ci]

    return assign_arr
