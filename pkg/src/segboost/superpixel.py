"""SLIC superpixel segmentation and aggregation into inference units.

An inference unit is a maximal group of 4-adjacent superpixels sharing the
same majority class; it is the atom the spatial reasoning operates on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import backends
from .core import DimensionError, LabelMap, ParameterError, RasterImage


class UnitStatus(Enum):
    CLASSIFIED = "classified"
    MISCLASSIFIED = "misclassified"


@dataclass(frozen=True)
class SuperpixelMap:
    """Total partition of the image into 4-connected superpixels."""

    assignment: np.ndarray  # (height, width), int32 superpixel ids
    k_actual: int

    @property
    def height(self) -> int:
        return self.assignment.shape[0]

    @property
    def width(self) -> int:
        return self.assignment.shape[1]


@dataclass(frozen=True)
class InferenceUnit:
    """Connected same-class region with its mean classification confidence."""

    id: int
    pixels: np.ndarray  # ascending flat pixel indices (row-major)
    unit_class: int
    confidence: float
    status: UnitStatus

    @property
    def area(self) -> int:
        return int(self.pixels.size)


def _canonical_relabel(flat: np.ndarray) -> np.ndarray:
    """Relabel ids (dense or sparse) to increase in raster order of first use."""
    vals, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(vals.size, dtype=np.int32)
    remap[order] = np.arange(vals.size, dtype=np.int32)
    return remap[inverse]


def connected_regions(values: np.ndarray) -> np.ndarray:
    """4-connected components of equal values, labeled in raster-scan order."""
    h, w = values.shape
    n = h * w
    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    rows = []
    cols = []
    right = values[:, :-1] == values[:, 1:]
    rows.append(idx[:, :-1][right])
    cols.append(idx[:, 1:][right])
    down = values[:-1, :] == values[1:, :]
    rows.append(idx[:-1, :][down])
    cols.append(idx[1:, :][down])
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    graph = coo_matrix((np.ones(i.size, dtype=np.int8), (i, j)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return _canonical_relabel(labels).reshape(h, w)


def _region_adjacency_pairs(regions: np.ndarray) -> np.ndarray:
    """Unique (a, b) pairs of 4-adjacent distinct region ids, a < b."""
    a = np.concatenate(
        [regions[:, :-1].ravel(), regions[:-1, :].ravel()]
    )
    b = np.concatenate(
        [regions[:, 1:].ravel(), regions[1:, :].ravel()]
    )
    mask = a != b
    a, b = a[mask], b[mask]
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    m = int(regions.max()) + 1
    return np.unique(lo * m + hi)


def _grid_centers(h: int, w: int, k: int) -> tuple[np.ndarray, np.ndarray, int, int]:
    nx = min(w, max(1, int(math.ceil(math.sqrt(k * w / h)))))
    ny = min(h, max(1, int(round(k / nx))))
    gx = (np.arange(nx, dtype=np.float64) + 0.5) * (w / nx)
    gy = (np.arange(ny, dtype=np.float64) + 0.5) * (h / ny)
    cx = np.tile(gx, ny)
    cy = np.repeat(gy, nx)
    return cx, cy, nx, ny


def _perturb_to_low_gradient(img: np.ndarray, cx: np.ndarray, cy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nudge each seed to the lowest-gradient pixel in its 3x3 neighborhood."""
    h, w, _ = img.shape
    grad = np.zeros((h, w), dtype=np.float64)
    for ch in range(img.shape[2]):
        gy, gx = np.gradient(img[:, :, ch])
        grad += gx * gx + gy * gy
    out_x = np.empty_like(cx)
    out_y = np.empty_like(cy)
    for i in range(cx.size):
        px = min(w - 1, max(0, int(round(cx[i]))))
        py = min(h - 1, max(0, int(round(cy[i]))))
        y0, y1 = max(0, py - 1), min(h, py + 2)
        x0, x1 = max(0, px - 1), min(w, px + 2)
        window = grad[y0:y1, x0:x1]
        flat = int(np.argmin(window))
        out_y[i] = y0 + flat // window.shape[1]
        out_x[i] = x0 + flat % window.shape[1]
    return out_x, out_y


def _enforce_connectivity(assignment: np.ndarray, k_target: int) -> tuple[np.ndarray, int]:
    """Split disconnected superpixels; absorb small orphan fragments.

    A fragment is an orphan when it is not the largest piece of its superpixel
    and is smaller than (h*w)/(4*k_target) pixels. Orphans merge into the
    largest adjacent surviving region (current area, ties toward the lower
    region id).
    """
    h, w = assignment.shape
    comp = connected_regions(assignment)
    n_comp = int(comp.max()) + 1
    sizes = np.bincount(comp.ravel(), minlength=n_comp).astype(np.int64)
    owner = np.empty(n_comp, dtype=np.int64)
    flat_comp = comp.ravel()
    flat_assign = assignment.ravel()
    first = np.unique(flat_comp, return_index=True)[1]
    owner[:] = flat_assign[first]

    # Largest component per superpixel survives unconditionally (ties toward
    # the earlier component in raster order).
    keep = np.zeros(n_comp, dtype=bool)
    best_size: dict[int, int] = {}
    best_comp: dict[int, int] = {}
    for ci in range(n_comp):
        o = int(owner[ci])
        if o not in best_size or sizes[ci] > best_size[o]:
            best_size[o] = int(sizes[ci])
            best_comp[o] = ci
    for ci in best_comp.values():
        keep[ci] = True

    min_size = (h * w) / (4.0 * k_target)
    orphan = ~keep & (sizes < min_size)
    keep |= ~orphan

    adjacency: list[set[int]] = [set() for _ in range(n_comp)]
    m = n_comp
    for code in _region_adjacency_pairs(comp):
        a, b = int(code // m), int(code % m)
        adjacency[a].add(b)
        adjacency[b].add(a)

    target = np.arange(n_comp, dtype=np.int64)

    def resolve(ci: int) -> int:
        while target[ci] != ci:
            ci = int(target[ci])
        return ci

    area = sizes.copy()
    pending = [ci for ci in range(n_comp) if orphan[ci]]
    while pending:
        progressed = False
        still = []
        for ci in pending:
            hosts = {resolve(nb) for nb in adjacency[ci]}
            hosts = {t for t in hosts if keep[t] and t != ci}
            if not hosts:
                still.append(ci)
                continue
            best = max(hosts, key=lambda t: (area[t], -t))
            target[ci] = best
            area[best] += area[ci]
            adjacency[best] |= adjacency[ci]
            progressed = True
        if not progressed and still:
            raise RuntimeError("orphan absorption did not converge")
        pending = still

    resolved = np.array([resolve(ci) for ci in range(n_comp)], dtype=np.int64)
    merged = resolved[comp.ravel()]
    relabeled = _canonical_relabel(merged).reshape(h, w)
    return relabeled, int(relabeled.max()) + 1


def slic_segment(
    image: RasterImage,
    k_target: int,
    compactness: float = 10.0,
    max_iters: int = 10,
    seed: int = 0,
) -> SuperpixelMap:
    """Partition the image into roughly ``k_target`` compact superpixels.

    Seeds start on a regular grid (perturbed away from strong gradients), then
    alternate windowed assignment and center updates. The result is fully
    deterministic; ``seed`` is accepted for interface stability but the
    algorithm has no random choices.
    """
    del seed
    h, w, _ = image.data.shape
    if k_target < 1:
        raise ParameterError("k_target must be at least 1")
    if k_target > h * w:
        raise ParameterError(f"k_target {k_target} exceeds pixel count {h * w}")
    if max_iters < 1:
        raise ParameterError("max_iters must be at least 1")

    img = np.ascontiguousarray(image.data, dtype=np.float64)
    step = math.sqrt(h * w / k_target)
    cx, cy, nx, ny = _grid_centers(h, w, k_target)
    cx, cy = _perturb_to_low_gradient(img, cx, cy)
    py = np.clip(np.floor(cy).astype(np.int64), 0, h - 1)
    px = np.clip(np.floor(cx).astype(np.int64), 0, w - 1)
    ccol = np.ascontiguousarray(img[py, px, :], dtype=np.float64)

    spatial_scale = (compactness / step) ** 2
    win = int(math.ceil(max(step, w / nx, h / ny))) + 1
    assignment = backends.slic_iterate(img, cx, cy, ccol, spatial_scale, win, max_iters)
    relabeled, k_actual = _enforce_connectivity(assignment, k_target)
    return SuperpixelMap(assignment=relabeled.astype(np.int32), k_actual=k_actual)


def majority_label(pixels: np.ndarray, labels: LabelMap) -> int:
    """Most frequent class among the given flat pixel indices, ties low."""
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        raise ParameterError("cannot take the majority label of an empty unit")
    counts = np.bincount(labels.labels.ravel()[pixels], minlength=labels.taxonomy.n)
    return int(np.argmax(counts))


def _units_from_unit_map(
    unit_map: np.ndarray,
    unit_classes: np.ndarray,
    confmap: np.ndarray,
    f_t: float,
) -> list[InferenceUnit]:
    n_units = int(unit_map.max()) + 1
    flat = unit_map.ravel()
    counts = np.bincount(flat, minlength=n_units)
    conf_sums = np.bincount(flat, weights=confmap.ravel(), minlength=n_units)
    means = conf_sums / counts
    order = np.argsort(flat, kind="stable")
    bounds = np.cumsum(counts)[:-1]
    pixel_groups = np.split(order, bounds)
    units = []
    for uid in range(n_units):
        conf = float(means[uid])
        status = UnitStatus.MISCLASSIFIED if conf < f_t else UnitStatus.CLASSIFIED
        units.append(
            InferenceUnit(
                id=uid,
                pixels=pixel_groups[uid].astype(np.int64),
                unit_class=int(unit_classes[uid]),
                confidence=conf,
                status=status,
            )
        )
    return units


def aggregate_units(
    spmap: SuperpixelMap,
    labels: LabelMap,
    confmap: np.ndarray,
    f_t: float,
) -> list[InferenceUnit]:
    """Merge same-class adjacent superpixels into inference units.

    Each superpixel takes its majority label; 4-adjacent superpixels with
    equal labels form one unit. Unit confidence is the mean per-pixel
    confidence over the merged region, and a unit is flagged misclassified
    when that mean falls strictly below ``f_t``.
    """
    if spmap.assignment.shape != labels.labels.shape or confmap.shape != labels.labels.shape:
        raise DimensionError("superpixel map, labels and confidence must share dimensions")
    if not 0.0 < f_t < 1.0:
        raise ParameterError("f_t must lie in (0, 1)")

    k = spmap.k_actual
    n = labels.taxonomy.n
    assign = spmap.assignment
    hist = np.bincount(
        assign.ravel().astype(np.int64) * n + labels.labels.ravel(), minlength=k * n
    ).reshape(k, n)
    sp_class = np.argmax(hist, axis=1).astype(np.int32)

    # Union same-class adjacent superpixels.
    codes = _region_adjacency_pairs(assign)
    m = int(assign.max()) + 1
    a = (codes // m).astype(np.int64)
    b = (codes % m).astype(np.int64)
    same = sp_class[a] == sp_class[b]
    graph = coo_matrix(
        (np.ones(int(same.sum()), dtype=np.int8), (a[same], b[same])), shape=(k, k)
    )
    _, sp_unit = connected_components(graph, directed=False)

    # Canonical unit ids: raster order of each unit's first pixel.
    first_pixel_of_sp = np.unique(assign.ravel(), return_index=True)[1]
    n_units = int(sp_unit.max()) + 1
    unit_first = np.full(n_units, assign.size, dtype=np.int64)
    np.minimum.at(unit_first, sp_unit, first_pixel_of_sp)
    order = np.argsort(unit_first, kind="stable")
    remap = np.empty(n_units, dtype=np.int64)
    remap[order] = np.arange(n_units)
    sp_unit = remap[sp_unit]

    unit_map = sp_unit[assign]
    unit_classes = np.zeros(n_units, dtype=np.int32)
    unit_classes[sp_unit] = sp_class
    return _units_from_unit_map(unit_map, unit_classes, confmap, f_t)


def units_from_labels(labels: LabelMap, confmap: np.ndarray, f_t: float) -> list[InferenceUnit]:
    """Inference units taken directly as connected components of a label map.

    Equivalent to aggregating over single-pixel superpixels; used by the
    standalone refinement path where no source image is available.
    """
    if confmap.shape != labels.labels.shape:
        raise DimensionError("labels and confidence must share dimensions")
    if not 0.0 < f_t < 1.0:
        raise ParameterError("f_t must lie in (0, 1)")
    unit_map = connected_regions(labels.labels)
    n_units = int(unit_map.max()) + 1
    first = np.unique(unit_map.ravel(), return_index=True)[1]
    unit_classes = labels.labels.ravel()[first]
    return _units_from_unit_map(unit_map, unit_classes, confmap, f_t)
