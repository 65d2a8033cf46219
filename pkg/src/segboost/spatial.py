"""Region adjacency graph over inference units and the spatial predicates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DimensionError
from .superpixel import InferenceUnit, UnitStatus


class PartitionError(ValueError):
    """Units do not form a total, disjoint partition of the image."""


@dataclass(frozen=True)
class UnitState:
    """Per-unit snapshot: class id and whether the unit counts as classified.

    All rule antecedents read only this snapshot, which makes a reasoning pass
    independent of unit evaluation order.
    """

    classes: np.ndarray  # (n_units,), int
    classified: np.ndarray  # (n_units,), bool


def snapshot_from_units(units: Sequence[InferenceUnit]) -> UnitState:
    classes = np.array([u.unit_class for u in units], dtype=np.int32)
    classified = np.array([u.status is UnitStatus.CLASSIFIED for u in units], dtype=bool)
    return UnitState(classes=classes, classified=classified)


@dataclass(frozen=True)
class RegionGraph:
    """Undirected 4-adjacency graph between inference units."""

    units: tuple[InferenceUnit, ...]
    adjacency: tuple[frozenset[int], ...]
    boundary_lengths: dict[tuple[int, int], int]
    areas: np.ndarray  # pixels per unit
    centroids: np.ndarray  # (n_units, 2) as (y, x)
    unit_map: np.ndarray  # (height, width) unit id per pixel

    @property
    def n_units(self) -> int:
        return len(self.units)

    def boundary_length(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        return self.boundary_lengths.get(key, 0)

    def bearing_sector(self, a: int, b: int) -> int:
        """8-sector compass bearing of unit b's centroid seen from unit a.

        Sector 0 is east, counting counter-clockwise in 45-degree steps. Not
        used by any built-in rule; available to custom programmatic rules.
        """
        dy = self.centroids[b, 0] - self.centroids[a, 0]
        dx = self.centroids[b, 1] - self.centroids[a, 1]
        angle = math.atan2(-dy, dx) % (2.0 * math.pi)
        return int(((angle + math.pi / 8.0) % (2.0 * math.pi)) // (math.pi / 4.0))


def build_graph(units: Sequence[InferenceUnit], width: int, height: int) -> RegionGraph:
    """Build the adjacency graph; edges carry shared-border pixel-pair counts."""
    n_units = len(units)
    unit_map = np.full((height, width), -1, dtype=np.int64)
    total = 0
    for u in units:
        flat = unit_map.ravel()
        if u.pixels.size and (flat[u.pixels] != -1).any():
            raise PartitionError("unit pixel sets overlap")
        flat[u.pixels] = u.id
        total += u.pixels.size
    if total != width * height or (unit_map == -1).any():
        raise PartitionError("units do not cover the image")

    a = np.concatenate([unit_map[:, :-1].ravel(), unit_map[:-1, :].ravel()])
    b = np.concatenate([unit_map[:, 1:].ravel(), unit_map[1:, :].ravel()])
    mask = a != b
    lo = np.minimum(a[mask], b[mask])
    hi = np.maximum(a[mask], b[mask])
    codes, counts = np.unique(lo * n_units + hi, return_counts=True)

    adjacency: list[set[int]] = [set() for _ in range(n_units)]
    boundary: dict[tuple[int, int], int] = {}
    for code, count in zip(codes, counts):
        pa, pb = int(code // n_units), int(code % n_units)
        adjacency[pa].add(pb)
        adjacency[pb].add(pa)
        boundary[(pa, pb)] = int(count)

    areas = np.array([u.pixels.size for u in units], dtype=np.int64)
    centroids = np.empty((n_units, 2), dtype=np.float64)
    for u in units:
        centroids[u.id, 0] = float(np.mean(u.pixels // width))
        centroids[u.id, 1] = float(np.mean(u.pixels % width))

    return RegionGraph(
        units=tuple(units),
        adjacency=tuple(frozenset(s) for s in adjacency),
        boundary_lengths=boundary,
        areas=areas,
        centroids=centroids,
        unit_map=unit_map,
    )


def neighbors(graph: RegionGraph, unit: int) -> frozenset[int]:
    """Ids of all units sharing a border with the given unit."""
    if not 0 <= unit < graph.n_units:
        raise ValueError(f"unit id {unit} out of range")
    return graph.adjacency[unit]


def is_surrounded_by(
    graph: RegionGraph,
    unit: int,
    allowed_classes: Iterable[int],
    snapshot: UnitState,
) -> bool:
    """True when every classified neighbor belongs to ``allowed_classes``.

    Misclassified neighbors do not count as witnesses, so at least one
    classified neighbor is required for the predicate to hold.
    """
    allowed = frozenset(allowed_classes)
    found_classified = False
    for nb in neighbors(graph, unit):
        if not snapshot.classified[nb]:
            continue
        if int(snapshot.classes[nb]) not in allowed:
            return False
        found_classified = True
    return found_classified


def max_class(graph: RegionGraph, unit: int, snapshot: UnitState) -> int | None:
    """Dominant class (by pixel area) among classified neighbors, ties low.

    Returns None when the unit has no classified neighbor.
    """
    area_by_class: dict[int, int] = {}
    for nb in neighbors(graph, unit):
        if not snapshot.classified[nb]:
            continue
        cls = int(snapshot.classes[nb])
        area_by_class[cls] = area_by_class.get(cls, 0) + int(graph.areas[nb])
    if not area_by_class:
        return None
    return min(area_by_class, key=lambda cls: (-area_by_class[cls], cls))
