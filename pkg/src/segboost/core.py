"""Shared raster, probability and taxonomy types used across the pipeline."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

PROB_SUM_TOL = 1e-5


class DimensionError(ValueError):
    """Raster dimensions are invalid or inconsistent between inputs."""


class ParameterError(ValueError):
    """An operation received an out-of-range parameter."""


class TaxonomyError(ValueError):
    """A taxonomy is empty or malformed."""


class ElevationBand(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class ClassDef:
    """One land-cover class: dense id, display name, relative elevation band."""

    id: int
    name: str
    band: ElevationBand
    color: tuple[int, int, int] = (128, 128, 128)


@dataclass(frozen=True)
class Taxonomy:
    """Ordered, dense set of classes. Immutable and shared across the pipeline."""

    classes: tuple[ClassDef, ...]

    def __post_init__(self) -> None:
        if not self.classes:
            raise TaxonomyError("taxonomy has no classes")
        if [c.id for c in self.classes] != list(range(len(self.classes))):
            raise TaxonomyError("class ids must be dense, unique and 0-based")
        if len({c.name for c in self.classes}) != len(self.classes):
            raise TaxonomyError("class names must be unique")

    @property
    def n(self) -> int:
        return len(self.classes)

    def id_of(self, name: str) -> int:
        for c in self.classes:
            if c.name == name:
                return c.id
        raise TaxonomyError(f"unknown class name: {name!r}")

    def name_of(self, class_id: int) -> str:
        return self.classes[class_id].name

    def names(self) -> dict[str, int]:
        return {c.name: c.id for c in self.classes}

    def band_ids(self, band: ElevationBand) -> frozenset[int]:
        return frozenset(c.id for c in self.classes if c.band is band)


def default_taxonomy() -> Taxonomy:
    """Canonical eight-class land-cover taxonomy used by the built-in rules."""
    low, med, high = ElevationBand.LOW, ElevationBand.MEDIUM, ElevationBand.HIGH
    return Taxonomy(
        (
            ClassDef(0, "Ground", low, (158, 120, 77)),
            ClassDef(1, "Vegetation", low, (46, 140, 56)),
            ClassDef(2, "Pavement", low, (140, 140, 140)),
            ClassDef(3, "Building", high, (184, 82, 71)),
            ClassDef(4, "Water", low, (56, 77, 133)),
            ClassDef(5, "Airplane", med, (235, 235, 242)),
            ClassDef(6, "Car", med, (217, 191, 38)),
            ClassDef(7, "Ship", med, (77, 38, 102)),
        )
    )


@dataclass(frozen=True)
class RasterImage:
    """Multi-channel image, row-major float data with every value in [0, 1]."""

    data: np.ndarray  # (height, width, channels)

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DimensionError(f"image data must be (h, w, c), got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("image data contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids tied to a taxonomy."""

    labels: np.ndarray  # (height, width), integer class ids
    taxonomy: Taxonomy

    def __post_init__(self) -> None:
        if self.labels.ndim != 2:
            raise DimensionError(f"labels must be (h, w), got {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.taxonomy.n):
            raise ValueError("label out of range for taxonomy")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel class probability vectors; each vector sums to one."""

    probs: np.ndarray  # (height, width, n)

    def __post_init__(self) -> None:
        if self.probs.ndim != 3:
            raise DimensionError(f"probs must be (h, w, n), got {self.probs.shape}")
        if self.probs.min() < 0.0 or self.probs.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = self.probs.sum(axis=2)
        if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            raise ValueError("per-pixel probabilities must sum to 1")

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def n(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class ExtraChannels:
    """Inferred shadow ({-1, 0, +1}) and relative elevation ({0, 1, 2}) rasters."""

    shadow: np.ndarray  # (height, width), int8
    elevation: np.ndarray  # (height, width), int8

    def __post_init__(self) -> None:
        if self.shadow.ndim != 2 or self.shadow.shape != self.elevation.shape:
            raise DimensionError("shadow and elevation must share a 2-d shape")
        if not np.isin(self.shadow, (-1, 0, 1)).all():
            raise ValueError("shadow values must be in {-1, 0, +1}")
        if not np.isin(self.elevation, (0, 1, 2)).all():
            raise ValueError("elevation values must be in {0, 1, 2}")

    @property
    def height(self) -> int:
        return self.shadow.shape[0]

    @property
    def width(self) -> int:
        return self.shadow.shape[1]


def zero_extra_channels(width: int, height: int) -> ExtraChannels:
    """All-zero channels: shadow 'uncertain', elevation 'low'."""
    if width <= 0 or height <= 0:
        raise DimensionError(f"dimensions must be positive, got {width}x{height}")
    return ExtraChannels(
        shadow=np.zeros((height, width), dtype=np.int8),
        elevation=np.zeros((height, width), dtype=np.int8),
    )


def argmax_labels(probs: ProbMap, taxonomy: Taxonomy) -> tuple[LabelMap, np.ndarray]:
    """Hard labels and per-pixel confidence from a probability map.

    Confidence is the maximum class probability; ties break toward the lowest
    class id.
    """
    if probs.n != taxonomy.n:
        raise DimensionError(f"probability map has {probs.n} classes, taxonomy has {taxonomy.n}")
    labels = np.argmax(probs.probs, axis=2).astype(np.int32)
    confidence = np.max(probs.probs, axis=2)
    return LabelMap(labels=labels, taxonomy=taxonomy), confidence
