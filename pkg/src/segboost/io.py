"""File formats: binary tensors, label rasters, taxonomies, configs, reports.

Tensor files ("CBFT"): little-endian, magic ``CBFT``, u32 version, u32 ndim,
each dim as u32, one u8 dtype tag (0 = float32, 1 = int8), then the payload
row-major. Label rasters are 8-bit single-channel PNGs with a sidecar text
palette mapping ``id<TAB>name<TAB>#rrggbb``.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .core import ClassDef, ElevationBand, LabelMap, Taxonomy, TaxonomyError

TENSOR_MAGIC = b"CBFT"
TENSOR_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("int8")}
_DTYPE_TAGS = {np.dtype("float32"): 0, np.dtype("int8"): 1}


class FormatError(ValueError):
    """A file does not conform to its documented format."""


class ConfigError(ValueError):
    """A configuration file or value is invalid."""


# ---------------------------------------------------------------------------
# binary tensors

def write_tensor(path: str | Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.float64:
        arr = arr.astype(np.float32)
    if arr.dtype not in _DTYPE_TAGS:
        raise FormatError(f"unsupported tensor dtype {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<II", TENSOR_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(struct.pack("<B", _DTYPE_TAGS[arr.dtype]))
        fh.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, ndim = struct.unpack_from("<II", data, 4)
    if version != TENSOR_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if not 1 <= ndim <= 8:
        raise FormatError(f"{path}: implausible ndim {ndim}")
    dims = struct.unpack_from(f"<{ndim}I", data, 12)
    (tag,) = struct.unpack_from("<B", data, 12 + 4 * ndim)
    if tag not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag}")
    dtype = _DTYPES[tag]
    offset = 13 + 4 * ndim
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[offset:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


# ---------------------------------------------------------------------------
# label rasters + palette sidecars

def palette_path(raster_path: str | Path) -> Path:
    return Path(raster_path).with_suffix(".palette.txt")


def write_label_raster(path: str | Path, labels: LabelMap) -> None:
    if labels.taxonomy.n > 256:
        raise FormatError("label rasters support at most 256 classes")
    img = Image.fromarray(labels.labels.astype(np.uint8), mode="L")
    img.save(path, format="PNG")
    lines = [
        f"{c.id}\t{c.name}\t#{c.color[0]:02x}{c.color[1]:02x}{c.color[2]:02x}"
        for c in labels.taxonomy.classes
    ]
    palette_path(path).write_text("\n".join(lines) + "\n")


def read_label_raster(path: str | Path, taxonomy: Taxonomy | None = None) -> LabelMap:
    arr = np.asarray(Image.open(path)).astype(np.int32)
    if arr.ndim != 2:
        raise FormatError(f"{path}: label raster must be single-channel")
    if taxonomy is None:
        taxonomy = read_palette(palette_path(path))
    return LabelMap(labels=arr, taxonomy=taxonomy)


def read_palette(path: str | Path, band_lookup: Mapping[str, ElevationBand] | None = None) -> Taxonomy:
    """Rebuild a taxonomy from a palette sidecar.

    Palette files do not carry elevation bands; ``band_lookup`` supplies them
    by class name, defaulting to the canonical role names and otherwise low.
    """
    from .core import default_taxonomy

    if band_lookup is None:
        band_lookup = {c.name: c.band for c in default_taxonomy().classes}
    classes = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3 or not parts[2].startswith("#") or len(parts[2]) != 7:
            raise FormatError(f"{path}:{line_no}: expected 'id<TAB>name<TAB>#rrggbb'")
        cid, name, hexcolor = int(parts[0]), parts[1], parts[2]
        color = tuple(int(hexcolor[i : i + 2], 16) for i in (1, 3, 5))
        classes.append(ClassDef(cid, name, band_lookup.get(name, ElevationBand.LOW), color))
    return Taxonomy(tuple(classes))


# ---------------------------------------------------------------------------
# taxonomy files (id name band [#rrggbb])

def write_taxonomy(path: str | Path, taxonomy: Taxonomy) -> None:
    lines = [
        f"{c.id}\t{c.name}\t{c.band.value}\t#{c.color[0]:02x}{c.color[1]:02x}{c.color[2]:02x}"
        for c in taxonomy.classes
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_taxonomy(path: str | Path) -> Taxonomy:
    classes = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) not in (3, 4):
            raise FormatError(f"{path}:{line_no}: expected 'id<TAB>name<TAB>band[<TAB>#rrggbb]'")
        cid, name, band = int(parts[0]), parts[1], parts[2]
        try:
            band_val = ElevationBand(band)
        except ValueError as exc:
            raise FormatError(f"{path}:{line_no}: unknown elevation band {band!r}") from exc
        color = (128, 128, 128)
        if len(parts) == 4:
            color = tuple(int(parts[3][i : i + 2], 16) for i in (1, 3, 5))
        classes.append(ClassDef(cid, name, band_val, color))
    try:
        return Taxonomy(tuple(classes))
    except TaxonomyError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# flat key-value config files

def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def write_config_file(path: str | Path, values: Mapping[str, object]) -> None:
    lines = [f"{k} = {v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# CSV reports

def write_metrics_csv(path: str | Path, rows: Iterable[Mapping[str, object]], class_names: Sequence[str]) -> None:
    """Rows: iteration, stage, oa, miou, then one IoU column per class."""
    fieldnames = ["iteration", "stage", "oa", "miou"] + [f"iou_{n}" for n in class_names]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})


def metrics_row(iteration: int, stage: int, oa: float, miou: float, per_class: Sequence[float], class_names: Sequence[str]) -> dict[str, object]:
    row: dict[str, object] = {
        "iteration": iteration,
        "stage": stage,
        "oa": f"{oa:.6f}",
        "miou": f"{miou:.6f}",
    }
    for name, iou in zip(class_names, per_class):
        row[f"iou_{name}"] = "" if np.isnan(iou) else f"{iou:.6f}"
    return row


def write_history_csv(path: str | Path, records: Iterable[object]) -> None:
    """Training history: one row per executed iteration."""
    fieldnames = [
        "iteration",
        "stage1_oa",
        "stage1_miou",
        "stage2_oa",
        "stage2_miou",
        "corrections",
        "wall_time",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for rec in records:
            writer.writerow(
                [
                    rec.iteration,
                    f"{rec.stage1_oa:.6f}",
                    f"{rec.stage1_miou:.6f}",
                    f"{rec.stage2_oa:.6f}",
                    f"{rec.stage2_miou:.6f}",
                    rec.corrections,
                    f"{rec.wall_time:.3f}",
                ]
            )


def write_correction_log_csv(path: str | Path, rows: Iterable[Sequence[object]]) -> None:
    """Rows of (scene, unit_id, old, new, rule_id); scene may be empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene", "unit_id", "old", "new", "rule_id"])
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# run manifests

def write_manifest(path: str | Path, manifest: Mapping[str, object]) -> None:
    for key in ("artifacts",):
        for ref in manifest.get(key, []):  # type: ignore[union-attr]
            if not Path(ref).exists():
                raise FormatError(f"manifest references missing path: {ref}")
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
