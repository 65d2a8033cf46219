"""Deterministic synthetic scenes and probability-map corruption.

The default benchmark scene puts buildings, lakes, vegetation, a road with
parking lots and small vehicles on a ground background. Each building casts a
shade strip on a fixed scene-wide azimuth (east), drawn with the water class's
color distribution: those strips are irreducibly ambiguous for a color-only
classifier, which is exactly the gap the inferred shadow channel closes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import LabelMap, ParameterError, ProbMap, RasterImage, Taxonomy, default_taxonomy
from .superpixel import connected_regions

DEFAULT_PALETTE: dict[str, tuple[float, float, float]] = {
    "Ground": (0.62, 0.46, 0.30),
    "Vegetation": (0.18, 0.55, 0.22),
    "Pavement": (0.55, 0.55, 0.55),
    "Building": (0.72, 0.32, 0.28),
    "Water": (0.22, 0.30, 0.52),
    "Airplane": (0.92, 0.92, 0.95),
    "Car": (0.85, 0.75, 0.15),
    "Ship": (0.30, 0.15, 0.40),
}

# Shade strips reuse the water color so shadowed surfaces collide with a real
# class in feature space; the collision is what the shadow channel resolves.
SHADE_COLOR = DEFAULT_PALETTE["Water"]


class InfeasiblePlacementError(RuntimeError):
    """Shape placement failed after the bounded number of retries."""


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic recipe for one scene; all geometry in pixels."""

    width: int = 96
    height: int = 96
    seed: int = 0
    noise_sigma: float = 0.025
    background: str = "Ground"
    taxonomy: Taxonomy = field(default_factory=default_taxonomy)
    palette: Mapping[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_PALETTE)
    )
    shade_color: tuple[float, float, float] = SHADE_COLOR

    road_width: int = 10
    lot_size: tuple[int, int] = (26, 22)  # (width, height), one lot per road side
    lot_building_size: tuple[int, int] = (12, 12)
    lot_shadow_width: int = 5
    n_ground_buildings: int = 3
    building_size: tuple[int, int] = (12, 14)
    shadow_width: int = 4
    n_lakes: int = 2
    lake_size: tuple[int, int] = (10, 10)
    n_veg_patches: int = 2
    veg_size: tuple[int, int] = (8, 8)
    include_vehicles: bool = True

    def __post_init__(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ParameterError("scene must be at least 4x4")
        for w, h in (self.lot_size, self.building_size, self.lake_size, self.veg_size):
            if w >= self.width - 4 or h >= self.height - 4:
                raise ParameterError("shape size does not fit inside the scene bounds")


def benchmark_scene_spec(seed: int, width: int = 96, height: int = 96) -> SceneSpec:
    return SceneSpec(width=width, height=height, seed=seed)


def _check_palette_separation(spec: SceneSpec) -> None:
    names = [c.name for c in spec.taxonomy.classes]
    colors = np.array([spec.palette[n] for n in names])
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            dist = float(np.linalg.norm(colors[i] - colors[j]))
            if dist < 3.0 * spec.noise_sigma:
                raise ParameterError(
                    f"palette colors for {names[i]} and {names[j]} are only "
                    f"{dist:.3f} apart; need at least 3*sigma = {3 * spec.noise_sigma:.3f}"
                )


class _Canvas:
    def __init__(self, spec: SceneSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.labels = np.full((spec.height, spec.width), spec.taxonomy.id_of(spec.background), dtype=np.int32)
        self.shade = np.zeros((spec.height, spec.width), dtype=bool)
        self.reserved = np.zeros((spec.height, spec.width), dtype=bool)

    def paint(self, x0: int, y0: int, w: int, h: int, class_name: str) -> None:
        self.labels[y0 : y0 + h, x0 : x0 + w] = self.spec.taxonomy.id_of(class_name)

    def reserve(self, x0: int, y0: int, w: int, h: int, margin: int = 3) -> None:
        ya, yb = max(0, y0 - margin), min(self.spec.height, y0 + h + margin)
        xa, xb = max(0, x0 - margin), min(self.spec.width, x0 + w + margin)
        self.reserved[ya:yb, xa:xb] = True

    def find_spot(self, w: int, h: int, base_class: str, margin: int = 2, attempts: int = 200) -> tuple[int, int]:
        """Position whose footprint plus a 1-pixel ring sits on the base class
        and clears every reserved area."""
        base = self.spec.taxonomy.id_of(base_class)
        for _ in range(attempts):
            x0 = int(self.rng.integers(margin, self.spec.width - w - margin))
            y0 = int(self.rng.integers(margin, self.spec.height - h - margin))
            ring = (slice(y0 - 1, y0 + h + 1), slice(x0 - 1, x0 + w + 1))
            if self.reserved[ring].any():
                continue
            if (self.labels[ring] != base).any():
                continue
            return x0, y0
        raise InfeasiblePlacementError(f"could not place a {w}x{h} shape on {base_class}")


def generate_scene(spec: SceneSpec) -> tuple[RasterImage, LabelMap]:
    """Render a scene; bitwise deterministic for a given spec."""
    _check_palette_separation(spec)
    rng = np.random.default_rng(spec.seed)
    canvas = _Canvas(spec, rng)
    W, H = spec.width, spec.height
    lot_w, lot_h = spec.lot_size

    if spec.road_width > 0:
        lo = max(2 + lot_w, (W - spec.road_width) // 2 - 8)
        hi = min(W - spec.road_width - lot_w - 2, (W - spec.road_width) // 2 + 8)
        if lo >= hi:
            raise InfeasiblePlacementError("road and lots do not fit the scene width")
        road_x = int(rng.integers(lo, hi))
        # The road stops short of the bottom edge so the ground stays one
        # connected region on every scene.
        road_h = H - 7
        canvas.paint(road_x, 0, spec.road_width, road_h, "Pavement")
        canvas.reserve(road_x, 0, spec.road_width, road_h)

        for side in (-1, +1):
            lot_x = road_x - lot_w if side < 0 else road_x + spec.road_width
            lot_y = int(rng.integers(2, road_h - lot_h))
            canvas.paint(lot_x, lot_y, lot_w, lot_h, "Pavement")
            canvas.reserve(lot_x, lot_y, lot_w, lot_h)
            # Building and its shade strip sit deep inside the lot so that
            # superpixels spanning strip pixels never reach past the pavement.
            bw, bh = spec.lot_building_size
            bx, by = lot_x + 3, lot_y + 4
            canvas.paint(bx, by, bw, bh, "Building")
            if spec.lot_shadow_width > 0:
                canvas.shade[by : by + bh, bx + bw : bx + bw + spec.lot_shadow_width] = True
            if spec.include_vehicles and side > 0:
                canvas.paint(lot_x + 3, by + bh + 2, 6, 3, "Airplane")

        if spec.include_vehicles:
            car_y = int(rng.integers(2, road_h - 8))
            canvas.paint(road_x + 3, car_y, 3, 5, "Car")

    bw, bh = spec.building_size
    for _ in range(spec.n_ground_buildings):
        x0, y0 = canvas.find_spot(bw + spec.shadow_width, bh, spec.background)
        canvas.paint(x0, y0, bw, bh, "Building")
        if spec.shadow_width > 0:
            canvas.shade[y0 : y0 + bh, x0 + bw : x0 + bw + spec.shadow_width] = True
        canvas.reserve(x0, y0, bw + spec.shadow_width, bh)

    lw, lh = spec.lake_size
    for i in range(spec.n_lakes):
        x0, y0 = canvas.find_spot(lw, lh, spec.background)
        canvas.paint(x0, y0, lw, lh, "Water")
        canvas.reserve(x0, y0, lw, lh)
        if spec.include_vehicles and i == 0 and lw >= 8 and lh >= 6:
            canvas.paint(x0 + 2, y0 + 2, 4, 2, "Ship")

    vw, vh = spec.veg_size
    for _ in range(spec.n_veg_patches):
        x0, y0 = canvas.find_spot(vw, vh, spec.background)
        canvas.paint(x0, y0, vw, vh, "Vegetation")
        canvas.reserve(x0, y0, vw, vh)

    names = [c.name for c in spec.taxonomy.classes]
    colors = np.array([spec.palette[n] for n in names], dtype=np.float64)
    image = colors[canvas.labels]
    image[canvas.shade] = np.asarray(spec.shade_color, dtype=np.float64)
    image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    np.clip(image, 0.0, 1.0, out=image)
    return RasterImage(data=image), LabelMap(labels=canvas.labels, taxonomy=spec.taxonomy)


# ---------------------------------------------------------------------------
# corruption of probability maps

@dataclass(frozen=True)
class CorruptionModel:
    """How to damage a clean probability map for refinement testing."""

    confusion_pairs: tuple[tuple[int, int], ...]  # (true class, wrong class)
    hole_rate: float = 1.0
    corrupted_confidence: float = 0.45
    clean_confidence: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.hole_rate <= 1.0:
            raise ParameterError("hole_rate must lie in [0, 1]")
        if not self.corrupted_confidence < 0.7 < self.clean_confidence < 1.0:
            raise ParameterError(
                "corrupted confidence must stay below the default threshold 0.7 and clean above it"
            )


def default_corruption_model(taxonomy: Taxonomy, seed: int = 0) -> CorruptionModel:
    names = taxonomy.names()
    pairs = [
        ("Ground", "Vegetation"),
        ("Ground", "Building"),
        ("Pavement", "Ground"),
        ("Pavement", "Water"),
    ]
    resolved = tuple(
        (names[a], names[b]) for a, b in pairs if a in names and b in names
    )
    return CorruptionModel(confusion_pairs=resolved, seed=seed)


_SITES_PER_CLASS = 3
_SITE_SIDES = (4, 8)  # half-open range for carved hole side lengths


def _enclosed_components(truth: LabelMap) -> list[tuple[np.ndarray, int]]:
    """Connected components not touching the border whose ring is one class.

    Returns (flat pixel indices, component class) in component order.
    """
    labels = truth.labels
    h, w = labels.shape
    comp = connected_regions(labels)
    n_comp = int(comp.max()) + 1
    border = np.zeros(n_comp, dtype=bool)
    for edge in (comp[0, :], comp[-1, :], comp[:, 0], comp[:, -1]):
        border[np.unique(edge)] = True

    ring_classes: list[set[int]] = [set() for _ in range(n_comp)]
    for (sa, sb) in (
        ((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
        ((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
    ):
        ca, cb = comp[sa].ravel(), comp[sb].ravel()
        la, lb = labels[sa].ravel(), labels[sb].ravel()
        diff = ca != cb
        for a, b, cls_a, cls_b in zip(ca[diff], cb[diff], la[diff], lb[diff]):
            ring_classes[a].add(int(cls_b))
            ring_classes[b].add(int(cls_a))

    flat_comp = comp.ravel()
    order = np.argsort(flat_comp, kind="stable")
    counts = np.bincount(flat_comp, minlength=n_comp)
    groups = np.split(order, np.cumsum(counts)[:-1])
    first = np.unique(flat_comp, return_index=True)[1]
    out = []
    for ci in range(n_comp):
        if border[ci] or len(ring_classes[ci]) != 1:
            continue
        out.append((groups[ci].astype(np.int64), int(truth.labels.ravel()[first[ci]])))
    return out


def corrupt_probmap(truth: LabelMap, model: CorruptionModel) -> ProbMap:
    """Inject misclassified low-confidence holes into a clean probability map.

    Candidate regions are (a) whole enclosed components of the truth map and
    (b) small carved rectangles sampled strictly inside uniform areas, both
    filtered to classes that appear as the true side of a confusion pair.
    ``hole_rate`` selects the fraction of candidates to mislabel.
    """
    rng = np.random.default_rng(model.seed)
    labels = truth.labels
    h, w = labels.shape
    n = truth.taxonomy.n
    sources = {a for a, _ in model.confusion_pairs}

    candidates: list[tuple[np.ndarray, int]] = [
        (pixels, cls) for pixels, cls in _enclosed_components(truth) if cls in sources
    ]
    taken = np.zeros((h, w), dtype=bool)
    for pixels, _ in candidates:
        taken.ravel()[pixels] = True

    for src in sorted(sources):
        accepted = 0
        for _ in range(150):
            if accepted >= _SITES_PER_CLASS:
                break
            sw = int(rng.integers(*_SITE_SIDES))
            sh = int(rng.integers(*_SITE_SIDES))
            if w - sw - 2 <= 2 or h - sh - 2 <= 2:
                continue
            x0 = int(rng.integers(2, w - sw - 2))
            y0 = int(rng.integers(2, h - sh - 2))
            ring = (slice(y0 - 2, y0 + sh + 2), slice(x0 - 2, x0 + sw + 2))
            if (labels[ring[0], ring[1]] != src).any() or taken[ring].any():
                continue
            yy, xx = np.mgrid[y0 : y0 + sh, x0 : x0 + sw]
            pixels = (yy * w + xx).ravel().astype(np.int64)
            candidates.append((pixels, src))
            taken[y0 - 1 : y0 + sh + 1, x0 - 1 : x0 + sw + 1] = True
            accepted += 1

    k = int(round(model.hole_rate * len(candidates)))
    order = rng.permutation(len(candidates))
    selected = sorted(int(i) for i in order[:k])

    probs = np.full((h, w, n), 0.0 if n == 1 else (1.0 - model.clean_confidence) / (n - 1))
    np.put_along_axis(
        probs, labels[:, :, None].astype(np.int64), 1.0 if n == 1 else model.clean_confidence, axis=2
    )
    flat = probs.reshape(-1, n)
    for idx in selected:
        pixels, src = candidates[idx]
        wrongs = [b for a, b in model.confusion_pairs if a == src]
        wrong = int(wrongs[int(rng.integers(0, len(wrongs)))])
        rest = (1.0 - model.corrupted_confidence) / (n - 1)
        flat[pixels] = rest
        flat[pixels, wrong] = model.corrupted_confidence
    return ProbMap(probs=probs)


# ---------------------------------------------------------------------------
# scene spec serialization (documented key-value text)

def spec_to_text(spec: SceneSpec) -> str:
    lines = [
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"seed = {spec.seed}",
        f"noise_sigma = {spec.noise_sigma}",
        f"background = {spec.background}",
        f"road_width = {spec.road_width}",
        f"lot_size = {spec.lot_size[0]},{spec.lot_size[1]}",
        f"lot_building_size = {spec.lot_building_size[0]},{spec.lot_building_size[1]}",
        f"lot_shadow_width = {spec.lot_shadow_width}",
        f"n_ground_buildings = {spec.n_ground_buildings}",
        f"building_size = {spec.building_size[0]},{spec.building_size[1]}",
        f"shadow_width = {spec.shadow_width}",
        f"n_lakes = {spec.n_lakes}",
        f"lake_size = {spec.lake_size[0]},{spec.lake_size[1]}",
        f"n_veg_patches = {spec.n_veg_patches}",
        f"veg_size = {spec.veg_size[0]},{spec.veg_size[1]}",
        f"include_vehicles = {int(spec.include_vehicles)}",
        f"shade_color = {spec.shade_color[0]},{spec.shade_color[1]},{spec.shade_color[2]}",
    ]
    for name, color in spec.palette.items():
        lines.append(f"palette.{name} = {color[0]},{color[1]},{color[2]}")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str, taxonomy: Taxonomy | None = None) -> SceneSpec:
    taxonomy = taxonomy or default_taxonomy()
    raw: dict[str, str] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()

    def ints(key: str) -> tuple[int, int]:
        a, b = raw[key].split(",")
        return int(a), int(b)

    palette = {
        key.split(".", 1)[1]: tuple(float(v) for v in value.split(","))
        for key, value in raw.items()
        if key.startswith("palette.")
    }
    shade = tuple(float(v) for v in raw["shade_color"].split(","))
    return SceneSpec(
        width=int(raw["width"]),
        height=int(raw["height"]),
        seed=int(raw["seed"]),
        noise_sigma=float(raw["noise_sigma"]),
        background=raw["background"],
        taxonomy=taxonomy,
        palette=palette or dict(DEFAULT_PALETTE),
        shade_color=shade,  # type: ignore[arg-type]
        road_width=int(raw["road_width"]),
        lot_size=ints("lot_size"),
        lot_building_size=ints("lot_building_size"),
        lot_shadow_width=int(raw["lot_shadow_width"]),
        n_ground_buildings=int(raw["n_ground_buildings"]),
        building_size=ints("building_size"),
        shadow_width=int(raw["shadow_width"]),
        n_lakes=int(raw["n_lakes"]),
        lake_size=ints("lake_size"),
        n_veg_patches=int(raw["n_veg_patches"]),
        veg_size=ints("veg_size"),
        include_vehicles=bool(int(raw["include_vehicles"])),
    )


def generate_benchmark(
    n_scenes: int, seed: int, width: int = 96, height: int = 96
) -> list[tuple[str, RasterImage, LabelMap]]:
    """Generate the default benchmark: n scenes with derived per-scene seeds."""
    if n_scenes < 1:
        raise ParameterError("need at least one scene")
    scenes = []
    for i in range(n_scenes):
        spec = benchmark_scene_spec(seed=(seed * 1_000_003 + i) % (2**31 - 1), width=width, height=height)
        image, truth = generate_scene(spec)
        scenes.append((f"scene_{i:03d}", image, truth))
    return scenes


def split_benchmark(names: Sequence[str], seed: int) -> dict[str, str]:
    """60/20/20 train/validation/test split, seeded."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(names))
    n_train = max(1, int(round(0.6 * len(names))))
    n_val = max(1, int(round(0.2 * len(names))))
    assignment = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            part = "train"
        elif pos < n_train + n_val:
            part = "val"
        else:
            part = "test"
        assignment[names[int(idx)]] = part
    return assignment
