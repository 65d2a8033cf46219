import numpy as np
import pytest

from segboost.spatial import PartitionError, UnitState, build_graph, is_surrounded_by, max_class, neighbors
from segboost.superpixel import InferenceUnit, UnitStatus

from conftest import unit_scene


def test_left_right_split(taxonomy):
    labels = np.zeros((6, 8), dtype=np.int32)
    labels[:, 4:] = 1
    _, units, graph = unit_scene(labels, np.full((6, 8), 0.9), taxonomy)
    assert graph.n_units == 2
    assert neighbors(graph, 0) == frozenset({1})
    assert graph.boundary_length(0, 1) == 6  # one pixel pair per row


def test_single_unit_no_edges(taxonomy):
    labels = np.zeros((5, 5), dtype=np.int32)
    _, units, graph = unit_scene(labels, np.full((5, 5), 0.9), taxonomy)
    assert graph.n_units == 1
    assert neighbors(graph, 0) == frozenset()


def test_grid_edge_count(taxonomy):
    # 3x3 grid of one-pixel units: rook adjacency has 12 edges.
    labels = np.arange(9, dtype=np.int32).reshape(3, 3) % 8
    # make all nine pixels distinct units by alternating classes
    labels = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.int32)
    _, units, graph = unit_scene(labels, np.full((3, 3), 0.9), taxonomy)
    assert graph.n_units == 9
    n_edges_oracle = 0
    for y in range(3):
        for x in range(3):
            if x + 1 < 3:
                n_edges_oracle += 1
            if y + 1 < 3:
                n_edges_oracle += 1
    assert n_edges_oracle == 12
    assert len(graph.boundary_lengths) == 12
    center = int(graph.unit_map[1, 1])
    assert len(neighbors(graph, center)) == 4


def test_graph_symmetry_and_edge_soundness(taxonomy):
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 4, size=(24, 24)).astype(np.int32)
    lm, units, graph = unit_scene(labels, np.full((24, 24), 0.9), taxonomy)
    for a in range(graph.n_units):
        for b in neighbors(graph, a):
            assert a in neighbors(graph, b)
    # brute force: every edge has at least one adjacent pixel pair across it
    um = graph.unit_map
    seen = set()
    h, w = um.shape
    for y in range(h):
        for x in range(w):
            for dy, dx in ((0, 1), (1, 0)):
                yy, xx = y + dy, x + dx
                if yy < h and xx < w and um[y, x] != um[yy, xx]:
                    seen.add((min(um[y, x], um[yy, xx]), max(um[y, x], um[yy, xx])))
    assert seen == set(graph.boundary_lengths)


def test_build_graph_rejects_non_partition(taxonomy):
    labels = np.zeros((4, 4), dtype=np.int32)
    _, units, _ = unit_scene(labels, np.full((4, 4), 0.9), taxonomy)
    with pytest.raises(PartitionError):
        build_graph(units, 5, 4)  # wrong width: units no longer cover
    short = [InferenceUnit(0, units[0].pixels[:-1], 0, 0.9, UnitStatus.CLASSIFIED)]
    with pytest.raises(PartitionError):
        build_graph(short, 4, 4)


def test_neighbors_invalid_id(taxonomy):
    labels = np.zeros((3, 3), dtype=np.int32)
    _, _, graph = unit_scene(labels, np.full((3, 3), 0.9), taxonomy)
    with pytest.raises(ValueError):
        neighbors(graph, 7)


def surround_fixture(taxonomy, neighbor_specs):
    """Center misclassified unit (class Building) ringed by given neighbors.

    neighbor_specs: list of (class_id, classified) for up to 4 side blocks.
    """
    # 9x9 grid: center block 3x3, four side blocks
    water = taxonomy.id_of("Water")
    labels = np.full((9, 9), neighbor_specs[0][0], dtype=np.int32)
    conf = np.full((9, 9), 0.9 if neighbor_specs[0][1] else 0.45)
    # carve quadrants for additional neighbors: top/bottom halves
    if len(neighbor_specs) > 1:
        labels[5:, :] = neighbor_specs[1][0]
        conf[5:, :] = 0.9 if neighbor_specs[1][1] else 0.45
    labels[3:6, 3:6] = taxonomy.id_of("Building")
    conf[3:6, 3:6] = 0.45
    return unit_scene(labels, conf, taxonomy)


def test_is_surrounded_by_examples(taxonomy):
    water = taxonomy.id_of("Water")
    road = taxonomy.id_of("Pavement")

    # misclassified unit whose only neighbors are two classified water units
    lm, units, graph = surround_fixture(taxonomy, [(water, True), (water, True)])
    center = int(graph.unit_map[4, 4])
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    assert is_surrounded_by(graph, center, {water}, state)

    # one water, one road neighbor: universal quantifier fails
    lm, units, graph = surround_fixture(taxonomy, [(water, True), (road, True)])
    center = int(graph.unit_map[4, 4])
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    assert not is_surrounded_by(graph, center, {water}, state)

    # all neighbors misclassified: no classified witness
    lm, units, graph = surround_fixture(taxonomy, [(water, False), (water, False)])
    center = int(graph.unit_map[4, 4])
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    assert not is_surrounded_by(graph, center, {water}, state)


def test_surrounded_with_all_classes_iff_classified_neighbor(taxonomy):
    rng = np.random.default_rng(17)
    everything = set(range(taxonomy.n))
    for _ in range(10):
        labels = rng.integers(0, 4, size=(12, 12)).astype(np.int32)
        conf = np.where(rng.random((12, 12)) < 0.5, 0.9, 0.45)
        lm, units, graph = unit_scene(labels, conf, taxonomy)
        state = UnitState(
            classes=np.array([u.unit_class for u in units]),
            classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
        )
        for u in units:
            expected = any(state.classified[nb] for nb in neighbors(graph, u.id))
            assert is_surrounded_by(graph, u.id, everything, state) == expected


def test_max_class_area_weighting(taxonomy):
    # Center strip with classified neighbors Veg(400) + Veg(100) vs Water(450):
    # vegetation wins on summed area, 500 > 450.
    veg = taxonomy.id_of("Vegetation")
    water = taxonomy.id_of("Water")
    ship = taxonomy.id_of("Ship")
    car = taxonomy.id_of("Car")
    labels = np.full((100, 21), car, dtype=np.int32)  # misclassified filler
    conf = np.full((100, 21), 0.45)
    labels[:, 10] = ship  # the unit under test, 100 px, misclassified
    labels[:40, :10] = veg
    conf[:40, :10] = 0.9
    labels[50:60, :10] = veg
    conf[50:60, :10] = 0.9
    labels[:45, 11:] = water
    conf[:45, 11:] = 0.9
    lm, units, graph = unit_scene(labels, conf, taxonomy)
    center = int(graph.unit_map[0, 10])
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    # area-summing oracle over classified neighbors
    areas = {}
    for nb in neighbors(graph, center):
        if state.classified[nb]:
            cls = int(state.classes[nb])
            areas[cls] = areas.get(cls, 0) + units[nb].area
    assert areas == {veg: 500, water: 450}
    assert max_class(graph, center, state) == veg


def test_max_class_simple_cases(taxonomy):
    building = taxonomy.id_of("Building")
    ship = taxonomy.id_of("Ship")
    labels = np.full((6, 6), ship, dtype=np.int32)
    labels[:, 3:] = building
    conf = np.full((6, 6), 0.45)
    conf[:, 3:] = 0.9
    lm, units, graph = unit_scene(labels, conf, taxonomy)
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    left = int(graph.unit_map[0, 0])
    assert max_class(graph, left, state) == building

    # no classified neighbors -> none
    conf[:, 3:] = 0.45
    lm, units, graph = unit_scene(labels, conf, taxonomy)
    state = UnitState(
        classes=np.array([u.unit_class for u in units]),
        classified=np.array([u.status is UnitStatus.CLASSIFIED for u in units]),
    )
    assert max_class(graph, int(graph.unit_map[0, 0]), state) is None


def test_bearing_sector(taxonomy):
    labels = np.zeros((4, 8), dtype=np.int32)
    labels[:, 4:] = 1
    _, units, graph = unit_scene(labels, np.full((4, 8), 0.9), taxonomy)
    assert graph.bearing_sector(0, 1) == 0  # east
    assert graph.bearing_sector(1, 0) == 4  # west
