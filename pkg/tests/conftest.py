import numpy as np
import pytest

from segboost.core import LabelMap, Taxonomy, default_taxonomy
from segboost.spatial import build_graph
from segboost.superpixel import units_from_labels


@pytest.fixture(scope="session")
def taxonomy() -> Taxonomy:
    return default_taxonomy()


def unit_scene(labels: np.ndarray, conf: np.ndarray, taxonomy: Taxonomy, f_t: float = 0.7):
    """Units and graph built straight from a hand-drawn label grid."""
    lm = LabelMap(labels=np.asarray(labels, dtype=np.int32), taxonomy=taxonomy)
    units = units_from_labels(lm, np.asarray(conf, dtype=np.float64), f_t)
    graph = build_graph(units, lm.width, lm.height)
    return lm, units, graph


def framed_scene(taxonomy: Taxonomy, size: int, surround: int, hole: int, hole_conf: float = 0.45):
    """Uniform field of ``surround`` with a centered 4x4 hole of ``hole``."""
    labels = np.full((size, size), surround, dtype=np.int32)
    conf = np.full((size, size), 0.9)
    c = size // 2
    labels[c - 2 : c + 2, c - 2 : c + 2] = hole
    conf[c - 2 : c + 2, c - 2 : c + 2] = hole_conf
    mask = labels == hole
    return labels, conf, mask
