import numpy as np
import pytest

from segboost.core import (
    DimensionError,
    ExtraChannels,
    LabelMap,
    ProbMap,
    RasterImage,
    Taxonomy,
    TaxonomyError,
    argmax_labels,
    default_taxonomy,
    zero_extra_channels,
)


def test_zero_extra_channels_small():
    ch = zero_extra_channels(2, 2)
    assert ch.shadow.tolist() == [[0, 0], [0, 0]]
    assert ch.elevation.tolist() == [[0, 0], [0, 0]]
    single = zero_extra_channels(1, 1)
    assert single.shadow.shape == (1, 1)


def test_zero_extra_channels_large_count():
    ch = zero_extra_channels(512, 512)
    assert ch.shadow.size == 512 * 512
    assert ch.elevation.size == 512 * 512
    assert not ch.shadow.any() and not ch.elevation.any()


@pytest.mark.parametrize("dims", [(0, 4), (4, 0), (-1, 4)])
def test_zero_extra_channels_rejects_bad_dims(dims):
    with pytest.raises(DimensionError):
        zero_extra_channels(*dims)


def test_argmax_labels_examples(taxonomy):
    probs = np.zeros((1, 3, taxonomy.n))
    probs[0, 0, :3] = [0.1, 0.7, 0.2]
    probs[0, 1, :2] = [0.5, 0.5]
    probs[0, 2, :] = 1.0 / taxonomy.n
    labels, conf = argmax_labels(ProbMap(probs=probs), taxonomy)
    assert labels.labels[0, 0] == 1 and conf[0, 0] == pytest.approx(0.7)
    assert labels.labels[0, 1] == 0 and conf[0, 1] == pytest.approx(0.5)  # tie -> lowest id
    assert labels.labels[0, 2] == 0 and conf[0, 2] == pytest.approx(1.0 / taxonomy.n)


def test_argmax_one_hot_round_trip(taxonomy):
    rng = np.random.default_rng(11)
    encoded = rng.integers(0, taxonomy.n, size=(9, 13))
    probs = np.zeros((9, 13, taxonomy.n))
    np.put_along_axis(probs, encoded[:, :, None], 1.0, axis=2)
    labels, conf = argmax_labels(ProbMap(probs=probs), taxonomy)
    assert (labels.labels == encoded).all()
    assert (conf == 1.0).all()


def test_probmap_validation():
    bad = np.full((2, 2, 3), 0.5)
    with pytest.raises(ValueError):
        ProbMap(probs=bad)
    with pytest.raises(ValueError):
        ProbMap(probs=np.array([[[1.2, -0.2]]]))


def test_raster_image_validation():
    with pytest.raises(ValueError):
        RasterImage(data=np.full((2, 2, 1), 1.5))
    with pytest.raises(DimensionError):
        RasterImage(data=np.zeros((2, 2)))
    img = RasterImage(data=np.zeros((3, 4, 2)))
    assert (img.height, img.width, img.channels) == (3, 4, 2)


def test_labelmap_validation(taxonomy):
    with pytest.raises(ValueError):
        LabelMap(labels=np.full((2, 2), taxonomy.n, dtype=np.int32), taxonomy=taxonomy)


def test_extra_channels_validation():
    with pytest.raises(ValueError):
        ExtraChannels(shadow=np.full((2, 2), 2, dtype=np.int8), elevation=np.zeros((2, 2), dtype=np.int8))
    with pytest.raises(ValueError):
        ExtraChannels(shadow=np.zeros((2, 2), dtype=np.int8), elevation=np.full((2, 2), 3, dtype=np.int8))


def test_taxonomy_validation():
    tax = default_taxonomy()
    assert tax.n == 8
    assert tax.id_of("Water") == 4
    assert tax.name_of(3) == "Building"
    from segboost.core import ClassDef, ElevationBand

    with pytest.raises(TaxonomyError):
        Taxonomy(())
    with pytest.raises(TaxonomyError):
        Taxonomy((ClassDef(1, "A", ElevationBand.LOW),))
    with pytest.raises(TaxonomyError):
        Taxonomy((ClassDef(0, "A", ElevationBand.LOW), ClassDef(1, "A", ElevationBand.LOW)))
