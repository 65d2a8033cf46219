import numpy as np
import pytest

from segboost.core import ClassDef, DimensionError, ElevationBand, LabelMap, ParameterError, Taxonomy
from segboost.metrics import ConfusionMatrix, confusion, mean_iou, overall_accuracy


def small_taxonomy(n):
    return Taxonomy(tuple(ClassDef(i, f"cls{i}", ElevationBand.LOW) for i in range(n)))


def brute_force_counts(pred, truth, n):
    counts = np.zeros((n, n), dtype=np.int64)
    for t, p in zip(truth.ravel(), pred.ravel()):
        counts[t, p] += 1
    return counts


def test_confusion_examples():
    tax = small_taxonomy(2)
    truth = LabelMap(labels=np.array([[0, 1]], dtype=np.int32), taxonomy=tax)
    pred = LabelMap(labels=np.array([[1, 1]], dtype=np.int32), taxonomy=tax)
    cm = confusion(pred, truth)
    assert cm.counts.tolist() == [[0, 1], [0, 1]]

    same = confusion(truth, truth)
    assert np.trace(same.counts) == 2 and same.counts.sum() == 2


def test_confusion_matches_brute_force():
    tax = small_taxonomy(4)
    rng = np.random.default_rng(5)
    truth = rng.integers(0, 4, size=(16, 16)).astype(np.int32)
    pred = rng.integers(0, 4, size=(16, 16)).astype(np.int32)
    cm = confusion(LabelMap(pred, tax), LabelMap(truth, tax))
    assert (cm.counts == brute_force_counts(pred, truth, 4)).all()


def test_confusion_rejects_mismatch():
    t2, t3 = small_taxonomy(2), small_taxonomy(3)
    a = LabelMap(np.zeros((2, 2), dtype=np.int32), t2)
    b = LabelMap(np.zeros((2, 3), dtype=np.int32), t2)
    c = LabelMap(np.zeros((2, 2), dtype=np.int32), t3)
    with pytest.raises(DimensionError):
        confusion(a, b)
    with pytest.raises(DimensionError):
        confusion(a, c)


def test_overall_accuracy_examples():
    perfect = ConfusionMatrix(np.diag([4, 6]).astype(np.int64))
    assert overall_accuracy(perfect) == 1.0
    all_wrong = ConfusionMatrix(np.array([[0, 3], [2, 0]], dtype=np.int64))
    assert overall_accuracy(all_wrong) == 0.0
    # diag {3, 5}, off-diagonal {2, 0}: 8 of 10 correct
    cm = ConfusionMatrix(np.array([[3, 2], [0, 5]], dtype=np.int64))
    assert overall_accuracy(cm) == pytest.approx(0.8, abs=1e-15)
    with pytest.raises(ParameterError):
        overall_accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=np.int64)))


def test_mean_iou_examples():
    perfect = ConfusionMatrix(np.diag([4, 6]).astype(np.int64))
    miou, per_class = mean_iou(perfect)
    assert miou == 1.0 and per_class == [1.0, 1.0]

    cm = ConfusionMatrix(np.array([[2, 2], [0, 6]], dtype=np.int64))
    miou, per_class = mean_iou(cm)
    assert per_class[0] == pytest.approx(0.5, abs=1e-15)  # 2 / (4 + 2 - 2)
    assert per_class[1] == pytest.approx(0.75, abs=1e-15)  # 6 / (6 + 8 - 6)
    assert miou == pytest.approx(0.625, abs=1e-15)

    absent = ConfusionMatrix(np.array([[3, 0, 0], [0, 2, 0], [0, 0, 0]], dtype=np.int64))
    miou, per_class = mean_iou(absent)
    assert np.isnan(per_class[2]) and miou == 1.0


def brute_force_metrics(pred, truth, n):
    """Independent per-pixel oracle for accuracy and IoU."""
    total = pred.size
    oa = sum(1 for t, p in zip(truth.ravel(), pred.ravel()) if t == p) / total
    ious = []
    for c in range(n):
        inter = sum(1 for t, p in zip(truth.ravel(), pred.ravel()) if t == c and p == c)
        union = sum(1 for t, p in zip(truth.ravel(), pred.ravel()) if t == c or p == c)
        if union:
            ious.append(inter / union)
    return oa, sum(ious) / len(ious)


def test_metrics_against_pixel_oracle():
    rng = np.random.default_rng(42)
    for trial in range(25):
        n = int(rng.integers(2, 6))
        tax = small_taxonomy(n)
        truth = rng.integers(0, n, size=(12, 12)).astype(np.int32)
        pred = rng.integers(0, n, size=(12, 12)).astype(np.int32)
        cm = confusion(LabelMap(pred, tax), LabelMap(truth, tax))
        oa_ref, miou_ref = brute_force_metrics(pred, truth, n)
        assert overall_accuracy(cm) == pytest.approx(oa_ref, abs=1e-12)
        assert mean_iou(cm)[0] == pytest.approx(miou_ref, abs=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(9)
    n = 4
    tax = small_taxonomy(n)
    truth = rng.integers(0, n, size=(10, 10)).astype(np.int32)
    pred = rng.integers(0, n, size=(10, 10)).astype(np.int32)
    cm = confusion(LabelMap(pred, tax), LabelMap(truth, tax))
    base_oa = overall_accuracy(cm)
    base_miou, base_per = mean_iou(cm)

    perm = np.array([2, 0, 3, 1])
    cmp_ = confusion(LabelMap(perm[pred].astype(np.int32), tax), LabelMap(perm[truth].astype(np.int32), tax))
    oa = overall_accuracy(cmp_)
    miou, per = mean_iou(cmp_)
    assert oa == pytest.approx(base_oa, abs=1e-15)
    assert miou == pytest.approx(base_miou, abs=1e-15)
    for old, new in enumerate(perm):
        assert per[new] == pytest.approx(base_per[old], abs=1e-15)
