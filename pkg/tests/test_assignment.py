import numpy as np
import pytest

from raildet.assignment import (
    AnchorAssignment,
    AnchorLabel,
    AssignmentConfig,
    assign,
)
from raildet.geometry import BBox, decode, iou


def anchor_with_iou(frac: float) -> BBox:
    """Anchor (0,0,w,10) has IOU w/10 against gt (0,0,10,10) for w <= 10."""
    return BBox(0, 0, 10 * frac, 10)


GT = BBox(0, 0, 10, 10)


def test_threshold_rules():
    anchors = [anchor_with_iou(f) for f in (0.8, 0.5, 0.2)]
    out = assign(anchors, [GT])
    assert [a.label for a in out] == [
        AnchorLabel.POSITIVE,
        AnchorLabel.IGNORE,
        AnchorLabel.NEGATIVE,
    ]
    assert out[0].matched_gt == 0


def test_argmax_rule_below_threshold():
    # no anchor exceeds 0.7, so the best one is positive anyway
    anchors = [anchor_with_iou(0.6), anchor_with_iou(0.4)]
    out = assign(anchors, [GT])
    assert out[0].label is AnchorLabel.POSITIVE
    assert out[0].matched_gt == 0
    assert out[1].label is AnchorLabel.IGNORE


def test_empty_gt_all_negative():
    anchors = [anchor_with_iou(0.6), anchor_with_iou(0.4)]
    out = assign(anchors, [])
    assert all(a.label is AnchorLabel.NEGATIVE for a in out)


def test_empty_anchors_rejected():
    with pytest.raises(ValueError):
        assign([], [GT])


def test_regression_target_decodes_to_gt():
    anchors = [anchor_with_iou(0.8)]
    out = assign(anchors, [GT])
    decoded = decode(anchors[0], out[0].regression_target)
    assert np.allclose(decoded.as_tuple(), GT.as_tuple(), atol=1e-9)


def test_tie_breaks_to_lowest_index():
    # two identical gts: the shared best anchor matches gt 0
    anchors = [anchor_with_iou(0.8), anchor_with_iou(0.2)]
    out = assign(anchors, [GT, GT])
    assert out[0].matched_gt == 0


def test_config_validation():
    with pytest.raises(ValueError):
        AssignmentConfig(pos_iou_threshold=0.3, neg_iou_threshold=0.7)
    with pytest.raises(ValueError):
        AssignmentConfig(pos_iou_threshold=1.5)


def test_positive_invariant_enforced():
    with pytest.raises(ValueError):
        AnchorAssignment(AnchorLabel.POSITIVE)
    with pytest.raises(ValueError):
        AnchorAssignment(AnchorLabel.NEGATIVE, matched_gt=0)


def _random_boxes(rng, n, span=400.0):
    out = []
    for _ in range(n):
        x = np.sort(rng.uniform(0, span, 2))
        y = np.sort(rng.uniform(0, span, 2))
        out.append(BBox(x[0], y[0], x[1] + 2.0, y[1] + 2.0))
    return out


def test_every_gt_gets_a_positive_random():
    rng = np.random.default_rng(6)
    for _ in range(200):
        anchors = _random_boxes(rng, int(rng.integers(1, 30)))
        gts = _random_boxes(rng, int(rng.integers(1, 6)))
        out = assign(anchors, gts)
        matched = {a.matched_gt for a in out if a.label is AnchorLabel.POSITIVE}
        for g in range(len(gts)):
            best = max(range(len(anchors)), key=lambda i: iou(anchors[i], gts[g]))
            # the gt is covered either directly or through a gt tied at the
            # best anchor's argmax
            assert best in [
                i for i, a in enumerate(out) if a.label is AnchorLabel.POSITIVE
            ]
        assert matched  # at least one positive exists overall
