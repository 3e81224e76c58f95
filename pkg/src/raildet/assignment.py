"""Anchor labeling against ground truth for RPN training targets.

Two rules produce positives: any anchor whose best IOU exceeds the positive
threshold, plus -- for each ground-truth box -- the single anchor with
maximal IOU to it, even when that IOU is below the threshold.  The second
rule guarantees every ground truth owns at least one positive anchor.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import BBox, BoxDelta, boxes_to_array, encode, iou_matrix


class AnchorLabel(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORE = "ignore"


@dataclass(frozen=True)
class AssignmentConfig:
    """The positive threshold is 0.7; 0.3 for negatives is the companion
    value of the base framework (the positive rules alone do not pin it
    down)."""

    pos_iou_threshold: float = 0.7
    neg_iou_threshold: float = 0.3

    def __post_init__(self):
        if not (0.0 <= self.neg_iou_threshold <= self.pos_iou_threshold <= 1.0):
            raise ValueError("need 0 <= neg_iou_threshold <= pos_iou_threshold <= 1")


@dataclass(frozen=True)
class AnchorAssignment:
    label: AnchorLabel
    matched_gt: int | None = None
    regression_target: BoxDelta | None = None

    def __post_init__(self):
        if self.label is AnchorLabel.POSITIVE:
            if self.matched_gt is None or self.regression_target is None:
                raise ValueError("positive anchors need a matched gt and a target")
        elif self.matched_gt is not None or self.regression_target is not None:
            raise ValueError("non-positive anchors carry no match")


def assign(
    anchors: list[BBox],
    gt_boxes: list[BBox],
    config: AssignmentConfig = AssignmentConfig(),
) -> list[AnchorAssignment]:
    """Label every anchor positive/negative/ignore against ``gt_boxes``.

    Rule order: threshold positives first, then per-gt argmax positives on
    top.  Argmax ties break toward the lowest index in both directions.
    With no ground truth every anchor is negative.
    """
    if len(anchors) == 0:
        raise ValueError("anchors must be non-empty")
    if len(gt_boxes) == 0:
        return [AnchorAssignment(AnchorLabel.NEGATIVE)] * len(anchors)

    anchor_arr = boxes_to_array(anchors)
    gt_arr = boxes_to_array(gt_boxes)
    ious = iou_matrix(anchor_arr, gt_arr)

    best_gt = np.argmax(ious, axis=1)  # ties -> lowest gt index
    best_iou = ious[np.arange(len(anchors)), best_gt]

    positive = best_iou > config.pos_iou_threshold
    # rule (1): the best anchor of each gt is positive regardless of IOU
    best_anchor_per_gt = np.argmax(ious, axis=0)  # ties -> lowest anchor index
    positive[best_anchor_per_gt] = True

    out: list[AnchorAssignment] = []
    for i, anchor in enumerate(anchors):
        if positive[i]:
            g = int(best_gt[i])
            out.append(
                AnchorAssignment(
                    AnchorLabel.POSITIVE,
                    matched_gt=g,
                    regression_target=encode(anchor, gt_boxes[g]),
                )
            )
        elif best_iou[i] < config.neg_iou_threshold:
            out.append(AnchorAssignment(AnchorLabel.NEGATIVE))
        else:
            out.append(AnchorAssignment(AnchorLabel.IGNORE))
    return out
