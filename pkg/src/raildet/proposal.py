"""Greedy NMS and the proposal stage turning scored anchors into ROIs.

The ROI budget (``post_nms_top``) defaults to 300; running the pipeline in
reduced mode with a budget of 50 trades a little recall for per-ROI work in
the second stage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorGrid
from .geometry import BBox, clip_array, decode_array, iou_pairs


@dataclass(frozen=True)
class ScoredBox:
    box: BBox
    score: float
    source_index: int

    def __post_init__(self):
        if not np.isfinite(self.score) or not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be finite and in [0, 1]: {self.score}")


@dataclass(frozen=True)
class ProposalConfig:
    pre_nms_top: int = 6000
    nms_iou_threshold: float = 0.7
    post_nms_top: int = 300
    min_box_size: float = 1.0

    def __post_init__(self):
        if self.pre_nms_top < 1 or self.post_nms_top < 1:
            raise ValueError("ROI budgets must be positive")
        if self.post_nms_top > self.pre_nms_top:
            raise ValueError("post_nms_top must not exceed pre_nms_top")
        if not (0.0 < self.nms_iou_threshold < 1.0):
            raise ValueError("nms_iou_threshold must be in (0, 1)")


def nms(boxes: list[ScoredBox], iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-scoring remaining box and discards every
    remaining box overlapping it with IOU > ``iou_threshold``.  Score ties
    break toward the lower source_index.  Returns kept source indices in
    descending score order.
    """
    if not boxes:
        return []
    arr = np.array([b.box.as_tuple() for b in boxes], dtype=np.float64)
    scores = np.array([b.score for b in boxes], dtype=np.float64)
    src = np.array([b.source_index for b in boxes], dtype=np.int64)
    order = np.lexsort((src, -scores))
    kept = _greedy_keep(arr[order], iou_threshold)
    return [int(src[order[i]]) for i in kept]


def _greedy_keep(
    sorted_boxes: np.ndarray, iou_threshold: float, max_keep: int | None = None
) -> list[int]:
    """Greedy keep-set over boxes already sorted by priority.

    Returns positions into ``sorted_boxes``.  Early exit at ``max_keep`` is
    safe because the greedy kept-set is prefix-stable.
    """
    n = sorted_boxes.shape[0]
    alive = np.ones(n, dtype=bool)
    kept: list[int] = []
    for i in range(n):
        if not alive[i]:
            continue
        kept.append(i)
        if max_keep is not None and len(kept) >= max_keep:
            break
        rest = np.nonzero(alive[i + 1 :])[0] + i + 1
        if rest.size:
            ious = iou_pairs(np.repeat(sorted_boxes[i : i + 1], rest.size, axis=0),
                             sorted_boxes[rest])
            alive[rest[ious > iou_threshold]] = False
    return kept


def propose(
    grid: AnchorGrid,
    scores: np.ndarray,
    deltas: np.ndarray,
    image_w: float,
    image_h: float,
    config: ProposalConfig = ProposalConfig(),
) -> list[ScoredBox]:
    """Decode, clip, filter and NMS anchors into a ranked ROI list.

    ``scores`` is (N,) objectness, ``deltas`` is (N, 4) in (tx, ty, tw, th)
    order, both aligned with ``grid.anchors``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    n = len(grid)
    if scores.shape != (n,) or deltas.shape != (n, 4):
        raise ValueError(
            f"scores/deltas must match anchor count {n}: "
            f"got {scores.shape} and {deltas.shape}"
        )

    boxes = clip_array(decode_array(grid.anchors, deltas), image_w, image_h)
    widths = boxes[:, 2] - boxes[:, 0]
    heights = boxes[:, 3] - boxes[:, 1]
    keep = (widths >= config.min_box_size) & (heights >= config.min_box_size)
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return []

    order = np.lexsort((idx, -scores[idx]))
    idx = idx[order][: config.pre_nms_top]

    kept = _greedy_keep(boxes[idx], config.nms_iou_threshold, max_keep=config.post_nms_top)
    out = []
    for pos in kept:
        i = int(idx[pos])
        out.append(ScoredBox(box=BBox(*boxes[i]), score=float(scores[i]), source_index=i))
    return out
