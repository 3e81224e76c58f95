"""End-to-end composition: single-image detection and the OHEM round.

``detect`` chains backbone -> RPN -> proposal -> per-ROI pooling and
classification -> per-class NMS.  ``ohem_simulation`` runs the read-only
mining pass over a dataset and reports which ROIs came out hardest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anchors import AnchorConfig, tile
from .assignment import AssignmentConfig
from .evaluation import CLASS_NAMES, Detection, EvalConfig
from .geometry import BBox, clip, decode, iou_matrix
from .model import (
    BackboneSpec,
    ModelWeights,
    detect_forward,
    extract_features,
    roi_pool,
    rpn_forward,
)
from .ohem import OhemConfig, RoiLoss, ohem_round
from .proposal import ProposalConfig, ScoredBox, nms, propose
from .voc import Annotation


class PipelineError(Exception):
    """A stage failure, annotated with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    backbone: BackboneSpec = BackboneSpec()
    anchors: AnchorConfig = AnchorConfig()
    assignment: AssignmentConfig = AssignmentConfig()
    proposal: ProposalConfig = ProposalConfig()
    ohem: OhemConfig = OhemConfig()
    eval: EvalConfig = EvalConfig()
    score_threshold: float = 0.5
    final_nms_iou: float = 0.3
    roi_bins: int = 7
    # RCNN-stage ROI foreground threshold (RPN thresholds do not apply here)
    roi_fg_iou: float = 0.5

    def __post_init__(self):
        if self.anchors.stride != self.backbone.stride:
            raise ValueError(
                f"anchor stride {self.anchors.stride} does not match backbone "
                f"stride {self.backbone.stride}"
            )


def _stage(name: str):
    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except Exception as e:
                raise PipelineError(name, e) from e

        return wrapped

    return deco


def propose_rois(
    image: np.ndarray, weights: ModelWeights, config: PipelineConfig
) -> list[ScoredBox]:
    """Backbone + RPN + proposal stage for one preprocessed image."""
    fm = _stage("backbone")(extract_features)(image, config.backbone)
    scores, deltas = _stage("rpn")(rpn_forward)(fm, weights.rpn, config.anchors.k)
    grid = tile(config.anchors, fm.width, fm.height)
    return _stage("proposal")(propose)(
        grid, scores, deltas, image.shape[1], image.shape[0], config.proposal
    )


def detect(
    image: np.ndarray, weights: ModelWeights, config: PipelineConfig = PipelineConfig()
) -> list[Detection]:
    """Detect fasteners in one preprocessed 800x1000 image."""
    fm = _stage("backbone")(extract_features)(image, config.backbone)
    scores, deltas = _stage("rpn")(rpn_forward)(fm, weights.rpn, config.anchors.k)
    grid = tile(config.anchors, fm.width, fm.height)
    rois = _stage("proposal")(propose)(
        grid, scores, deltas, image.shape[1], image.shape[0], config.proposal
    )

    img_w, img_h = image.shape[1], image.shape[0]
    candidates: list[Detection] = []
    for roi in rois:
        pooled = _stage("roi_pool")(roi_pool)(fm, roi.box, config.roi_bins)
        probs, cls_deltas = _stage("rcnn")(detect_forward)(pooled, weights.det)
        for ci, cls in enumerate(CLASS_NAMES):
            p = float(probs[1 + ci])
            if p <= config.score_threshold:
                continue
            from .geometry import BoxDelta

            delta = BoxDelta(*cls_deltas[ci])
            box = clip(decode(roi.box, delta), img_w, img_h)
            if box.width <= 0 or box.height <= 0:
                continue
            candidates.append(Detection(class_name=cls, box=box, score=p))

    final: list[Detection] = []
    for cls in CLASS_NAMES:
        group = [d for d in candidates if d.class_name == cls]
        scored = [
            ScoredBox(box=d.box, score=min(d.score, 1.0), source_index=i)
            for i, d in enumerate(group)
        ]
        for idx in nms(scored, config.final_nms_iou):
            final.append(group[idx])
    final.sort(key=lambda d: -d.score)
    return final


@dataclass(frozen=True)
class OhemImageResult:
    selected: list[int]
    losses: list[RoiLoss]
    roi_classes: list[int]  # per-ROI target class index (0 = background)


@dataclass(frozen=True)
class OhemSimResult:
    per_image: list[OhemImageResult] = field(default_factory=list)

    def loss_by_class(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for img in self.per_image:
            for loss, cls in zip(img.losses, img.roi_classes):
                out.setdefault(cls, []).append(loss.total)
        return out


def ohem_simulation(
    dataset: list[tuple[np.ndarray, Annotation]],
    weights: ModelWeights,
    config: PipelineConfig = PipelineConfig(),
) -> OhemSimResult:
    """Mining round per image: propose ROIs, target them against ground
    truth (foreground above the RCNN IOU threshold), score every ROI with a
    read-only forward pass and select the hardest batch."""
    from .geometry import BoxDelta, boxes_to_array, encode

    results = []
    for image, ann in dataset:
        fm = _stage("backbone")(extract_features)(image, config.backbone)
        rois = propose_rois(image, weights, config)
        gt_boxes = [o.box for o in ann.objects]
        gt_classes = [1 + CLASS_NAMES.index(o.class_name) for o in ann.objects]

        targets: list[tuple[int, BoxDelta | None]] = []
        if gt_boxes:
            roi_arr = boxes_to_array([r.box for r in rois])
            ious = iou_matrix(roi_arr, boxes_to_array(gt_boxes))
            for i, roi in enumerate(rois):
                g = int(np.argmax(ious[i])) if ious.shape[1] else 0
                if ious.shape[1] and ious[i, g] > config.roi_fg_iou:
                    targets.append((gt_classes[g], encode(roi.box, gt_boxes[g])))
                else:
                    targets.append((0, None))
        else:
            targets = [(0, None)] * len(rois)

        def forward(roi: ScoredBox):
            pooled = roi_pool(fm, roi.box, config.roi_bins)
            probs, cls_deltas = detect_forward(pooled, weights.det)
            fg = int(np.argmax(probs[1:]))
            return probs, BoxDelta(*cls_deltas[fg])

        selected, losses = ohem_round(rois, forward, targets, config.ohem)
        results.append(
            OhemImageResult(
                selected=selected,
                losses=losses,
                roi_classes=[t[0] for t in targets],
            )
        )
    return OhemSimResult(per_image=results)
