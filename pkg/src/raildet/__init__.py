"""Two-stage rail fastener detection pipeline at desk scale."""

__version__ = "0.1.0"

from .geometry import BBox, BoxDelta, area, clip, decode, encode, iou
from .anchors import AnchorConfig, AnchorGrid, base_anchors, tile
from .assignment import AnchorAssignment, AnchorLabel, AssignmentConfig, assign
from .proposal import ProposalConfig, ScoredBox, nms, propose
from .ohem import OhemConfig, RoiLoss, ohem_round, roi_loss, select_hard
from .evaluation import (
    CLASS_NAMES,
    Detection,
    EvalConfig,
    EvalReport,
    GroundTruthObject,
    evaluate,
    match,
    report,
)
from .pipeline import PipelineConfig, detect, ohem_simulation

__all__ = [
    "BBox",
    "BoxDelta",
    "area",
    "iou",
    "encode",
    "decode",
    "clip",
    "AnchorConfig",
    "AnchorGrid",
    "base_anchors",
    "tile",
    "AssignmentConfig",
    "AnchorAssignment",
    "AnchorLabel",
    "assign",
    "ProposalConfig",
    "ScoredBox",
    "nms",
    "propose",
    "OhemConfig",
    "RoiLoss",
    "roi_loss",
    "select_hard",
    "ohem_round",
    "CLASS_NAMES",
    "Detection",
    "GroundTruthObject",
    "EvalConfig",
    "EvalReport",
    "match",
    "report",
    "evaluate",
    "PipelineConfig",
    "detect",
    "ohem_simulation",
]
