"""Flat key=value pipeline configuration files.

Lines look like ``section.key=value`` (``proposal.post_nms_top=50``); blank
lines and ``#`` comments are ignored.  Unknown keys are a configuration
error so typos fail loudly.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

from .anchors import AnchorConfig
from .assignment import AssignmentConfig
from .evaluation import EvalConfig
from .model import AttachStage, BackboneSpec
from .ohem import OhemConfig
from .pipeline import PipelineConfig
from .proposal import ProposalConfig


class ConfigError(Exception):
    pass


def _parse_floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(","))


def _parse_bool(value: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_config(text: str) -> PipelineConfig:
    """Build a PipelineConfig from flat key=value text."""
    values: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()

    def take(key, default, conv):
        if key in values:
            try:
                return conv(values.pop(key))
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {e}")
        return default

    try:
        backbone = BackboneSpec(
            attach_stage=take("backbone.attach_stage", AttachStage.STAGE5,
                              lambda v: AttachStage(v.lower())),
            stage5_downsample=take("backbone.stage5_downsample", False, _parse_bool),
        )
        anchors = AnchorConfig(
            scales=take("anchors.scales", (16.0, 32.0, 64.0), _parse_floats),
            ratios=take("anchors.ratios", (0.5, 1.0, 2.0), _parse_floats),
            stride=take("anchors.stride", backbone.stride, int),
        )
        assignment = AssignmentConfig(
            pos_iou_threshold=take("assignment.pos_iou_threshold", 0.7, float),
            neg_iou_threshold=take("assignment.neg_iou_threshold", 0.3, float),
        )
        proposal = ProposalConfig(
            pre_nms_top=take("proposal.pre_nms_top", 6000, int),
            nms_iou_threshold=take("proposal.nms_iou_threshold", 0.7, float),
            post_nms_top=take("proposal.post_nms_top", 300, int),
            min_box_size=take("proposal.min_box_size", 1.0, float),
        )
        ohem = OhemConfig(
            batch_size=take("ohem.batch_size", 256, int),
            reg_loss_weight=take("ohem.reg_loss_weight", 1.0, float),
        )
        eval_cfg = EvalConfig(iou_threshold=take("eval.iou_threshold", 0.75, float))
        config = PipelineConfig(
            backbone=backbone,
            anchors=anchors,
            assignment=assignment,
            proposal=proposal,
            ohem=ohem,
            eval=eval_cfg,
            score_threshold=take("pipeline.score_threshold", 0.5, float),
            final_nms_iou=take("pipeline.final_nms_iou", 0.3, float),
            roi_bins=take("pipeline.roi_bins", 7, int),
            roi_fg_iou=take("pipeline.roi_fg_iou", 0.5, float),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e))
    if values:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(values))}")
    return config


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    return parse_config(text)


def dump_config(config: PipelineConfig) -> str:
    """Serialize back to the flat key=value form."""
    lines = [
        f"backbone.attach_stage={config.backbone.attach_stage.value}",
        f"backbone.stage5_downsample={str(config.backbone.stage5_downsample).lower()}",
        "anchors.scales=" + ",".join(repr(s) for s in config.anchors.scales),
        "anchors.ratios=" + ",".join(repr(r) for r in config.anchors.ratios),
        f"anchors.stride={config.anchors.stride}",
        f"assignment.pos_iou_threshold={config.assignment.pos_iou_threshold!r}",
        f"assignment.neg_iou_threshold={config.assignment.neg_iou_threshold!r}",
        f"proposal.pre_nms_top={config.proposal.pre_nms_top}",
        f"proposal.nms_iou_threshold={config.proposal.nms_iou_threshold!r}",
        f"proposal.post_nms_top={config.proposal.post_nms_top}",
        f"proposal.min_box_size={config.proposal.min_box_size!r}",
        f"ohem.batch_size={config.ohem.batch_size}",
        f"ohem.reg_loss_weight={config.ohem.reg_loss_weight!r}",
        f"eval.iou_threshold={config.eval.iou_threshold!r}",
        f"pipeline.score_threshold={config.score_threshold!r}",
        f"pipeline.final_nms_iou={config.final_nms_iou!r}",
        f"pipeline.roi_bins={config.roi_bins}",
        f"pipeline.roi_fg_iou={config.roi_fg_iou!r}",
    ]
    return "\n".join(lines) + "\n"


def with_post_nms_top(config: PipelineConfig, budget: int) -> PipelineConfig:
    return dataclasses.replace(
        config, proposal=dataclasses.replace(config.proposal, post_nms_top=budget)
    )
