"""Operator command line: preprocess, synth, propose, detect, eval, bench, render.

Exit codes: 0 success, 1 input error, 2 configuration error.  Logs go to
stderr, data to files or stdout.  Every command that writes an output
directory drops a run manifest next to its outputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, load_config, with_post_nms_top
from .dataio import (
    read_detections_csv,
    split,
    write_detections_csv,
    write_split_manifest,
)
from .evaluation import CLASS_NAMES, EvalConfig, evaluate
from .model import load_weights, random_weights, save_weights
from .oracle import build_oracle_weights, oracle_pipeline_config
from .pipeline import PipelineConfig, detect, propose_rois
from .ppm import read_ppm, write_ppm
from .preprocess import preprocess
from .synth import synthesize_scene
from .voc import VocError, parse_voc, write_voc


class InputError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _worker_count() -> int:
    raw = os.environ.get("DETPIPE_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 4
    except ValueError:
        return 4


@dataclasses.dataclass
class RunManifest:
    command: str
    config_path: str
    inputs: str
    outputs: str
    seed: int | None
    timestamp: str
    version: str = __version__

    def write(self, out_dir: Path) -> None:
        lines = [
            f"command={self.command}",
            f"config={self.config_path}",
            f"inputs={self.inputs}",
            f"outputs={self.outputs}",
            f"seed={'' if self.seed is None else self.seed}",
            f"timestamp={self.timestamp}",
            f"version={self.version}",
        ]
        (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _manifest(args, command: str, inputs: str, outputs: str, seed: int | None = None) -> RunManifest:
    return RunManifest(
        command=command,
        config_path=getattr(args, "config", "") or "",
        inputs=inputs,
        outputs=outputs,
        seed=seed,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )


def _load_pipeline_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return oracle_pipeline_config()


def _load_model(args, config: PipelineConfig):
    spec = getattr(args, "weights", None)
    if spec in (None, "", "oracle"):
        return build_oracle_weights(config)
    if spec.startswith("random:"):
        return random_weights(int(spec.split(":", 1)[1]), k=config.anchors.k,
                              bins=config.roi_bins)
    if not Path(spec).exists():
        raise InputError(f"weights file not found: {spec}")
    return load_weights(spec)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise InputError(f"input directory not found: {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    images = sorted(in_dir.glob("*.ppm"))

    failures = []

    def one(img_path: Path):
        xml_path = img_path.with_suffix(".xml")
        if not xml_path.exists():
            raise InputError(f"missing annotation for {img_path.name}")
        try:
            ann = parse_voc(xml_path.read_bytes(), lenient=args.lenient)
        except VocError as e:
            raise InputError(f"{xml_path.name}: {e}")
        image = read_ppm(img_path, grayscale=True)
        out_img, out_ann = preprocess(image, ann)
        write_ppm(out_dir / img_path.name, out_img)
        (out_dir / xml_path.name).write_bytes(write_voc(out_ann))
        return img_path.name, image.shape

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = [(p, pool.submit(one, p)) for p in images]
        for path, fut in futures:
            try:
                name, shape = fut.result()
                _log(f"preprocess {name}: {shape[1]}x{shape[0]} -> 800x1000")
            except InputError as e:
                if not args.keep_going:
                    raise
                failures.append(path.name)
                _log(f"preprocess {path.name}: FAILED ({e})")

    _manifest(args, "preprocess", str(in_dir), str(out_dir)).write(out_dir)
    _log(f"{len(images) - len(failures)} images processed")
    return 1 if failures else 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(args.count):
        image, ann = synthesize_scene(args.seed + i)
        name = f"scene_{args.seed + i:06d}"
        write_ppm(out_dir / f"{name}.ppm", image)
        ann = dataclasses.replace(ann, image_filename=f"{name}.ppm")
        (out_dir / f"{name}.xml").write_bytes(write_voc(ann))
        names.append(f"{name}.ppm")
        _log(f"synth {name}.ppm: {len(ann.objects)} objects")
    write_split_manifest(out_dir / "split.txt", split(names, seed=args.seed))
    _manifest(args, "synth", "-", str(out_dir), seed=args.seed).write(out_dir)
    return 0


def cmd_propose(args) -> int:
    config = _load_pipeline_config(args)
    weights = _load_model(args, config)
    image = _read_gray(args.image)
    rois = propose_rois(image, weights, config)
    lines = ["image,class,score,xmin,ymin,xmax,ymax"]
    name = Path(args.image).name
    for r in rois:
        b = r.box
        lines.append(
            f"{name},roi,{r.score:.6f},{b.x_min:.6f},{b.y_min:.6f},{b.x_max:.6f},{b.y_max:.6f}"
        )
    _write_or_print(args.out, "\n".join(lines) + "\n")
    _log(f"{len(rois)} proposals")
    return 0


def cmd_detect(args) -> int:
    config = _load_pipeline_config(args)
    weights = _load_model(args, config)
    paths = _image_paths(args)
    rows = []
    for p in paths:
        image = _read_gray(p)
        for d in detect(image, weights, config):
            rows.append((p.name, d))
        _log(f"detect {p.name}: {sum(1 for n, _ in rows if n == p.name)} detections")
    write_detections_csv(args.out, rows)
    out_dir = Path(args.out).parent
    if out_dir.is_dir():
        _manifest(args, "detect", ";".join(str(p) for p in paths), args.out).write(out_dir)
    return 0


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt)
    if not gt_dir.is_dir():
        raise InputError(f"ground-truth directory not found: {gt_dir}")
    try:
        det_rows = read_detections_csv(args.dets)
    except (OSError, ValueError) as e:
        raise InputError(f"cannot read detections: {e}")

    by_image: dict[str, list] = {}
    for image, det in det_rows:
        if det.score >= args.score_threshold:
            by_image.setdefault(image, []).append(det)

    per_image = []
    for xml_path in sorted(gt_dir.glob("*.xml")):
        try:
            ann = parse_voc(xml_path.read_bytes())
        except VocError as e:
            raise InputError(f"{xml_path.name}: {e}")
        key = ann.image_filename or xml_path.with_suffix(".ppm").name
        per_image.append((by_image.pop(key, []), list(ann.objects)))
    for image, dets in by_image.items():
        if dets:
            raise InputError(f"detections reference unknown image: {image}")

    rep = evaluate(per_image, EvalConfig(iou_threshold=args.iou))
    print(rep.to_text())
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())
    return 0


def cmd_bench(args) -> int:
    config = _load_pipeline_config(args)
    weights = _load_model(args, config)
    budgets = [int(b) for b in args.rois.split(",")]
    image, _ = synthesize_scene(args.seed)

    medians = []
    print(f"{'rois':>6} {'median_ms':>10} {'iqr_ms':>8}")
    for budget in budgets:
        cfg = with_post_nms_top(config, budget)
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            detect(image, weights, cfg)
            times.append((time.perf_counter() - t0) * 1000.0)
        med = statistics.median(times)
        if len(times) >= 4:
            q = statistics.quantiles(times, n=4)
            iqr = f"{q[2] - q[0]:8.2f}"
        else:
            iqr = "     n/a"
        medians.append(med)
        print(f"{budget:>6} {med:>10.2f} {iqr}")
    if len(medians) >= 2:
        print(f"speedup {budgets[0]} -> {budgets[-1]}: {medians[0] / medians[-1]:.2f}x")
    if args.check:
        ordered = sorted(range(len(budgets)), key=lambda i: -budgets[i])
        meds = [medians[i] for i in ordered]
        if any(a <= b for a, b in zip(meds, meds[1:])):
            _log("latency not monotone in ROI budget")
            return 1
    return 0


# class name -> box outline RGB
RENDER_COLORS = {
    "V": (255, 80, 80),
    "W300-1": (80, 220, 80),
    "WJ-7": (90, 140, 255),
    "WJ-8": (250, 210, 60),
}

_FONT = {
    "V": ["101", "101", "101", "101", "010"],
    "W": ["101", "101", "101", "111", "101"],
    "J": ["111", "001", "001", "101", "010"],
    "0": ["111", "101", "101", "101", "111"],
    "1": ["010", "110", "010", "010", "111"],
    "3": ["111", "001", "011", "001", "111"],
    "7": ["111", "001", "010", "010", "010"],
    "8": ["111", "101", "111", "101", "111"],
    "-": ["000", "000", "111", "000", "000"],
}


def cmd_render(args) -> int:
    img_path = Path(args.image)
    if not img_path.exists():
        raise InputError(f"image not found: {img_path}")
    image = read_ppm(img_path)
    h, w = image.shape[:2]
    rows = [d for name, d in read_detections_csv(args.dets) if name == img_path.name]
    for det in rows:
        b = det.box
        if b.x_min < 0 or b.y_min < 0 or b.x_max > w or b.y_max > h:
            raise InputError(f"detection outside image bounds: {b.as_tuple()}")
        color = RENDER_COLORS[det.class_name]
        x0, y0 = int(round(b.x_min)), int(round(b.y_min))
        x1 = min(int(round(b.x_max)) - 1, w - 1)
        y1 = min(int(round(b.y_max)) - 1, h - 1)
        image[y0, x0 : x1 + 1] = color
        image[y1, x0 : x1 + 1] = color
        image[y0 : y1 + 1, x0] = color
        image[y0 : y1 + 1, x1] = color
        if args.labels:
            _stamp_label(image, det.class_name, x0, y0 - 7, color)
    write_ppm(args.out, image)
    _log(f"rendered {len(rows)} detections")
    return 0


def _stamp_label(image: np.ndarray, text: str, x: int, y: int, color) -> None:
    h, w = image.shape[:2]
    for ch in text:
        glyph = _FONT.get(ch)
        if glyph is None:
            x += 4
            continue
        for r, line in enumerate(glyph):
            for c, bit in enumerate(line):
                if bit == "1" and 0 <= y + r < h and 0 <= x + c < w:
                    image[y + r, x + c] = color
        x += 4


def cmd_make_weights(args) -> int:
    config = _load_pipeline_config(args)
    if args.mode == "oracle":
        weights = build_oracle_weights(config)
    else:
        weights = random_weights(args.seed, k=config.anchors.k, bins=config.roi_bins)
    save_weights(weights, args.out)
    _log(f"wrote {args.out} ({args.mode})")
    return 0


def cmd_show_config(args) -> int:
    print(dump_config(_load_pipeline_config(args)), end="")
    return 0


# ---------------------------------------------------------------------------
# helpers and argument wiring
# ---------------------------------------------------------------------------

def _read_gray(path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise InputError(f"image not found: {p}")
    return read_ppm(p, grayscale=True)


def _image_paths(args) -> list[Path]:
    if args.image:
        p = Path(args.image)
        if not p.exists():
            raise InputError(f"image not found: {p}")
        return [p]
    d = Path(args.images)
    if not d.is_dir():
        raise InputError(f"image directory not found: {d}")
    return sorted(d.glob("*.ppm"))


def _write_or_print(path, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raildet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize images+annotations to 800x1000")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--keep-going", action="store_true")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("synth", help="generate synthetic fastener scenes")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("propose", help="dump ROIs for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--weights", default="oracle")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_propose)

    p = sub.add_parser("detect", help="run detection, write detections CSV")
    p.add_argument("--image", default=None)
    p.add_argument("--images", default=None)
    p.add_argument("--weights", default="oracle")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("eval", help="precision/recall against VOC ground truth")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.75)
    p.add_argument("--score-threshold", type=float, default=0.5)
    p.add_argument("--csv", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="median detect latency per ROI budget")
    p.add_argument("--config", default=None)
    p.add_argument("--weights", default="random:0")
    p.add_argument("--rois", default="300,50")
    p.add_argument("--repeat", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("render", help="draw detections onto an image")
    p.add_argument("--image", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", action="store_true")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("make-weights", help="write an oracle or random weight file")
    p.add_argument("--mode", choices=("oracle", "random"), default="oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_make_weights)

    p = sub.add_parser("show-config", help="print the effective configuration")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_show_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        _log(f"config error: {e}")
        return 2
    except (InputError, VocError, OSError) as e:
        _log(f"error: {e}")
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
