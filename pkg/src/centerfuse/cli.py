"""Command-line entry point.

Subcommands::

    fuse       fuse two detection files into one, with a provenance sidecar
    eval-det   detection metrics for one detection file
    eval-cls   image-label metrics for one detection file plus a labels CSV
    pipeline   three-arm comparison (A only, B only, fusion) + divergence
    simulate   generate a synthetic dataset and its comparative report
    overlay    render ground truth and detection sets as an SVG drawing

Exit codes are a stable scripting contract: 0 success, 1 I/O failure,
2 validation failure (bad syntax, violated invariants, unknown ids).
Reports go to stdout unless ``--out`` is given, and echo the run
configuration in a header block so every number can be traced back to
the exact flags that produced it.

In the ``pipeline`` labels CSV, ``box_index`` counts through the
concatenation of detector A's boxes followed by detector B's boxes for
each image (a single CSV has no detector column, so the concatenation
defines the shared index space); fused boxes look their labels up
through their origin box. For ``eval-cls`` the index refers directly to
the given detection file. ``simulate`` writes its labels CSV in the
pipeline convention, so the two commands compose.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Mapping, Sequence

from .errors import MalformedInput, MissingBoxLabel, ToolkitError
from .formats import (
    CLASSIFICATION_HEADERS,
    DETECTION_HEADERS,
    DatasetManifest,
    DetectionSet,
    Label,
    ReportFormat,
    classification_report_cells,
    detection_report_cells,
    format_percent,
    parse_detections_json,
    parse_labels,
    parse_manifest,
    render_table,
    serialize_detections,
    serialize_manifest,
    serialize_report,
)
from .fusion import (
    EmptyFusionPolicy,
    FusedResult,
    Provenance,
    fuse_dataset,
    serialize_provenance,
    to_detection_set,
)
from .geometry import Box
from .metrics import (
    MiouMode,
    aggregate_image_label,
    classification_report,
    detection_report,
    divergence_report,
)
from .simulator import (
    SimConfig,
    generate_dataset,
    run_experiment,
    simulate_detector,
    simulate_labels,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _emit(out: str | None, payload: bytes) -> None:
    if out is None:
        sys.stdout.write(payload.decode("utf-8"))
    else:
        Path(out).write_bytes(payload)


def _policy(flag: str) -> EmptyFusionPolicy:
    return EmptyFusionPolicy.B_FALLBACK if flag == "b-fallback" else EmptyFusionPolicy.LITERAL


# ---------------------------------------------------------------------------
# label binding


def _predicted_for_set(
    manifest: DatasetManifest,
    det_set: DetectionSet,
    box_labels: Mapping[tuple[str, int], Label],
    image_labels: Mapping[str, Label],
    offsets: Mapping[str, int] | None = None,
) -> dict[str, Label]:
    predicted = {}
    for rec in manifest.images:
        offset = offsets.get(rec.image_id, 0) if offsets else 0
        labels = []
        for k in range(len(det_set.detections_for(rec.image_id))):
            key = (rec.image_id, offset + k)
            if key not in box_labels:
                raise MissingBoxLabel(
                    f"no label for box {offset + k} of image {rec.image_id!r}"
                )
            labels.append(box_labels[key])
        predicted[rec.image_id] = aggregate_image_label(
            labels, image_labels.get(rec.image_id)
        )
    return predicted


def _predicted_for_fused(
    manifest: DatasetManifest,
    fused: FusedResult,
    det_a: DetectionSet,
    box_labels: Mapping[tuple[str, int], Label],
    image_labels: Mapping[str, Label],
) -> dict[str, Label]:
    predicted = {}
    for rec in manifest.images:
        a_len = len(det_a.detections_for(rec.image_id))
        labels = []
        for fb in fused.fusion_for(rec.image_id).boxes:
            if fb.provenance is Provenance.B_FALLBACK:
                concat_index = a_len + fb.source_index
            else:
                concat_index = fb.source_index
            key = (rec.image_id, concat_index)
            if key not in box_labels:
                raise MissingBoxLabel(
                    f"no label for box {concat_index} of image {rec.image_id!r}"
                )
            labels.append(box_labels[key])
        predicted[rec.image_id] = aggregate_image_label(
            labels, image_labels.get(rec.image_id)
        )
    return predicted


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fuse(args: argparse.Namespace) -> int:
    manifest = parse_manifest(_read(args.manifest))
    det_a = parse_detections_json(_read(args.det_a))
    det_b = parse_detections_json(_read(args.det_b))
    fused = fuse_dataset(
        det_a, det_b, manifest, policy=_policy(args.empty_fusion), workers=args.workers
    )
    out = Path(args.out)
    out.write_bytes(serialize_detections(to_detection_set(fused)))
    out.with_suffix(".provenance.json").write_bytes(serialize_provenance(fused))
    return EXIT_OK


def _cmd_eval_det(args: argparse.Namespace) -> int:
    manifest = parse_manifest(_read(args.manifest))
    detections = parse_detections_json(_read(args.det))
    report = detection_report(
        detections, manifest, miou_mode=MiouMode(args.miou_mode), workers=args.workers
    )
    config = {
        "command": "eval-det",
        "manifest": args.manifest,
        "detections": args.det,
        "detector_id": detections.detector_id,
        "miou_mode": args.miou_mode,
        "workers": args.workers,
    }
    _emit(args.out, serialize_report(report, args.format, config=config))
    return EXIT_OK


def _cmd_eval_cls(args: argparse.Namespace) -> int:
    manifest = parse_manifest(_read(args.manifest))
    detections = parse_detections_json(_read(args.det))
    box_labels, image_labels = parse_labels(_read(args.labels))
    predicted = _predicted_for_set(manifest, detections, box_labels, image_labels)
    report = classification_report(predicted, manifest)
    config = {
        "command": "eval-cls",
        "manifest": args.manifest,
        "detections": args.det,
        "labels": args.labels,
        "detector_id": detections.detector_id,
    }
    _emit(args.out, serialize_report(report, args.format, config=config))
    return EXIT_OK


def _pipeline_payload(
    config: Mapping[str, object],
    arm_rows: Sequence[tuple[str, object, object]],
    divergence,
    fmt: ReportFormat,
) -> bytes:
    if fmt is ReportFormat.JSON:
        doc = {
            "config": dict(config),
            "arms": {
                name: {
                    "detection": det.as_dict(),
                    "classification": cls.as_dict(),
                }
                for name, det, cls in arm_rows
            },
            "divergence": divergence.as_dict(),
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")

    header_lines = [f"# {key}: {value}" for key, value in config.items()]
    if fmt is ReportFormat.CSV:
        lines = list(header_lines)
        lines.append(
            "arm,miou,precision,recall,tp,fp,fn,acc,acc2,sens,spec,aligned,diverged"
        )
        for name, det, cls in arm_rows:
            cells = [name] + detection_report_cells(det) + classification_report_cells(cls)
            if name == "fusion":
                cells += [
                    format_percent(divergence.aligned_fraction),
                    format_percent(divergence.diverged_fraction),
                ]
            else:
                cells += ["", ""]
            lines.append(",".join(cells))
        return ("\n".join(lines) + "\n").encode("utf-8")

    lines = list(header_lines)
    lines.append("Detection")
    lines.extend(
        render_table(
            ("arm",) + DETECTION_HEADERS,
            [[name] + detection_report_cells(det) for name, det, _ in arm_rows],
        )
    )
    lines.append("")
    lines.append("Classification")
    lines.extend(
        render_table(
            ("arm",) + CLASSIFICATION_HEADERS,
            [[name] + classification_report_cells(cls) for name, _, cls in arm_rows],
        )
    )
    lines.append("")
    lines.append(f"Divergence at IoU >= {divergence.iou_threshold}")
    lines.append(
        f"aligned {format_percent(divergence.aligned_fraction)}%  "
        f"diverged {format_percent(divergence.diverged_fraction)}%  "
        f"images {divergence.evaluated}"
    )
    return ("\n".join(lines) + "\n").encode("utf-8")


def _cmd_pipeline(args: argparse.Namespace) -> int:
    manifest = parse_manifest(_read(args.manifest))
    det_a = parse_detections_json(_read(args.det_a))
    det_b = parse_detections_json(_read(args.det_b))
    box_labels, image_labels = parse_labels(_read(args.labels))
    policy = _policy(args.empty_fusion)
    miou_mode = MiouMode(args.miou_mode)
    fused = fuse_dataset(det_a, det_b, manifest, policy=policy, workers=args.workers)

    offsets_b = {
        rec.image_id: len(det_a.detections_for(rec.image_id)) for rec in manifest.images
    }
    arm_rows = []
    for name, source, predicted in (
        (
            det_a.detector_id,
            det_a,
            _predicted_for_set(manifest, det_a, box_labels, image_labels),
        ),
        (
            det_b.detector_id,
            det_b,
            _predicted_for_set(manifest, det_b, box_labels, image_labels, offsets_b),
        ),
        (
            "fusion",
            fused,
            _predicted_for_fused(manifest, fused, det_a, box_labels, image_labels),
        ),
    ):
        arm_rows.append(
            (
                name,
                detection_report(source, manifest, miou_mode=miou_mode, workers=args.workers),
                classification_report(predicted, manifest),
            )
        )
    divergence = divergence_report(fused, manifest, args.divergence_iou)
    config = {
        "command": "pipeline",
        "manifest": args.manifest,
        "det_a": args.det_a,
        "det_b": args.det_b,
        "labels": args.labels,
        "empty_fusion": args.empty_fusion,
        "miou_mode": args.miou_mode,
        "divergence_iou": args.divergence_iou,
        "workers": args.workers,
    }
    _emit(args.out, _pipeline_payload(config, arm_rows, divergence, ReportFormat(args.format)))
    return EXIT_OK


def _load_sim_config(path: str) -> SimConfig:
    data = _read(path)
    if path.endswith(".toml"):
        import tomllib  # Python 3.11+; JSON configs work everywhere

        doc = tomllib.loads(data.decode("utf-8"))
    else:
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"config: {exc}") from None
        if not isinstance(doc, dict):
            raise MalformedInput("config: expected a JSON object")
    return SimConfig.from_dict(doc)


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_sim_config(args.config)
    if args.seed is not None:
        cfg = SimConfig.from_dict({**cfg.as_dict(), "seed": args.seed})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = generate_dataset(cfg)
    det_a = simulate_detector(cfg.profile_a, manifest, "detector_a", cfg.seed)
    det_b = simulate_detector(cfg.profile_b, manifest, "detector_b", cfg.seed)
    (out_dir / "manifest.json").write_bytes(serialize_manifest(manifest))
    (out_dir / "detections_a.json").write_bytes(serialize_detections(det_a))
    (out_dir / "detections_b.json").write_bytes(serialize_detections(det_b))

    # pipeline-convention labels: per image, A's boxes then B's boxes
    concat = DetectionSet(
        detector_id="concat",
        per_image={
            rec.image_id: det_a.detections_for(rec.image_id)
            + det_b.detections_for(rec.image_id)
            for rec in manifest.images
        },
    )
    box_labels, image_labels = simulate_labels(cfg.classifier, manifest, concat, cfg.seed)
    label_lines = []
    for rec in manifest.images:
        for k in range(len(concat.detections_for(rec.image_id))):
            label_lines.append(
                f"{rec.image_id},{k},{box_labels[(rec.image_id, k)].value}"
            )
        label_lines.append(f"{rec.image_id},-,{image_labels[rec.image_id].value}")
    (out_dir / "labels.csv").write_bytes(("\n".join(label_lines) + "\n").encode("utf-8"))

    report = run_experiment(
        cfg,
        policy=_policy(args.empty_fusion),
        miou_mode=MiouMode(args.miou_mode),
        divergence_iou=args.divergence_iou,
    )
    (out_dir / "report.json").write_bytes(
        (json.dumps(report.as_dict(), indent=2) + "\n").encode("utf-8")
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# overlay rendering

_GT_COLOR = "#ffd700"
_FUSION_COLOR = "#2ca02c"
_SET_COLORS = ("#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#17becf")


def _svg_rect(box: Box, color: str, dash: str = "") -> str:
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'  <rect x="{box.x_min:.2f}" y="{box.y_min:.2f}" '
        f'width="{box.width:.2f}" height="{box.height:.2f}" '
        f'fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>'
    )


def render_overlay_svg(
    manifest: DatasetManifest,
    sets: Sequence[DetectionSet | FusedResult],
    image_id: str,
) -> str:
    """Draw one image's ground truth (yellow) and detection sets as SVG.

    The fused set (detector_id "fusion") renders green; other sets cycle
    through a fixed palette. The coordinate frame is the image pixel
    frame (y grows downward), and the output is plain diffable text.
    """
    rec = manifest.image(image_id)
    flattened = [
        s if isinstance(s, DetectionSet) else to_detection_set(s) for s in sets
    ]
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{rec.width}" '
        f'height="{rec.height}" viewBox="0 0 {rec.width} {rec.height}">',
        f'  <rect x="0" y="0" width="{rec.width}" height="{rec.height}" fill="#202020"/>',
    ]
    legend: list[tuple[str, str]] = [("ground truth", _GT_COLOR)]
    for gt in rec.gt_boxes:
        lines.append(_svg_rect(gt, _GT_COLOR))
    palette_index = 0
    for det_set in flattened:
        if det_set.detector_id == "fusion":
            color = _FUSION_COLOR
        else:
            color = _SET_COLORS[palette_index % len(_SET_COLORS)]
            palette_index += 1
        legend.append((det_set.detector_id, color))
        for det in det_set.detections_for(image_id):
            lines.append(_svg_rect(det.box, color, dash="6 3"))
    for i, (name, color) in enumerate(legend):
        y = 8 + 18 * i
        lines.append(f'  <rect x="8" y="{y}" width="12" height="12" fill="{color}"/>')
        lines.append(
            f'  <text x="26" y="{y + 10}" font-family="monospace" font-size="12" '
            f'fill="#ffffff">{name}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _cmd_overlay(args: argparse.Namespace) -> int:
    manifest = parse_manifest(_read(args.manifest))
    sets = [parse_detections_json(_read(path)) for path in args.det or []]
    svg = render_overlay_svg(manifest, sets, args.image_id)
    _emit(args.out, svg.encode("utf-8"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="centerfuse",
        description="Fuse, evaluate, and simulate two-detector bounding-box pipelines.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common_report_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="output path (stdout if absent)")
        p.add_argument(
            "--format", choices=["json", "csv", "table"], default="table",
            help="report format (default: table)",
        )

    p_fuse = sub.add_parser("fuse", help="fuse two detection files")
    p_fuse.add_argument("--manifest", required=True)
    p_fuse.add_argument("--det-a", required=True, help="detector A (boundary role) detections")
    p_fuse.add_argument("--det-b", required=True, help="detector B (position role) detections")
    p_fuse.add_argument("--out", required=True, help="fused detections path")
    p_fuse.add_argument(
        "--empty-fusion", choices=["literal", "b-fallback"], default="literal",
        help="what to do when every A-box is discarded (default: literal)",
    )
    p_fuse.add_argument("--workers", type=_positive_int, default=1)
    p_fuse.set_defaults(func=_cmd_fuse)

    p_det = sub.add_parser("eval-det", help="detection metrics for one detection file")
    p_det.add_argument("--manifest", required=True)
    p_det.add_argument("--det", required=True, help="detections file to evaluate")
    p_det.add_argument(
        "--miou-mode", choices=["per-box", "per-image"], default="per-box",
        help="mIoU aggregation (default: per-box)",
    )
    p_det.add_argument("--workers", type=_positive_int, default=1)
    add_common_report_flags(p_det)
    p_det.set_defaults(func=_cmd_eval_det)

    p_cls = sub.add_parser("eval-cls", help="classification metrics from per-box labels")
    p_cls.add_argument("--manifest", required=True)
    p_cls.add_argument("--det", required=True, help="detections file the labels index")
    p_cls.add_argument("--labels", required=True, help="labels CSV")
    add_common_report_flags(p_cls)
    p_cls.set_defaults(func=_cmd_eval_cls)

    p_pipe = sub.add_parser("pipeline", help="three-arm comparison plus divergence")
    p_pipe.add_argument("--manifest", required=True)
    p_pipe.add_argument("--det-a", required=True)
    p_pipe.add_argument("--det-b", required=True)
    p_pipe.add_argument("--labels", required=True, help="labels CSV (A-then-B concatenated indices)")
    p_pipe.add_argument(
        "--empty-fusion", choices=["literal", "b-fallback"], default="literal"
    )
    p_pipe.add_argument(
        "--miou-mode", choices=["per-box", "per-image"], default="per-box"
    )
    p_pipe.add_argument("--divergence-iou", type=float, default=0.5)
    p_pipe.add_argument("--workers", type=_positive_int, default=1)
    add_common_report_flags(p_pipe)
    p_pipe.set_defaults(func=_cmd_pipeline)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset + report")
    p_sim.add_argument("--config", required=True, help="simulation config (JSON, or TOML on 3.11+)")
    p_sim.add_argument("--out-dir", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument(
        "--empty-fusion", choices=["literal", "b-fallback"], default="literal"
    )
    p_sim.add_argument(
        "--miou-mode", choices=["per-box", "per-image"], default="per-box"
    )
    p_sim.add_argument("--divergence-iou", type=float, default=0.5)
    p_sim.set_defaults(func=_cmd_simulate)

    p_ovl = sub.add_parser("overlay", help="render GT + detection sets as SVG")
    p_ovl.add_argument("--manifest", required=True)
    p_ovl.add_argument("--image-id", required=True)
    p_ovl.add_argument(
        "--det", action="append", default=[],
        help="detections file to draw (repeatable; detector_id 'fusion' renders green)",
    )
    p_ovl.add_argument("--out", help="output SVG path (stdout if absent)")
    p_ovl.set_defaults(func=_cmd_overlay)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
