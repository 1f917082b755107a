"""File contracts: manifests, detection sets, label files, and reports.

Documents handled here:

* manifest (JSON)::

      {"images": [{"image_id": str, "width": int, "height": int,
                   "label": "normal"|"benign"|"malignant",
                   "gt_boxes": [[x1, y1, x2, y2], ...]}, ...]}

* detections (JSON), one document per detector::

      {"detector_id": str,
       "images": {image_id: [{"box": [x1, y1, x2, y2],
                              "score": float, "label"?: str}, ...]}}

* YOLO-style text, one file per image: lines ``cls cx cy w h [conf]`` with
  normalized floats; boxes are denormalized by the manifest's image size
  and clamped to image bounds.

* labels (CSV): rows ``image_id,box_index,label`` where box_index ``-``
  assigns a whole-image label.

* reports: JSON keeps full float precision; CSV and aligned-table output
  render percentages with exactly two decimals, rounding half up.

Parsing is pure per document; parsed values are immutable and safe to
share across workers. Parsers never build a value that violates its
type's invariants: every violation surfaces as a typed error whose
message carries the offending location.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import TYPE_CHECKING, Mapping, Sequence

from .errors import (
    InvariantViolation,
    MalformedInput,
    UnknownImage,
    UnknownLabel,
)
from .geometry import Box

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .metrics import ClassificationReport, DetectionReport


class Label(enum.Enum):
    """Three-class image/box label."""

    NORMAL = "normal"
    BENIGN = "benign"
    MALIGNANT = "malignant"


LABEL_ORDER: tuple[Label, Label, Label] = (Label.NORMAL, Label.BENIGN, Label.MALIGNANT)


def parse_label(text: str, where: str = "label") -> Label:
    """Map a label string to :class:`Label`, raising :class:`UnknownLabel`."""
    try:
        return Label(text)
    except ValueError:
        raise UnknownLabel(
            f"{where}: unknown label {text!r} (expected one of "
            f"{', '.join(lab.value for lab in LABEL_ORDER)})"
        ) from None


@dataclass(frozen=True)
class Detection:
    """A predicted box with confidence score and optional class label."""

    box: Box
    score: float
    label: Label | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise InvariantViolation(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionSet:
    """One detector's predictions, keyed by image id.

    An absent image key means "no predictions for that image".
    """

    detector_id: str
    per_image: dict[str, tuple[Detection, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.detector_id:
            raise InvariantViolation("detector_id must be non-empty")

    def detections_for(self, image_id: str) -> tuple[Detection, ...]:
        return self.per_image.get(image_id, ())


@dataclass(frozen=True)
class ImageRecord:
    """Ground truth for one image: size, class label, and annotated boxes."""

    image_id: str
    width: int
    height: int
    true_label: Label
    gt_boxes: tuple[Box, ...] = ()

    def __post_init__(self) -> None:
        if not self.image_id:
            raise InvariantViolation("image_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise InvariantViolation(
                f"{self.image_id}: image size must be positive, "
                f"got {self.width}x{self.height}"
            )
        for i, b in enumerate(self.gt_boxes):
            inside = (
                0.0 <= b.x_min and b.x_max <= self.width
                and 0.0 <= b.y_min and b.y_max <= self.height
            )
            if not inside:
                raise InvariantViolation(
                    f"{self.image_id}: gt_boxes[{i}] {b.as_tuple()} lies outside "
                    f"the {self.width}x{self.height} image"
                )


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered collection of image records with pairwise-distinct ids."""

    images: tuple[ImageRecord, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.images:
            if rec.image_id in seen:
                raise InvariantViolation(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(rec.image_id for rec in self.images)

    def image(self, image_id: str) -> ImageRecord:
        for rec in self.images:
            if rec.image_id == image_id:
                return rec
        raise UnknownImage(f"image id {image_id!r} not in manifest")

    def by_id(self) -> dict[str, ImageRecord]:
        return {rec.image_id: rec for rec in self.images}


# ---------------------------------------------------------------------------
# parsing helpers


def _decode_utf8(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"input is not valid UTF-8: {exc}") from None


def _load_json(data: bytes | str) -> object:
    try:
        return json.loads(_decode_utf8(data))
    except json.JSONDecodeError as exc:
        raise MalformedInput(
            f"line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def _expect_object(value: object, where: str) -> dict:
    if not isinstance(value, dict):
        raise MalformedInput(f"{where}: expected a JSON object, got {type(value).__name__}")
    return value


def _expect_list(value: object, where: str) -> list:
    if not isinstance(value, list):
        raise MalformedInput(f"{where}: expected a JSON array, got {type(value).__name__}")
    return value


def _get(obj: dict, key: str, where: str) -> object:
    if key not in obj:
        raise MalformedInput(f"{where}: missing required key {key!r}")
    return obj[key]


def _as_number(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedInput(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_box(value: object, where: str) -> Box:
    arr = _expect_list(value, where)
    if len(arr) != 4:
        raise MalformedInput(f"{where}: box must have 4 coordinates, got {len(arr)}")
    coords = [_as_number(v, f"{where}[{i}]") for i, v in enumerate(arr)]
    try:
        return Box(*coords)
    except InvariantViolation as exc:
        raise InvariantViolation(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# parsers


def parse_manifest(data: bytes | str) -> DatasetManifest:
    """Parse a manifest JSON document into a validated :class:`DatasetManifest`."""
    doc = _expect_object(_load_json(data), "manifest")
    images_raw = _expect_list(_get(doc, "images", "manifest"), "manifest.images")
    records = []
    for i, entry in enumerate(images_raw):
        where = f"images[{i}]"
        obj = _expect_object(entry, where)
        image_id = _get(obj, "image_id", where)
        if not isinstance(image_id, str) or not image_id:
            raise MalformedInput(f"{where}: image_id must be a non-empty string")
        width = _get(obj, "width", where)
        height = _get(obj, "height", where)
        if isinstance(width, bool) or not isinstance(width, int):
            raise MalformedInput(f"{where}: width must be an integer")
        if isinstance(height, bool) or not isinstance(height, int):
            raise MalformedInput(f"{where}: height must be an integer")
        label = _get(obj, "label", where)
        if not isinstance(label, str):
            raise MalformedInput(f"{where}: label must be a string")
        boxes_raw = _expect_list(_get(obj, "gt_boxes", where), f"{where}.gt_boxes")
        boxes = tuple(
            _as_box(b, f"{where}.gt_boxes[{j}]") for j, b in enumerate(boxes_raw)
        )
        true_label = parse_label(label, f"{where}.label")
        try:
            records.append(
                ImageRecord(
                    image_id=image_id,
                    width=width,
                    height=height,
                    true_label=true_label,
                    gt_boxes=boxes,
                )
            )
        except InvariantViolation as exc:
            raise InvariantViolation(f"{where}: {exc}") from None
    return DatasetManifest(images=tuple(records))


def parse_detections_json(data: bytes | str) -> DetectionSet:
    """Parse a native detections JSON document into a :class:`DetectionSet`."""
    doc = _expect_object(_load_json(data), "detections")
    detector_id = _get(doc, "detector_id", "detections")
    if not isinstance(detector_id, str) or not detector_id:
        raise MalformedInput("detections: detector_id must be a non-empty string")
    images = _expect_object(_get(doc, "images", "detections"), "detections.images")
    per_image: dict[str, tuple[Detection, ...]] = {}
    for image_id, entries in images.items():
        arr = _expect_list(entries, f"images[{image_id!r}]")
        dets = []
        for j, entry in enumerate(arr):
            where = f"images[{image_id!r}][{j}]"
            obj = _expect_object(entry, where)
            box = _as_box(_get(obj, "box", where), f"{where}.box")
            score = _as_number(_get(obj, "score", where), f"{where}.score")
            label = None
            if "label" in obj:
                raw = obj["label"]
                if not isinstance(raw, str):
                    raise MalformedInput(f"{where}.label: expected a string")
                label = parse_label(raw, f"{where}.label")
            try:
                dets.append(Detection(box=box, score=score, label=label))
            except InvariantViolation as exc:
                raise InvariantViolation(f"{where}: {exc}") from None
        per_image[image_id] = tuple(dets)
    return DetectionSet(detector_id=detector_id, per_image=per_image)


def parse_yolo_txt(
    per_image_texts: Mapping[str, bytes | str],
    manifest: DatasetManifest,
    detector_id: str = "yolo",
) -> DetectionSet:
    """Parse YOLO-style per-image text files into a :class:`DetectionSet`.

    Each line is ``cls cx cy w h [conf]`` with coordinates normalized to
    [0, 1]; they are denormalized by the image size from the manifest and
    clamped to image bounds (detectors legitimately emit boxes touching
    edges, so tiny overshoot is repaired rather than rejected). A missing
    confidence defaults to 1.0. The class field is parsed for arity
    checking but carries no three-class meaning, so it is not mapped to a
    :class:`Label`.
    """
    records = manifest.by_id()
    per_image: dict[str, tuple[Detection, ...]] = {}
    for image_id in per_image_texts:
        if image_id not in records:
            raise UnknownImage(f"YOLO file for image id {image_id!r} not in manifest")
        rec = records[image_id]
        dets = []
        for lineno, line in enumerate(_decode_utf8(per_image_texts[image_id]).splitlines(), 1):
            if not line.strip():
                continue
            where = f"{image_id} line {lineno}"
            fields = line.split()
            if len(fields) not in (5, 6):
                raise MalformedInput(f"{where}: expected 5 or 6 fields, got {len(fields)}")
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise MalformedInput(f"{where}: non-numeric field in {line!r}") from None
            _, cx, cy, w, h = values[:5]
            conf = values[5] if len(values) == 6 else 1.0
            for name, v in zip(("cx", "cy", "w", "h"), (cx, cy, w, h)):
                if not 0.0 <= v <= 1.0:
                    raise InvariantViolation(
                        f"{where}: normalized {name}={v} outside [0, 1]"
                    )
            x_min = max(0.0, (cx - w / 2) * rec.width)
            y_min = max(0.0, (cy - h / 2) * rec.height)
            x_max = min(float(rec.width), (cx + w / 2) * rec.width)
            y_max = min(float(rec.height), (cy + h / 2) * rec.height)
            try:
                dets.append(Detection(box=Box(x_min, y_min, x_max, y_max), score=conf))
            except InvariantViolation as exc:
                raise InvariantViolation(f"{where}: {exc}") from None
        per_image[image_id] = tuple(dets)
    return DetectionSet(detector_id=detector_id, per_image=per_image)


def yolo_fields(box: Box, width: int, height: int) -> tuple[float, float, float, float]:
    """Renormalize a pixel box to YOLO center format ``(cx, cy, w, h)``."""
    return (
        (box.x_min + box.x_max) / 2 / width,
        (box.y_min + box.y_max) / 2 / height,
        (box.x_max - box.x_min) / width,
        (box.y_max - box.y_min) / height,
    )


WHOLE_IMAGE_INDEX = "-"


def parse_labels(
    data: bytes | str,
) -> tuple[dict[tuple[str, int], Label], dict[str, Label]]:
    """Parse a labels CSV into per-box and whole-image label maps.

    Returns ``(box_labels, image_labels)`` where ``box_labels`` is keyed by
    ``(image_id, box_index)`` and ``image_labels`` holds rows whose index
    column is ``-``.
    """
    box_labels: dict[tuple[str, int], Label] = {}
    image_labels: dict[str, Label] = {}
    reader = csv.reader(io.StringIO(_decode_utf8(data)))
    for rownum, row in enumerate(reader, 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        where = f"labels row {rownum}"
        if len(row) != 3:
            raise MalformedInput(f"{where}: expected 3 columns, got {len(row)}")
        image_id, index_text, label_text = (c.strip() for c in row)
        if not image_id:
            raise MalformedInput(f"{where}: empty image_id")
        label = parse_label(label_text, where)
        if index_text == WHOLE_IMAGE_INDEX:
            if image_id in image_labels:
                raise InvariantViolation(f"{where}: duplicate whole-image label for {image_id!r}")
            image_labels[image_id] = label
            continue
        try:
            index = int(index_text)
        except ValueError:
            raise MalformedInput(
                f"{where}: box_index must be an integer or '-', got {index_text!r}"
            ) from None
        if index < 0:
            raise MalformedInput(f"{where}: box_index must be non-negative, got {index}")
        if (image_id, index) in box_labels:
            raise InvariantViolation(f"{where}: duplicate label for box {index} of {image_id!r}")
        box_labels[(image_id, index)] = label
    return box_labels, image_labels


# ---------------------------------------------------------------------------
# serializers


def _dump_json(doc: object) -> bytes:
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def serialize_manifest(manifest: DatasetManifest) -> bytes:
    """Serialize a manifest; ``parse_manifest`` inverts this exactly."""
    doc = {
        "images": [
            {
                "image_id": rec.image_id,
                "width": rec.width,
                "height": rec.height,
                "label": rec.true_label.value,
                "gt_boxes": [list(b.as_tuple()) for b in rec.gt_boxes],
            }
            for rec in manifest.images
        ]
    }
    return _dump_json(doc)


def serialize_detections(detections: DetectionSet) -> bytes:
    """Serialize a detection set; ``parse_detections_json`` inverts this exactly.

    Image keys are emitted in sorted order so equal sets serialize to equal
    bytes regardless of construction order.
    """
    images = {}
    for image_id in sorted(detections.per_image):
        entries = []
        for det in detections.per_image[image_id]:
            entry: dict[str, object] = {"box": list(det.box.as_tuple()), "score": det.score}
            if det.label is not None:
                entry["label"] = det.label.value
            entries.append(entry)
        images[image_id] = entries
    return _dump_json({"detector_id": detections.detector_id, "images": images})


def format_percent(value: float) -> str:
    """Render a fraction in [0, 1] as a percentage string with 2 decimals.

    Rounding is half-up on the exact binary value, so 0.984375 renders as
    "98.44" and 1.0 as "100.00".
    """
    return str(Decimal(value).scaleb(2).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


class ReportFormat(enum.Enum):
    JSON = "json"
    CSV = "csv"
    TABLE = "table"


def _config_lines(config: Mapping[str, object] | None) -> list[str]:
    if not config:
        return []
    return [f"# {key}: {config[key]}" for key in config]


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return lines


def detection_report_cells(report: "DetectionReport") -> list[str]:
    """Table-I-ordered cells: mIoU, precision, recall (percents), then counts."""
    return [
        format_percent(report.miou),
        format_percent(report.precision),
        format_percent(report.recall),
        str(report.counts.tp),
        str(report.counts.fp),
        str(report.counts.fn),
    ]


def classification_report_cells(report: "ClassificationReport") -> list[str]:
    """Table-II-ordered cells: accuracy, binary accuracy, sensitivity, specificity."""
    return [
        format_percent(report.acc),
        format_percent(report.acc2),
        format_percent(report.sens),
        format_percent(report.spec),
    ]


DETECTION_HEADERS = ("mIoU", "Precision", "Recall", "TP", "FP", "FN")
CLASSIFICATION_HEADERS = ("Acc", "2-Acc", "Sens", "Spec")


def serialize_report(
    report: "DetectionReport | ClassificationReport",
    fmt: ReportFormat | str = ReportFormat.JSON,
    config: Mapping[str, object] | None = None,
) -> bytes:
    """Serialize a detection or classification report.

    JSON keeps full float precision (plus a ``config`` echo block when one
    is supplied); CSV and table formats render percentages at 2 decimals
    and prefix the config echo as ``#`` comment lines.
    """
    fmt = ReportFormat(fmt)
    is_detection = hasattr(report, "miou")
    if fmt is ReportFormat.JSON:
        doc: dict[str, object] = {}
        if config:
            doc["config"] = dict(config)
        doc.update(report.as_dict())
        return _dump_json(doc)
    if is_detection:
        headers, cells = DETECTION_HEADERS, detection_report_cells(report)
        csv_headers = ["miou", "precision", "recall", "tp", "fp", "fn"]
    else:
        headers, cells = CLASSIFICATION_HEADERS, classification_report_cells(report)
        csv_headers = ["acc", "acc2", "sens", "spec"]
    lines = _config_lines(config)
    if fmt is ReportFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(csv_headers)
        writer.writerow(cells)
        lines.extend(buf.getvalue().splitlines())
    else:
        lines.extend(render_table(headers, [cells]))
    return ("\n".join(lines) + "\n").encode("utf-8")
