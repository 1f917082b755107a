"""Detection and classification evaluation.

Detection quality uses the center-in-ground-truth protocol: every
predicted box is judged (no best-box filtering) and counts as a true
positive iff its center lies inside at least one ground-truth box of its
image, otherwise as a false positive. False negatives arise only from
images with zero predictions, one per ground-truth box there.

Image-level classification aggregates per-box labels severity-first:
malignant if any box is malignant, else benign if any box is benign,
else normal; an image with no boxes defers to its whole-image label.
Binary metrics (2-Acc, sensitivity, specificity) use the
malignant-versus-rest split.

Metrics with empty denominators return 0 and are listed in the report's
``undefined`` field instead of raising, so batch evaluation never
crashes. Per-image judging is pure and parallelizable; aggregation
iterates images in sorted id order, so results are identical for any
worker count.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .errors import (
    InvariantViolation,
    MissingPrediction,
    MissingWholeImageLabel,
    UnknownImage,
)
from .formats import LABEL_ORDER, DatasetManifest, DetectionSet, Label
from .fusion import FusedResult
from .geometry import Box, center, contains, iou

logger = logging.getLogger(__name__)

BoxSource = Union[DetectionSet, FusedResult]


class Verdict(enum.Enum):
    TP = "tp"
    FP = "fp"


class MiouMode(enum.Enum):
    """How per-box IoUs aggregate into the reported mean IoU.

    PER_BOX averages each predicted box's best IoU against its image's
    ground truth, over all predicted boxes; images without predictions
    contribute no terms. PER_IMAGE averages the best single-box IoU per
    image, with no-prediction images contributing 0.
    """

    PER_BOX = "per-box"
    PER_IMAGE = "per-image"


@dataclass(frozen=True)
class DetectionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise InvariantViolation(
                f"counts must be non-negative, got tp={self.tp} fp={self.fp} fn={self.fn}"
            )

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0


@dataclass(frozen=True)
class PerImageEval:
    """Per-box verdicts and best-IoU values for one image."""

    verdicts: tuple[Verdict, ...]
    ious: tuple[float, ...]
    fn: int


@dataclass(frozen=True)
class DetectionReport:
    counts: DetectionCounts
    precision: float
    recall: float
    miou: float
    miou_mode: MiouMode
    per_image: dict[str, PerImageEval]
    skipped_images: tuple[str, ...] = ()
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, object]:
        return {
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn},
            "precision": self.precision,
            "recall": self.recall,
            "miou": self.miou,
            "miou_mode": self.miou_mode.value,
            "undefined": list(self.undefined),
            "skipped_images": list(self.skipped_images),
            "per_image": {
                image_id: {
                    "verdicts": [v.value for v in ev.verdicts],
                    "ious": list(ev.ious),
                    "fn": ev.fn,
                }
                for image_id, ev in sorted(self.per_image.items())
            },
        }


def judge_boxes(
    predictions: Sequence[Box], gt_boxes: Sequence[Box]
) -> tuple[list[Verdict], int]:
    """Judge every predicted box against one image's ground truth.

    Returns the per-box verdicts plus the image's false-negative
    contribution: ``len(gt_boxes)`` when there are no predictions, else 0.
    """
    verdicts = [
        Verdict.TP if any(contains(gt, center(p)) for gt in gt_boxes) else Verdict.FP
        for p in predictions
    ]
    fn = len(gt_boxes) if not predictions else 0
    return verdicts, fn


def boxes_by_image(source: BoxSource) -> dict[str, tuple[Box, ...]]:
    """Extract plain box geometry per image from either box container."""
    if isinstance(source, FusedResult):
        return {
            image_id: tuple(fb.detection.box for fb in fusion.boxes)
            for image_id, fusion in source.per_image.items()
        }
    return {
        image_id: tuple(det.box for det in dets)
        for image_id, dets in source.per_image.items()
    }


def detection_report(
    detections: BoxSource,
    manifest: DatasetManifest,
    miou_mode: MiouMode = MiouMode.PER_BOX,
    workers: int = 1,
) -> DetectionReport:
    """Evaluate a detection set (or fusion result) against a manifest.

    Images without ground-truth boxes are skipped with a warning; images
    in the manifest but absent from the detection set count as "no
    predictions". Detections for unknown image ids raise
    :class:`UnknownImage`.
    """
    miou_mode = MiouMode(miou_mode)
    boxes = boxes_by_image(detections)
    known = set(manifest.image_ids)
    for image_id in boxes:
        if image_id not in known:
            raise UnknownImage(f"detections reference image id {image_id!r} not in manifest")

    skipped = []
    evaluated = []
    for rec in manifest.images:
        if rec.gt_boxes:
            evaluated.append(rec)
        else:
            skipped.append(rec.image_id)
            logger.warning("skipping image %s: no ground-truth boxes", rec.image_id)

    def judge_one(rec) -> tuple[str, PerImageEval]:
        preds = boxes.get(rec.image_id, ())
        verdicts, fn = judge_boxes(preds, rec.gt_boxes)
        ious = tuple(max(iou(p, gt) for gt in rec.gt_boxes) for p in preds)
        return rec.image_id, PerImageEval(verdicts=tuple(verdicts), ious=ious, fn=fn)

    ordered = sorted(evaluated, key=lambda rec: rec.image_id)
    if workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_image = dict(pool.map(judge_one, ordered))
    else:
        per_image = dict(judge_one(rec) for rec in ordered)

    tp = fp = fn = 0
    for rec in ordered:
        ev = per_image[rec.image_id]
        tp += sum(1 for v in ev.verdicts if v is Verdict.TP)
        fp += sum(1 for v in ev.verdicts if v is Verdict.FP)
        fn += ev.fn
    counts = DetectionCounts(tp=tp, fp=fp, fn=fn)

    undefined = []
    if tp + fp == 0:
        undefined.append("precision")
    if tp + fn == 0:
        undefined.append("recall")

    if miou_mode is MiouMode.PER_BOX:
        terms = [v for rec in ordered for v in per_image[rec.image_id].ious]
    else:
        terms = [
            max(per_image[rec.image_id].ious, default=0.0) for rec in ordered
        ]
    if terms:
        miou = sum(terms) / len(terms)
    else:
        miou = 0.0
        undefined.append("miou")

    return DetectionReport(
        counts=counts,
        precision=counts.precision,
        recall=counts.recall,
        miou=miou,
        miou_mode=miou_mode,
        per_image=per_image,
        skipped_images=tuple(skipped),
        undefined=tuple(undefined),
    )


# ---------------------------------------------------------------------------
# classification


def aggregate_image_label(
    box_labels: Iterable[Label], whole_image_label: Label | None = None
) -> Label:
    """Collapse per-box labels into one image label, severity-first.

    An empty label list requires ``whole_image_label``; otherwise
    :class:`MissingWholeImageLabel` is raised.
    """
    labels = list(box_labels)
    if not labels:
        if whole_image_label is None:
            raise MissingWholeImageLabel(
                "image has no box labels and no whole-image fallback label"
            )
        return whole_image_label
    if Label.MALIGNANT in labels:
        return Label.MALIGNANT
    if Label.BENIGN in labels:
        return Label.BENIGN
    return Label.NORMAL


_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}


@dataclass(frozen=True)
class ConfusionMatrix3:
    """3x3 counts indexed (true_label, predicted_label) in LABEL_ORDER."""

    matrix: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        if len(self.matrix) != 3 or any(len(row) != 3 for row in self.matrix):
            raise InvariantViolation("confusion matrix must be 3x3")
        if any(v < 0 for row in self.matrix for v in row):
            raise InvariantViolation("confusion matrix entries must be non-negative")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Label, Label]]) -> "ConfusionMatrix3":
        counts = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
        for true, pred in pairs:
            counts[_INDEX[true]][_INDEX[pred]] += 1
        return cls(matrix=tuple(tuple(row) for row in counts))

    @property
    def total(self) -> int:
        return sum(v for row in self.matrix for v in row)

    @property
    def trace(self) -> int:
        return sum(self.matrix[i][i] for i in range(3))

    def entry(self, true: Label, predicted: Label) -> int:
        return self.matrix[_INDEX[true]][_INDEX[predicted]]


@dataclass(frozen=True)
class ClassificationReport:
    confusion: ConfusionMatrix3
    acc: float
    acc2: float
    sens: float
    spec: float
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, object]:
        return {
            "confusion": {
                "labels": [label.value for label in LABEL_ORDER],
                "matrix": [list(row) for row in self.confusion.matrix],
            },
            "acc": self.acc,
            "acc2": self.acc2,
            "sens": self.sens,
            "spec": self.spec,
            "undefined": list(self.undefined),
        }


def classification_report(
    predicted: Mapping[str, Label], manifest: DatasetManifest
) -> ClassificationReport:
    """Score predicted image labels against the manifest's true labels.

    ``acc`` is the 3-class exact-match fraction; ``acc2``, ``sens`` and
    ``spec`` use the malignant-versus-rest binarization. Every manifest
    image needs a prediction; predictions for unknown ids raise.
    """
    known = set(manifest.image_ids)
    for image_id in predicted:
        if image_id not in known:
            raise UnknownImage(f"prediction for image id {image_id!r} not in manifest")
    pairs = []
    for rec in manifest.images:
        if rec.image_id not in predicted:
            raise MissingPrediction(f"no predicted label for image {rec.image_id!r}")
        pairs.append((rec.true_label, predicted[rec.image_id]))

    confusion = ConfusionMatrix3.from_pairs(pairs)
    total = confusion.total
    mal = Label.MALIGNANT
    true_mal = sum(1 for t, _ in pairs if t is mal)
    true_other = total - true_mal
    tp_mal = confusion.entry(mal, mal)
    tn_mal = sum(1 for t, p in pairs if t is not mal and p is not mal)

    undefined = []
    if total:
        acc = confusion.trace / total
        acc2 = (tp_mal + tn_mal) / total
    else:
        acc = acc2 = 0.0
        undefined.extend(["acc", "acc2"])
    if true_mal:
        sens = tp_mal / true_mal
    else:
        sens = 0.0
        undefined.append("sens")
    if true_other:
        spec = tn_mal / true_other
    else:
        spec = 0.0
        undefined.append("spec")

    return ClassificationReport(
        confusion=confusion,
        acc=acc,
        acc2=acc2,
        sens=sens,
        spec=spec,
        undefined=tuple(undefined),
    )


# ---------------------------------------------------------------------------
# fusion-vs-ground-truth divergence


@dataclass(frozen=True)
class DivergenceReport:
    """Per-image alignment of fused boxes with ground truth at an IoU cutoff."""

    iou_threshold: float
    per_image: dict[str, str]
    aligned: int
    diverged: int
    skipped_images: tuple[str, ...] = ()
    undefined: tuple[str, ...] = ()

    @property
    def evaluated(self) -> int:
        return self.aligned + self.diverged

    @property
    def aligned_fraction(self) -> float:
        return self.aligned / self.evaluated if self.evaluated else 0.0

    @property
    def diverged_fraction(self) -> float:
        return self.diverged / self.evaluated if self.evaluated else 0.0

    def as_dict(self) -> dict[str, object]:
        return {
            "iou_threshold": self.iou_threshold,
            "aligned": self.aligned,
            "diverged": self.diverged,
            "aligned_fraction": self.aligned_fraction,
            "diverged_fraction": self.diverged_fraction,
            "undefined": list(self.undefined),
            "skipped_images": list(self.skipped_images),
            "per_image": dict(sorted(self.per_image.items())),
        }


def divergence_report(
    fused: FusedResult, manifest: DatasetManifest, iou_threshold: float = 0.5
) -> DivergenceReport:
    """Classify each image as aligned or diverged.

    An image is aligned iff it has at least one fused box and every fused
    box reaches the IoU threshold against some ground-truth box; an image
    with no fused boxes is diverged. Images without ground truth are
    skipped, like in :func:`detection_report`.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InvariantViolation(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    per_image: dict[str, str] = {}
    skipped = []
    aligned_count = diverged_count = 0
    for rec in manifest.images:
        if not rec.gt_boxes:
            skipped.append(rec.image_id)
            logger.warning("skipping image %s: no ground-truth boxes", rec.image_id)
            continue
        boxes = [fb.detection.box for fb in fused.fusion_for(rec.image_id).boxes]
        aligned = bool(boxes) and all(
            max(iou(b, gt) for gt in rec.gt_boxes) >= iou_threshold for b in boxes
        )
        per_image[rec.image_id] = "aligned" if aligned else "diverged"
        if aligned:
            aligned_count += 1
        else:
            diverged_count += 1
    undefined = () if per_image else ("aligned_fraction", "diverged_fraction")
    return DivergenceReport(
        iou_threshold=iou_threshold,
        per_image=per_image,
        aligned=aligned_count,
        diverged=diverged_count,
        skipped_images=tuple(skipped),
        undefined=undefined,
    )
