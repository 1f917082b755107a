"""Seeded synthetic datasets: ground truth, two detector caricatures, labels.

The simulator exists so the fusion rule's benefit is demonstrable and
property-testable at desk scale. A :class:`DetectorProfile` caricatures a
detector's error behavior: corner jitter degrades boundaries, a miss rate
drops whole predictions, and a spurious rate adds background boxes whose
centers (for ``uniform_background`` placement) are guaranteed to fall
outside every ground-truth box, making them false positives under the
center criterion by construction. A :class:`ClassifierProfile` labels
on-target boxes through a row-stochastic confusion matrix of the true
image label and background boxes from a label distribution independent
of the truth.

Randomness comes from numpy's PCG64 generator. Every (stream, image) pair
derives its own generator from the master seed through a
``SeedSequence`` over ``(seed, stream tag, image tag)``, so images may be
generated concurrently with results identical to sequential generation,
and per-box classifier labels are additionally keyed by the box's
coordinate bits: the same box always draws the same label, no matter
which detection set it arrived in.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, MalformedInput, PlacementExhausted, UnknownImage
from .formats import (
    LABEL_ORDER,
    DatasetManifest,
    Detection,
    DetectionSet,
    ImageRecord,
    Label,
)
from .fusion import EmptyFusionPolicy, fuse_dataset
from .geometry import Box, center, contains
from .metrics import (
    BoxSource,
    ClassificationReport,
    DetectionReport,
    DivergenceReport,
    MiouMode,
    aggregate_image_label,
    boxes_by_image,
    classification_report,
    detection_report,
    divergence_report,
)

_LABEL_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}

MAX_SEED = 2**64 - 1
_PLACEMENT_ATTEMPTS = 100


class SpuriousPlacement(enum.Enum):
    UNIFORM_BACKGROUND = "uniform_background"
    NEAR_GT = "near_gt"


def _check_probability_vector(name: str, vec: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in vec)
    if len(values) != 3:
        raise InvariantViolation(f"{name} must have 3 entries, got {len(values)}")
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise InvariantViolation(f"{name} entries must be non-negative, got {values}")
    if abs(sum(values) - 1.0) > 1e-9:
        raise InvariantViolation(f"{name} must sum to 1 within 1e-9, got {sum(values)}")
    return values


@dataclass(frozen=True)
class DetectorProfile:
    """Error caricature of one detector."""

    jitter_sigma: float = 0.0
    miss_rate: float = 0.0
    spurious_rate: float = 0.0
    spurious_placement: SpuriousPlacement = SpuriousPlacement.UNIFORM_BACKGROUND

    def __post_init__(self) -> None:
        if not math.isfinite(self.jitter_sigma) or self.jitter_sigma < 0:
            raise InvariantViolation(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise InvariantViolation(f"miss_rate must be in [0, 1], got {self.miss_rate}")
        if not math.isfinite(self.spurious_rate) or self.spurious_rate < 0:
            raise InvariantViolation(
                f"spurious_rate must be >= 0, got {self.spurious_rate}"
            )

    @classmethod
    def from_dict(cls, doc: Mapping[str, object], where: str) -> "DetectorProfile":
        try:
            placement = SpuriousPlacement(doc.get("spurious_placement", "uniform_background"))
        except ValueError:
            raise MalformedInput(
                f"{where}: unknown spurious_placement {doc.get('spurious_placement')!r}"
            ) from None
        try:
            return cls(
                jitter_sigma=float(doc.get("jitter_sigma", 0.0)),
                miss_rate=float(doc.get("miss_rate", 0.0)),
                spurious_rate=float(doc.get("spurious_rate", 0.0)),
                spurious_placement=placement,
            )
        except (TypeError, ValueError):
            raise MalformedInput(f"{where}: profile fields must be numbers") from None

    def as_dict(self) -> dict[str, object]:
        return {
            "jitter_sigma": self.jitter_sigma,
            "miss_rate": self.miss_rate,
            "spurious_rate": self.spurious_rate,
            "spurious_placement": self.spurious_placement.value,
        }


@dataclass(frozen=True)
class ClassifierProfile:
    """Label behavior: confusion for on-target boxes, prior for background."""

    on_target_confusion: tuple[tuple[float, float, float], ...]
    background_label_distribution: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.on_target_confusion) != 3:
            raise InvariantViolation("on_target_confusion must have 3 rows")
        rows = tuple(
            _check_probability_vector(f"on_target_confusion[{i}]", row)
            for i, row in enumerate(self.on_target_confusion)
        )
        object.__setattr__(self, "on_target_confusion", rows)
        object.__setattr__(
            self,
            "background_label_distribution",
            _check_probability_vector(
                "background_label_distribution", self.background_label_distribution
            ),
        )

    @classmethod
    def identity(
        cls, background: Sequence[float] = (1 / 3, 1 / 3, 1 / 3)
    ) -> "ClassifierProfile":
        return cls(
            on_target_confusion=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
            background_label_distribution=tuple(background),
        )

    @classmethod
    def from_dict(cls, doc: Mapping[str, object], where: str) -> "ClassifierProfile":
        confusion = doc.get("on_target_confusion")
        background = doc.get("background_label_distribution")
        if not isinstance(confusion, (list, tuple)) or not isinstance(
            background, (list, tuple)
        ):
            raise MalformedInput(
                f"{where}: on_target_confusion and background_label_distribution required"
            )
        return cls(
            on_target_confusion=tuple(tuple(row) for row in confusion),
            background_label_distribution=tuple(background),
        )

    def as_dict(self) -> dict[str, object]:
        return {
            "on_target_confusion": [list(row) for row in self.on_target_confusion],
            "background_label_distribution": list(self.background_label_distribution),
        }

    def row_for(self, true_label: Label) -> tuple[float, float, float]:
        return self.on_target_confusion[_LABEL_INDEX[true_label]]


@dataclass(frozen=True)
class SimConfig:
    n_images: int
    image_size: tuple[int, int]
    gt_box_scale: float
    label_prior: tuple[float, float, float]
    profile_a: DetectorProfile
    profile_b: DetectorProfile
    classifier: ClassifierProfile
    seed: int

    def __post_init__(self) -> None:
        if self.n_images < 0:
            raise InvariantViolation(f"n_images must be >= 0, got {self.n_images}")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise InvariantViolation(f"image_size must be positive, got {w}x{h}")
        if not 0.0 < self.gt_box_scale < 1.0:
            raise InvariantViolation(
                f"gt_box_scale must be in (0, 1), got {self.gt_box_scale}"
            )
        object.__setattr__(
            self, "label_prior", _check_probability_vector("label_prior", self.label_prior)
        )
        if not 0 <= self.seed <= MAX_SEED:
            raise InvariantViolation(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def from_dict(cls, doc: Mapping[str, object]) -> "SimConfig":
        for key in (
            "n_images",
            "image_size",
            "gt_box_scale",
            "label_prior",
            "profile_a",
            "profile_b",
            "classifier",
            "seed",
        ):
            if key not in doc:
                raise MalformedInput(f"config: missing required key {key!r}")
        size = doc["image_size"]
        if not isinstance(size, (list, tuple)) or len(size) != 2:
            raise MalformedInput("config: image_size must be [width, height]")
        if not isinstance(doc["n_images"], int) or isinstance(doc["n_images"], bool):
            raise MalformedInput("config: n_images must be an integer")
        if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
            raise MalformedInput("config: seed must be an integer")
        prior = doc["label_prior"]
        if not isinstance(prior, (list, tuple)):
            raise MalformedInput("config: label_prior must be an array")
        return cls(
            n_images=doc["n_images"],
            image_size=(int(size[0]), int(size[1])),
            gt_box_scale=float(doc["gt_box_scale"]),
            label_prior=tuple(prior),
            profile_a=DetectorProfile.from_dict(doc["profile_a"], "config.profile_a"),
            profile_b=DetectorProfile.from_dict(doc["profile_b"], "config.profile_b"),
            classifier=ClassifierProfile.from_dict(doc["classifier"], "config.classifier"),
            seed=doc["seed"],
        )

    def as_dict(self) -> dict[str, object]:
        return {
            "n_images": self.n_images,
            "image_size": list(self.image_size),
            "gt_box_scale": self.gt_box_scale,
            "label_prior": list(self.label_prior),
            "profile_a": self.profile_a.as_dict(),
            "profile_b": self.profile_b.as_dict(),
            "classifier": self.classifier.as_dict(),
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# seed derivation

_STREAM_DATASET = "dataset"
_STREAM_BOX_LABEL = "labels/box"
_STREAM_IMAGE_LABEL = "labels/image"


def _tag(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=list(entropy)))


def _box_entropy(box: Box) -> int:
    packed = struct.pack("<4d", *box.as_tuple())
    return int.from_bytes(hashlib.sha256(packed).digest()[:8], "big")


def _draw_label(rng: np.random.Generator, row: Sequence[float]) -> Label:
    r = rng.random()
    acc = 0.0
    for label, p in zip(LABEL_ORDER, row):
        acc += p
        if r < acc:
            return label
    return LABEL_ORDER[-1]


# ---------------------------------------------------------------------------
# generation


def generate_dataset(cfg: SimConfig) -> DatasetManifest:
    """Generate a manifest with one square ground-truth box per image."""
    width, height = cfg.image_size
    side = cfg.gt_box_scale * min(width, height)
    tag = _tag(_STREAM_DATASET)
    records = []
    for i in range(cfg.n_images):
        rng = _rng(cfg.seed, tag, i)
        x0 = rng.uniform(0.0, width - side)
        y0 = rng.uniform(0.0, height - side)
        label = _draw_label(rng, cfg.label_prior)
        records.append(
            ImageRecord(
                image_id=f"img_{i:05d}",
                width=width,
                height=height,
                true_label=label,
                gt_boxes=(Box(x0, y0, x0 + side, y0 + side),),
            )
        )
    return DatasetManifest(images=tuple(records))


def _repair_interval(lo: float, hi: float, bound: float) -> tuple[float, float]:
    # sort corners, enforce a minimum side of 1 px, shift back into [0, bound]
    if hi < lo:
        lo, hi = hi, lo
    if hi - lo < 1.0:
        mid = (lo + hi) / 2
        lo, hi = mid - 0.5, mid + 0.5
    if lo < 0.0:
        lo, hi = 0.0, hi - lo
    if hi > bound:
        lo, hi = max(0.0, lo - (hi - bound)), bound
    return lo, hi


def _spurious_box(
    rng: np.random.Generator,
    rec: ImageRecord,
    placement: SpuriousPlacement,
) -> Box:
    base = rec.gt_boxes[0] if rec.gt_boxes else None
    base_w = base.width if base else 0.2 * min(rec.width, rec.height)
    base_h = base.height if base else 0.2 * min(rec.width, rec.height)

    if placement is SpuriousPlacement.NEAR_GT and base is not None:
        c = center(base)
        cx = c.x + rng.normal(0.0, base_w / 2)
        cy = c.y + rng.normal(0.0, base_h / 2)
        w = base_w * rng.uniform(0.5, 1.5)
        h = base_h * rng.uniform(0.5, 1.5)
        x1, x2 = _repair_interval(cx - w / 2, cx + w / 2, rec.width)
        y1, y2 = _repair_interval(cy - h / 2, cy + h / 2, rec.height)
        return Box(x1, y1, x2, y2)

    for _ in range(_PLACEMENT_ATTEMPTS):
        cx = rng.uniform(0.0, rec.width)
        cy = rng.uniform(0.0, rec.height)
        w = base_w * rng.uniform(0.5, 1.5)
        h = base_h * rng.uniform(0.5, 1.5)
        x1, x2 = _repair_interval(cx - w / 2, cx + w / 2, rec.width)
        y1, y2 = _repair_interval(cy - h / 2, cy + h / 2, rec.height)
        box = Box(x1, y1, x2, y2)
        # judge the repaired box's actual center so the false-positive
        # guarantee survives clamping at image edges
        if not any(contains(gt, center(box)) for gt in rec.gt_boxes):
            return box
    raise PlacementExhausted(
        f"{rec.image_id}: could not place a background box outside ground truth "
        f"in {_PLACEMENT_ATTEMPTS} attempts"
    )


def simulate_detector(
    profile: DetectorProfile,
    manifest: DatasetManifest,
    stream_tag: str,
    seed: int,
) -> DetectionSet:
    """Simulate one detector over a manifest.

    Per ground-truth box: with probability ``1 - miss_rate`` the box is
    emitted with each corner coordinate perturbed by independent
    zero-mean Gaussian noise, then repaired to stay valid and inside the
    image. Poisson(``spurious_rate``) extra boxes follow, placed per the
    profile's placement mode. Confidence scores are uniform in [0.5, 1].
    The ``stream_tag`` names the derived random stream and becomes the
    detector_id.
    """
    tag = _tag(stream_tag)
    per_image: dict[str, tuple[Detection, ...]] = {}
    for rec in manifest.images:
        rng = _rng(seed, tag, _tag(rec.image_id))
        dets = []
        for gt in rec.gt_boxes:
            missed = rng.random() < profile.miss_rate
            noise = rng.normal(0.0, profile.jitter_sigma, size=4)
            score = rng.uniform(0.5, 1.0)
            if missed:
                continue
            x1, x2 = _repair_interval(gt.x_min + noise[0], gt.x_max + noise[1], rec.width)
            y1, y2 = _repair_interval(gt.y_min + noise[2], gt.y_max + noise[3], rec.height)
            dets.append(Detection(box=Box(x1, y1, x2, y2), score=float(score)))
        for _ in range(int(rng.poisson(profile.spurious_rate))):
            box = _spurious_box(rng, rec, profile.spurious_placement)
            dets.append(Detection(box=box, score=float(rng.uniform(0.5, 1.0))))
        per_image[rec.image_id] = tuple(dets)
    return DetectionSet(detector_id=stream_tag, per_image=per_image)


def simulate_labels(
    classifier: ClassifierProfile,
    manifest: DatasetManifest,
    boxes: BoxSource,
    seed: int,
) -> tuple[dict[tuple[str, int], Label], dict[str, Label]]:
    """Draw per-box labels and whole-image fallback labels.

    A box whose center lies inside a ground-truth box draws from the
    confusion row of the image's true label; any other box draws from the
    background distribution. Per-box draws are keyed by the box's
    coordinate bits, so the same box receives the same label in every
    detection set it appears in (the classifier acts as a deterministic
    function of the crop). Whole-image labels are drawn for every image.
    """
    boxmap = boxes_by_image(boxes)
    known = set(manifest.image_ids)
    for image_id in boxmap:
        if image_id not in known:
            raise UnknownImage(f"boxes reference image id {image_id!r} not in manifest")
    box_tag = _tag(_STREAM_BOX_LABEL)
    image_tag = _tag(_STREAM_IMAGE_LABEL)
    box_labels: dict[tuple[str, int], Label] = {}
    image_labels: dict[str, Label] = {}
    for rec in manifest.images:
        image_rng = _rng(seed, image_tag, _tag(rec.image_id))
        image_labels[rec.image_id] = _draw_label(image_rng, classifier.row_for(rec.true_label))
        for k, box in enumerate(boxmap.get(rec.image_id, ())):
            on_target = any(contains(gt, center(box)) for gt in rec.gt_boxes)
            row = (
                classifier.row_for(rec.true_label)
                if on_target
                else classifier.background_label_distribution
            )
            rng = _rng(seed, box_tag, _tag(rec.image_id), _box_entropy(box))
            box_labels[(rec.image_id, k)] = _draw_label(rng, row)
    return box_labels, image_labels


# ---------------------------------------------------------------------------
# end-to-end experiment


@dataclass(frozen=True)
class ArmReport:
    detection: DetectionReport
    classification: ClassificationReport

    def as_dict(self) -> dict[str, object]:
        return {
            "detection": self.detection.as_dict(),
            "classification": self.classification.as_dict(),
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Three-arm comparison (A only, B only, fusion) plus divergence."""

    config: SimConfig
    policy: EmptyFusionPolicy
    miou_mode: MiouMode
    arms: dict[str, ArmReport]
    divergence: DivergenceReport

    def as_dict(self) -> dict[str, object]:
        return {
            "config": self.config.as_dict(),
            "empty_fusion_policy": self.policy.value,
            "miou_mode": self.miou_mode.value,
            "arms": {name: arm.as_dict() for name, arm in self.arms.items()},
            "divergence": self.divergence.as_dict(),
        }


def predicted_labels(
    manifest: DatasetManifest,
    boxes: BoxSource,
    box_labels: Mapping[tuple[str, int], Label],
    image_labels: Mapping[str, Label],
) -> dict[str, Label]:
    """Aggregate per-box labels into an image label for every manifest image."""
    boxmap = boxes_by_image(boxes)
    predicted = {}
    for rec in manifest.images:
        labels = [
            box_labels[(rec.image_id, k)]
            for k in range(len(boxmap.get(rec.image_id, ())))
        ]
        predicted[rec.image_id] = aggregate_image_label(
            labels, image_labels.get(rec.image_id)
        )
    return predicted


def run_experiment(
    cfg: SimConfig,
    policy: EmptyFusionPolicy = EmptyFusionPolicy.LITERAL,
    miou_mode: MiouMode = MiouMode.PER_BOX,
    divergence_iou: float = 0.5,
) -> ExperimentReport:
    """Run the full pipeline per arm: detect, fuse, label, aggregate, evaluate.

    Everything derives deterministically from ``cfg.seed``: running the
    same config twice yields identical reports.
    """
    manifest = generate_dataset(cfg)
    det_a = simulate_detector(cfg.profile_a, manifest, "detector_a", cfg.seed)
    det_b = simulate_detector(cfg.profile_b, manifest, "detector_b", cfg.seed)
    fused = fuse_dataset(det_a, det_b, manifest, policy=policy)

    arms = {}
    for name, source in (("a_only", det_a), ("b_only", det_b), ("fusion", fused)):
        box_labels, image_labels = simulate_labels(cfg.classifier, manifest, source, cfg.seed)
        predicted = predicted_labels(manifest, source, box_labels, image_labels)
        arms[name] = ArmReport(
            detection=detection_report(source, manifest, miou_mode=miou_mode),
            classification=classification_report(predicted, manifest),
        )
    return ExperimentReport(
        config=cfg,
        policy=policy,
        miou_mode=miou_mode,
        arms=arms,
        divergence=divergence_report(fused, manifest, divergence_iou),
    )
