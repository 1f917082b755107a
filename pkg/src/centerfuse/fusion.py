"""Two-detector box fusion with per-box provenance.

Detector A plays the accurate-boundary role and detector B the
accurate-position role. Per image:

* both detectors predicted: an A-box survives only if it contains the
  center of at least one B-box (closed boundary, any witness suffices);
  A-boxes failing the test are discarded and B-boxes never appear in the
  output;
* exactly one detector predicted: that detector's boxes pass through
  verbatim;
* neither predicted: the output is empty.

Confidence scores never influence selection; the rule is purely
geometric. When both detectors predicted but every A-box was discarded,
:class:`EmptyFusionPolicy` decides whether the image ends up empty
(``LITERAL``) or falls back to the B-boxes (``B_FALLBACK``); in the
fallback case the branch stays ``BOTH`` and the boxes carry
``B_FALLBACK`` provenance.

``fuse_image`` is pure; ``fuse_dataset`` may process images on several
workers and its output is independent of scheduling.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DetectorIdCollision, UnknownImage
from .formats import DatasetManifest, Detection, DetectionSet
from .geometry import center, contains


class Provenance(enum.Enum):
    A_RETAINED = "a_retained"
    B_FALLBACK = "b_fallback"
    A_ALL = "a_all"


class Branch(enum.Enum):
    BOTH = "both"
    ONLY_A = "only_a"
    ONLY_B = "only_b"
    NEITHER = "neither"


class EmptyFusionPolicy(enum.Enum):
    """What to do when the BOTH branch discards every A-box."""

    LITERAL = "literal"
    B_FALLBACK = "b_fallback"


@dataclass(frozen=True)
class FusedBox:
    """A fused box plus how it got here.

    ``witness_index`` is the smallest B-index whose center justified an
    ``A_RETAINED`` box. ``source_index`` is the box's index in its origin
    detector's per-image list (A for ``A_RETAINED``/``A_ALL``, B for
    ``B_FALLBACK``), so downstream consumers can join fused boxes back to
    per-box data keyed on the input files.
    """

    detection: Detection
    provenance: Provenance
    witness_index: int | None = None
    source_index: int = 0


@dataclass(frozen=True)
class ImageFusion:
    boxes: tuple[FusedBox, ...]
    branch: Branch


@dataclass(frozen=True)
class FusedResult:
    """Fusion output for a whole dataset, keyed by image id."""

    per_image: dict[str, ImageFusion] = field(default_factory=dict)
    policy: EmptyFusionPolicy = EmptyFusionPolicy.LITERAL

    def fusion_for(self, image_id: str) -> ImageFusion:
        return self.per_image.get(image_id, ImageFusion(boxes=(), branch=Branch.NEITHER))


def _b_fallback_boxes(b_boxes: Sequence[Detection]) -> tuple[FusedBox, ...]:
    return tuple(
        FusedBox(detection=det, provenance=Provenance.B_FALLBACK, source_index=j)
        for j, det in enumerate(b_boxes)
    )


def fuse_image(
    a_boxes: Sequence[Detection], b_boxes: Sequence[Detection]
) -> tuple[tuple[FusedBox, ...], Branch]:
    """Fuse one image's A- and B-predictions.

    Returns the fused boxes (input order preserved, duplicates kept) and
    the branch taken. The all-discarded BOTH case returns an empty tuple;
    policy handling lives in :func:`fuse_dataset`.
    """
    if a_boxes and b_boxes:
        b_centers = [center(det.box) for det in b_boxes]
        fused = []
        for i, det in enumerate(a_boxes):
            witness = next(
                (j for j, c in enumerate(b_centers) if contains(det.box, c)), None
            )
            if witness is not None:
                fused.append(
                    FusedBox(
                        detection=det,
                        provenance=Provenance.A_RETAINED,
                        witness_index=witness,
                        source_index=i,
                    )
                )
        return tuple(fused), Branch.BOTH
    if b_boxes:
        return _b_fallback_boxes(b_boxes), Branch.ONLY_B
    if a_boxes:
        return (
            tuple(
                FusedBox(detection=det, provenance=Provenance.A_ALL, source_index=i)
                for i, det in enumerate(a_boxes)
            ),
            Branch.ONLY_A,
        )
    return (), Branch.NEITHER


def fuse_dataset(
    a: DetectionSet,
    b: DetectionSet,
    manifest: DatasetManifest,
    policy: EmptyFusionPolicy = EmptyFusionPolicy.LITERAL,
    workers: int = 1,
) -> FusedResult:
    """Fuse two detection sets over every manifest image.

    Images absent from a detection set count as empty prediction lists.
    Detection sets must carry distinct detector ids and may only reference
    manifest images.
    """
    if a.detector_id == b.detector_id:
        raise DetectorIdCollision(
            f"both detection sets have detector_id {a.detector_id!r}"
        )
    known = set(manifest.image_ids)
    for det_set in (a, b):
        for image_id in det_set.per_image:
            if image_id not in known:
                raise UnknownImage(
                    f"detections for {det_set.detector_id!r} reference image id "
                    f"{image_id!r} not in manifest"
                )

    def fuse_one(image_id: str) -> tuple[str, ImageFusion]:
        a_boxes = a.detections_for(image_id)
        b_boxes = b.detections_for(image_id)
        boxes, branch = fuse_image(a_boxes, b_boxes)
        if (
            branch is Branch.BOTH
            and not boxes
            and policy is EmptyFusionPolicy.B_FALLBACK
        ):
            boxes = _b_fallback_boxes(b_boxes)
        return image_id, ImageFusion(boxes=boxes, branch=branch)

    ids = sorted(manifest.image_ids)
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(fuse_one, ids))
    else:
        results = dict(fuse_one(image_id) for image_id in ids)
    return FusedResult(per_image={i: results[i] for i in ids}, policy=policy)


def to_detection_set(fused: FusedResult, detector_id: str = "fusion") -> DetectionSet:
    """Flatten a fusion result into a plain :class:`DetectionSet`."""
    return DetectionSet(
        detector_id=detector_id,
        per_image={
            image_id: tuple(fb.detection for fb in fusion.boxes)
            for image_id, fusion in fused.per_image.items()
        },
    )


def provenance_sidecar(fused: FusedResult) -> dict[str, list[dict[str, object]]]:
    """Per-box provenance records, mirroring the fused detection file."""
    return {
        image_id: [
            {
                "provenance": fb.provenance.value,
                "witness_index": fb.witness_index,
                "branch": fusion.branch.value,
                "source_index": fb.source_index,
            }
            for fb in fusion.boxes
        ]
        for image_id, fusion in sorted(fused.per_image.items())
    }


def serialize_provenance(fused: FusedResult) -> bytes:
    return (json.dumps(provenance_sidecar(fused), indent=2) + "\n").encode("utf-8")
