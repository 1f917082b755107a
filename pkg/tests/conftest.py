"""Shared builders for manifest / detection-set test data."""

from __future__ import annotations

from centerfuse import (
    Box,
    DatasetManifest,
    Detection,
    DetectionSet,
    ImageRecord,
    Label,
)

BoxTuple = tuple[float, float, float, float]


def make_manifest(
    images: dict[str, tuple[str, list[BoxTuple]]],
    size: tuple[int, int] = (200, 200),
) -> DatasetManifest:
    """Build a manifest from {image_id: (label, [box tuples])}."""
    return DatasetManifest(
        images=tuple(
            ImageRecord(
                image_id=image_id,
                width=size[0],
                height=size[1],
                true_label=Label(label),
                gt_boxes=tuple(Box(*b) for b in boxes),
            )
            for image_id, (label, boxes) in images.items()
        )
    )


def make_detections(
    detector_id: str,
    per_image: dict[str, list[BoxTuple | tuple[BoxTuple, float]]],
) -> DetectionSet:
    """Build a detection set from box tuples, optionally (box, score) pairs."""
    result: dict[str, tuple[Detection, ...]] = {}
    for image_id, entries in per_image.items():
        dets = []
        for entry in entries:
            if len(entry) == 2 and isinstance(entry[0], tuple):
                box, score = entry
            else:
                box, score = entry, 1.0
            dets.append(Detection(box=Box(*box), score=score))
        result[image_id] = tuple(dets)
    return DetectionSet(detector_id=detector_id, per_image=result)
