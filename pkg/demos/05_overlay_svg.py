"""
Rendering a box overlay as diffable SVG
=======================================

The overlay draws ground truth in yellow and each detection set in its
own color, with the fused set in green, in the image's own pixel frame.
SVG output keeps the package image-codec free and makes overlays easy
to diff in tests and code review.
"""

from pathlib import Path

from centerfuse import (
    Box,
    DatasetManifest,
    Detection,
    DetectionSet,
    ImageRecord,
    Label,
    fuse_dataset,
    to_detection_set,
)
from centerfuse.cli import render_overlay_svg

###############################################################################
# One image, two raw detector outputs, and their fusion.

manifest = DatasetManifest(
    images=(ImageRecord("scan_07", 320, 240, Label.MALIGNANT, (Box(90, 60, 210, 170),)),)
)
det_a = DetectionSet(
    detector_id="detector_a",
    per_image={
        "scan_07": (
            Detection(Box(95, 63, 205, 168), 0.93),
            Detection(Box(250, 30, 300, 80), 0.71),  # background box
        )
    },
)
det_b = DetectionSet(
    detector_id="detector_b",
    per_image={"scan_07": (Detection(Box(100, 70, 215, 180), 0.88),)},
)
fused = fuse_dataset(det_a, det_b, manifest)

###############################################################################
# Render ground truth plus all three sets. The background box from
# detector A disappears in the fused layer.

svg = render_overlay_svg(manifest, [det_a, det_b, to_detection_set(fused)], "scan_07")
out = Path(__file__).with_name("overlay_scan_07.svg")
out.write_text(svg)
print(f"wrote {out} ({len(svg.splitlines())} SVG lines)")
print("fused boxes drawn:", len(to_detection_set(fused).detections_for("scan_07")))
