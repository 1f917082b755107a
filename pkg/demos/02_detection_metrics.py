"""
Detection metrics under the center-containment protocol
========================================================

A predicted box is a true positive iff its center lies inside a
ground-truth box; every predicted box is judged, and false negatives
arise only from images with no predictions at all.
"""

from centerfuse import (
    Box,
    DatasetManifest,
    DetectionCounts,
    ImageRecord,
    Label,
    detection_report,
    format_percent,
    judge_boxes,
)
from centerfuse import Detection, DetectionSet

###############################################################################
# Judging one image: two predictions on one ground-truth box. The first
# one's center (30, 30) falls inside the ground truth; the second one's
# center (150, 150) does not.

gt = [Box(10, 10, 60, 60)]
preds = [Box(20, 20, 40, 40), Box(140, 140, 160, 160)]
verdicts, fn = judge_boxes(preds, gt)
print("verdicts:", [v.value for v in verdicts], "fn contribution:", fn)

# an image with no predictions contributes one false negative per GT box
verdicts, fn = judge_boxes([], gt)
print("no predictions -> fn contribution:", fn)

###############################################################################
# Counts map to precision/recall exactly; rendering is two-decimal
# percent, round-half-up. These three reference triples exercise the
# formulas end to end.

for counts in (DetectionCounts(120, 17, 2), DetectionCounts(126, 2, 2), DetectionCounts(118, 10, 1)):
    print(
        f"tp={counts.tp:3d} fp={counts.fp:2d} fn={counts.fn}  ->  "
        f"precision {format_percent(counts.precision)}  "
        f"recall {format_percent(counts.recall)}"
    )

###############################################################################
# A whole-dataset report also carries mean IoU. The default "per-box"
# mode averages each predicted box's best IoU against its image's ground
# truth; the alternative "per-image" mode averages one best value per
# image, counting no-prediction images as zero.

manifest = DatasetManifest(
    images=(
        ImageRecord("scan_a", 200, 200, Label.BENIGN, (Box(10, 10, 60, 60),)),
        ImageRecord("scan_b", 200, 200, Label.NORMAL, (Box(50, 50, 120, 120),)),
    )
)
detections = DetectionSet(
    detector_id="demo",
    per_image={
        "scan_a": (Detection(Box(12, 12, 58, 58), 0.9), Detection(Box(150, 150, 180, 180), 0.6)),
        "scan_b": (Detection(Box(50, 50, 120, 120), 0.8),),
    },
)
report = detection_report(detections, manifest)
print(
    f"\ncounts: tp={report.counts.tp} fp={report.counts.fp} fn={report.counts.fn}  "
    f"precision {format_percent(report.precision)}  "
    f"recall {format_percent(report.recall)}  "
    f"mIoU {format_percent(report.miou)} ({report.miou_mode.value})"
)
