"""
From per-box labels to image-level classification metrics
=========================================================

An image's label is aggregated severity-first from its boxes: malignant
if any box says malignant, else benign if any says benign, else normal.
Images without boxes defer to a whole-image fallback label. Reports
carry the 3x3 confusion matrix, 3-class accuracy, the binary
(malignant-versus-rest) accuracy, sensitivity, and specificity.
"""

from centerfuse import (
    Label,
    aggregate_image_label,
    classification_report,
    format_percent,
)
from centerfuse import DatasetManifest, ImageRecord, Box

N, B, M = Label.NORMAL, Label.BENIGN, Label.MALIGNANT

###############################################################################
# The aggregation rule on a few box-label lists. One malignant box is
# enough to mark the whole image malignant; that is exactly why stray
# background boxes are dangerous for image-level diagnosis.

for labels in ([N, N], [N, B], [N, B, M]):
    print([lab.value for lab in labels], "->", aggregate_image_label(labels).value)
print("no boxes + fallback benign ->", aggregate_image_label([], B).value)

###############################################################################
# A four-image dataset scored against predictions that miss one of the
# two malignant images. Sensitivity halves while specificity stays
# perfect, and both accuracies land at 75%.

manifest = DatasetManifest(
    images=tuple(
        ImageRecord(name, 100, 100, truth, (Box(10, 10, 50, 50),))
        for name, truth in (
            ("case1", M), ("case2", M), ("case3", B), ("case4", N),
        )
    )
)
predicted = {"case1": M, "case2": B, "case3": B, "case4": N}
report = classification_report(predicted, manifest)

print("\nconfusion (rows=true, cols=predicted, order normal/benign/malignant):")
for row in report.confusion.matrix:
    print("  ", row)
print(
    f"Acc {format_percent(report.acc)}  2-Acc {format_percent(report.acc2)}  "
    f"Sens {format_percent(report.sens)}  Spec {format_percent(report.spec)}"
)
