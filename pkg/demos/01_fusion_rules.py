"""
The two-detector fusion rule, branch by branch
==============================================

Detector A is the "accurate boundaries" detector, detector B the
"accurate positions" one. Fusion keeps an A-box only when it contains
the center of some B-box; when one detector is silent, the other's
boxes pass through unchanged.
"""

from centerfuse import Box, Branch, Detection, fuse_image

def det(x1, y1, x2, y2, score=0.9):
    return Detection(box=Box(x1, y1, x2, y2), score=score)

###############################################################################
# Both detectors predict. A's first box contains the center (5, 5) of B's
# box and is retained; A's second box sits in the background, contains no
# B-center, and is discarded. B's own boxes never appear in the output.

a_boxes = [det(0, 0, 10, 10), det(20, 20, 30, 30)]
b_boxes = [det(2, 2, 8, 8)]

fused, branch = fuse_image(a_boxes, b_boxes)
print("branch:", branch.value)
for fb in fused:
    print(
        f"  kept {fb.detection.box.as_tuple()} "
        f"provenance={fb.provenance.value} witness=b[{fb.witness_index}]"
    )

###############################################################################
# Only one detector predicts: its boxes pass through verbatim, order and
# scores untouched.

fused, branch = fuse_image([], b_boxes)
print("\nA silent ->", branch.value, [fb.provenance.value for fb in fused])

fused, branch = fuse_image(a_boxes, [])
print("B silent ->", branch.value, [fb.provenance.value for fb in fused])

fused, branch = fuse_image([], [])
assert branch is Branch.NEITHER and not fused
print("both silent ->", branch.value, "(no boxes)")

###############################################################################
# The rule is purely geometric: confidence scores never influence which
# boxes survive. A zero-confidence A-box with a B-center inside it is
# retained all the same.

fused, _ = fuse_image([det(0, 0, 10, 10, score=0.0)], b_boxes)
print("\nzero-score A-box retained:", fused[0].detection.score == 0.0)
