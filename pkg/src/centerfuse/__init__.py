"""centerfuse: center-containment fusion and evaluation for box detectors.

The toolkit combines the predictions of two object detectors (one with
accurate boundaries, one with accurate positions) by keeping a boundary
detector's box only when it contains the center of some position
detector's box, evaluates detections under a center-in-ground-truth
protocol, aggregates per-box class labels into image labels, and ships a
seeded simulator so every behavior is testable without real models.
"""

from .errors import (
    DetectorIdCollision,
    InvariantViolation,
    MalformedInput,
    MissingBoxLabel,
    MissingPrediction,
    MissingWholeImageLabel,
    PlacementExhausted,
    ToolkitError,
    UnknownImage,
    UnknownLabel,
)
from .formats import (
    DatasetManifest,
    Detection,
    DetectionSet,
    ImageRecord,
    Label,
    LABEL_ORDER,
    ReportFormat,
    format_percent,
    parse_detections_json,
    parse_label,
    parse_labels,
    parse_manifest,
    parse_yolo_txt,
    serialize_detections,
    serialize_manifest,
    serialize_report,
    yolo_fields,
)
from .fusion import (
    Branch,
    EmptyFusionPolicy,
    FusedBox,
    FusedResult,
    ImageFusion,
    Provenance,
    fuse_dataset,
    fuse_image,
    provenance_sidecar,
    serialize_provenance,
    to_detection_set,
)
from .geometry import Box, Point, area, center, contains, intersection_area, iou
from .metrics import (
    ClassificationReport,
    ConfusionMatrix3,
    DetectionCounts,
    DetectionReport,
    DivergenceReport,
    MiouMode,
    PerImageEval,
    Verdict,
    aggregate_image_label,
    boxes_by_image,
    classification_report,
    detection_report,
    divergence_report,
    judge_boxes,
)
from .simulator import (
    ArmReport,
    ClassifierProfile,
    DetectorProfile,
    ExperimentReport,
    SimConfig,
    SpuriousPlacement,
    generate_dataset,
    predicted_labels,
    run_experiment,
    simulate_detector,
    simulate_labels,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ToolkitError",
    "MalformedInput",
    "InvariantViolation",
    "UnknownLabel",
    "UnknownImage",
    "DetectorIdCollision",
    "MissingWholeImageLabel",
    "MissingBoxLabel",
    "MissingPrediction",
    "PlacementExhausted",
    # geometry
    "Point",
    "Box",
    "area",
    "center",
    "contains",
    "intersection_area",
    "iou",
    # formats
    "Label",
    "LABEL_ORDER",
    "Detection",
    "DetectionSet",
    "ImageRecord",
    "DatasetManifest",
    "ReportFormat",
    "parse_label",
    "parse_manifest",
    "parse_detections_json",
    "parse_yolo_txt",
    "parse_labels",
    "serialize_manifest",
    "serialize_detections",
    "serialize_report",
    "format_percent",
    "yolo_fields",
    # fusion
    "Provenance",
    "Branch",
    "EmptyFusionPolicy",
    "FusedBox",
    "ImageFusion",
    "FusedResult",
    "fuse_image",
    "fuse_dataset",
    "to_detection_set",
    "provenance_sidecar",
    "serialize_provenance",
    # metrics
    "Verdict",
    "MiouMode",
    "DetectionCounts",
    "PerImageEval",
    "DetectionReport",
    "ConfusionMatrix3",
    "ClassificationReport",
    "DivergenceReport",
    "judge_boxes",
    "boxes_by_image",
    "detection_report",
    "aggregate_image_label",
    "classification_report",
    "divergence_report",
    # simulator
    "SpuriousPlacement",
    "DetectorProfile",
    "ClassifierProfile",
    "SimConfig",
    "ArmReport",
    "ExperimentReport",
    "generate_dataset",
    "simulate_detector",
    "simulate_labels",
    "predicted_labels",
    "run_experiment",
]
