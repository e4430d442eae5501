"""crowdsafe: social-distancing and face-mask monitoring on surveillance video.

Core layers: geometry (boxes, IoU, NMS), imaging (resize, crop, blur
kernels, convolution), distancing (DBSCAN safe/violator split), backends
(synthetic scripts and serialized graphs), augmentation (mask overlay,
random blur), pipeline (frame orchestration + timing), evaluation
(count-based accuracy/F1), cli (process / augment / evaluate / bench).
"""

from .geometry import (
    BoundingBox,
    Detection,
    NmsParams,
    Point,
    centroid,
    iou,
    non_max_suppression,
)
from .imaging import (
    BlurChoice,
    average_kernel,
    convolve2d,
    crop,
    gaussian_kernel,
    motion_kernel,
    resize_bilinear,
)
from .distancing import ClusterLabels, DbscanParams, ViolationReport, assess, dbscan
from .backends import (
    Backends,
    SyntheticScript,
    graph_backends,
    load_graph,
    load_scenario,
    synthetic_backends,
    synthetic_detect,
)
from .augmentation import (
    BlurConfig,
    LandmarkSet,
    MaskPlacement,
    blur_augment,
    generate_dataset,
    mask_fit,
    overlay_mask,
    pick_blur,
)
from .pipeline import (
    FaceObservation,
    FrameRecord,
    FrameResult,
    PipelineConfig,
    VideoReport,
    annotate,
    process_frame,
    run,
    sample_indices,
)
from .evaluation import (
    ConfusionCounts,
    GroundTruthCounts,
    accuracy,
    confusion_from_counts,
    evaluate,
    precision_recall_f1,
)

__version__ = "0.1.0"
