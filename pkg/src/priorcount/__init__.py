"""Multi-label object counting from precomputed priors.

The engine consumes per-image bundles (class masks, per-class
activation heatmaps, a depth map, optional rgb) and produces per-class
instance counts by recovering under-segmented mask pixels with depth,
selecting sub-pixel reference points on the heatmaps, and prompting a
segmentation backend with them.
"""

from .bundle import PriorBundle, load_prior_bundle
from .grids import Grid2D, Grid3D, read_tensor_file, write_tensor_file
from .metrics import (
    AnnotationRecord,
    EvalRow,
    EvalTable,
    ObjectAnnotation,
    evaluate,
    generate_few_shot_split,
    generate_zero_shot_split,
    mae,
    mrmse,
    nae,
    read_annotations,
    rmse,
    sre,
)
from .pipeline import (
    CountRequest,
    CountResult,
    StageToggles,
    boxes_to_points,
    count_image,
    toggle_stages,
)
from .refine import RefinedPriors, RefineParams, mean_depth, refine_masks
from .refpoints import (
    PointParams,
    RefPoint,
    find_local_maxima,
    gate_points,
    gaussian_refine,
    select_reference_points,
    upscale_points,
)
from .segment import (
    ExternalBackend,
    InstanceMaskSet,
    ReferenceBackend,
    SegmenterBackend,
    SegmentParams,
    count,
    external_segment,
    extract_rgb_patch,
    filter_masks,
    reference_segment,
)

__version__ = "0.1.0"
