"""Perceptual-artifact detection, scoring, and zoom-in refinement.

The library scores generated images by the fraction of their area flagged
as artifacts, ranks and selects candidates by that ratio, and refines
flagged regions by cropping an enlarged context around each connected
component, inpainting it, and compositing the patch back with feathered
seams.  Detection and inpainting are pluggable backends: precomputed mask
files, a remote HTTP service, or deterministic local stubs.
"""

from .backends import (
    DEFAULT_PROMPT_RULES,
    WILDCARD_PROMPT,
    DetectorBackend,
    FileDetector,
    InpainterBackend,
    PromptRule,
    RemoteDetector,
    RemoteInpainter,
    StubDetector,
    StubInpainter,
    default_prompt,
)
from .config import (
    DilationRule,
    PipelineConfig,
    build_detector,
    build_inpainter,
    config_hash,
    load_config,
)
from .errors import (
    ArtifactError,
    BackendError,
    ConfigError,
    InvalidInputError,
    ManifestError,
    MaskDecodeError,
    MaskLookupError,
    PipelineError,
    ProtocolError,
)
from .evaluation import (
    EvalReport,
    PreferenceVotes,
    evaluate_miou,
    holm_bonferroni,
    load_votes_csv,
    permutation_test,
    report_from_confusions,
    report_to_json_dict,
)
from .images import RgbImage, decode_image, decode_label_map, encode_image, luminance
from .manifest import Manifest, ManifestEntry, load_manifest
from .masks import (
    BinaryMask,
    Box,
    Component,
    ComponentSet,
    Confusion,
    bounding_box,
    confusion_counts,
    connected_components,
    decode_mask,
    default_dilation_radius,
    dilate,
    encode_mask,
    erode,
)
from .par import (
    ClassParRow,
    ClassParTable,
    ParHeatmap,
    ParRecord,
    TaskParStat,
    par,
    par_heatmap,
    par_histogram,
    per_class_par,
    percentile_samples,
    rank_by_par,
    records_from_jsonl,
    records_to_jsonl,
    select_best,
)
from .zoom import (
    Crop,
    CropPlan,
    composite_patch,
    naive_refine,
    plan_crops,
    refine,
)

__all__ = [
    "ArtifactError",
    "BackendError",
    "BinaryMask",
    "Box",
    "ClassParRow",
    "ClassParTable",
    "Component",
    "ComponentSet",
    "ConfigError",
    "Confusion",
    "Crop",
    "CropPlan",
    "DEFAULT_PROMPT_RULES",
    "DetectorBackend",
    "DilationRule",
    "EvalReport",
    "FileDetector",
    "InpainterBackend",
    "InvalidInputError",
    "Manifest",
    "ManifestEntry",
    "ManifestError",
    "MaskDecodeError",
    "MaskLookupError",
    "ParHeatmap",
    "ParRecord",
    "PipelineConfig",
    "PipelineError",
    "PreferenceVotes",
    "PromptRule",
    "ProtocolError",
    "RemoteDetector",
    "RemoteInpainter",
    "RgbImage",
    "StubDetector",
    "StubInpainter",
    "TaskParStat",
    "WILDCARD_PROMPT",
    "bounding_box",
    "build_detector",
    "build_inpainter",
    "composite_patch",
    "config_hash",
    "confusion_counts",
    "connected_components",
    "decode_image",
    "decode_label_map",
    "decode_mask",
    "default_dilation_radius",
    "default_prompt",
    "dilate",
    "encode_image",
    "encode_mask",
    "erode",
    "evaluate_miou",
    "holm_bonferroni",
    "load_config",
    "load_manifest",
    "load_votes_csv",
    "luminance",
    "naive_refine",
    "par",
    "par_heatmap",
    "par_histogram",
    "per_class_par",
    "percentile_samples",
    "permutation_test",
    "plan_crops",
    "rank_by_par",
    "records_from_jsonl",
    "records_to_jsonl",
    "refine",
    "report_from_confusions",
    "report_to_json_dict",
    "select_best",
]

__version__ = "0.1.0"
