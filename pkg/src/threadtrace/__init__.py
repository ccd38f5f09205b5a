"""threadtrace: ordered centerline reconstruction of thin deformable threads
from gradient road maps, plus a deterministic synthetic-scene oracle."""

from .errors import (
    MapFormatError,
    NoSegmentsError,
    SceneGenerationError,
    ThreadTraceError,
)
from .linking import Direction, LinkParams, OrderedThreadPoints, link_segments, segment_direction
from .metrics import OttpReport, metrics_to_json, ottp, psnr
from .pipeline import PipelineConfig, ReconstructionResult, fuse_conjugate, reconstruct
from .raster import (
    BinaryMask,
    GradientMap,
    OverlapLabel,
    OverlapMap,
    Polyline,
    SceneGroundTruth,
    decode_gradient_map,
    decode_overlap_map,
    encode_gradient_map,
    encode_overlap_map,
    ground_truth_from_json,
    ground_truth_to_json,
    read_gradient_map,
    read_overlap_map,
    remap_param,
    resize_bilinear,
    unremap_value,
    write_gradient_map,
    write_overlap_map,
)
from .ridge import (
    LinePoint,
    LinePointSet,
    StegerParams,
    extract_line_points,
    sigma_from_width,
)
from .scenes import (
    SceneConfig,
    apply_degradation,
    conjugate_ground_truth,
    count_self_intersections,
    generate_scene,
    generate_scene_pair,
    place_occluders,
    render_gradient_map,
    render_overlap_map,
    scene_config_for_index,
)
from .search import (
    POLARITY_ISOLATED,
    CurveSegment,
    SearchParams,
    extract_segments,
    grow_segment,
    most_salient_endpoint,
    polarity,
)
from .splinefit import ThreadSpline, fit_spline, sample, spline_from_json, spline_to_json

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "CurveSegment",
    "Direction",
    "GradientMap",
    "LinePoint",
    "LinePointSet",
    "LinkParams",
    "MapFormatError",
    "NoSegmentsError",
    "OrderedThreadPoints",
    "OttpReport",
    "OverlapLabel",
    "OverlapMap",
    "PipelineConfig",
    "POLARITY_ISOLATED",
    "Polyline",
    "ReconstructionResult",
    "SceneConfig",
    "SceneGenerationError",
    "SceneGroundTruth",
    "SearchParams",
    "StegerParams",
    "ThreadSpline",
    "ThreadTraceError",
    "apply_degradation",
    "conjugate_ground_truth",
    "count_self_intersections",
    "decode_gradient_map",
    "decode_overlap_map",
    "encode_gradient_map",
    "encode_overlap_map",
    "extract_line_points",
    "extract_segments",
    "fit_spline",
    "fuse_conjugate",
    "generate_scene",
    "generate_scene_pair",
    "ground_truth_from_json",
    "ground_truth_to_json",
    "grow_segment",
    "link_segments",
    "metrics_to_json",
    "most_salient_endpoint",
    "ottp",
    "place_occluders",
    "polarity",
    "psnr",
    "read_gradient_map",
    "read_overlap_map",
    "reconstruct",
    "remap_param",
    "render_gradient_map",
    "render_overlap_map",
    "resize_bilinear",
    "sample",
    "scene_config_for_index",
    "segment_direction",
    "sigma_from_width",
    "spline_from_json",
    "spline_to_json",
    "unremap_value",
    "write_gradient_map",
    "write_overlap_map",
]
