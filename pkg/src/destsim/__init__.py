"""destsim: trace-driven simulator and codec library for DRAM data-bus
encoding schemes, with termination/switching energy accounting and
output-quality metrics."""

from .core import (
    ApproxConfig,
    ConfigError,
    SIMILARITY_PRESETS,
    build_mask,
    float32_tolerance_masks,
    float32_truncation_masks,
    merge_chip_words,
    popcount,
    similarity_limit_for_preset,
    split_cache_line,
)
from .codec import (
    CodecError,
    DesyncError,
    Frame,
    FrameType,
    MalformedFrameError,
    SCHEMES,
    dbi_decode,
    dbi_encode,
    make_codec_pair,
    ohe_decode,
    ohe_encode,
)
from .energy import (
    EnergyCounters,
    EnergyParams,
    EnergyReport,
    GroupCounts,
    LaneState,
    count_switching,
    count_termination,
    to_joules,
)
from .pipeline import SimResult, StreamOutcome, run_words, simulate_stream
from .quality import FrameMix, frame_stats, psnr, ssim
from .table import DataTable, MseResult
from .trace import (
    TraceFormatError,
    TraceMeta,
    TraceStream,
    cache_lines_to_image,
    cache_lines_to_raw,
    cache_lines_to_tensor,
    image_to_cache_lines,
    load_trace,
    raw_to_cache_lines,
    save_trace,
    tensor_f32_to_cache_lines,
)

__version__ = "0.1.0"

__all__ = [
    "ApproxConfig", "ConfigError", "SIMILARITY_PRESETS", "build_mask",
    "float32_tolerance_masks", "float32_truncation_masks", "merge_chip_words",
    "popcount", "similarity_limit_for_preset", "split_cache_line",
    "CodecError", "DesyncError", "Frame", "FrameType", "MalformedFrameError",
    "SCHEMES", "dbi_decode", "dbi_encode", "make_codec_pair", "ohe_decode",
    "ohe_encode",
    "EnergyCounters", "EnergyParams", "EnergyReport", "GroupCounts",
    "LaneState", "count_switching", "count_termination", "to_joules",
    "SimResult", "StreamOutcome", "run_words", "simulate_stream",
    "FrameMix", "frame_stats", "psnr", "ssim",
    "DataTable", "MseResult",
    "TraceFormatError", "TraceMeta", "TraceStream", "cache_lines_to_image",
    "cache_lines_to_raw", "cache_lines_to_tensor", "image_to_cache_lines",
    "load_trace", "raw_to_cache_lines", "save_trace", "tensor_f32_to_cache_lines",
    "__version__",
]
