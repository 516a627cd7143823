"""Two-stream activity conversion, conditioning masks, and multi-stream WER."""

from .errors import HeatstreamError, InfeasibleError, ParseError, UnsupportedError
from .segio import (
    ActivityMask,
    FrameGrid,
    Utterance,
    Word,
    canonical_order,
    group_by_session,
    parse_rttm,
    parse_seglst,
    rasterize,
    write_rttm,
    write_seglst,
)
from .heat import (
    HeatAssigner,
    HeatAssignment,
    Heuristic,
    OverflowPolicy,
    StepState,
    assign,
    extract_utterances,
    heat_mask,
    is_available,
    step,
)
from .stno import FddtParams, StnoEncoder, StnoMask, fddt_apply, stno, stno_for_streams
from .scoring import ScoreReport, TimingLog, TimingRecord, orc_wer, orc_wer_bruteforce, rtfx
from .simgen import OverlapStats, SimSpec, SplitMix64, overlap_stats, simulate

__version__ = "0.1.0"

__all__ = [
    "ActivityMask",
    "FddtParams",
    "FrameGrid",
    "HeatAssigner",
    "HeatAssignment",
    "HeatstreamError",
    "Heuristic",
    "InfeasibleError",
    "OverflowPolicy",
    "OverlapStats",
    "ParseError",
    "ScoreReport",
    "SimSpec",
    "SplitMix64",
    "StepState",
    "StnoEncoder",
    "StnoMask",
    "TimingLog",
    "TimingRecord",
    "UnsupportedError",
    "Utterance",
    "Word",
    "assign",
    "canonical_order",
    "extract_utterances",
    "fddt_apply",
    "group_by_session",
    "heat_mask",
    "is_available",
    "orc_wer",
    "orc_wer_bruteforce",
    "overlap_stats",
    "parse_rttm",
    "parse_seglst",
    "rasterize",
    "rtfx",
    "simulate",
    "step",
    "stno",
    "stno_for_streams",
    "write_rttm",
    "write_seglst",
]
