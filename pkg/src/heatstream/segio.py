"""Segment data model and diarization/transcript file formats.

Two carriers are supported:

* RTTM  -- NIST 10-column ``SPEAKER`` lines (whitespace separated):
  ``SPEAKER <session> <chan> <onset> <duration> <NA> <NA> <speaker> <NA> <NA>``.
  Non-``SPEAKER`` lines are ignored. Times serialize with exactly three
  decimal places (1 ms grid); parsing goes through :class:`decimal.Decimal`
  so that ``parse(write(x)) == x`` is bit-exact for times on that grid.

* SegLST -- a JSON array of records with keys ``session_id``, ``speaker``,
  ``start_time``, ``end_time``, ``words`` (space-separated string) and an
  optional ``word_timings`` array of ``[start, end]`` pairs aligned with the
  tokens. When ``word_timings`` is absent, word times are linearly
  interpolated across the segment span.

Utterance lists convert to per-speaker frame grids ("activity masks") and
back; a frame is active iff its midpoint falls inside the half-open span
``[start, end)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError

__all__ = [
    "Word",
    "Utterance",
    "ActivityMask",
    "FrameGrid",
    "parse_rttm",
    "write_rttm",
    "parse_seglst",
    "write_seglst",
    "rasterize",
    "group_by_session",
    "canonical_order",
]

DEFAULT_FRAME_LEN = 0.01

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Word:
    """A single token with its absolute time span (seconds)."""

    token: str
    start: float
    end: float

    def __post_init__(self):
        if not self.token or any(c.isspace() for c in self.token):
            raise ValueError(f"word token must be non-empty and whitespace-free: {self.token!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError(f"word times must be finite: [{self.start}, {self.end}]")
        if self.end < self.start:
            raise ValueError(f"word end {self.end} precedes start {self.start}")

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0


@dataclass(frozen=True)
class Utterance:
    """One contiguous activity span of one speaker.

    ``words`` is optional; when present it is an ordered tuple of
    :class:`Word` whose spans lie within ``[start, end]`` and whose start
    times are non-decreasing.
    """

    session_id: str
    speaker: str
    start: float
    end: float
    words: tuple[Word, ...] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError(f"utterance times must be finite: [{self.start}, {self.end}]")
        if self.start < 0:
            raise ValueError(f"utterance start must be non-negative, got {self.start}")
        if not self.end > self.start:
            raise ValueError(f"utterance end {self.end} must exceed start {self.start}")
        if self.words is not None:
            object.__setattr__(self, "words", tuple(self.words))
            prev = None
            for w in self.words:
                if w.start < self.start - _TIME_EPS or w.end > self.end + _TIME_EPS:
                    raise ValueError(f"word {w.token!r} [{w.start}, {w.end}] outside utterance span [{self.start}, {self.end}]")
                if prev is not None and w.start < prev - _TIME_EPS:
                    raise ValueError(f"word starts must be non-decreasing, got {w.start} after {prev}")
                prev = w.start

    @property
    def duration(self) -> float:
        return self.end - self.start

    def overlaps(self, other: "Utterance") -> bool:
        """Half-open span intersection: ``[0, 4)`` and ``[4, 6)`` do not overlap."""
        return self.start < other.end and other.start < self.end


def canonical_order(utts: Iterable[Utterance]) -> list[Utterance]:
    """Deterministic total order used everywhere: (start, end, speaker)."""
    return sorted(utts, key=lambda u: (u.start, u.end, u.speaker))


def group_by_session(utts: Iterable[Utterance]) -> dict[str, list[Utterance]]:
    """Split a mixed utterance list by session, sessions sorted lexicographically."""
    out: dict[str, list[Utterance]] = {}
    for u in utts:
        out.setdefault(u.session_id, []).append(u)
    return {sid: canonical_order(out[sid]) for sid in sorted(out)}


@dataclass(frozen=True)
class FrameGrid:
    """Uniform frame grid: ``num_frames = ceil(total_duration / frame_len)``."""

    frame_len: float = DEFAULT_FRAME_LEN
    total_duration: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.frame_len) and self.frame_len > 0):
            raise ValueError(f"frame_len must be positive and finite, got {self.frame_len}")
        if not (math.isfinite(self.total_duration) and self.total_duration >= 0):
            raise ValueError(f"total_duration must be non-negative and finite, got {self.total_duration}")

    @property
    def num_frames(self) -> int:
        q = self.total_duration / self.frame_len
        # Snap near-integer quotients so float noise (16/0.01 -> 1600.0000...2)
        # cannot add a spurious frame.
        n = round(q)
        if abs(q - n) <= 1e-6 * max(1.0, abs(q)):
            return int(n)
        return int(math.ceil(q))

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.num_frames) + 0.5) * self.frame_len


class ActivityMask:
    """Per-speaker frame activity: a K x T matrix with values in ``[0, 1]``.

    Rows are ordered by the ``speakers`` tuple (no duplicates); the matrix is
    read-only after construction.
    """

    def __init__(self, speakers: Sequence[str], frame_len: float, frames: np.ndarray):
        speakers = tuple(speakers)
        if len(set(speakers)) != len(speakers):
            raise ValueError(f"duplicate speaker ids: {speakers}")
        if not frame_len > 0:
            raise ValueError(f"frame_len must be positive, got {frame_len}")
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-D (K x T), got shape {frames.shape}")
        if frames.shape[0] != len(speakers):
            raise ValueError(f"{len(speakers)} speakers but {frames.shape[0]} rows")
        if frames.size and (frames.min() < 0.0 or frames.max() > 1.0):
            raise ValueError("activity values must lie in [0, 1]")
        frames = frames.copy()
        frames.setflags(write=False)
        self.speakers = speakers
        self.frame_len = float(frame_len)
        self.frames = frames

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[1]

    @property
    def total_duration(self) -> float:
        return self.num_frames * self.frame_len

    def grid(self) -> FrameGrid:
        return FrameGrid(frame_len=self.frame_len, total_duration=self.total_duration)

    def row(self, speaker: str) -> np.ndarray:
        return self.frames[self.speakers.index(speaker)]

    def binarized(self, threshold: float = 0.5) -> np.ndarray:
        """Boolean K x T view: active iff value >= threshold."""
        return self.frames >= threshold

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivityMask):
            return NotImplemented
        return (
            self.speakers == other.speakers
            and self.frame_len == other.frame_len
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )

    def __repr__(self) -> str:
        return f"ActivityMask(speakers={self.speakers!r}, frame_len={self.frame_len}, shape={self.frames.shape})"


# ---------------------------------------------------------------------------
# RTTM


def _as_text(source: str | bytes | IO) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _parse_decimal(raw: str, what: str, line_no: int) -> Decimal:
    try:
        return Decimal(raw)
    except InvalidOperation:
        raise ParseError(f"malformed {what} field {raw!r}", location=line_no) from None


def parse_rttm(source: str | bytes | IO) -> list[Utterance]:
    """Parse ``SPEAKER`` lines into utterances (no words).

    Column mapping (1-based): 2 = session id, 4 = onset, 5 = duration,
    8 = speaker; ``end = onset + duration``. Raises :class:`ParseError`
    (with the line number) on malformed numerics or non-positive durations.
    """
    utts: list[Utterance] = []
    for line_no, raw in enumerate(_as_text(source).splitlines(), start=1):
        fields = raw.split()
        if not fields or fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise ParseError(f"SPEAKER line has {len(fields)} fields, expected >= 8", location=line_no)
        onset = _parse_decimal(fields[3], "onset", line_no)
        duration = _parse_decimal(fields[4], "duration", line_no)
        if duration < 0:
            raise ParseError(f"negative duration {fields[4]}", location=line_no)
        try:
            # Sum in decimal so 3-decimal onset/duration reproduce the exact
            # end time the writer started from.
            utt = Utterance(
                session_id=fields[1],
                speaker=fields[7],
                start=float(onset),
                end=float(onset + duration),
            )
        except ValueError as exc:
            raise ParseError(str(exc), location=line_no) from None
        utts.append(utt)
    return utts


def _fmt(t: float) -> str:
    return f"{t:.3f}"


def write_rttm(utts: Iterable[Utterance]) -> str:
    """Serialize utterances as SPEAKER lines, times fixed to 3 decimals.

    The duration column is computed from the quantized start/end strings so
    that re-parsing recovers the same quantized end time.
    """
    lines = []
    for u in utts:
        start_s = _fmt(u.start)
        dur = Decimal(_fmt(u.end)) - Decimal(start_s)
        lines.append(f"SPEAKER {u.session_id} 1 {start_s} {dur} <NA> <NA> {u.speaker} <NA> <NA>\n")
    return "".join(lines)


# ---------------------------------------------------------------------------
# SegLST


def interpolate_word_times(tokens: Sequence[str], start: float, end: float) -> list[tuple[float, float]]:
    """Uniform linear split of ``[start, end]`` across ``tokens``.

    First word starts exactly at ``start`` and the last ends exactly at
    ``end``; interior boundaries are clipped into the span so float noise
    cannot push a word outside it.
    """
    n = len(tokens)
    if n == 0:
        return []
    span = end - start
    bounds = [start + span * i / n for i in range(1, n)]
    bounds = [min(max(b, start), end) for b in bounds]
    edges = [start, *bounds, end]
    return [(edges[i], edges[i + 1]) for i in range(n)]


def _require(record: Mapping, key: str, index: int):
    if key not in record:
        raise ParseError(f"record missing required key {key!r}", location=index)
    return record[key]


def _as_time(value, key: str, index: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"key {key!r} must be a number, got {value!r}", location=index)
    return float(value)


def parse_seglst(source: str | bytes | IO) -> list[Utterance]:
    """Parse a SegLST JSON array into utterances with timed words."""
    text = _as_text(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ParseError("SegLST must be a JSON array of records")
    utts: list[Utterance] = []
    for index, record in enumerate(data):
        if not isinstance(record, dict):
            raise ParseError("SegLST record must be a JSON object", location=index)
        session_id = _require(record, "session_id", index)
        speaker = _require(record, "speaker", index)
        start = _as_time(_require(record, "start_time", index), "start_time", index)
        end = _as_time(_require(record, "end_time", index), "end_time", index)
        words_raw = _require(record, "words", index)
        if not isinstance(words_raw, str):
            raise ParseError(f"key 'words' must be a string, got {words_raw!r}", location=index)
        tokens = words_raw.split()
        if "word_timings" in record:
            timings_raw = record["word_timings"]
            if not isinstance(timings_raw, list) or len(timings_raw) != len(tokens):
                raise ParseError(
                    f"'word_timings' must list one [start, end] pair per token ({len(tokens)} tokens)",
                    location=index,
                )
            timings = []
            for pair in timings_raw:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ParseError(f"bad word timing entry {pair!r}", location=index)
                timings.append((_as_time(pair[0], "word_timings", index), _as_time(pair[1], "word_timings", index)))
        else:
            timings = interpolate_word_times(tokens, start, end)
        try:
            words = tuple(Word(token=t, start=s, end=e) for t, (s, e) in zip(tokens, timings))
            utt = Utterance(session_id=str(session_id), speaker=str(speaker), start=start, end=end, words=words)
        except ValueError as exc:
            raise ParseError(str(exc), location=index) from None
        utts.append(utt)
    return utts


def _round3(t: float) -> float:
    return round(t, 3)


def write_seglst(utts: Iterable[Utterance]) -> str:
    """Serialize utterances (words required) as a SegLST JSON array.

    Times are quantized to 3 decimals; ``word_timings`` is always emitted so
    round-trips do not depend on the interpolation rule.
    """
    records = []
    for u in utts:
        if u.words is None:
            raise ValueError(f"cannot write SegLST for utterance without words: {u.session_id}/{u.speaker}")
        records.append(
            {
                "session_id": u.session_id,
                "speaker": u.speaker,
                "start_time": _round3(u.start),
                "end_time": _round3(u.end),
                "words": " ".join(w.token for w in u.words),
                "word_timings": [[_round3(w.start), _round3(w.end)] for w in u.words],
            }
        )
    return json.dumps(records, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Rasterization


def rasterize(utts: Sequence[Utterance], grid: FrameGrid) -> ActivityMask:
    """Paint utterances onto a frame grid.

    Frame ``(k, t)`` is 1 iff some utterance of speaker ``k`` covers the
    frame midpoint ``(t + 0.5) * frame_len`` under the half-open rule
    ``start <= mid < end``. Speakers are ordered lexicographically.
    """
    for u in utts:
        if u.end > grid.total_duration + _TIME_EPS:
            raise ValueError(
                f"utterance ends at {u.end} beyond grid duration {grid.total_duration}"
            )
    speakers = tuple(sorted({u.speaker for u in utts}))
    T = grid.num_frames
    frames = np.zeros((len(speakers), T), dtype=np.float64)
    mids = grid.midpoints()
    index = {s: k for k, s in enumerate(speakers)}
    for u in utts:
        row = frames[index[u.speaker]]
        active = (mids >= u.start) & (mids < u.end)
        np.maximum(row, active.astype(np.float64), out=row)
    return ActivityMask(speakers=speakers, frame_len=grid.frame_len, frames=frames)
