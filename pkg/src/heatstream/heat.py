"""Assignment of utterances to two non-overlapping, speaker-agnostic streams.

A stream is *available* for an utterance iff the utterance's half-open span
``[start, end)`` intersects no span already assigned to that stream.
Utterances are processed in canonical (start, end, speaker) order; when only
one stream is available it is taken, and when both are available the chosen
heuristic decides:

* ``first-available``  -- stream 0 whenever it is free.
* ``alternating``      -- the stream opposite the previously assigned
  utterance (stream 0 when nothing was assigned yet).
* ``recency-continuity`` -- the most recently active stream, i.e. the one
  whose last assigned utterance has the latest end time (empty counts as
  -inf; ties go to the lower index).
* ``speaker-continuity`` -- the stream that last carried this utterance's
  speaker; if neither (or both) match, fall back to recency (both matching
  prefers the more recently active stream).

When *neither* stream is available (3+ concurrent speakers) the overflow
policy applies: ``force`` assigns to the stream whose last utterance ends
earliest and records the index in ``violations``; ``drop`` discards the
utterance into ``dropped``.

Two independent implementations are provided: the batch :func:`assign` and
the incremental :func:`step` (fold over the sorted utterances). They must
agree; tests cross-check them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .segio import (
    DEFAULT_FRAME_LEN,
    ActivityMask,
    FrameGrid,
    Utterance,
    canonical_order,
)

__all__ = [
    "Heuristic",
    "OverflowPolicy",
    "HeatAssignment",
    "HeatAssigner",
    "StepState",
    "assign",
    "step",
    "extract_utterances",
    "is_available",
    "heat_mask",
    "STREAM_SPEAKERS",
]

STREAM_SPEAKERS = ("stream0", "stream1")

BINARIZE_THRESHOLD = 0.5

_NEG_INF = float("-inf")


class Heuristic(str, enum.Enum):
    FIRST_AVAILABLE = "first-available"
    ALTERNATING = "alternating"
    RECENCY_CONTINUITY = "recency-continuity"
    SPEAKER_CONTINUITY = "speaker-continuity"


class OverflowPolicy(str, enum.Enum):
    FORCE = "force"
    DROP = "drop"


def _as_heuristic(value: str | Heuristic) -> Heuristic:
    if isinstance(value, Heuristic):
        return value
    try:
        return Heuristic(value)
    except ValueError:
        choices = ", ".join(h.value for h in Heuristic)
        raise ValueError(f"unknown heuristic {value!r}; choose one of: {choices}") from None


def _as_policy(value: str | OverflowPolicy) -> OverflowPolicy:
    if isinstance(value, OverflowPolicy):
        return value
    try:
        return OverflowPolicy(value)
    except ValueError:
        choices = ", ".join(p.value for p in OverflowPolicy)
        raise ValueError(f"unknown overflow policy {value!r}; choose one of: {choices}") from None


def is_available(intervals: Iterable[tuple[float, float]], utt: Utterance) -> bool:
    """True iff ``[utt.start, utt.end)`` intersects none of the given spans."""
    return all(not (utt.start < e and s < utt.end) for s, e in intervals)


def extract_utterances(
    mask: ActivityMask,
    session_id: str = "session",
    threshold: float = BINARIZE_THRESHOLD,
) -> list[Utterance]:
    """Maximal runs of active frames per speaker, as utterances.

    Activity is binarized at ``threshold`` (active iff value >= threshold);
    run boundaries convert to times as ``index * frame_len``. The result is
    in canonical (start, end, speaker) order.
    """
    utts: list[Utterance] = []
    active = mask.binarized(threshold)
    for k, speaker in enumerate(mask.speakers):
        row = active[k]
        if not row.any():
            continue
        padded = np.concatenate(([False], row, [False]))
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for lo, hi in zip(edges[::2], edges[1::2]):
            utts.append(
                Utterance(
                    session_id=session_id,
                    speaker=speaker,
                    start=lo * mask.frame_len,
                    end=hi * mask.frame_len,
                )
            )
    return canonical_order(utts)


@dataclass(frozen=True)
class HeatAssignment:
    """Result of splitting utterances across the two streams.

    ``utterances`` is the canonically sorted input; ``assignments`` pairs an
    index into it with a stream id. ``assignments`` plus ``dropped``
    partition the input exactly. ``violations`` lists force-assigned indices
    that overlap something already on their stream.
    """

    utterances: tuple[Utterance, ...]
    assignments: tuple[tuple[int, int], ...]
    dropped: tuple[int, ...]
    violations: tuple[int, ...]
    heuristic: Heuristic
    overflow: OverflowPolicy
    streams: ActivityMask

    def __post_init__(self):
        assigned = [i for i, _ in self.assignments]
        seen = sorted(assigned + list(self.dropped))
        if seen != list(range(len(self.utterances))):
            raise ValueError("assignments and dropped must partition the utterance indices")
        if any(s not in (0, 1) for _, s in self.assignments):
            raise ValueError("stream ids must be 0 or 1")
        if not set(self.violations) <= set(assigned):
            raise ValueError("violations must reference assigned utterances")
        for stream in (0, 1):
            spans = sorted(
                (self.utterances[i].start, self.utterances[i].end)
                for i, s in self.assignments
                if s == stream
            )
            for (_, e0), (s1, _) in zip(spans, spans[1:]):
                if s1 < e0 and not self.violations:
                    raise ValueError(
                        "overlapping utterances within a stream require a non-empty violation list"
                    )

    def assignment_vector(self) -> tuple[int | None, ...]:
        """Stream id per input utterance, ``None`` where dropped."""
        vec: list[int | None] = [None] * len(self.utterances)
        for i, s in self.assignments:
            vec[i] = s
        return tuple(vec)

    def stream_utterances(self, stream: int) -> list[Utterance]:
        return [self.utterances[i] for i, s in self.assignments if s == stream]


def _decide(
    heuristic: Heuristic,
    avail: tuple[bool, bool],
    last: list[tuple[float, str] | None],
    last_stream: int | None,
    speaker: str,
) -> int:
    """Pick a stream when at least one is available."""
    if avail[0] != avail[1]:
        return 0 if avail[0] else 1
    if heuristic is Heuristic.FIRST_AVAILABLE:
        return 0
    if heuristic is Heuristic.ALTERNATING:
        return 0 if last_stream is None else 1 - last_stream
    ends = [info[0] if info is not None else _NEG_INF for info in last]
    if heuristic is Heuristic.SPEAKER_CONTINUITY:
        matches = [k for k in (0, 1) if last[k] is not None and last[k][1] == speaker]
        if len(matches) == 1:
            return matches[0]
        if len(matches) == 2:
            return 1 if ends[1] > ends[0] else 0
    # recency-continuity, and the speaker-continuity fallback
    return 1 if ends[1] > ends[0] else 0


def assign(
    utts: Sequence[Utterance],
    heuristic: str | Heuristic = Heuristic.SPEAKER_CONTINUITY,
    overflow: str | OverflowPolicy = OverflowPolicy.FORCE,
    grid: FrameGrid | None = None,
    frame_len: float = DEFAULT_FRAME_LEN,
) -> HeatAssignment:
    """Assign utterances (one session) to two non-overlapping streams.

    The input is canonically sorted first, so the result is invariant under
    permutation. ``grid`` controls the rasterized ``streams`` mask; when
    omitted it spans ``[0, max end)`` at ``frame_len``.
    """
    heuristic = _as_heuristic(heuristic)
    overflow = _as_policy(overflow)
    sessions = {u.session_id for u in utts}
    if len(sessions) > 1:
        raise ValueError(f"assign expects a single session, got {sorted(sessions)}")
    ordered = tuple(canonical_order(utts))

    spans: list[list[tuple[float, float]]] = [[], []]
    last: list[tuple[float, str] | None] = [None, None]
    last_stream: int | None = None
    assignments: list[tuple[int, int]] = []
    dropped: list[int] = []
    violations: list[int] = []

    for i, u in enumerate(ordered):
        avail = (is_available(spans[0], u), is_available(spans[1], u))
        if not any(avail):
            if overflow is OverflowPolicy.DROP:
                dropped.append(i)
                continue
            ends = [info[0] if info is not None else _NEG_INF for info in last]
            target = 1 if ends[1] < ends[0] else 0
            violations.append(i)
        else:
            target = _decide(heuristic, avail, last, last_stream, u.speaker)
        spans[target].append((u.start, u.end))
        last[target] = (u.end, u.speaker)
        last_stream = target
        assignments.append((i, target))

    if grid is None:
        total = max((u.end for u in ordered), default=0.0)
        grid = FrameGrid(frame_len=frame_len, total_duration=total)

    assignment = HeatAssignment(
        utterances=ordered,
        assignments=tuple(assignments),
        dropped=tuple(dropped),
        violations=tuple(violations),
        heuristic=heuristic,
        overflow=overflow,
        streams=_streams_mask(ordered, assignments, grid),
    )
    return assignment


def _streams_mask(
    utterances: Sequence[Utterance],
    assignments: Iterable[tuple[int, int]],
    grid: FrameGrid,
) -> ActivityMask:
    mids = grid.midpoints()
    frames = np.zeros((2, grid.num_frames), dtype=np.float64)
    for i, s in assignments:
        u = utterances[i]
        np.maximum(frames[s], ((mids >= u.start) & (mids < u.end)).astype(np.float64), out=frames[s])
    return ActivityMask(speakers=STREAM_SPEAKERS, frame_len=grid.frame_len, frames=frames)


def heat_mask(assignment: HeatAssignment, grid: FrameGrid) -> ActivityMask:
    """Rasterize an assignment's streams onto an arbitrary grid (2 x T)."""
    for i, _ in assignment.assignments:
        u = assignment.utterances[i]
        if u.end > grid.total_duration + 1e-9:
            raise ValueError(
                f"utterance ends at {u.end} beyond grid duration {grid.total_duration}"
            )
    return _streams_mask(assignment.utterances, assignment.assignments, grid)


# ---------------------------------------------------------------------------
# Incremental form


@dataclass(frozen=True)
class StepState:
    """Explicit state for the streaming form of the assignment loop.

    ``spans`` holds the intervals assigned so far per stream, ``last`` the
    (end, speaker) of each stream's most recent utterance, ``last_stream``
    the stream of the most recent assignment overall.
    """

    spans: tuple[tuple[tuple[float, float], ...], tuple[tuple[float, float], ...]] = ((), ())
    last: tuple[tuple[float, str] | None, tuple[float, str] | None] = (None, None)
    last_stream: int | None = None

    @classmethod
    def initial(cls) -> "StepState":
        return cls()


def step(
    state: StepState,
    utt: Utterance,
    heuristic: str | Heuristic,
    overflow: str | OverflowPolicy = OverflowPolicy.FORCE,
) -> tuple[StepState, int | None]:
    """One assignment decision; folding over sorted utterances equals assign.

    Returns the successor state and the chosen stream (``None`` means the
    utterance was dropped by the overflow policy). Written independently of
    :func:`assign` so the two can cross-check each other.
    """
    heuristic = _as_heuristic(heuristic)
    overflow = _as_policy(overflow)

    free = []
    for k in (0, 1):
        blocked = any(utt.start < e and s < utt.end for s, e in state.spans[k])
        free.append(not blocked)

    def recency(k: int) -> float:
        return state.last[k][0] if state.last[k] is not None else _NEG_INF

    if free[0] and free[1]:
        if heuristic is Heuristic.FIRST_AVAILABLE:
            chosen = 0
        elif heuristic is Heuristic.ALTERNATING:
            chosen = 1 - state.last_stream if state.last_stream is not None else 0
        elif heuristic is Heuristic.SPEAKER_CONTINUITY:
            matched = [
                k for k in (0, 1)
                if state.last[k] is not None and state.last[k][1] == utt.speaker
            ]
            if len(matched) == 1:
                chosen = matched[0]
            else:
                # no match, or both match: most recently active wins, tie -> 0
                pool = matched if matched else [0, 1]
                chosen = max(pool, key=lambda k: (recency(k), -k))
        else:  # recency-continuity
            chosen = max((0, 1), key=lambda k: (recency(k), -k))
    elif free[0] or free[1]:
        chosen = 0 if free[0] else 1
    else:
        if overflow is OverflowPolicy.DROP:
            return state, None
        chosen = min((0, 1), key=lambda k: (recency(k), k))

    new_spans = list(state.spans)
    new_spans[chosen] = state.spans[chosen] + ((utt.start, utt.end),)
    new_last = list(state.last)
    new_last[chosen] = (utt.end, utt.speaker)
    return (
        StepState(spans=tuple(new_spans), last=tuple(new_last), last_stream=chosen),
        chosen,
    )


# ---------------------------------------------------------------------------
# Estimator front end


class HeatAssigner(BaseEstimator):
    """Stateless transformer turning an utterance list into a stream split.

    Follows the scikit-learn parameter protocol (``get_params`` /
    ``set_params``; ``fit`` is a no-op returning ``self``), so it can sit in
    pipelines and be cloned. ``transform`` returns a
    :class:`HeatAssignment`, not an array.
    """

    def __init__(
        self,
        heuristic: str = Heuristic.SPEAKER_CONTINUITY.value,
        overflow: str = OverflowPolicy.FORCE.value,
        frame_len: float = DEFAULT_FRAME_LEN,
    ):
        self.heuristic = heuristic
        self.overflow = overflow
        self.frame_len = frame_len

    def fit(self, X=None, y=None) -> "HeatAssigner":
        return self

    def transform(self, X: Sequence[Utterance]) -> HeatAssignment:
        return assign(
            X,
            heuristic=self.heuristic,
            overflow=self.overflow,
            frame_len=self.frame_len,
        )

    def fit_transform(self, X: Sequence[Utterance], y=None) -> HeatAssignment:
        return self.fit(X, y).transform(X)
