"""Speaker-agnostic multi-stream WER and runtime ratio.

The optimal-reference-combination WER assigns each reference utterance to
one of two hypothesis streams; a stream's reference is the concatenation of
its assigned utterances in canonical (start, end, speaker) order, and the
score is the minimum over all assignments of the summed word-level edit
distances. Under a finite collar a match/substitution between a reference
word and a hypothesis word is permitted only when their span midpoints lie
within ``collar`` seconds of each other; otherwise only insert/delete moves
can bridge the pair.

The exact optimum is computed by a dynamic program over states
``(utterance index, words consumed of hyp 0, words consumed of hyp 1)``
with an intra-utterance Levenshtein extension, O(N * |hyp0| * |hyp1| * maxU)
time and O(N * |hyp0| * |hyp1|) memory (one table per utterance is kept for
backtracking). :func:`orc_wer_bruteforce` enumerates all 2^N assignments
with a plain Levenshtein per stream and serves as the oracle.

``rtfx`` is the inverse real-time factor: total audio seconds divided by
total processing seconds (a ratio of sums, not a mean of ratios).
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import UnsupportedError
from .segio import Utterance, Word, canonical_order

__all__ = [
    "ScoreReport",
    "TimingRecord",
    "TimingLog",
    "orc_wer",
    "orc_wer_bruteforce",
    "rtfx",
    "normalize_words",
]

_INF = 1 << 30

_BRUTE_FORCE_MAX = 16


def normalize_words(words: Iterable[Word]) -> list[Word]:
    """Lowercase, strip leading/trailing punctuation, drop emptied tokens."""
    out = []
    for w in words:
        token = w.token.lower().strip(string.punctuation)
        if token:
            out.append(Word(token=token, start=w.start, end=w.end))
    return out


@dataclass(frozen=True)
class ScoreReport:
    """Edit-distance decomposition plus the optimal stream assignment."""

    total_ref_words: int
    substitutions: int
    insertions: int
    deletions: int
    wer: float
    assignment: tuple[int, ...]
    collar: float

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    def to_json_dict(self) -> dict:
        return {
            # infinite wer (errors against an empty reference) is not
            # representable in strict JSON
            "wer": None if math.isinf(self.wer) else self.wer,
            "errors": self.errors,
            "substitutions": self.substitutions,
            "insertions": self.insertions,
            "deletions": self.deletions,
            "total_ref_words": self.total_ref_words,
            "assignment": list(self.assignment),
            "collar": None if math.isinf(self.collar) else self.collar,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def _wer(errors: int, total: int) -> float:
    if total == 0:
        return 0.0 if errors == 0 else math.inf
    return errors / total


def _stream_words(stream: Sequence) -> list[Word]:
    """Accept a stream as timed words, or as utterances to flatten."""
    items = list(stream)
    if not items:
        return []
    if isinstance(items[0], Word):
        return items
    words: list[Word] = []
    for u in canonical_order(items):
        if u.words is None:
            raise ValueError(f"hypothesis utterance without words: {u.session_id}/{u.speaker}")
        words.extend(u.words)
    return words


def _prepare(
    refs: Sequence[Utterance],
    hyps: Sequence[Sequence],
    collar: float,
    normalize: bool,
):
    if len(hyps) > 2:
        raise UnsupportedError(f"at most 2 hypothesis streams are supported, got {len(hyps)}")
    if len(hyps) != 2:
        raise ValueError(f"exactly 2 hypothesis streams are required, got {len(hyps)}")
    if collar < 0:
        raise ValueError(f"collar must be non-negative, got {collar}")
    for u in refs:
        if u.words is None:
            raise ValueError(f"reference utterance without words: {u.session_id}/{u.speaker}")
    ordered = canonical_order(refs)

    def clean(words):
        return normalize_words(words) if normalize else list(words)

    ref_words = [clean(u.words) for u in ordered]
    hyp_words = [clean(_stream_words(h)) for h in hyps]

    vocab: dict[str, int] = {}
    def intern(words):
        return (
            np.array([vocab.setdefault(w.token, len(vocab)) for w in words], dtype=np.int64),
            np.array([w.midpoint for w in words], dtype=np.float64),
        )

    refs_enc = [intern(ws) for ws in ref_words]
    hyps_enc = [intern(ws) for ws in hyp_words]
    total_ref = sum(len(ws) for ws in ref_words)
    return refs_enc, hyps_enc, total_ref


def _word_costs(tid: int, mid: float, hyp_tokens: np.ndarray, hyp_mids: np.ndarray, collar: float) -> np.ndarray:
    """Diagonal cost against every hypothesis word: 0 match, 1 sub, INF forbidden."""
    if math.isfinite(collar):
        allowed = np.abs(hyp_mids - mid) <= collar
    else:
        allowed = np.ones_like(hyp_mids, dtype=bool)
    return np.where(allowed, np.where(hyp_tokens == tid, 0, 1), _INF).astype(np.int64)


def _prefmin_rows(a: np.ndarray) -> np.ndarray:
    """M[j] = min_{i <= j} (a[i] + (j - i)) along axis 0."""
    r = np.arange(a.shape[0], dtype=a.dtype).reshape((-1,) + (1,) * (a.ndim - 1))
    return np.minimum.accumulate(a - r, axis=0) + r


def _extend(dp: np.ndarray, ref, hyp, collar: float) -> np.ndarray:
    """Consume one reference utterance along axis 0 of ``dp``.

    ``dp[j, ...]`` is the cost with j hypothesis words of this stream
    consumed; the result is the cheapest cost after additionally aligning the
    utterance's words against any further span of this stream. ``dp`` must
    be C-contiguous so the axis-0 sweeps run on unit-stride rows.
    """
    tokens, mids = ref
    hyp_tokens, hyp_mids = hyp
    r = np.arange(dp.shape[0], dtype=dp.dtype).reshape((-1,) + (1,) * (dp.ndim - 1))

    def prefmin(a):
        return np.minimum.accumulate(a - r, axis=0) + r

    G = prefmin(dp)
    for tid, mid in zip(tokens, mids):
        cost = _word_costs(tid, mid, hyp_tokens, hyp_mids, collar).astype(dp.dtype)
        tmp = np.empty_like(G)
        tmp[0] = G[0] + 1
        if G.shape[0] > 1:
            np.minimum(G[1:] + 1, G[:-1] + cost.reshape((-1,) + (1,) * (G.ndim - 1)), out=tmp[1:])
        G = prefmin(tmp)
    return G


def _lane_rows(lane_dp: np.ndarray, ref, hyp, collar: float):
    """Full sub-DP rows for one utterance on one stream (for backtracking)."""
    tokens, mids = ref
    rows = [(None, _prefmin_rows(lane_dp))]
    for tid, mid in zip(tokens, mids):
        cost = _word_costs(tid, mid, hyp[0], hyp[1], collar)
        prev = rows[-1][1]
        tmp = np.empty_like(prev)
        tmp[0] = prev[0] + 1
        if prev.shape[0] > 1:
            tmp[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        rows.append((tmp, _prefmin_rows(tmp)))
    return rows


def _walk_lane(lane_dp: np.ndarray, ref, hyp, collar: float, j: int):
    """Backtrace one utterance's sub-DP from column ``j``.

    Returns (entry column, substitutions, insertions, deletions).
    """
    tokens, mids = ref
    rows = _lane_rows(lane_dp, ref, hyp, collar)
    subs = ins = dels = 0
    v = int(rows[-1][1][j])
    for p in range(len(tokens), 0, -1):
        tmp, G = rows[p]
        assert int(G[j]) == v
        while int(tmp[j]) != v:
            j -= 1
            v -= 1
            ins += 1
        prev_G = rows[p - 1][1]
        cost = None
        if j >= 1:
            c = _word_costs(tokens[p - 1], mids[p - 1], hyp[0][j - 1 : j], hyp[1][j - 1 : j], collar)
            cost = int(c[0])
        if cost is not None and cost < _INF and int(prev_G[j - 1]) + cost == v:
            if cost == 1:
                subs += 1
            j -= 1
            v = int(prev_G[j])
        else:
            assert int(prev_G[j]) + 1 == v
            dels += 1
            v = int(prev_G[j])
    while int(lane_dp[j]) != v:
        j -= 1
        v -= 1
        ins += 1
    return j, subs, ins, dels


def orc_wer(
    refs: Sequence[Utterance],
    hyps: Sequence[Sequence],
    collar: float = math.inf,
    normalize: bool = True,
) -> ScoreReport:
    """Exact (time-constrained) optimal-reference-combination WER.

    ``refs`` must carry word lists; each of the two ``hyps`` streams is a
    list of timed words (or of utterances, flattened in canonical order).
    The reported ``assignment`` lists one stream id per reference utterance
    in canonical (start, end, speaker) order.
    """
    refs_enc, hyps_enc, total_ref = _prepare(refs, hyps, collar, normalize)
    n0 = len(hyps_enc[0][0])
    n1 = len(hyps_enc[1][0])

    # int32 is ample (costs stay far below _INF + table size) and halves the
    # memory traffic of the table sweeps
    j_idx = np.arange(n0 + 1, dtype=np.int32)
    k_idx = np.arange(n1 + 1, dtype=np.int32)
    dp = j_idx[:, None] + k_idx[None, :]

    tables: list[np.ndarray] = []
    choices: list[np.ndarray] = []
    for ref in refs_enc:
        tables.append(dp)
        new0 = _extend(dp, ref, hyps_enc[0], collar)
        new1 = _extend(np.ascontiguousarray(dp.T), ref, hyps_enc[1], collar).T
        choices.append(new1 < new0)
        dp = np.minimum(new0, new1)

    totals = dp + (n0 - j_idx)[:, None] + (n1 - k_idx)[None, :]
    bj, bk = np.unravel_index(int(np.argmin(totals)), totals.shape)
    best = int(totals[bj, bk])

    subs = dels = 0
    ins = (n0 - int(bj)) + (n1 - int(bk))
    assignment: list[int] = [0] * len(refs_enc)
    for i in range(len(refs_enc) - 1, -1, -1):
        stream = int(choices[i][bj, bk])
        assignment[i] = stream
        if stream == 0:
            lane = tables[i][:, bk]
            entry, s, a, d = _walk_lane(lane, refs_enc[i], hyps_enc[0], collar, int(bj))
            bj = entry
        else:
            lane = tables[i][bj, :]
            entry, s, a, d = _walk_lane(lane, refs_enc[i], hyps_enc[1], collar, int(bk))
            bk = entry
        subs += s
        ins += a
        dels += d
    ins += int(bj) + int(bk)

    assert subs + ins + dels == best, "backtrace does not reproduce the optimal cost"
    return ScoreReport(
        total_ref_words=total_ref,
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        wer=_wer(best, total_ref),
        assignment=tuple(assignment),
        collar=collar,
    )


# ---------------------------------------------------------------------------
# Brute-force oracle


def _plain_grid(ref, hyp, collar: float) -> np.ndarray:
    """Plain (time-constrained) Levenshtein grid between two word sequences."""
    tokens, mids = ref
    m, n = len(tokens), len(hyp[0])
    grid = np.empty((m + 1, n + 1), dtype=np.int64)
    grid[0] = np.arange(n + 1)
    for p in range(1, m + 1):
        cost = _word_costs(tokens[p - 1], mids[p - 1], hyp[0], hyp[1], collar)
        grid[p, 0] = p
        diag = grid[p - 1, :-1] + cost
        up = grid[p - 1, 1:] + 1
        row = np.minimum(diag, up)
        np.minimum.accumulate(row - np.arange(1, n + 1), out=row)
        grid[p, 1:] = row + np.arange(1, n + 1)
        grid[p, 1:] = np.minimum(grid[p, 1:], grid[p, 0] + np.arange(1, n + 1))
    return grid


def _plain_counts(ref, hyp, collar: float) -> tuple[int, int, int, int]:
    """(cost, subs, ins, dels) via a full-grid backtrace."""
    grid = _plain_grid(ref, hyp, collar)
    tokens, mids = ref
    p, j = grid.shape[0] - 1, grid.shape[1] - 1
    subs = ins = dels = 0
    while p > 0 or j > 0:
        v = int(grid[p, j])
        if p > 0 and j > 0:
            c = int(_word_costs(tokens[p - 1], mids[p - 1], hyp[0][j - 1 : j], hyp[1][j - 1 : j], collar)[0])
            if c < _INF and int(grid[p - 1, j - 1]) + c == v:
                subs += c
                p -= 1
                j -= 1
                continue
        if p > 0 and int(grid[p - 1, j]) + 1 == v:
            dels += 1
            p -= 1
            continue
        ins += 1
        j -= 1
    return int(grid[-1, -1]), subs, ins, dels


def _concat(parts):
    tokens = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=np.int64)
    mids = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=np.float64)
    return tokens, mids


def orc_wer_bruteforce(
    refs: Sequence[Utterance],
    hyps: Sequence[Sequence],
    collar: float = math.inf,
    normalize: bool = True,
) -> ScoreReport:
    """Exhaustive minimum over all 2^N stream assignments (oracle).

    Refuses more than 16 reference utterances.
    """
    refs_enc, hyps_enc, total_ref = _prepare(refs, hyps, collar, normalize)
    n = len(refs_enc)
    if n > _BRUTE_FORCE_MAX:
        raise UnsupportedError(f"brute force is limited to {_BRUTE_FORCE_MAX} utterances, got {n}")

    best_cost = None
    best_mask = 0
    for mask in range(1 << n):
        cost = 0
        for stream in (0, 1):
            parts = [refs_enc[i] for i in range(n) if (mask >> i) & 1 == stream]
            grid = _plain_grid(_concat(parts), hyps_enc[stream], collar)
            cost += int(grid[-1, -1])
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_mask = mask

    subs = ins = dels = 0
    for stream in (0, 1):
        parts = [refs_enc[i] for i in range(n) if (best_mask >> i) & 1 == stream]
        _, s, a, d = _plain_counts(_concat(parts), hyps_enc[stream], collar)
        subs += s
        ins += a
        dels += d
    assert subs + ins + dels == best_cost
    assignment = tuple((best_mask >> i) & 1 for i in range(n))
    return ScoreReport(
        total_ref_words=total_ref,
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        wer=_wer(best_cost, total_ref),
        assignment=assignment,
        collar=collar,
    )


# ---------------------------------------------------------------------------
# Runtime ratio


@dataclass(frozen=True)
class TimingRecord:
    audio_duration: float
    processing_duration: float

    def __post_init__(self):
        if self.audio_duration < 0 or self.processing_duration < 0:
            raise ValueError("durations must be non-negative")


@dataclass(frozen=True)
class TimingLog:
    records: tuple[TimingRecord, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "records",
            tuple(
                r if isinstance(r, TimingRecord) else TimingRecord(*r)
                for r in self.records
            ),
        )


def rtfx(log: TimingLog | Iterable) -> float:
    """Inverse real-time factor: sum(audio) / sum(processing).

    The ratio of sums deliberately differs from the mean of per-record
    ratios. Raises on an empty log or zero total processing time.
    """
    if not isinstance(log, TimingLog):
        log = TimingLog(records=tuple(log))
    if not log.records:
        raise ValueError("timing log is empty")
    proc = math.fsum(r.processing_duration for r in log.records)
    if proc <= 0:
        raise ValueError("total processing time must be positive")
    audio = math.fsum(r.audio_duration for r in log.records)
    return audio / proc
