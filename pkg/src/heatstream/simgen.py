"""Synthetic conversations with controllable 2-/3-speaker overlap.

The generator lays down a serial dialogue backbone (utterance, gap,
utterance, ...) and injects overlap whenever the accumulated overlap falls
behind the target pace: a 2-speaker injection starts the next utterance
before the previous one ends; a 3-speaker injection stacks two utterances
over the tail of the current one. Overlapping partners always use distinct
speakers and a new utterance never reaches back past the end of the
utterance-before-last, so a speaker cannot talk over themselves and no
unplanned triple overlap can form. Overlap seconds are tracked in closed
form during placement, which keeps achieved ratios within a couple of
percentage points of the targets for sessions of a few hundred seconds.

Determinism: all randomness comes from SplitMix64, a 64-bit PRNG that any
implementation can reproduce. State update and output scrambling::

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z ^ (z >> 31)

Doubles in [0, 1) take the top 53 bits: ``(output >> 11) * 2**-53``;
bounded integers use ``output mod n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .segio import (
    DEFAULT_FRAME_LEN,
    ActivityMask,
    FrameGrid,
    Utterance,
    Word,
    canonical_order,
    interpolate_word_times,
    rasterize,
)

__all__ = [
    "SplitMix64",
    "SimSpec",
    "OverlapStats",
    "simulate",
    "overlap_stats",
]

WORDS_PER_SECOND = 2.5

_MASK64 = (1 << 64) - 1

_VOCAB_SIZE = 100


class SplitMix64:
    """Deterministic 64-bit generator (see module docstring for the spec)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        return self.next_u64() % n


@dataclass(frozen=True)
class SimSpec:
    """Parameters of one synthetic session."""

    num_speakers: int
    total_duration: float
    target_2spk_overlap: float = 0.0
    target_3spk_overlap: float = 0.0
    utterance_len: tuple[float, float] = (2.0, 6.0)
    seed: int = 0

    def __post_init__(self):
        if self.num_speakers < 1:
            raise InfeasibleError("at least one speaker is required")
        if not (math.isfinite(self.total_duration) and self.total_duration > 0):
            raise InfeasibleError("total_duration must be positive and finite")
        for name, frac in (
            ("target_2spk_overlap", self.target_2spk_overlap),
            ("target_3spk_overlap", self.target_3spk_overlap),
        ):
            if not 0.0 <= frac <= 1.0:
                raise InfeasibleError(f"{name} must lie in [0, 1], got {frac}")
        if self.target_2spk_overlap + self.target_3spk_overlap > 1.0:
            raise InfeasibleError("overlap targets must sum to at most 1")
        lo, hi = self.utterance_len
        if not (math.isfinite(hi) and 0 < lo <= hi):
            raise InfeasibleError(f"utterance_len must satisfy 0 < min <= max, got {self.utterance_len}")
        if self.target_2spk_overlap > 0 and self.num_speakers < 2:
            raise InfeasibleError("2-speaker overlap needs at least 2 speakers")
        if self.target_3spk_overlap > 0 and self.num_speakers < 3:
            raise InfeasibleError("3-speaker overlap needs at least 3 speakers")


def _speaker_names(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"spk{i:0{width}d}" for i in range(n)]


def _make_words(rng: SplitMix64, start: float, end: float) -> tuple[Word, ...]:
    count = max(1, int(round((end - start) * WORDS_PER_SECOND)))
    tokens = [f"w{rng.randrange(_VOCAB_SIZE):02d}" for _ in range(count)]
    spans = interpolate_word_times(tokens, start, end)
    return tuple(Word(token=t, start=s, end=e) for t, (s, e) in zip(tokens, spans))


def _pick_speaker(rng: SplitMix64, speakers: list[str], exclude: set[str]) -> str:
    pool = [s for s in speakers if s not in exclude]
    return pool[rng.randrange(len(pool))]


def simulate(
    spec: SimSpec,
    session_id: str | None = None,
    frame_len: float = DEFAULT_FRAME_LEN,
) -> tuple[list[Utterance], ActivityMask]:
    """Generate one session: utterances with synthetic words, plus its mask.

    Pure function of ``spec`` (and the naming arguments): the same spec
    always yields the identical corpus. Overlap targets are fractions of the
    total session duration.
    """
    if session_id is None:
        session_id = f"sim{spec.seed}"
    rng = SplitMix64(spec.seed)
    speakers = _speaker_names(spec.num_speakers)
    lo, hi = spec.utterance_len
    duration = spec.total_duration

    target2 = spec.target_2spk_overlap * duration
    target3 = spec.target_3spk_overlap * duration
    got2 = 0.0
    got3 = 0.0

    utts: list[Utterance] = []
    frontier = 0.0  # latest end so far
    floor = 0.0  # end of the utterance before the frontier one; overlap may not reach past it
    prev: Utterance | None = None

    def emit(speaker: str, start: float, length: float) -> Utterance | None:
        end = start + length
        if end > duration:
            end = duration
        if end - start < 0.05:
            return None
        u = Utterance(
            session_id=session_id,
            speaker=speaker,
            start=start,
            end=end,
            words=_make_words(rng, start, end),
        )
        utts.append(u)
        return u

    while frontier < duration - 0.05:
        length = rng.uniform(lo, hi)
        want3 = target3 > 0 and got3 < spec.target_3spk_overlap * max(frontier, 1.0)
        want2 = target2 > 0 and got2 < spec.target_2spk_overlap * max(frontier, 1.0)

        if prev is not None and want3:
            base = prev
            cap = min(base.end - floor, base.duration)
            len_b = length
            len_c = rng.uniform(lo, hi)
            delta_b = min(cap, len_b * 0.9, max(0.3, target3 - got3 + 0.5))
            delta_c = min(delta_b * 0.6, len_c * 0.9, max(0.2, target3 - got3))
            if delta_b > 0.1 and delta_c > 0.05:
                spk_b = _pick_speaker(rng, speakers, {base.speaker})
                spk_c = _pick_speaker(rng, speakers, {base.speaker, spk_b})
                u_b = emit(spk_b, base.end - delta_b, len_b)
                u_c = emit(spk_c, base.end - delta_c, len_c) if u_b else None
                if u_b and u_c:
                    # exact region lengths (emit may truncate at the session end)
                    got3 += max(0.0, min(base.end, u_b.end, u_c.end) - u_c.start)
                    got2 += max(0.0, min(base.end, u_b.end, u_c.start) - u_b.start)
                    got2 += max(0.0, min(u_b.end, u_c.end) - base.end)
                    floor = min(u_b.end, u_c.end)
                    prev = u_b if u_b.end >= u_c.end else u_c
                    frontier = max(frontier, prev.end)
                    continue
                if u_b:  # the second leg did not fit; account the pair overlap
                    got2 += max(0.0, min(base.end, u_b.end) - u_b.start)
                    floor = min(base.end, u_b.end)
                    prev = u_b if u_b.end >= base.end else base
                    frontier = max(frontier, u_b.end)
                    continue

        if prev is not None and want2:
            cap = min(prev.end - floor, prev.duration, length * 0.9)
            delta = min(cap, max(0.2, target2 - got2))
            if delta > 0.05:
                spk = _pick_speaker(rng, speakers, {prev.speaker})
                u = emit(spk, prev.end - delta, length)
                if u is not None:
                    got2 += max(0.0, min(prev.end, u.end) - u.start)
                    floor = min(prev.end, u.end)
                    prev = u if u.end >= prev.end else prev
                    frontier = max(frontier, u.end)
                    continue
                break  # no room left before the session end

        gap = rng.uniform(0.2, 1.2)
        if want2 or want3:
            gap = 0.05
        spk = _pick_speaker(rng, speakers, set())
        u = emit(spk, frontier + gap, length)
        if u is None:
            break
        floor = frontier
        prev = u
        frontier = u.end

    ordered = canonical_order(utts)
    grid = FrameGrid(frame_len=frame_len, total_duration=duration)
    return ordered, rasterize(ordered, grid)


@dataclass(frozen=True)
class OverlapStats:
    """Fractions of frames by simultaneous-speaker count.

    ``frac_*`` values are normalized by the total frame count and sum to 1;
    the ``speech_frac_*`` values renormalize over speech-only frames (zero
    when there is no speech).
    """

    frac_silence: float
    frac_1spk: float
    frac_2spk: float
    frac_3plus: float
    speech_frac_1spk: float
    speech_frac_2spk: float
    speech_frac_3plus: float

    def __post_init__(self):
        total = self.frac_silence + self.frac_1spk + self.frac_2spk + self.frac_3plus
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"total-duration fractions must sum to 1, got {total}")

    def to_json_dict(self) -> dict:
        return {
            "frac_silence": self.frac_silence,
            "frac_1spk": self.frac_1spk,
            "frac_2spk": self.frac_2spk,
            "frac_3plus": self.frac_3plus,
            "speech_frac_1spk": self.speech_frac_1spk,
            "speech_frac_2spk": self.speech_frac_2spk,
            "speech_frac_3plus": self.speech_frac_3plus,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def overlap_stats(mask: ActivityMask) -> OverlapStats:
    """Frame counts by number of simultaneously active speakers.

    An empty grid (T = 0) counts as all silence.
    """
    T = mask.num_frames
    if T == 0:
        return OverlapStats(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    active = mask.binarized().sum(axis=0) if mask.num_speakers else np.zeros(T, dtype=np.int64)
    counts = [
        int((active == 0).sum()),
        int((active == 1).sum()),
        int((active == 2).sum()),
        int((active >= 3).sum()),
    ]
    speech = T - counts[0]
    return OverlapStats(
        frac_silence=counts[0] / T,
        frac_1spk=counts[1] / T,
        frac_2spk=counts[2] / T,
        frac_3plus=counts[3] / T,
        speech_frac_1spk=counts[1] / speech if speech else 0.0,
        speech_frac_2spk=counts[2] / speech if speech else 0.0,
        speech_frac_3plus=counts[3] / speech if speech else 0.0,
    )
