import json
import math
import random

import pytest

from heatstream import (
    Heuristic,
    SimSpec,
    UnsupportedError,
    Utterance,
    Word,
    assign,
    orc_wer,
    orc_wer_bruteforce,
    rtfx,
    simulate,
    TimingLog,
    TimingRecord,
)
from heatstream.scoring import normalize_words

VOCAB = [f"t{i}" for i in range(10)]


def timed_words(tokens, start=0.0, step=1.0):
    return [Word(tok, start + i * step, start + i * step + 0.4) for i, tok in enumerate(tokens)]


def utt(speaker, start, end, tokens, session="s"):
    n = max(len(tokens), 1)
    words = tuple(
        Word(tok, start + (end - start) * i / n, start + (end - start) * (i + 1) / n)
        for i, tok in enumerate(tokens)
    )
    return Utterance(session, speaker, start, end, words=words)


def random_instance(rng, max_utts=8, max_words=4, time_scale=3.0):
    refs = []
    t = 0.0
    for _ in range(rng.randint(0, max_utts)):
        start = t + rng.uniform(0.0, time_scale)
        end = start + rng.uniform(0.5, time_scale)
        tokens = [rng.choice(VOCAB) for _ in range(rng.randint(0, max_words))]
        refs.append(utt(f"spk{rng.randint(0, 2)}", start, end, tokens))
        t = start
    hyps = []
    for _ in range(2):
        words = []
        t = 0.0
        for _ in range(rng.randint(0, 10)):
            t += rng.uniform(0.0, time_scale)
            words.append(Word(rng.choice(VOCAB), t, t + 0.4))
        hyps.append(words)
    return refs, hyps


# ---------------------------------------------------------------------------
# Elementary cases


def test_perfect_split_scores_zero():
    refs = [utt("A", 0.0, 2.0, ["a", "b"]), utt("B", 1.0, 3.0, ["c"])]
    hyps = [list(refs[0].words), list(refs[1].words)]
    report = orc_wer(refs, hyps, collar=5.0)
    assert report.wer == 0.0
    assert report.errors == 0
    assert report.assignment == (0, 1)
    assert report.total_ref_words == 3


def test_empty_hypotheses_all_deletions():
    refs = [utt("A", 0.0, 2.0, ["a", "b", "c"])]
    report = orc_wer(refs, [[], []])
    assert report.deletions == 3
    assert report.substitutions == 0 and report.insertions == 0
    assert report.wer == 1.0


def test_empty_reference_counts_insertions():
    report = orc_wer([], [timed_words(["x"]), []])
    assert report.insertions == 1
    assert report.total_ref_words == 0
    assert math.isinf(report.wer)
    assert orc_wer([], [[], []]).wer == 0.0


def test_utterances_accepted_as_hyp_streams():
    refs = [utt("A", 0.0, 2.0, ["a", "b"])]
    report = orc_wer(refs, [[refs[0]], []])
    assert report.wer == 0.0


def test_more_than_two_streams_unsupported():
    with pytest.raises(UnsupportedError):
        orc_wer([], [[], [], []])


def test_missing_reference_words_rejected():
    with pytest.raises(ValueError):
        orc_wer([Utterance("s", "A", 0.0, 1.0)], [[], []])


def test_negative_collar_rejected():
    with pytest.raises(ValueError):
        orc_wer([], [[], []], collar=-1.0)


def test_brute_force_refuses_large_instances():
    refs = [utt("A", float(i), i + 0.5, ["a"]) for i in range(17)]
    with pytest.raises(UnsupportedError):
        orc_wer_bruteforce(refs, [[], []])


# ---------------------------------------------------------------------------
# Collar semantics


def test_collar_forbids_distant_match():
    refs = [utt("A", 0.0, 1.0, ["hello"])]
    hyp = [Word("hello", 10.0, 10.5)]
    near = orc_wer(refs, [hyp, []], collar=math.inf)
    far = orc_wer(refs, [hyp, []], collar=5.0)
    assert near.errors == 0
    # midpoints 0.5 vs 10.25: only delete + insert remains
    assert far.errors == 2
    assert far.deletions == 1 and far.insertions == 1


def test_collar_boundary_is_inclusive():
    refs = [utt("A", 0.0, 1.0, ["x"])]  # midpoint 0.5
    hyp = [Word("x", 5.3, 5.7)]  # midpoint 5.5, distance exactly 5.0
    assert orc_wer(refs, [hyp, []], collar=5.0).errors == 0
    assert orc_wer(refs, [hyp, []], collar=4.999).errors == 2


def test_collar_monotonicity_random():
    rng = random.Random(123)
    ladder = [0.5, 1.0, 5.0, math.inf]
    for _ in range(30):
        refs, hyps = random_instance(rng, time_scale=6.0)
        wers = [orc_wer(refs, hyps, collar=c).errors for c in ladder]
        assert all(a >= b for a, b in zip(wers, wers[1:])), wers


# ---------------------------------------------------------------------------
# Oracle equivalence


def test_dp_equals_brute_force_seeded():
    rng = random.Random(77)
    for trial in range(60):
        refs, hyps = random_instance(rng)
        collar = rng.choice([math.inf, 5.0, 1.0])
        a = orc_wer(refs, hyps, collar=collar)
        b = orc_wer_bruteforce(refs, hyps, collar=collar)
        assert a.errors == b.errors, (trial, collar)
        assert a.total_ref_words == b.total_ref_words
        assert a.substitutions + a.insertions + a.deletions == a.errors
        # the DP's assignment witness must achieve the optimum
        assert _cost_of_assignment(refs, hyps, a.assignment, collar) == a.errors


def _cost_of_assignment(refs, hyps, assignment, collar):
    """Evaluate a fixed assignment with the plain per-stream distance."""
    from heatstream.scoring import _concat, _plain_grid, _prepare

    refs_enc, hyps_enc, _ = _prepare(refs, hyps, collar, normalize=True)
    cost = 0
    for stream in (0, 1):
        parts = [refs_enc[i] for i, s in enumerate(assignment) if s == stream]
        grid = _plain_grid(_concat(parts), hyps_enc[stream], collar)
        cost += int(grid[-1, -1])
    return cost


def test_symmetry_under_stream_swap():
    rng = random.Random(99)
    for _ in range(25):
        refs, hyps = random_instance(rng)
        a = orc_wer(refs, hyps, collar=5.0)
        b = orc_wer(refs, [hyps[1], hyps[0]], collar=5.0)
        assert a.errors == b.errors
        # the flipped assignment is also optimal for the swapped problem
        flipped = tuple(1 - s for s in b.assignment)
        assert _cost_of_assignment(refs, hyps, flipped, 5.0) == a.errors


def test_symmetry_exact_flip_without_ties():
    refs = [utt("A", 0.0, 2.0, ["a", "b"]), utt("B", 1.0, 3.0, ["c"])]
    hyps = [list(refs[0].words), list(refs[1].words)]
    a = orc_wer(refs, hyps)
    b = orc_wer(refs, [hyps[1], hyps[0]])
    assert b.assignment == tuple(1 - s for s in a.assignment)


def test_junk_insertions_never_reduce_errors():
    rng = random.Random(4)
    for _ in range(20):
        refs, hyps = random_instance(rng)
        base = orc_wer(refs, hyps).errors
        noisy = [list(hyps[0]) + [Word("zzz", 100.0, 100.4)], list(hyps[1])]
        assert orc_wer(refs, noisy).errors >= base


# ---------------------------------------------------------------------------
# Normalization


def test_normalization_matches_case_and_punctuation():
    refs = [utt("A", 0.0, 2.0, ["Hello,", "World!"])]
    hyps = [timed_words(["hello", "world"], 0.0), []]
    assert orc_wer(refs, hyps, collar=math.inf).errors == 0
    raw = orc_wer(refs, hyps, collar=math.inf, normalize=False)
    assert raw.errors == 2


def test_normalization_drops_punctuation_only_tokens():
    words = [Word("...", 0.0, 0.4), Word("ok", 0.5, 0.9)]
    assert [w.token for w in normalize_words(words)] == ["ok"]
    refs = [Utterance("s", "A", 0.0, 1.0, words=tuple(words))]
    report = orc_wer(refs, [timed_words(["ok"], 0.4), []])
    assert report.total_ref_words == 1
    assert report.errors == 0


def test_zero_wer_for_heat_split_of_reference():
    spec = SimSpec(num_speakers=3, total_duration=60.0, target_2spk_overlap=0.2, seed=21)
    utts, _ = simulate(spec)
    result = assign(utts, heuristic=Heuristic.SPEAKER_CONTINUITY)
    assert result.dropped == ()
    hyps = [result.stream_utterances(0), result.stream_utterances(1)]
    report = orc_wer(utts, hyps, collar=5.0)
    assert report.wer == 0.0


# ---------------------------------------------------------------------------
# Report shape


def test_report_json_layout():
    refs = [utt("A", 0.0, 2.0, ["a"])]
    report = orc_wer(refs, [list(refs[0].words), []], collar=5.0)
    payload = json.loads(report.to_json())
    assert list(payload) == [
        "wer",
        "errors",
        "substitutions",
        "insertions",
        "deletions",
        "total_ref_words",
        "assignment",
        "collar",
    ]
    assert payload["collar"] == 5.0
    unconstrained = orc_wer(refs, [list(refs[0].words), []], collar=math.inf)
    assert json.loads(unconstrained.to_json())["collar"] is None


# ---------------------------------------------------------------------------
# RTFx


def test_rtfx_simple_ratio():
    assert rtfx([(10.0, 5.0)]) == 2.0


def test_rtfx_is_ratio_of_sums():
    # mean of per-record ratios would be (2.0 + 2/3) / 2 != 1.0
    assert rtfx([(10.0, 5.0), (10.0, 15.0)]) == 1.0


def test_rtfx_errors():
    with pytest.raises(ValueError):
        rtfx([])
    with pytest.raises(ValueError):
        rtfx([(10.0, 0.0)])
    with pytest.raises(ValueError):
        TimingRecord(-1.0, 2.0)


def test_rtfx_accepts_log_type():
    log = TimingLog(records=((10.0, 4.0), (2.0, 1.0)))
    assert rtfx(log) == 12.0 / 5.0
