import json
from pathlib import Path

import numpy as np
import pytest

from heatstream import StnoMask, parse_rttm, parse_seglst, write_seglst
from heatstream.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# convert


def test_convert_golden_first_available(tmp_path, capsys):
    out = tmp_path / "streams.rttm"
    code, _, _ = run(
        capsys,
        "convert",
        str(DATA / "demo_three_speakers.rttm"),
        "--heuristic",
        "first-available",
        "-o",
        str(out),
    )
    assert code == 0
    assert out.read_bytes() == (DATA / "demo_first_available.rttm").read_bytes()


def test_convert_assignment_json(tmp_path, capsys):
    assignment = tmp_path / "assignment.json"
    code, out, _ = run(
        capsys,
        "convert",
        str(DATA / "demo_three_speakers.rttm"),
        "--heuristic",
        "speaker-continuity",
        "--assignment",
        str(assignment),
    )
    assert code == 0
    payload = json.loads(assignment.read_text())
    assert payload["heuristic"] == "speaker-continuity"
    (session,) = payload["sessions"]
    assert session["session_id"] == "demo0"
    streams = [u["stream"] for u in session["utterances"]]
    assert streams == [0, 1, 0, 1, 1, 0]
    assert session["dropped"] == []
    assert session["violations"] == []
    # stdout carried the stream RTTM
    assert out.count("SPEAKER demo0") == 6


def test_convert_single_utterance(tmp_path, capsys):
    src = tmp_path / "one.rttm"
    src.write_text("SPEAKER s 1 0.000 1.000 <NA> <NA> A <NA> <NA>\n")
    code, out, _ = run(capsys, "convert", str(src))
    assert code == 0
    assert "stream0" in out and "stream1" not in out


def test_convert_drop_policy_lists_dropped(tmp_path, capsys):
    src = tmp_path / "pileup.rttm"
    src.write_text(
        "SPEAKER s 1 0.000 4.000 <NA> <NA> A <NA> <NA>\n"
        "SPEAKER s 1 1.000 4.000 <NA> <NA> B <NA> <NA>\n"
        "SPEAKER s 1 2.000 4.000 <NA> <NA> C <NA> <NA>\n"
    )
    assignment = tmp_path / "a.json"
    code, _, _ = run(capsys, "convert", str(src), "--overflow", "drop", "--assignment", str(assignment))
    assert code == 0
    (session,) = json.loads(assignment.read_text())["sessions"]
    assert session["dropped"] == [2]
    assert session["utterances"][2]["stream"] is None


def test_convert_groups_sessions(tmp_path, capsys):
    src = tmp_path / "two.rttm"
    src.write_text(
        "SPEAKER s2 1 0.000 1.000 <NA> <NA> A <NA> <NA>\n"
        "SPEAKER s1 1 0.000 1.000 <NA> <NA> B <NA> <NA>\n"
    )
    code, out, _ = run(capsys, "convert", str(src))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split()[1] == "s1"
    assert lines[1].split()[1] == "s2"


# ---------------------------------------------------------------------------
# stno


def test_stno_json_outputs(tmp_path, capsys):
    out_dir = tmp_path / "masks"
    code, out, _ = run(
        capsys,
        "stno",
        str(DATA / "demo_three_speakers.rttm"),
        "--output-dir",
        str(out_dir),
    )
    assert code == 0
    written = json.loads(out)["written"]
    assert len(written) == 2
    for path in written:
        mask = StnoMask.from_json(Path(path).read_text())
        assert mask.num_frames == 1600
        assert np.abs(mask.classes.sum(axis=1) - 1.0).max() <= 1e-9


def test_stno_binary_and_precomputed_streams(tmp_path, capsys):
    streams = tmp_path / "streams.rttm"
    run(capsys, "convert", str(DATA / "demo_three_speakers.rttm"), "-o", str(streams))
    out_dir = tmp_path / "masks"
    code, out, _ = run(capsys, "stno", str(streams), "--format", "bin", "--output-dir", str(out_dir))
    assert code == 0
    written = json.loads(out)["written"]
    assert all(p.endswith(".bin") for p in written)
    mask = StnoMask.from_bytes(Path(written[0]).read_bytes())
    assert mask.num_frames == 1600


# ---------------------------------------------------------------------------
# score


def _split_reference(ref_path: Path, assignment: dict, tmp_path: Path):
    """Build per-stream hypothesis SegLSTs from a convert assignment JSON."""
    utts = parse_seglst(ref_path.read_text())
    by_session = {}
    for u in utts:
        by_session.setdefault(u.session_id, []).append(u)
    streams = {0: [], 1: []}
    for session in assignment["sessions"]:
        ordered = sorted(by_session[session["session_id"]], key=lambda u: (u.start, u.end, u.speaker))
        for entry in session["utterances"]:
            if entry["stream"] is not None:
                streams[entry["stream"]].append(ordered[entry["index"]])
    paths = []
    for k in (0, 1):
        p = tmp_path / f"hyp{k}.json"
        p.write_text(write_seglst(streams[k]))
        paths.append(p)
    return paths


def test_score_round_trip_is_zero(tmp_path, capsys):
    ref = tmp_path / "ref.json"
    rttm = tmp_path / "ref.rttm"
    code, _, _ = run(
        capsys,
        "simulate",
        "--num-speakers",
        "3",
        "--duration",
        "90",
        "--overlap2",
        "0.2",
        "--seed",
        "11",
        "--rttm",
        str(rttm),
        "--seglst",
        str(ref),
    )
    assert code == 0
    assignment = tmp_path / "assignment.json"
    code, _, _ = run(capsys, "convert", str(rttm), "--assignment", str(assignment), "-o", str(tmp_path / "s.rttm"))
    assert code == 0
    hyp0, hyp1 = _split_reference(ref, json.loads(assignment.read_text()), tmp_path)
    code, out, _ = run(capsys, "score", str(ref), str(hyp0), str(hyp1), "--collar", "5")
    assert code == 0
    payload = json.loads(out)
    assert payload["wer"] == 0.0
    assert payload["errors"] == 0
    assert payload["collar"] == 5.0
    assert "sessions" in payload


def test_score_counts_errors(tmp_path, capsys):
    ref = tmp_path / "ref.json"
    ref.write_text(
        json.dumps(
            [
                {"session_id": "s", "speaker": "A", "start_time": 0.0, "end_time": 2.0, "words": "a b"},
                {"session_id": "s", "speaker": "B", "start_time": 1.0, "end_time": 3.0, "words": "c"},
            ]
        )
    )
    hyp0 = tmp_path / "h0.json"
    hyp0.write_text(json.dumps([{"session_id": "s", "speaker": "x", "start_time": 0.0, "end_time": 2.0, "words": "a x"}]))
    hyp1 = tmp_path / "h1.json"
    hyp1.write_text(json.dumps([{"session_id": "s", "speaker": "x", "start_time": 1.0, "end_time": 3.0, "words": "c"}]))
    code, out, _ = run(capsys, "score", str(ref), str(hyp0), str(hyp1))
    assert code == 0
    payload = json.loads(out)
    assert payload["substitutions"] == 1
    assert payload["total_ref_words"] == 3
    assert payload["wer"] == pytest.approx(1 / 3)
    assert payload["assignment"] == [0, 1]


def test_score_infinite_collar(tmp_path, capsys):
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps([{"session_id": "s", "speaker": "A", "start_time": 0.0, "end_time": 1.0, "words": "a"}]))
    hyp0 = tmp_path / "h0.json"
    hyp0.write_text(json.dumps([{"session_id": "s", "speaker": "x", "start_time": 500.0, "end_time": 501.0, "words": "a"}]))
    hyp1 = tmp_path / "h1.json"
    hyp1.write_text("[]")
    code, out, _ = run(capsys, "score", str(ref), str(hyp0), str(hyp1), "--collar", "inf")
    payload = json.loads(out)
    assert code == 0
    assert payload["wer"] == 0.0
    assert payload["collar"] is None


# ---------------------------------------------------------------------------
# stats


def test_stats_on_demo(capsys):
    code, out, _ = run(capsys, "stats", str(DATA / "demo_three_speakers.rttm"))
    assert code == 0
    payload = json.loads(out)
    # hand computation: 1.5 s silence, 13.0 s single, 1.5 s double of 16 s
    assert payload["frac_silence"] == pytest.approx(1.5 / 16, abs=1e-9)
    assert payload["frac_1spk"] == pytest.approx(13.0 / 16, abs=1e-9)
    assert payload["frac_2spk"] == pytest.approx(1.5 / 16, abs=1e-9)
    assert payload["frac_3plus"] == 0.0
    assert payload["speech_frac_2spk"] == pytest.approx(1.5 / 14.5, abs=1e-9)


# ---------------------------------------------------------------------------
# simulate


def test_simulate_outputs_parse_and_agree(tmp_path, capsys):
    rttm = tmp_path / "sim.rttm"
    seglst = tmp_path / "sim.json"
    code, _, _ = run(
        capsys,
        "simulate",
        "--duration",
        "60",
        "--overlap2",
        "0.1",
        "--seed",
        "4",
        "--session-id",
        "mtg1",
        "--rttm",
        str(rttm),
        "--seglst",
        str(seglst),
    )
    assert code == 0
    from_rttm = parse_rttm(rttm.read_text())
    from_seglst = parse_seglst(seglst.read_text())
    assert [u.session_id for u in from_rttm] == ["mtg1"] * len(from_rttm)
    assert [(u.start, u.end) for u in from_rttm] == [(u.start, u.end) for u in from_seglst]


def test_simulate_requires_an_output(capsys):
    code, _, err = run(capsys, "simulate")
    assert code == 1
    assert "--rttm" in err


def test_simulate_infeasible_spec_exit_code(tmp_path, capsys):
    code, _, err = run(
        capsys,
        "simulate",
        "--num-speakers",
        "1",
        "--overlap2",
        "0.2",
        "--rttm",
        str(tmp_path / "x.rttm"),
    )
    assert code == 3
    assert "speakers" in err


# ---------------------------------------------------------------------------
# rtfx


def test_rtfx_object_records(tmp_path, capsys):
    timing = tmp_path / "t.json"
    timing.write_text(json.dumps([{"audio_duration": 10, "processing_duration": 5}]))
    code, out, _ = run(capsys, "rtfx", str(timing))
    assert code == 0
    assert json.loads(out) == 2.0


def test_rtfx_pairs_ratio_of_sums(tmp_path, capsys):
    timing = tmp_path / "t.json"
    timing.write_text("[[10, 5], [10, 15]]")
    code, out, _ = run(capsys, "rtfx", str(timing))
    assert code == 0
    assert json.loads(out) == 1.0


def test_rtfx_zero_processing_is_infeasible(tmp_path, capsys):
    timing = tmp_path / "t.json"
    timing.write_text("[[10, 0]]")
    code, _, err = run(capsys, "rtfx", str(timing))
    assert code == 3


def test_rtfx_malformed_json_is_parse_error(tmp_path, capsys):
    timing = tmp_path / "t.json"
    timing.write_text("{nope")
    code, _, err = run(capsys, "rtfx", str(timing))
    assert code == 2


def test_pipeline_simulate_convert_stno(tmp_path, capsys):
    rttm = tmp_path / "sim.rttm"
    code, _, _ = run(capsys, "simulate", "--duration", "45", "--overlap2", "0.15", "--seed", "8", "--rttm", str(rttm))
    assert code == 0
    streams = tmp_path / "streams.rttm"
    code, _, _ = run(capsys, "convert", str(rttm), "-o", str(streams))
    assert code == 0
    out_dir = tmp_path / "masks"
    code, out, _ = run(capsys, "stno", str(streams), "--output-dir", str(out_dir))
    assert code == 0
    written = json.loads(out)["written"]
    assert len(written) == 2
    for path in written:
        mask = StnoMask.from_json(Path(path).read_text())
        assert np.abs(mask.classes.sum(axis=1) - 1.0).max() <= 1e-9


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_option_is_usage_error(capsys):
    code, _, err = run(capsys, "convert", "--nope")
    assert code == 1


def test_missing_file_is_usage_error(capsys):
    code, _, err = run(capsys, "convert", "/does/not/exist.rttm")
    assert code == 1


def test_bad_rttm_is_parse_error(tmp_path, capsys):
    src = tmp_path / "bad.rttm"
    src.write_text("SPEAKER s 1 oops 1.0 <NA> <NA> A <NA> <NA>\n")
    code, _, err = run(capsys, "convert", str(src))
    assert code == 2
    assert "parse error" in err


def test_help_exits_zero(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    assert "convert" in out and "score" in out
