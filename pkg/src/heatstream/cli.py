"""Command-line front end.

Subcommands::

    convert    RTTM -> 2-stream RTTM (+ assignment JSON)
    stno       RTTM (raw or already 2-stream) -> per-stream class-mask files
    score      reference SegLST + 2 hypothesis SegLSTs -> score report JSON
    stats      RTTM -> overlap statistics JSON
    simulate   synthetic session -> RTTM and/or SegLST
    rtfx       timing log JSON -> inverse real-time factor

Exit codes: 0 success, 1 usage/IO error, 2 parse error, 3 infeasible or
unsupported input. All output is UTF-8 text (RTTM or JSON).
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .errors import InfeasibleError, ParseError, UnsupportedError
from .heat import Heuristic, OverflowPolicy, assign
from .scoring import TimingLog, TimingRecord, orc_wer, rtfx as compute_rtfx
from .segio import (
    DEFAULT_FRAME_LEN,
    FrameGrid,
    canonical_order,
    group_by_session,
    parse_rttm,
    parse_seglst,
    rasterize,
    write_rttm,
    write_seglst,
)
from .simgen import OverlapStats, SimSpec, simulate as run_simulation
from .stno import stno_for_streams

_HEURISTICS = [h.value for h in Heuristic]
_POLICIES = [p.value for p in OverflowPolicy]


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _round3(t: float) -> float:
    return round(t, 3)


@click.group()
def cli():
    """Convert diarization into two speaker-agnostic activity streams,
    derive conditioning masks, and score multi-stream transcripts."""


@cli.command()
@click.argument("rttm", type=str)
@click.option("--heuristic", type=click.Choice(_HEURISTICS), default=Heuristic.SPEAKER_CONTINUITY.value, show_default=True)
@click.option("--overflow", type=click.Choice(_POLICIES), default=OverflowPolicy.FORCE.value, show_default=True)
@click.option("--frame-len", type=float, default=DEFAULT_FRAME_LEN, show_default=True)
@click.option("-o", "--output", type=str, default="-", help="Output RTTM path ('-' for stdout).")
@click.option("--assignment", "assignment_path", type=str, default=None, help="Also write an assignment JSON file.")
def convert(rttm, heuristic, overflow, frame_len, output, assignment_path):
    """Split an RTTM's utterances into the streams 'stream0'/'stream1'."""
    utts = parse_rttm(_read(rttm))
    sessions = group_by_session(utts)
    out_lines = []
    session_reports = []
    for sid, session_utts in sessions.items():
        result = assign(session_utts, heuristic=heuristic, overflow=overflow, frame_len=frame_len)
        vector = result.assignment_vector()
        stream_utts = [
            dataclasses.replace(result.utterances[i], speaker=f"stream{s}")
            for i, s in result.assignments
        ]
        out_lines.append(write_rttm(canonical_order(stream_utts)))
        session_reports.append(
            {
                "session_id": sid,
                "utterances": [
                    {
                        "index": i,
                        "speaker": u.speaker,
                        "start": _round3(u.start),
                        "end": _round3(u.end),
                        "stream": vector[i],
                    }
                    for i, u in enumerate(result.utterances)
                ],
                "dropped": list(result.dropped),
                "violations": list(result.violations),
            }
        )
    _write(output, "".join(out_lines))
    if assignment_path is not None:
        payload = {"heuristic": heuristic, "overflow": overflow, "sessions": session_reports}
        _write(assignment_path, json.dumps(payload, indent=2) + "\n")


@cli.command("stno")
@click.argument("rttm", type=str)
@click.option("--heuristic", type=click.Choice(_HEURISTICS), default=Heuristic.SPEAKER_CONTINUITY.value, show_default=True)
@click.option("--overflow", type=click.Choice(_POLICIES), default=OverflowPolicy.FORCE.value, show_default=True)
@click.option("--frame-len", type=float, default=DEFAULT_FRAME_LEN, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "bin"]), default="json", show_default=True)
@click.option("--output-dir", type=str, required=True)
def stno_cmd(rttm, heuristic, overflow, frame_len, fmt, output_dir):
    """Derive the per-stream {silence, target, non-target, overlap} masks.

    Input speakers named exactly 'stream0'/'stream1' are taken as streams
    as-is; anything else is first split with the chosen heuristic.
    """
    utts = parse_rttm(_read(rttm))
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for sid, session_utts in group_by_session(utts).items():
        speakers = {u.speaker for u in session_utts}
        if speakers == {"stream0", "stream1"}:
            total = max(u.end for u in session_utts)
            mask = rasterize(session_utts, FrameGrid(frame_len=frame_len, total_duration=total))
        else:
            result = assign(session_utts, heuristic=heuristic, overflow=overflow, frame_len=frame_len)
            mask = result.streams
        for k, stream_mask in enumerate(stno_for_streams(mask)):
            suffix = "json" if fmt == "json" else "bin"
            path = out_dir / f"{sid}.stream{k}.stno.{suffix}"
            if fmt == "json":
                path.write_text(stream_mask.to_json(), encoding="utf-8")
            else:
                path.write_bytes(stream_mask.to_bytes())
            written.append(str(path))
    click.echo(json.dumps({"written": written}, indent=2))


@cli.command()
@click.argument("reference", type=str)
@click.argument("hyp_stream0", type=str)
@click.argument("hyp_stream1", type=str)
@click.option("--collar", type=float, default=5.0, show_default=True, help="Seconds; use 'inf' to disable.")
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("-o", "--output", type=str, default="-")
def score(reference, hyp_stream0, hyp_stream1, collar, normalize, output):
    """Time-constrained optimal-reference-combination WER of two streams."""
    refs = group_by_session(parse_seglst(_read(reference)))
    hyp0 = group_by_session(parse_seglst(_read(hyp_stream0)))
    hyp1 = group_by_session(parse_seglst(_read(hyp_stream1)))
    sessions = sorted(set(refs) | set(hyp0) | set(hyp1))
    totals = {"substitutions": 0, "insertions": 0, "deletions": 0, "total_ref_words": 0}
    assignment = []
    per_session = {}
    for sid in sessions:
        report = orc_wer(
            refs.get(sid, []),
            [hyp0.get(sid, []), hyp1.get(sid, [])],
            collar=collar,
            normalize=normalize,
        )
        per_session[sid] = report.to_json_dict()
        for key in ("substitutions", "insertions", "deletions", "total_ref_words"):
            totals[key] += getattr(report, key)
        assignment.extend(report.assignment)
    errors = totals["substitutions"] + totals["insertions"] + totals["deletions"]
    if totals["total_ref_words"]:
        wer = errors / totals["total_ref_words"]
    else:
        wer = 0.0 if errors == 0 else math.inf
    payload = {
        "wer": None if math.isinf(wer) else wer,
        "errors": errors,
        "substitutions": totals["substitutions"],
        "insertions": totals["insertions"],
        "deletions": totals["deletions"],
        "total_ref_words": totals["total_ref_words"],
        "assignment": assignment,
        "collar": None if math.isinf(collar) else collar,
        "sessions": per_session,
    }
    _write(output, json.dumps(payload, indent=2) + "\n")


@cli.command()
@click.argument("rttm", type=str)
@click.option("--frame-len", type=float, default=DEFAULT_FRAME_LEN, show_default=True)
@click.option("-o", "--output", type=str, default="-")
def stats(rttm, frame_len, output):
    """Overlap statistics: frame fractions by concurrent speaker count."""
    utts = parse_rttm(_read(rttm))
    counts = np.zeros(4, dtype=np.int64)
    total_frames = 0
    for sid, session_utts in group_by_session(utts).items():
        total = max(u.end for u in session_utts)
        mask = rasterize(session_utts, FrameGrid(frame_len=frame_len, total_duration=total))
        active = mask.binarized().sum(axis=0)
        counts[0] += int((active == 0).sum())
        counts[1] += int((active == 1).sum())
        counts[2] += int((active == 2).sum())
        counts[3] += int((active >= 3).sum())
        total_frames += mask.num_frames
    if total_frames == 0:
        stats_obj = OverlapStats(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    else:
        speech = total_frames - counts[0]
        stats_obj = OverlapStats(
            frac_silence=counts[0] / total_frames,
            frac_1spk=counts[1] / total_frames,
            frac_2spk=counts[2] / total_frames,
            frac_3plus=counts[3] / total_frames,
            speech_frac_1spk=counts[1] / speech if speech else 0.0,
            speech_frac_2spk=counts[2] / speech if speech else 0.0,
            speech_frac_3plus=counts[3] / speech if speech else 0.0,
        )
    _write(output, stats_obj.to_json())


@cli.command("simulate")
@click.option("--num-speakers", type=int, default=4, show_default=True)
@click.option("--duration", type=float, default=600.0, show_default=True)
@click.option("--overlap2", type=float, default=0.0, show_default=True, help="Target 2-speaker overlap fraction of total duration.")
@click.option("--overlap3", type=float, default=0.0, show_default=True, help="Target 3-speaker overlap fraction of total duration.")
@click.option("--utt-min", type=float, default=2.0, show_default=True)
@click.option("--utt-max", type=float, default=6.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--session-id", type=str, default=None)
@click.option("--rttm", "rttm_path", type=str, default=None, help="Write the session as RTTM.")
@click.option("--seglst", "seglst_path", type=str, default=None, help="Write the session as SegLST.")
def simulate_cmd(num_speakers, duration, overlap2, overlap3, utt_min, utt_max, seed, session_id, rttm_path, seglst_path):
    """Generate a synthetic conversation with controllable overlap."""
    if rttm_path is None and seglst_path is None:
        raise click.UsageError("provide --rttm and/or --seglst")
    if rttm_path == "-" and seglst_path == "-":
        raise click.UsageError("only one of --rttm/--seglst may write to stdout")
    spec = SimSpec(
        num_speakers=num_speakers,
        total_duration=duration,
        target_2spk_overlap=overlap2,
        target_3spk_overlap=overlap3,
        utterance_len=(utt_min, utt_max),
        seed=seed,
    )
    utts, _ = run_simulation(spec, session_id=session_id)
    if rttm_path is not None:
        _write(rttm_path, write_rttm(utts))
    if seglst_path is not None:
        _write(seglst_path, write_seglst(utts))


@cli.command("rtfx")
@click.argument("timing", type=str)
def rtfx_cmd(timing):
    """Ratio of total audio duration to total processing duration.

    The timing log is a JSON array of {"audio_duration": ..,
    "processing_duration": ..} objects (bare [audio, processing] pairs are
    also accepted).
    """
    text = _read(timing)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ParseError("timing log must be a JSON array")
    records = []
    for index, item in enumerate(data):
        try:
            if isinstance(item, dict):
                records.append(TimingRecord(float(item["audio_duration"]), float(item["processing_duration"])))
            elif isinstance(item, list) and len(item) == 2:
                records.append(TimingRecord(float(item[0]), float(item[1])))
            else:
                raise ParseError(f"bad timing record {item!r}", location=index)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad timing record: {exc}", location=index) from None
    try:
        value = compute_rtfx(TimingLog(records=tuple(records)))
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from None
    click.echo(json.dumps(value))


def main(argv=None) -> int:
    """Entry point mapping errors onto the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        return 1
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        return 2
    except (InfeasibleError, UnsupportedError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
