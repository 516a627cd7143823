import json
from pathlib import Path

import pytest

from heatstream import Utterance

DATA_DIR = Path(__file__).parent / "data"


def demo_utterances() -> list[Utterance]:
    """Three speakers, six utterances; the overlap structure exercised by
    every heuristic golden in demo_assignments.json."""
    spans = [
        ("A", 0.0, 4.0),
        ("B", 3.0, 6.0),
        ("A", 6.5, 9.0),
        ("C", 8.5, 11.0),
        ("B", 11.5, 14.0),
        ("A", 14.5, 16.0),
    ]
    return [Utterance("demo0", spk, s, e) for spk, s, e in spans]


@pytest.fixture
def demo_utts():
    return demo_utterances()


@pytest.fixture
def demo_goldens():
    return json.loads((DATA_DIR / "demo_assignments.json").read_text())


@pytest.fixture
def data_dir():
    return DATA_DIR
