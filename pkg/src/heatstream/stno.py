"""Per-frame conditioning masks over {Silence, Target, Non-target, Overlap}.

Given a target activity row ``t`` and other rows combined by noisy-OR into
``n = 1 - prod_j(1 - a_j)``, each frame's class probabilities are::

    S = (1-t)(1-n)    T = t(1-n)    N = (1-t)n    O = t*n

Rows always sum to 1; binary inputs yield exact one-hot rows. The masks
drive a per-class affine transform of encoder hidden states: each class owns
a (d x d, d) weight/bias pair and per frame the four transformed vectors are
convexly combined with the mask row as scalar weights.

Masks serialize to JSON (row-major) and to a little-endian binary file:
magic ``STNO``, uint32 frame count T, then T*4 float64 in frame-major order
(S, T, N, O per frame).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ParseError
from .segio import ActivityMask

__all__ = [
    "STNO_COLUMNS",
    "StnoMask",
    "FddtParams",
    "stno",
    "stno_for_streams",
    "fddt_apply",
    "StnoEncoder",
]

STNO_COLUMNS = ("silence", "target", "non_target", "overlap")

_ROW_SUM_TOL = 1e-9

_MAGIC = b"STNO"


class StnoMask:
    """T x 4 matrix of class probabilities, columns ordered (S, T, N, O)."""

    def __init__(self, classes: np.ndarray):
        classes = np.asarray(classes, dtype=np.float64)
        if classes.ndim != 2 or classes.shape[1] != 4:
            raise ValueError(f"classes must be T x 4, got shape {classes.shape}")
        if classes.size:
            if classes.min() < 0.0 or classes.max() > 1.0:
                raise ValueError("class probabilities must lie in [0, 1]")
            sums = classes.sum(axis=1)
            worst = np.abs(sums - 1.0).max()
            if worst > _ROW_SUM_TOL:
                raise ValueError(f"rows must sum to 1 within {_ROW_SUM_TOL}, worst deviation {worst}")
        classes = classes.copy()
        classes.setflags(write=False)
        self.classes = classes

    @property
    def num_frames(self) -> int:
        return self.classes.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StnoMask):
            return NotImplemented
        return self.classes.shape == other.classes.shape and bool(
            np.array_equal(self.classes, other.classes)
        )

    def __repr__(self) -> str:
        return f"StnoMask(frames={self.num_frames})"

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "frame_count": self.num_frames,
            "columns": list(STNO_COLUMNS),
            "classes": [[float(v) for v in row] for row in self.classes],
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str | bytes) -> "StnoMask":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
        if not isinstance(payload, dict) or "classes" not in payload:
            raise ParseError("STNO JSON must be an object with a 'classes' array")
        if "columns" in payload and tuple(payload["columns"]) != STNO_COLUMNS:
            raise ParseError(f"unexpected column order {payload['columns']!r}")
        classes = np.asarray(payload["classes"], dtype=np.float64)
        if classes.size == 0:
            classes = classes.reshape(0, 4)
        if "frame_count" in payload and payload["frame_count"] != classes.shape[0]:
            raise ParseError("frame_count does not match the classes array")
        try:
            return cls(classes)
        except ValueError as exc:
            raise ParseError(str(exc)) from None

    def to_bytes(self) -> bytes:
        body = np.ascontiguousarray(self.classes, dtype="<f8").tobytes()
        return _MAGIC + struct.pack("<I", self.num_frames) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "StnoMask":
        if len(data) < 8 or data[:4] != _MAGIC:
            raise ParseError("not an STNO binary file (bad magic)")
        (frames,) = struct.unpack("<I", data[4:8])
        expected = 8 + frames * 4 * 8
        if len(data) != expected:
            raise ParseError(f"STNO payload size mismatch: {len(data)} bytes, expected {expected}")
        classes = np.frombuffer(data[8:], dtype="<f8").reshape(frames, 4).astype(np.float64)
        try:
            return cls(classes)
        except ValueError as exc:
            raise ParseError(str(exc)) from None


def stno(target: Sequence[float] | np.ndarray, others: Sequence | np.ndarray) -> StnoMask:
    """Build the class mask for one target row against any number of others.

    ``others`` is a (J, T) array (J may be 0); soft values combine by
    noisy-OR, which reduces to set union on binary rows.
    """
    t = np.asarray(target, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError(f"target must be 1-D, got shape {t.shape}")
    o = np.asarray(others, dtype=np.float64)
    if o.size == 0:
        o = o.reshape(0, t.shape[0])
    if o.ndim != 2 or o.shape[1] != t.shape[0]:
        raise ValueError(f"others must be J x {t.shape[0]}, got shape {o.shape}")
    for name, arr in (("target", t), ("others", o)):
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError(f"{name} activities must lie in [0, 1]")
    n = 1.0 - np.prod(1.0 - o, axis=0)
    classes = np.stack(
        [(1.0 - t) * (1.0 - n), t * (1.0 - n), (1.0 - t) * n, t * n],
        axis=1,
    )
    return StnoMask(classes)


def stno_for_streams(heat: ActivityMask) -> tuple[StnoMask, StnoMask]:
    """One mask per stream of a 2-stream activity matrix.

    Stream k is the target and the opposite stream the sole non-target.
    """
    if heat.num_speakers != 2:
        raise ValueError(f"expected exactly 2 streams, got {heat.num_speakers}")
    rows = heat.frames
    return (
        stno(rows[0], rows[1:2]),
        stno(rows[1], rows[0:1]),
    )


@dataclass(frozen=True)
class FddtParams:
    """Per-class affine transform parameters sharing one dimension.

    ``weights`` has shape (4, d, d) and ``biases`` (4, d), both in
    (S, T, N, O) class order; ``layer`` records which encoder layer the
    parameters belong to.
    """

    weights: np.ndarray
    biases: np.ndarray
    layer: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 3 or w.shape[0] != 4 or w.shape[1] != w.shape[2]:
            raise ValueError(f"weights must be (4, d, d), got shape {w.shape}")
        if b.shape != (4, w.shape[1]):
            raise ValueError(f"biases must be (4, {w.shape[1]}), got shape {b.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def identity(cls, dim: int, layer: int = 0) -> "FddtParams":
        return cls(
            weights=np.broadcast_to(np.eye(dim), (4, dim, dim)).copy(),
            biases=np.zeros((4, dim)),
            layer=layer,
        )


def fddt_apply(z: np.ndarray, mask: StnoMask, params: FddtParams) -> np.ndarray:
    """Mask-weighted combination of the four per-class affine transforms.

    ``z`` is a (d, T) matrix of frame vectors; the output frame t is
    ``sum_C mask[t, C] * (W_C @ z[:, t] + b_C)``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"hidden states must be d x T, got shape {z.shape}")
    d, T = z.shape
    if d != params.dim:
        raise ValueError(f"hidden dimension {d} does not match parameters ({params.dim})")
    if T != mask.num_frames:
        raise ValueError(f"{T} frames of hidden states but {mask.num_frames} mask rows")
    # accumulate class by class: a one-hot mask then collapses bit-exactly
    # to the single matching transform
    out = np.zeros_like(z)
    for c in range(4):
        out += (params.weights[c] @ z + params.biases[c][:, None]) * mask.classes[:, c]
    return out


class StnoEncoder(BaseEstimator, TransformerMixin):
    """Transformer from a 2-stream activity mask to the pair of class masks.

    Stateless; ``fit`` is a no-op so the encoder drops into scikit-learn
    pipelines after a :class:`~heatstream.heat.HeatAssigner`.
    """

    def fit(self, X=None, y=None) -> "StnoEncoder":
        return self

    def transform(self, X: ActivityMask) -> tuple[StnoMask, StnoMask]:
        return stno_for_streams(X)
