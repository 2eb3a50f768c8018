"""Fixed-rate saliency frames sampled from the per-pixel score buffer.

Frame k is taken at t = k * frame_period (k = 1 .. floor(t_end / period))
and holds, per pixel, the latest raw score with timestamp <= t whose age
is within ``staleness``.  No interpolation between events.

Raw frame file layout (little endian)::

    "SFR0" | width u16 | height u16 | frame_period_us u32 | frame_count u32
    then per frame: t_frame u64, width*height float32 values, row-major
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import EvsalError, FormatError, ValidationError
from .events import SensorGeometry
from .saliency import ScoredStream, normalize_scores

FRAME_MAGIC = b"SFR0"
FRAME_HEADER = struct.Struct("<4sHHII")
DEFAULT_FRAME_PERIOD = 10_000
DEFAULT_STALENESS = 320_000


@dataclass
class SaliencyFrame:
    t_frame: int
    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValidationError(f"frame must be 2-D, got shape {self.values.shape}")


class FrameFile(NamedTuple):
    geometry: SensorGeometry
    frame_period: int
    times: np.ndarray
    values: np.ndarray  # (n_frames, height, width) float32

    def frames(self) -> Iterator[SaliencyFrame]:
        for t, v in zip(self.times, self.values):
            yield SaliencyFrame(int(t), v, not bool(v.max() > 0) if v.size else True)


def frame_count(t_end: int, frame_period: int) -> int:
    return max(int(t_end) // int(frame_period), 0)


def iter_frames(
    scored: ScoredStream,
    geometry: SensorGeometry,
    frame_period: int = DEFAULT_FRAME_PERIOD,
    staleness: float = DEFAULT_STALENESS,
    normalization: str = "global",
    t_end: int | None = None,
) -> Iterator[SaliencyFrame]:
    """Yield frames one at a time (constant memory in the stream length).

    ``normalization="global"`` divides by the largest raw score in the whole
    stream; ``"per_frame"`` by each frame's own maximum.  ``staleness`` may
    be ``math.inf`` to keep every pixel's latest score indefinitely.
    """
    if frame_period <= 0:
        raise ValueError("frame_period must be positive")
    if staleness < 0:
        raise ValueError("staleness must be non-negative")
    events, scores = scored.events, scored.scores
    if len(events) == 0 and t_end is None:
        return
    ts = events["t"].astype(np.int64)
    if t_end is None:
        t_end = int(ts[-1])
    n_frames = frame_count(t_end, frame_period)
    peak = float(scores.max()) if len(scores) else 0.0

    score = np.zeros(geometry.shape, dtype=np.float64)
    stamp = np.full(geometry.shape, -1, dtype=np.int64)
    flat = events["y"].astype(np.int64) * geometry.width + events["x"].astype(np.int64)
    start = 0
    for k in range(1, n_frames + 1):
        t_frame = k * frame_period
        stop = int(np.searchsorted(ts, t_frame, side="right"))
        if stop > start:
            # last write per pixel wins
            idx = flat[start:stop][::-1]
            uniq, first = np.unique(idx, return_index=True)
            src = stop - 1 - first
            score.flat[uniq] = scores[src]
            stamp.flat[uniq] = ts[src]
            start = stop
        live = stamp >= 0
        if not math.isinf(staleness):
            live &= (t_frame - stamp) <= staleness
        raw = np.where(live, score, 0.0)
        if normalization == "global":
            values = raw / peak if peak > 0 else raw
            degenerate = not bool(values.max() > 0)
        elif normalization == "per_frame":
            values, degenerate = normalize_scores(raw, "per_frame")
        else:
            raise ValueError(f"unknown normalization mode {normalization!r}")
        yield SaliencyFrame(t_frame, values, bool(degenerate))


def render_frames(scored, geometry, frame_period=DEFAULT_FRAME_PERIOD,
                  staleness=DEFAULT_STALENESS, normalization="global",
                  t_end=None) -> list[SaliencyFrame]:
    return list(iter_frames(scored, geometry, frame_period, staleness, normalization, t_end))


def write_frames(
    frames: Iterable[SaliencyFrame],
    geometry: SensorGeometry,
    frame_period: int = DEFAULT_FRAME_PERIOD,
    dest: str | Path | None = None,
) -> bytes | int:
    """Serialize frames to the raw format.

    Returns the bytes when ``dest`` is None, otherwise streams to the file
    (patching the frame count at the end) and returns the frame count.
    """
    if dest is None:
        chunks = [_frame_bytes(i, f, geometry) for i, f in enumerate(frames)]
        return FRAME_HEADER.pack(FRAME_MAGIC, geometry.width, geometry.height,
                                 frame_period, len(chunks)) + b"".join(chunks)
    n = 0
    with open(dest, "wb") as fh:
        fh.write(FRAME_HEADER.pack(FRAME_MAGIC, geometry.width, geometry.height, frame_period, 0))
        for i, frame in enumerate(frames):
            try:
                fh.write(_frame_bytes(i, frame, geometry))
            except OSError as exc:
                raise EvsalError(f"frame {i}: write failed: {exc}") from exc
            n += 1
        fh.seek(0)
        fh.write(FRAME_HEADER.pack(FRAME_MAGIC, geometry.width, geometry.height, frame_period, n))
    return n


def _frame_bytes(i: int, frame: SaliencyFrame, geometry: SensorGeometry) -> bytes:
    v = np.asarray(frame.values)
    if v.shape != geometry.shape:
        raise ValidationError(f"shape {v.shape} does not match geometry {geometry.shape}", index=i)
    if v.size and (np.nanmin(v) < 0 or np.nanmax(v) > 1 or np.isnan(v).any()):
        raise ValidationError("frame values must lie in [0, 1]", index=i)
    return struct.pack("<Q", frame.t_frame) + v.astype("<f4").tobytes()


def read_frames(source: bytes | str | Path) -> FrameFile:
    """Parse a raw frame file; paths are memory-mapped rather than loaded."""
    if isinstance(source, (str, Path)):
        buf = np.memmap(source, dtype=np.uint8, mode="r")
    else:
        buf = np.frombuffer(source, dtype=np.uint8)
    if buf.size < FRAME_HEADER.size:
        raise FormatError("truncated frame header")
    magic, width, height, period, count = FRAME_HEADER.unpack(bytes(buf[:FRAME_HEADER.size]))
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
    geometry = SensorGeometry(width, height)
    rec = np.dtype([("t", "<u8"), ("v", "<f4", (height, width))])
    expected = FRAME_HEADER.size + count * rec.itemsize
    if buf.size != expected:
        raise FormatError(f"expected {expected} bytes for {count} frames, got {buf.size}")
    recs = buf[FRAME_HEADER.size:].view(rec) if count else np.zeros(0, dtype=rec)
    return FrameFile(geometry, period, recs["t"], recs["v"])


def to_graymap(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to bytes with round-half-up: floor(v * 255 + 0.5)."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_pgm(values: np.ndarray, dest: str | Path | None = None) -> bytes:
    img = to_graymap(values)
    h, w = img.shape
    data = f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
    if dest is not None:
        Path(dest).write_bytes(data)
    return data


def export_pgm_sequence(frames: Iterable[SaliencyFrame], directory: str | Path) -> int:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = 0
    for i, frame in enumerate(frames):
        try:
            write_pgm(frame.values, directory / f"frame_{i:06d}.pgm")
        except OSError as exc:
            raise EvsalError(f"frame {i}: write failed: {exc}") from exc
        n += 1
    return n
