"""Event and fixation data model, plus the on-disk formats.

Event streams are held as numpy structured arrays whose dtype mirrors the
16-byte binary record exactly, so reading and writing are zero-copy views:

    t: u64 LE (microseconds), x: u16 LE, y: u16 LE, p: u8, 3 reserved bytes

A binary file starts with an 8-byte header: magic ``EVS0``, then width and
height as u16 LE.  The CSV flavour uses the header ``t_us,x,y,polarity``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import FormatError, ValidationError

EVENT_MAGIC = b"EVS0"
HEADER = struct.Struct("<4sHH")
EVENT_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("reserved", "V3")]
)
assert EVENT_DTYPE.itemsize == 16

EVENT_CSV_HEADER = ["t_us", "x", "y", "polarity"]
FIXATION_CSV_HEADER = ["participant_id", "video_id", "t_start_us", "t_end_us", "x", "y"]

_U64_MAX = 2**64 - 1


class Polarity(IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class SensorGeometry:
    width: int = 304
    height: int = 240

    def __post_init__(self):
        if not (1 <= self.width <= 0xFFFF and 1 <= self.height <= 0xFFFF):
            raise ValidationError(f"invalid sensor geometry {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (rows, columns)."""
        return (self.height, self.width)

    def contains(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class Event:
    t: int
    x: int
    y: int
    polarity: Polarity = Polarity.ON

    def __post_init__(self):
        if not 0 <= self.t <= _U64_MAX:
            raise ValidationError(f"timestamp {self.t} outside the unsigned 64-bit range")
        if not (0 <= self.x <= 0xFFFF and 0 <= self.y <= 0xFFFF):
            raise ValidationError(f"coordinates ({self.x}, {self.y}) not representable")
        object.__setattr__(self, "polarity", Polarity(self.polarity))


@dataclass(frozen=True)
class FixationRecord:
    participant_id: str
    video_id: str
    t_start: int
    t_end: int
    x: float
    y: float

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValidationError(
                f"fixation ends before it starts ({self.t_end} < {self.t_start})"
            )

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start


class EventStream(NamedTuple):
    """Result of reading an event file.

    ``clamped`` counts timestamps that lenient mode raised to restore
    monotonic order; it is always 0 in strict mode.
    """

    geometry: SensorGeometry
    events: np.ndarray
    clamped: int = 0


def empty_events(n: int = 0) -> np.ndarray:
    return np.zeros(n, dtype=EVENT_DTYPE)


def make_events(t, x, y, p=None) -> np.ndarray:
    """Build a structured event array from column sequences."""
    t = np.asarray(t)
    out = empty_events(len(t))
    out["t"] = t
    out["x"] = x
    out["y"] = y
    out["p"] = 1 if p is None else p
    return out


def events_from_list(events: Iterable[Event]) -> np.ndarray:
    events = list(events)
    return make_events(
        [e.t for e in events],
        [e.x for e in events],
        [e.y for e in events],
        [int(e.polarity) for e in events],
    )


def to_event_list(events: np.ndarray) -> list[Event]:
    return [
        Event(int(r["t"]), int(r["x"]), int(r["y"]), Polarity(int(r["p"])))
        for r in events
    ]


def validate_events(geometry: SensorGeometry, events: np.ndarray, strict: bool = True) -> int:
    """Check bounds, polarity and ordering in place.

    In lenient mode a timestamp regression is repaired with
    ``t[i] = max(t[i], t[i-1])`` and the number of repaired records is
    returned.  Strict mode raises instead.
    """
    if events.dtype != EVENT_DTYPE:
        raise FormatError(f"unexpected event dtype {events.dtype}")
    if len(events) == 0:
        return 0
    bad = np.flatnonzero((events["x"] >= geometry.width) | (events["y"] >= geometry.height))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"coordinates ({events['x'][i]}, {events['y'][i]}) outside "
            f"{geometry.width}x{geometry.height} sensor",
            index=i,
        )
    bad = np.flatnonzero(events["p"] > 1)
    if bad.size:
        raise ValidationError(f"polarity {events['p'][bad[0]]} is not 0 or 1", index=int(bad[0]))
    t = events["t"]
    regress = np.flatnonzero(t[1:] < t[:-1])
    if regress.size == 0:
        return 0
    if strict:
        i = int(regress[0]) + 1
        raise ValidationError(f"timestamp {t[i]} precedes previous {t[i - 1]}", index=i)
    fixed = np.maximum.accumulate(t)
    clamped = int(np.count_nonzero(fixed != t))
    events["t"] = fixed
    return clamped


def _read_binary(data: bytes, strict: bool) -> EventStream:
    if len(data) < HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes")
    magic, width, height = HEADER.unpack_from(data)
    if magic != EVENT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EVENT_MAGIC!r}")
    body = len(data) - HEADER.size
    if body % EVENT_DTYPE.itemsize:
        raise FormatError(f"payload of {body} bytes is not a whole number of 16-byte records")
    try:
        geometry = SensorGeometry(width, height)
    except ValidationError as exc:
        raise FormatError(str(exc)) from None
    events = np.frombuffer(data, dtype=EVENT_DTYPE, offset=HEADER.size).copy()
    nonzero = np.flatnonzero(events["reserved"] != np.void(b"\0\0\0"))
    if nonzero.size:
        raise FormatError(f"record {int(nonzero[0])}: reserved bytes are not zero")
    clamped = validate_events(geometry, events, strict=strict)
    return EventStream(geometry, events, clamped)


def _read_csv(text: str, geometry: SensorGeometry, strict: bool) -> EventStream:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != EVENT_CSV_HEADER:
        raise FormatError(f"line 1: expected header {','.join(EVENT_CSV_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise FormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            rows.append(tuple(int(v) for v in row))
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field in {row}") from None
        if min(rows[-1]) < 0:
            raise ValidationError(f"negative field in {row}", index=len(rows) - 1)
    for i, (t, x, y, p) in enumerate(rows):
        if t > _U64_MAX:
            raise ValidationError(f"timestamp {t} outside the unsigned 64-bit range", index=i)
        if x > 0xFFFF or y > 0xFFFF:
            raise ValidationError(f"coordinates ({x}, {y}) do not fit 16 bits", index=i)
        if p > 1:
            raise ValidationError(f"polarity {p} is not 0 or 1", index=i)
    arr = np.array(rows, dtype=np.uint64).reshape(-1, 4)
    events = make_events(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    clamped = validate_events(geometry, events, strict=strict)
    return EventStream(geometry, events, clamped)


def read_event_stream(
    source: bytes | str | Path,
    strict: bool = True,
    geometry: SensorGeometry | None = None,
) -> EventStream:
    """Parse an event stream from bytes or a file path.

    Binary input is recognised by its magic bytes; anything else is parsed
    as CSV, for which ``geometry`` supplies the sensor size (the CSV layout
    has no header field for it; default 304x240).
    """
    if isinstance(source, (str, Path)):
        source = Path(source).read_bytes()
    if source[:4] == EVENT_MAGIC:
        return _read_binary(source, strict)
    try:
        text = source.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("input is neither an EVS0 binary stream nor UTF-8 CSV") from None
    try:
        return _read_csv(text, geometry or SensorGeometry(), strict)
    except csv.Error as exc:
        raise FormatError(f"unreadable CSV: {exc}") from None


def write_event_stream(geometry: SensorGeometry, events: np.ndarray | Sequence[Event]) -> bytes:
    if not isinstance(events, np.ndarray):
        events = events_from_list(events)
    events = np.ascontiguousarray(events)
    validate_events(geometry, events.copy(), strict=True)
    if np.any(events["reserved"] != np.void(b"\0\0\0")):
        raise ValidationError("reserved bytes must be zero")
    return HEADER.pack(EVENT_MAGIC, geometry.width, geometry.height) + events.tobytes()


def write_event_csv(events: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENT_CSV_HEADER)
    for r in events:
        writer.writerow([int(r["t"]), int(r["x"]), int(r["y"]), int(r["p"])])
    return buf.getvalue()


def read_fixations(source: bytes | str | Path) -> list[FixationRecord]:
    """Parse a fixation CSV given as bytes or a file path.

    Coordinates are not bounds-checked: fixations that land off the video
    are kept because the attention score is computed from them.
    """
    if isinstance(source, (str, Path)):
        source = Path(source).read_bytes()
    text = source.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise FormatError("line 1: missing header")
    header = [h.strip() for h in header]
    missing = [c for c in FIXATION_CSV_HEADER if c not in header]
    if missing:
        raise FormatError(f"line 1: missing column(s) {', '.join(missing)}")
    col = {name: header.index(name) for name in FIXATION_CSV_HEADER}
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) < len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            t_start = int(row[col["t_start_us"]])
            t_end = int(row[col["t_end_us"]])
            x = float(row[col["x"]])
            y = float(row[col["y"]])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric field in {row}") from None
        try:
            records.append(FixationRecord(
                row[col["participant_id"]].strip(), row[col["video_id"]].strip(),
                t_start, t_end, x, y,
            ))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return records


def write_fixations(records: Iterable[FixationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIXATION_CSV_HEADER)
    for r in records:
        writer.writerow([r.participant_id, r.video_id, r.t_start, r.t_end,
                         _fmt_coord(r.x), _fmt_coord(r.y)])
    return buf.getvalue()


def _fmt_coord(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))
