import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evsal.errors import FormatError, ValidationError
from evsal.events import (
    EVENT_DTYPE,
    Event,
    FixationRecord,
    Polarity,
    SensorGeometry,
    events_from_list,
    make_events,
    read_event_stream,
    read_fixations,
    to_event_list,
    write_event_csv,
    write_event_stream,
    write_fixations,
)

G = SensorGeometry(304, 240)


def header(w, h):
    return b"EVS0" + struct.pack("<HH", w, h)


def record(t, x, y, p):
    return struct.pack("<QHHB3x", t, x, y, p)


def test_empty_stream():
    g, ev, clamped = read_event_stream(header(304, 240))
    assert g == G
    assert len(ev) == 0 and clamped == 0


def test_single_record_fields():
    _, ev, _ = read_event_stream(header(304, 240) + record(1000, 10, 20, 1))
    assert to_event_list(ev) == [Event(1000, 10, 20, Polarity.ON)]


def test_x_out_of_bounds_names_record_zero():
    with pytest.raises(ValidationError) as exc:
        read_event_stream(header(304, 240) + record(5, 304, 0, 0))
    assert exc.value.index == 0
    assert "record 0" in str(exc.value)


def test_header_only_write_is_8_bytes():
    assert write_event_stream(G, []) == header(304, 240)
    assert len(write_event_stream(G, make_events([], [], []))) == 8


def test_record_layout_is_16_bytes():
    assert EVENT_DTYPE.itemsize == 16
    data = write_event_stream(G, [Event(2**40 + 7, 303, 239, Polarity.OFF)])
    assert data[8:] == record(2**40 + 7, 303, 239, 0)


def test_timestamp_beyond_u64_rejected():
    with pytest.raises(ValidationError):
        Event(2**64, 0, 0)
    with pytest.raises(ValidationError):
        Event(-1, 0, 0)


@pytest.mark.parametrize("data", [b"", b"EVS", b"XXXX\x01\x00\x01\x00", header(4, 4) + b"\0" * 5])
def test_malformed_binary(data):
    with pytest.raises(FormatError):
        read_event_stream(data)


def test_reserved_bytes_must_be_zero():
    rec = bytearray(record(1, 1, 1, 1))
    rec[-1] = 7
    with pytest.raises(FormatError):
        read_event_stream(header(4, 4) + bytes(rec))


def test_strict_rejects_regression_lenient_clamps():
    data = header(8, 8) + record(10, 0, 0, 1) + record(5, 1, 1, 0) + record(12, 2, 2, 1)
    with pytest.raises(ValidationError) as exc:
        read_event_stream(data)
    assert exc.value.index == 1
    g, ev, clamped = read_event_stream(data, strict=False)
    assert clamped == 1
    assert ev["t"].tolist() == [10, 10, 12]


def test_round_trip_1000_random_events(rng):
    n = 1000
    ev = make_events(np.sort(rng.integers(0, 2**50, n)), rng.integers(0, 304, n),
                     rng.integers(0, 240, n), rng.integers(0, 2, n))
    data = write_event_stream(G, ev)
    g, back, _ = read_event_stream(data)
    assert g == G
    assert back.tobytes() == ev.tobytes()
    assert write_event_stream(g, back) == data


@settings(max_examples=60, deadline=None)
@given(
    w=st.integers(1, 600), h=st.integers(1, 600),
    rows=st.lists(st.tuples(st.integers(0, 10**6), st.floats(0, 1), st.floats(0, 1),
                            st.integers(0, 1)), max_size=40),
)
def test_round_trip_property(w, h, rows):
    g = SensorGeometry(w, h)
    rows = sorted(rows)
    ev = make_events([r[0] for r in rows], [min(int(r[1] * w), w - 1) for r in rows],
                     [min(int(r[2] * h), h - 1) for r in rows], [r[3] for r in rows])
    g2, back, _ = read_event_stream(write_event_stream(g, ev))
    assert g2 == g
    assert np.array_equal(back, ev)
    assert np.all(back["x"] < w) and np.all(back["y"] < h)


def test_csv_round_trip(rng):
    ev = make_events([0, 5, 5, 9], [1, 2, 3, 303], [0, 239, 4, 5], [1, 0, 1, 0])
    text = write_event_csv(ev)
    assert text.splitlines()[0] == "t_us,x,y,polarity"
    g, back, _ = read_event_stream(text.encode())
    assert g == G
    assert back.tobytes() == ev.tobytes()


def test_csv_errors():
    with pytest.raises(FormatError, match="line 1"):
        read_event_stream(b"t,x,y,p\n1,2,3,1\n")
    with pytest.raises(FormatError, match="line 2"):
        read_event_stream(b"t_us,x,y,polarity\n1,a,3,1\n")
    with pytest.raises(ValidationError):
        read_event_stream(b"t_us,x,y,polarity\n1,2,3,4\n")
    with pytest.raises(ValidationError):
        read_event_stream(b"t_us,x,y,polarity\n1,2,3,1\n", geometry=SensorGeometry(2, 2))


def test_events_from_list_round_trip():
    events = [Event(1, 2, 3, Polarity.OFF), Event(4, 5, 6)]
    assert to_event_list(events_from_list(events)) == events


def test_write_rejects_invalid():
    with pytest.raises(ValidationError):
        write_event_stream(SensorGeometry(4, 4), [Event(0, 4, 0)])


FIX_HEADER = "participant_id,video_id,t_start_us,t_end_us,x,y\n"


def test_fixations_header_only():
    assert read_fixations(FIX_HEADER.encode()) == []


def test_fixation_row():
    (rec,) = read_fixations((FIX_HEADER + "p01,vid3,0,413000,150,120\n").encode())
    assert rec == FixationRecord("p01", "vid3", 0, 413000, 150.0, 120.0)
    assert rec.duration == 413000


def test_fixation_off_video_kept():
    (rec,) = read_fixations((FIX_HEADER + "p01,vid3,0,10,-500,9999\n").encode())
    assert (rec.x, rec.y) == (-500.0, 9999.0)


def test_fixation_end_before_start():
    with pytest.raises(ValidationError, match="line 2"):
        read_fixations((FIX_HEADER + "p01,vid3,10,5,1,1\n").encode())


def test_fixation_format_errors():
    with pytest.raises(FormatError, match="missing column"):
        read_fixations(b"participant_id,video_id,t_start_us,x,y\n")
    with pytest.raises(FormatError, match="line 3"):
        read_fixations((FIX_HEADER + "p,v,0,1,2,3\np,v,zero,1,2,3\n").encode())


def test_fixations_round_trip():
    recs = [FixationRecord("p1", "v1", 0, 10, 1.5, 2.0), FixationRecord("p2", "v2", 3, 3, -4, 400)]
    assert read_fixations(write_fixations(recs).encode()) == recs


def test_geometry_bounds():
    with pytest.raises(ValidationError):
        SensorGeometry(0, 10)
    assert SensorGeometry().shape == (240, 304)
