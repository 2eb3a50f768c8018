import csv
import json
import math

import numpy as np
import pytest

from evsal.cli import bench_records, main
from evsal.events import (
    FixationRecord,
    SensorGeometry,
    empty_events,
    make_events,
    read_event_stream,
    write_event_stream,
    write_fixations,
)
from evsal.rasterizer import SaliencyFrame, read_frames, write_frames
from evsal.synth import SceneSpec, generate

SCENE = """\
kind = composite
components = moving_dot, poisson_noise
width = 64
height = 48
duration = 500ms
seed = 11
dot_radius = 3
dot_vx = 60
noise_rate = 0.5
"""


@pytest.fixture
def scene(tmp_path):
    p = tmp_path / "scene.cfg"
    p.write_text(SCENE)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_synth_then_saliency_frame_count(tmp_path, scene, capsys):
    ev, fx = tmp_path / "ev.bin", tmp_path / "fx.csv"
    assert main(["synth", str(scene), "-o", str(ev), "--fixations", str(fx)]) == 0
    out = capsys.readouterr().out
    assert "seed: 11" in out and "frames expected: 50" in out
    frames = tmp_path / "f.sfr"
    assert main(["saliency", str(ev), "-o", str(frames), "--pgm-dir", str(tmp_path / "pgm"),
                 "--figure", str(tmp_path / "last.png"), "--duration", "500ms"]) == 0
    ff = read_frames(frames)
    assert len(ff.times) == 50
    assert ff.geometry == SensorGeometry(64, 48)
    assert len(list((tmp_path / "pgm").glob("*.pgm"))) == 50
    assert (tmp_path / "last.png").stat().st_size > 0
    assert "frames: 50" in capsys.readouterr().out


def test_fixed_window_option(tmp_path, scene):
    ev = tmp_path / "ev.bin"
    main(["synth", str(scene), "-o", str(ev)])
    out = tmp_path / "f.sfr"
    assert main(["saliency", str(ev), "-o", str(out), "--fixed-window", "320ms"]) == 0
    assert read_frames(out).values.max() <= 1.0
    assert main(["saliency", str(ev), "-o", str(out), "--fixed-window", "33ms"]) == 2


def test_empty_stream_gives_zero_frames(tmp_path, capsys):
    ev = tmp_path / "empty.bin"
    ev.write_bytes(write_event_stream(SensorGeometry(16, 16), empty_events()))
    out = tmp_path / "f.sfr"
    assert main(["saliency", str(ev), "-o", str(out)]) == 0
    assert len(read_frames(out).times) == 0
    captured = capsys.readouterr()
    assert "frames: 0" in captured.out and "warning" in captured.err


def test_seeded_synth_is_reproducible(tmp_path, scene):
    a, b, c = tmp_path / "a.bin", tmp_path / "b.bin", tmp_path / "c.bin"
    main(["synth", str(scene), "-o", str(a)])
    main(["synth", str(scene), "-o", str(b)])
    main(["synth", str(scene), "-o", str(c), "--seed", "12"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_synth_csv_output(tmp_path, scene):
    out = tmp_path / "ev.csv"
    assert main(["synth", str(scene), "-o", str(out), "--csv"]) == 0
    assert out.read_text().startswith("t_us,x,y,polarity")
    spec_events = generate(SceneSpec(kind="composite", components=("moving_dot", "poisson_noise"),
                                     width=64, height=48, duration=500_000, seed=11,
                                     dot_radius=3, dot_vx=60, noise_rate=0.5))
    stream = read_event_stream(out, geometry=SensorGeometry(64, 48))
    np.testing.assert_array_equal(stream.events["t"], spec_events["t"])


def _frame_file(path, maps, period=10_000):
    g = SensorGeometry(maps[0].shape[1], maps[0].shape[0])
    frames = [SaliencyFrame((k + 1) * period, m.astype(np.float32), False)
              for k, m in enumerate(maps)]
    write_frames(frames, g, period, path)
    return g


def test_metrics_identical_map_scores_sim_one(tmp_path, capsys):
    h, w = 20, 30
    fm = np.zeros((h, w))
    fm[7, 11] = 1.0
    fpath = tmp_path / "v1.sfr"
    _frame_file(fpath, [fm, fm])
    fix = tmp_path / "fx.csv"
    fix.write_text(write_fixations([FixationRecord("p", "v1", 0, 20_000, 11, 7)]))
    out = tmp_path / "report.csv"
    assert main(["metrics", "--frames", f"v1={fpath}", "--fixations", str(fix),
                 "--sigma", "0", "-o", str(out)]) == 0
    rows = {(r["video_id"], r["metric"]): r for r in read_csv(out)}
    assert float(rows[("v1", "SIM")]["value"]) == pytest.approx(1.0, abs=1e-6)
    assert float(rows[("v1", "CC")]["value"]) == pytest.approx(1.0, abs=1e-6)
    assert rows[("v1", "SIM")]["n_frames"] == "2"
    assert rows[("v1", "sAUC")]["value"] == "nan"  # no other video to draw negatives from
    assert ("*", "SIM") in rows
    assert out.with_suffix(".png").stat().st_size > 0
    assert "kept 1/1" in capsys.readouterr().out


def test_metrics_constant_map(tmp_path):
    const = np.full((10, 10), 0.5)
    a, b = tmp_path / "a.sfr", tmp_path / "b.sfr"
    _frame_file(a, [const])
    _frame_file(b, [const])
    fix = tmp_path / "fx.csv"
    fix.write_text(write_fixations([FixationRecord("p", "a", 0, 10_000, 2, 3),
                                    FixationRecord("p", "b", 0, 10_000, 8, 1)]))
    out = tmp_path / "r.csv"
    assert main(["metrics", "--frames", f"a={a}", "--frames", f"b={b}", "--fixations", str(fix),
                 "--category", "a=Shapes", "--category", "b=Shapes", "-o", str(out)]) == 0
    rows = {(r["video_id"], r["metric"]): r for r in read_csv(out)}
    assert float(rows[("a", "sAUC")]["value"]) == 0.5
    assert rows[("a", "NSS")]["value"] == "nan" and rows[("a", "NSS")]["n_frames"] == "0"
    assert rows[("a", "NSS")]["n_excluded"] == "1"
    assert rows[("*", "sAUC")]["category"] == "Shapes"


def test_metrics_geometry_mismatch(tmp_path):
    fpath = tmp_path / "v.sfr"
    _frame_file(fpath, [np.eye(8)])
    fix = tmp_path / "fx.csv"
    fix.write_text(write_fixations([FixationRecord("p", "v", 0, 10_000, 500, 400)]))
    assert main(["metrics", "--frames", f"v={fpath}", "--fixations", str(fix),
                 "-o", str(tmp_path / "r.csv")]) == 3
    other = tmp_path / "w.sfr"
    _frame_file(other, [np.eye(9)])
    assert main(["metrics", "--frames", f"v={fpath}", "--frames", f"w={other}",
                 "--fixations", str(fix), "-o", str(tmp_path / "r.csv")]) == 3


def test_metrics_all_degenerate_exit(tmp_path):
    fpath = tmp_path / "v.sfr"
    _frame_file(fpath, [np.eye(8)])
    fix = tmp_path / "fx.csv"
    fix.write_text(write_fixations([FixationRecord("p", "v", 50_000, 60_000, 3, 3)]))
    assert main(["metrics", "--frames", f"v={fpath}", "--fixations", str(fix),
                 "-o", str(tmp_path / "r.csv")]) == 4


@pytest.mark.slow
def test_sweep_rows(tmp_path, scene):
    ev, fx = tmp_path / "ev.bin", tmp_path / "fx.csv"
    main(["synth", str(scene), "-o", str(ev), "--fixations", str(fx)])
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(ev), "--fixations", str(fx), "--uniform-negatives", "200",
                 "--duration", "500ms", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert [r["t_u_ms"] for r in rows] == ["10", "20", "40", "80", "160", "320", "evST"]
    assert all(int(r["n_frames"]) == 50 for r in rows)
    assert out.with_suffix(".png").exists()
    one = tmp_path / "one.csv"
    assert main(["sweep", str(ev), "--fixations", str(fx), "--windows", "320ms",
                 "-o", str(one)]) == 0
    assert [r["t_u_ms"] for r in read_csv(one)] == ["320", "evST"]


def test_bench_json_lines(tmp_path, scene, capsys):
    ev = tmp_path / "ev.bin"
    main(["synth", str(scene), "-o", str(ev)])
    capsys.readouterr()
    log = tmp_path / "bench.jsonl"
    assert main(["bench", str(ev), "--oracle-events", "300", "-o", str(log)]) == 0
    recs = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert recs == [json.loads(line) for line in log.read_text().splitlines()]
    keys = {"scorer", "radii", "windows_us", "width", "height", "events", "seconds",
            "events_per_sec", "source"}
    assert all(set(r) == keys for r in recs)
    by = {(r["scorer"], tuple(r["radii"])): r for r in recs}
    full = (1, 2, 4, 8, 16, 32)
    assert by[("fast", full)]["events_per_sec"] > by[("oracle", full)]["events_per_sec"]
    assert by[("oracle", full)]["events"] == 300


def test_bench_smaller_radii_is_faster(rng):
    g = SensorGeometry(304, 240)
    n = 20_000
    ev = make_events(np.sort(rng.integers(0, 2_000_000, n)), rng.integers(0, 304, n),
                     rng.integers(0, 240, n))
    recs = bench_records(ev, g, [(1, 2, 4, 8, 16, 32), (1,)], oracle_events=50, repeat=3)
    fast = {tuple(r["radii"]): r["events_per_sec"] for r in recs if r["scorer"] == "fast"}
    assert fast[(1,)] > fast[(1, 2, 4, 8, 16, 32)]


def test_bench_zero_events():
    recs = bench_records(empty_events(), SensorGeometry(8, 8), [(1,)])
    assert all(r["events"] == 0 and r["events_per_sec"] == 0 for r in recs)


def test_config_file_overrides_flags(tmp_path, scene, capsys):
    ev = tmp_path / "ev.bin"
    main(["synth", str(scene), "-o", str(ev)])
    cfg = tmp_path / "run.cfg"
    cfg.write_text("frame-period = 50ms\nnormalize = per_frame\n")
    out = tmp_path / "f.sfr"
    assert main(["saliency", str(ev), "-o", str(out), "--frame-period", "10ms",
                 "--duration", "500ms", "--config", str(cfg)]) == 0
    ff = read_frames(out)
    assert ff.frame_period == 50_000 and len(ff.times) == 10


@pytest.mark.parametrize("argv", [
    [],
    ["saliency"],
    ["saliency", "x.bin", "-o", "y", "--normalize", "sideways"],
    ["metrics", "--fixations", "f.csv", "-o", "r.csv"],
    ["bogus"],
])
def test_usage_errors_exit_two(argv):
    assert main(argv) == 2


def test_missing_input_exit_three(tmp_path):
    assert main(["saliency", str(tmp_path / "nope.bin"), "-o", str(tmp_path / "o")]) == 3


def test_unsorted_strict_vs_lenient(tmp_path, capsys):
    p = tmp_path / "ev.csv"
    p.write_text("t_us,x,y,polarity\n100,1,1,1\n50,2,2,0\n200,3,3,1\n")
    out = tmp_path / "f.sfr"
    assert main(["saliency", str(p), "-o", str(out), "--width", "8", "--height", "8"]) == 3
    assert main(["saliency", str(p), "-o", str(out), "--width", "8", "--height", "8",
                 "--lenient", "--frame-period", "100us"]) == 0
    assert "clamped 1" in capsys.readouterr().err
    assert len(read_frames(out).times) == 2
