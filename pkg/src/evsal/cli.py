"""Command-line interface.

Subcommands: ``saliency``, ``metrics``, ``sweep``, ``bench``, ``synth``.
Every subcommand accepts ``--config FILE`` with ``key = value`` lines named
after the long options; config values override command-line flags.

Exit codes: 0 success, 2 usage error, 3 data or validation error,
4 only degenerate metric results.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_duration, parse_list, read_flat_config
from .errors import EvsalError, GeometryError, ValidationError
from .events import SensorGeometry, read_event_stream, read_fixations, write_event_csv, \
    write_event_stream, write_fixations, empty_events
from .metrics import DEFAULT_ATTENTION_THRESHOLD, DEFAULT_FIXATION_SIGMA, FixationSample, \
    aggregate, filter_dataset, is_attentive
from .pipeline import METRICS, evaluate_frames, negatives_from, saliency_frames, sweep
from .rasterizer import DEFAULT_FRAME_PERIOD, FrameFile, export_pgm_sequence, frame_count, \
    read_frames, write_frames
from .saliency import DEFAULT_RADII, DEFAULT_WINDOWS, ScaleConfig, process_stream
from .synth import SceneSpec, generate, ground_truth_fixations, load_scene

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4

REPORT_COLUMNS = ["video_id", "category", "metric", "value", "n_frames", "n_excluded"]


class UsageError(Exception):
    pass


def _durations(text: str) -> tuple[int, ...]:
    return tuple(parse_duration(p) for p in parse_list(text))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in parse_list(text))


def _scale_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scales")
    g.add_argument("--radii", type=_ints, default=DEFAULT_RADII,
                   help="spatial radii in pixels (default 1,2,4,8,16,32)")
    g.add_argument("--windows", type=_durations, default=DEFAULT_WINDOWS,
                   help="temporal windows (default 10ms,...,320ms)")


def _frame_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("frames")
    g.add_argument("--frame-period", type=parse_duration, default=DEFAULT_FRAME_PERIOD,
                   help="frame spacing (default 10ms = 100 fps)")
    g.add_argument("--staleness", type=parse_duration, default=None,
                   help="drop pixel scores older than this; 'inf' keeps them "
                        "(default: largest window, or the fixed window)")
    g.add_argument("--normalize", choices=("global", "per_frame"), default="global")


def _geometry_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=304, help="sensor width for CSV input")
    p.add_argument("--height", type=int, default=240, help="sensor height for CSV input")
    p.add_argument("--lenient", action="store_true",
                   help="clamp timestamp regressions instead of failing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", help="score an event stream and write saliency frames")
    p.add_argument("input", help="event file (EVS0 binary or CSV)")
    p.add_argument("-o", "--output", required=True, help="SFR0 frame file to write")
    p.add_argument("--fixed-window", type=parse_duration, default=None,
                   help="score a single temporal window summed over all radii, e.g. 320ms")
    p.add_argument("--pgm-dir", help="also export every frame as an 8-bit PGM here")
    p.add_argument("--figure", help="PNG preview of the last frame")
    p.add_argument("--duration", type=parse_duration, default=None,
                   help="stream length for frame counting (default: last event)")
    _scale_options(p)
    _frame_options(p)
    _geometry_options(p)
    p.add_argument("--config")

    p = sub.add_parser("metrics", help="evaluate frame files against fixations")
    p.add_argument("--frames", action="append", required=True, metavar="[VIDEO=]PATH",
                   help="frame file; repeat for several videos")
    p.add_argument("--fixations", required=True, help="fixation CSV")
    p.add_argument("--category", action="append", default=[], metavar="VIDEO=CATEGORY")
    p.add_argument("--threshold", type=float, default=DEFAULT_ATTENTION_THRESHOLD,
                   help="attention score threshold (default 0.9)")
    p.add_argument("--sigma", type=float, default=DEFAULT_FIXATION_SIGMA,
                   help="fixation map blur in pixels (default: 1 degree); 0 = impulses")
    p.add_argument("--max-negatives", type=int, default=0,
                   help="subsample the sAUC negative pool to this size (0 = all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="report CSV")
    p.add_argument("--figure", help="report PNG (default: next to the CSV)")
    p.add_argument("--config")

    p = sub.add_parser("sweep", help="metrics per temporal window plus the full model")
    p.add_argument("input", help="event file")
    p.add_argument("--fixations", required=True, help="fixation CSV")
    p.add_argument("--video-id", help="video to evaluate (default: the only one in the CSV)")
    p.add_argument("--threshold", type=float, default=DEFAULT_ATTENTION_THRESHOLD)
    p.add_argument("--sigma", type=float, default=DEFAULT_FIXATION_SIGMA)
    p.add_argument("--uniform-negatives", type=int, default=0,
                   help="add N seeded uniform random locations to the sAUC negatives")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=parse_duration, default=None,
                   help="stream length for frame counting (default: last event)")
    p.add_argument("-o", "--output", required=True, help="sweep CSV")
    p.add_argument("--figure", help="sweep PNG (default: next to the CSV)")
    _scale_options(p)
    p.add_argument("--frame-period", type=parse_duration, default=DEFAULT_FRAME_PERIOD)
    p.add_argument("--normalize", choices=("global", "per_frame"), default="global")
    _geometry_options(p)
    p.add_argument("--config")

    p = sub.add_parser("bench", help="events/second for the fast and reference scorers")
    p.add_argument("input", nargs="?", help="event file (default: synthetic scene)")
    p.add_argument("--synth", help="scene file to generate the input from")
    p.add_argument("--oracle-events", type=int, default=2000,
                   help="events fed to the slow reference scorer (default 2000)")
    p.add_argument("--scale-set", action="append", default=None, metavar="RADII",
                   help="radii list to benchmark, repeatable (default: '1,2,4,8,16,32' and '1')")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("-o", "--output", help="append JSON lines here as well as stdout")
    _geometry_options(p)
    p.add_argument("--config")

    p = sub.add_parser("synth", help="generate a synthetic event stream")
    p.add_argument("spec", metavar="scene", help="scene file (key = value)")
    p.add_argument("-o", "--output", required=True, help="event file to write")
    p.add_argument("--csv", action="store_true", help="write CSV instead of EVS0 binary")
    p.add_argument("--fixations", help="also write ground-truth fixations here")
    p.add_argument("--frame-period", type=parse_duration, default=DEFAULT_FRAME_PERIOD)
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.add_argument("--config")
    return parser


def _config_argv(path: str) -> list[str]:
    argv = []
    for key, value in read_flat_config(path).items():
        flag = "--" + key.replace("_", "-")
        if value.strip().lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.strip().lower() in ("false", "no", "off"):
            continue
        else:
            argv += [flag, value]
    return argv


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            extra = _config_argv(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        # flags parsed later win, so the config file overrides the command line
        args = parser.parse_args(argv + extra)
    return args


def _load_events(args):
    geometry = SensorGeometry(args.width, args.height)
    stream = read_event_stream(args.input, strict=not args.lenient, geometry=geometry)
    if stream.clamped:
        print(f"warning: clamped {stream.clamped} out-of-order timestamps", file=sys.stderr)
    return stream


def _scale_config(args) -> ScaleConfig:
    try:
        return ScaleConfig(args.radii, args.windows)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _window_index(config: ScaleConfig, window) -> int | None:
    if window is None:
        return None
    if window not in config.windows:
        raise UsageError(f"--fixed-window {window}us is not one of the windows {config.windows}")
    return config.windows.index(window)


def cmd_saliency(args) -> int:
    stream = _load_events(args)
    config = _scale_config(args)
    u = _window_index(config, args.fixed_window)
    if len(stream.events) == 0:
        print("warning: empty event stream, writing zero frames", file=sys.stderr)
    t0 = time.perf_counter()
    frames = saliency_frames(stream.events, stream.geometry, config, u, args.frame_period,
                             args.staleness, args.normalize, args.duration)
    last = []

    def tee(frames):
        for f in frames:
            last[:] = [f]
            yield f

    n_frames = write_frames(tee(frames), stream.geometry, args.frame_period, args.output)
    elapsed = time.perf_counter() - t0
    if args.pgm_dir:
        export_pgm_sequence(read_frames(args.output).frames(), args.pgm_dir)
    if args.figure and last:
        from .plotting import plot_frame
        plot_frame(last[0].values, args.figure, f"t = {last[0].t_frame / 1000:g} ms")
    n = len(stream.events)
    rate = n / elapsed if elapsed > 0 else 0.0
    print(f"events: {n}")
    print(f"frames: {n_frames}")
    print(f"events/sec: {rate:.0f}")
    return EXIT_OK


def _pairs(items, what) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"{what} must look like KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _frame_sources(items) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" in item:
            vid, path = item.split("=", 1)
        else:
            vid, path = Path(item).stem, item
        out[vid.strip()] = path.strip()
    return out


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"


def _write_table(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in r.items()})


def cmd_metrics(args) -> int:
    sources = _frame_sources(args.frames)
    categories = _pairs(args.category, "--category")
    files: dict[str, FrameFile] = {vid: read_frames(p) for vid, p in sources.items()}
    geometries = {f.geometry for f in files.values()}
    if len(geometries) != 1:
        raise GeometryError(f"frame files disagree on geometry: {sorted(map(str, geometries))}")
    geometry = geometries.pop()
    records = read_fixations(args.fixations)
    for vid in files:
        own = [r for r in records if r.video_id == vid]
        if own and not any(is_attentive(r.x, r.y, geometry) for r in own):
            raise GeometryError(
                f"no fixation of video {vid!r} falls inside the {geometry.width}x"
                f"{geometry.height} frames; coordinates do not match the frame geometry")
    filtered = filter_dataset(records, geometry, args.threshold, categories)
    for cat, (kept, total) in sorted(filtered.retention().items()):
        print(f"attention filter [{cat}]: kept {kept}/{total} participant-video pairs "
              f"(threshold {args.threshold})")
    print(f"seed: {args.seed}  sigma: {args.sigma:.4g} px")
    rng = np.random.default_rng(args.seed)

    rows = []
    per_cat: dict[str, dict[str, list]] = {}
    for vid, ff in files.items():
        cat = categories.get(vid, "all")
        negatives = negatives_from(filtered.records, vid, geometry)
        if args.max_negatives and len(negatives) > args.max_negatives:
            pick = rng.choice(len(negatives), args.max_negatives, replace=False)
            negatives = [negatives[i] for i in sorted(pick)]
        own = [r for r in filtered.records if r.video_id == vid]
        res = evaluate_frames(ff.frames(), own, negatives, geometry, args.sigma)
        for metric in METRICS:
            mean, n_ok, n_bad = res.summary()[metric]
            rows.append(dict(video_id=vid, category=cat, metric=metric, value=mean,
                             n_frames=n_ok, n_excluded=n_bad))
            per_cat.setdefault(cat, {}).setdefault(metric, []).append(mean)
    for cat, by_metric in per_cat.items():
        for metric in METRICS:
            vals = [None if math.isnan(v) else v for v in by_metric.get(metric, [])]
            g = aggregate(vals)["all"]
            rows.append(dict(video_id="*", category=cat, metric=metric, value=g.mean,
                             n_frames=g.n_frames, n_excluded=g.n_excluded))
    _write_table(args.output, REPORT_COLUMNS, rows)
    figure = args.figure or str(Path(args.output).with_suffix(".png"))
    from .plotting import plot_report
    plot_report(rows, figure)

    print(f"{'video':<16}{'category':<12}{'metric':<7}{'value':>10}{'frames':>8}{'excl':>6}")
    for r in rows:
        print(f"{r['video_id']:<16}{r['category']:<12}{r['metric']:<7}{_fmt(r['value']):>10}"
              f"{r['n_frames']:>8}{r['n_excluded']:>6}")
    if all(r["n_frames"] == 0 for r in rows):
        print("all metric results are degenerate", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_sweep(args) -> int:
    stream = _load_events(args)
    config = _scale_config(args)
    geometry = stream.geometry
    records = read_fixations(args.fixations)
    videos = sorted({r.video_id for r in records})
    vid = args.video_id
    if vid is None:
        if len(videos) != 1:
            raise UsageError(f"--video-id required, fixations cover {videos}")
        vid = videos[0]
    filtered = filter_dataset(records, geometry, args.threshold).records
    own = [r for r in filtered if r.video_id == vid]
    if not own:
        raise ValidationError(f"no attentive fixations for video {vid!r}")
    negatives: list = negatives_from(filtered, vid, geometry)
    if args.uniform_negatives:
        rng = np.random.default_rng(args.seed)
        negatives += [FixationSample(-1, float(x), float(y)) for x, y in zip(
            rng.integers(0, geometry.width, args.uniform_negatives),
            rng.integers(0, geometry.height, args.uniform_negatives))]
    print(f"video: {vid}  seed: {args.seed}  negatives: {len(negatives)}")
    rows = sweep(stream.events, geometry, own, negatives, config, args.frame_period,
                 args.normalize, args.sigma, args.duration)
    table = []
    for r in rows:
        row = {"t_u_ms": r.label}
        for m in METRICS:
            row[m] = r.scores[m][0]
        row["n_frames"] = max(r.scores[m][1] for m in METRICS)
        table.append(row)
    _write_table(args.output, ["t_u_ms", *METRICS, "n_frames"], table)
    from .plotting import plot_sweep
    plot_sweep(rows, args.figure or str(Path(args.output).with_suffix(".png")))
    print(f"{'t_u (ms)':<10}" + "".join(f"{m:>10}" for m in METRICS))
    for row in table:
        print(f"{row['t_u_ms']:<10}" + "".join(f"{_fmt(row[m]):>10}" for m in METRICS))
    if all(math.isnan(r.scores[m][0]) for r in rows for m in METRICS):
        return EXIT_DEGENERATE
    return EXIT_OK


def _time_scorer(events, geometry, config, scorer, repeat) -> float:
    best = math.inf
    for _ in range(max(repeat, 1)):
        t0 = time.perf_counter()
        process_stream(events, geometry, config, scorer=scorer)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_records(events, geometry, scale_sets, oracle_events=2000, repeat=1) -> list[dict]:
    """Throughput of both scorers for each radii set (windows at defaults)."""
    records = []
    for radii in scale_sets:
        config = ScaleConfig(radii, DEFAULT_WINDOWS)
        # compile outside the timed region
        process_stream(empty_events(0), geometry, config)
        process_stream(events[:1], geometry, config)
        for scorer, subset in (("fast", events), ("oracle", events[:oracle_events])):
            n = len(subset)
            secs = _time_scorer(subset, geometry, config, scorer, repeat) if n else 0.0
            records.append({
                "scorer": scorer,
                "radii": list(config.radii),
                "windows_us": list(config.windows),
                "width": geometry.width,
                "height": geometry.height,
                "events": n,
                "seconds": secs,
                "events_per_sec": n / secs if secs > 0 else 0.0,
            })
    return records


def cmd_bench(args) -> int:
    if args.input:
        stream = _load_events(args)
        geometry, events, source = stream.geometry, stream.events, args.input
    else:
        spec = load_scene(args.synth) if args.synth else SceneSpec(
            kind="composite", components=("moving_dot", "poisson_noise"),
            noise_rate=0.1, duration=2_000_000)
        geometry, events, source = spec.geometry, generate(spec), "synthetic"
    scale_sets = [_ints(s) for s in args.scale_set] if args.scale_set else [DEFAULT_RADII, (1,)]
    lines = []
    for rec in bench_records(events, geometry, scale_sets, args.oracle_events, args.repeat):
        rec["source"] = source
        lines.append(json.dumps(rec))
    print("\n".join(lines))
    if args.output:
        with open(args.output, "a") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_scene(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    events = generate(spec)
    if args.csv:
        Path(args.output).write_text(write_event_csv(events))
    else:
        Path(args.output).write_bytes(write_event_stream(spec.geometry, events))
    print(f"seed: {spec.seed}")
    print(f"events: {len(events)}")
    print(f"frames expected: {frame_count(spec.duration, args.frame_period)}")
    if args.fixations:
        fx = ground_truth_fixations(spec, args.frame_period)
        Path(args.fixations).write_text(write_fixations(fx))
        print(f"fixations: {len(fx)}")
    return EXIT_OK


COMMANDS = {
    "saliency": cmd_saliency,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse: --help (0) or usage error (2)
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"evsal {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvsalError, ValueError, OSError) as exc:
        print(f"evsal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
