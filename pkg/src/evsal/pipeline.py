"""End-to-end workflows: score a stream, render frames, evaluate against
fixations, and sweep single temporal windows against the full model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import DegenerateMetricError, ValidationError
from .events import FixationRecord, SensorGeometry
from .metrics import (
    DEFAULT_FIXATION_SIGMA,
    FixationSample,
    aggregate,
    as_distribution,
    build_fixation_map,
    cc,
    fixations_per_frame,
    is_attentive,
    nss,
    sauc,
    sim,
)
from .rasterizer import DEFAULT_FRAME_PERIOD, DEFAULT_STALENESS, SaliencyFrame, iter_frames
from .saliency import ScaleConfig, process_stream

METRICS = ("NSS", "sAUC", "SIM", "CC")


def saliency_frames(
    events,
    geometry: SensorGeometry,
    config: ScaleConfig = ScaleConfig(),
    fixed_window: int | None = None,
    frame_period: int = DEFAULT_FRAME_PERIOD,
    staleness: float | None = None,
    normalization: str = "global",
    t_end: int | None = None,
) -> Iterator[SaliencyFrame]:
    """Score ``events`` and yield frames.

    When ``staleness`` is None it defaults to the largest window for the
    full model and to the selected window ``t_u`` in fixed-window mode.
    """
    if staleness is None:
        staleness = (config.windows[-1] if fixed_window is None
                     else config.windows[fixed_window])
    scored = process_stream(events, geometry, config, fixed_window=fixed_window)
    return iter_frames(scored, geometry, frame_period, staleness, normalization, t_end)


def _guard(fn, *args):
    try:
        return fn(*args)
    except DegenerateMetricError:
        return None


@dataclass
class FrameScores:
    """Per-frame metric values; None marks a degenerate frame."""

    values: dict[str, list] = field(default_factory=lambda: {m: [] for m in METRICS})

    def add(self, nss_v, sauc_v, sim_v, cc_v) -> None:
        for m, v in zip(METRICS, (nss_v, sauc_v, sim_v, cc_v)):
            self.values[m].append(v)

    def summary(self) -> dict[str, tuple[float, int, int]]:
        """metric -> (mean over valid frames, n valid, n excluded)."""
        out = {}
        for m, vals in self.values.items():
            g = aggregate(vals).get("all")
            out[m] = (math.nan, 0, 0) if g is None else (g.mean, g.n_frames, g.n_excluded)
        return out


def evaluate_frames(
    frames: Iterable[SaliencyFrame],
    fixations: Sequence[FixationRecord],
    negatives: Sequence,
    geometry: SensorGeometry,
    sigma: float = DEFAULT_FIXATION_SIGMA,
) -> FrameScores:
    """Score every frame against the fixations active at its timestamp.

    ``negatives`` are locations (records, samples or (x, y) pairs) pooled
    from other videos for the shuffled AUC.  Frames without an attentive
    fixation are counted as excluded for every metric.
    """
    frames = iter(frames)
    current: list[SaliencyFrame] = []

    def times():
        for f in frames:
            current[:] = [f]
            yield f.t_frame

    scores = FrameScores()
    for fx in fixations_per_frame(fixations, times(), geometry):
        frame = current[0]
        if not fx:
            scores.add(None, None, None, None)
            continue
        s = frame.values
        fm = build_fixation_map(fx, geometry, sigma)
        dist = _guard(as_distribution, s)
        scores.add(
            _guard(nss, s, fx),
            _guard(sauc, s, fx, negatives) if len(negatives) else None,
            None if dist is None else sim(dist, fm),
            _guard(cc, s, fm.values),
        )
    return scores


def negatives_from(records: Iterable[FixationRecord], video_id: str,
                   geometry: SensorGeometry) -> list[FixationSample]:
    """Attentive fixations of every other video, for the shuffled AUC."""
    return [FixationSample(-1, r.x, r.y) for r in records
            if r.video_id != video_id and is_attentive(r.x, r.y, geometry)]


@dataclass
class SweepRow:
    label: str
    window_us: int | None
    scores: dict[str, tuple[float, int, int]]


def sweep(
    events,
    geometry: SensorGeometry,
    fixations: Sequence[FixationRecord],
    negatives: Sequence,
    config: ScaleConfig = ScaleConfig(),
    frame_period: int = DEFAULT_FRAME_PERIOD,
    normalization: str = "global",
    sigma: float = DEFAULT_FIXATION_SIGMA,
    t_end: int | None = None,
) -> list[SweepRow]:
    """One row per temporal window (summed over all radii), then the full
    multi-scale model."""
    if not fixations:
        raise ValidationError("sweep needs fixations")
    rows = []
    for u, tu in enumerate(config.windows):
        frames = saliency_frames(events, geometry, config, u, frame_period,
                                 None, normalization, t_end)
        res = evaluate_frames(frames, fixations, negatives, geometry, sigma)
        rows.append(SweepRow(f"{tu / 1000:g}", tu, res.summary()))
    frames = saliency_frames(events, geometry, config, None, frame_period,
                             None, normalization, t_end)
    res = evaluate_frames(frames, fixations, negatives, geometry, sigma)
    rows.append(SweepRow("evST", None, res.summary()))
    return rows
