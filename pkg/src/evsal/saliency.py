"""Per-event multi-scale saliency scores.

For the current event at (x, y, t) the single-scale score is the number of
buffered cells within city-block radius r_v whose age is at most t_u,
divided by the square window area (1 + 2 r_v)**2.  The multi-scale score
is the sum over the full grid of radii and windows.  The buffer is updated
with the event before it is scored, so the count is always at least one.

Two scorers are provided and must agree exactly:

* ``score_event`` runs one windowed count per (window, radius) pair.
* ``score_event_fast`` scans the largest ball once, buckets each live cell
  by the smallest radius and window that contain it, then accumulates the
  bucket histogram along both axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numba
import numpy as np

from .errors import ValidationError
from .events import EVENT_DTYPE, Event, SensorGeometry
from .time_surface import EMPTY, TimeSurface

DEFAULT_RADII = (1, 2, 4, 8, 16, 32)
DEFAULT_WINDOWS = (10_000, 20_000, 40_000, 80_000, 160_000, 320_000)


@dataclass(frozen=True)
class ScaleConfig:
    """Spatial radii (pixels) and temporal windows (microseconds)."""

    radii: tuple[int, ...] = DEFAULT_RADII
    windows: tuple[int, ...] = DEFAULT_WINDOWS

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        object.__setattr__(self, "windows", tuple(int(w) for w in self.windows))
        if not self.radii or not self.windows:
            raise ValueError("radii and windows must be non-empty")
        if self.radii[0] < 0 or self.windows[0] <= 0:
            raise ValueError("radii must be >= 0 and windows > 0")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError(f"radii must be strictly increasing: {self.radii}")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError(f"windows must be strictly increasing: {self.windows}")

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple((1 + 2 * r) ** 2 for r in self.radii)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.windows), len(self.radii))


def ball_size(r: int) -> int:
    """Number of pixels within city-block distance r."""
    return 2 * r * r + 2 * r + 1


@dataclass
class ScaleGrid:
    """Integer counts for every (window u, radius v) pair of one event.

    Scores are the exact rationals ``counts[u, v] / denominators[v]``;
    floats appear only through ``s`` and the sums.
    """

    counts: np.ndarray
    denominators: tuple[int, ...]

    @property
    def s(self) -> np.ndarray:
        return self.counts / np.asarray(self.denominators, dtype=np.int64)

    def fraction(self, u: int, v: int) -> Fraction:
        return Fraction(int(self.counts[u, v]), self.denominators[v])

    @property
    def raw_sum(self) -> float:
        # accumulation order is fixed (u outer, v inner) to match the
        # compiled stream kernel bit for bit
        acc = 0.0
        for u in range(self.counts.shape[0]):
            for v, den in enumerate(self.denominators):
                acc += int(self.counts[u, v]) / den
        return acc

    def window_sum(self, u: int) -> float:
        acc = 0.0
        for v, den in enumerate(self.denominators):
            acc += int(self.counts[u, v]) / den
        return acc

    def __eq__(self, other):
        if not isinstance(other, ScaleGrid):
            return NotImplemented
        return (self.denominators == other.denominators
                and np.array_equal(self.counts, other.counts))


def score_single_scale(surface: TimeSurface, e: Event, r: int, t_window: int) -> Fraction:
    count = surface.count_in_window(e.x, e.y, r, e.t, t_window)
    return Fraction(count, (1 + 2 * r) ** 2)


def score_event(surface: TimeSurface, e: Event, config: ScaleConfig = ScaleConfig()) -> ScaleGrid:
    """Reference scorer: one independent windowed count per scale."""
    counts = np.zeros(config.shape, dtype=np.int64)
    for u, tu in enumerate(config.windows):
        for v, rv in enumerate(config.radii):
            counts[u, v] = surface.count_in_window(e.x, e.y, rv, e.t, tu)
    return ScaleGrid(counts, config.denominators)


@lru_cache(maxsize=32)
def _radius_lookup(radii: tuple[int, ...]) -> np.ndarray:
    """Index of the smallest radius >= d, for every distance d <= max radius."""
    d = np.arange(radii[-1] + 1)
    return np.searchsorted(np.asarray(radii), d, side="left").astype(np.int64)


@numba.njit(cache=True, nogil=True)
def _scan_counts(cells, x, y, t, vtab, windows, counts):
    # one pass over the largest ball, row by row, clipped to the sensor
    h, w = cells.shape
    nu, nv = counts.shape
    counts[:, :] = 0
    rmax = vtab.shape[0] - 1
    tmax = windows[nu - 1]
    for dy in range(-rmax, rmax + 1):
        yy = y + dy
        if yy < 0 or yy >= h:
            continue
        ady = abs(dy)
        half = rmax - ady
        x0 = max(x - half, 0)
        x1 = min(x + half, w - 1)
        row = cells[yy]
        for xx in range(x0, x1 + 1):
            c = row[xx]
            if c == EMPTY:
                continue
            age = t - c
            if age > tmax:
                continue
            u = 0
            while windows[u] < age:
                u += 1
            counts[u, vtab[ady + abs(xx - x)]] += 1
    for u in range(nu):
        for v in range(1, nv):
            counts[u, v] += counts[u, v - 1]
    for u in range(1, nu):
        for v in range(nv):
            counts[u, v] += counts[u - 1, v]


@numba.njit(cache=True, nogil=True)
def _process_kernel(ts, xs, ys, cells, vtab, windows, dens, fixed_u,
                    scores, buf_score, buf_t):
    nu = windows.shape[0]
    nv = dens.shape[0]
    counts = np.zeros((nu, nv), dtype=np.int64)
    for i in range(ts.shape[0]):
        t = ts[i]
        x = xs[i]
        y = ys[i]
        cells[y, x] = t
        _scan_counts(cells, x, y, t, vtab, windows, counts)
        acc = 0.0
        if fixed_u < 0:
            for u in range(nu):
                for v in range(nv):
                    acc += counts[u, v] / dens[v]
        else:
            for v in range(nv):
                acc += counts[fixed_u, v] / dens[v]
        scores[i] = acc
        buf_score[y, x] = acc
        buf_t[y, x] = t


def score_event_fast(surface: TimeSurface, e: Event, config: ScaleConfig = ScaleConfig()) -> ScaleGrid:
    """Single-pass scorer; returns exactly what ``score_event`` returns."""
    if not surface.geometry.contains(e.x, e.y):
        raise ValidationError(f"event at ({e.x}, {e.y}) outside sensor")
    counts = np.zeros(config.shape, dtype=np.int64)
    _scan_counts(surface.cells, int(e.x), int(e.y), int(e.t), _radius_lookup(config.radii),
                 np.asarray(config.windows, dtype=np.int64), counts)
    return ScaleGrid(counts, config.denominators)


class SaliencyBuffer:
    """Latest raw score per pixel and the time it was computed."""

    def __init__(self, geometry: SensorGeometry):
        self.geometry = geometry
        self.score = np.zeros(geometry.shape, dtype=np.float64)
        self.stamp = np.full(geometry.shape, EMPTY, dtype=np.int64)

    def update(self, x: int, y: int, t: int, score: float) -> None:
        if score < 0:
            raise ValidationError(f"negative score {score}")
        self.score[y, x] = score
        self.stamp[y, x] = t


class ScoredStream(NamedTuple):
    events: np.ndarray
    scores: np.ndarray
    buffer: SaliencyBuffer


def process_stream(
    events: np.ndarray,
    geometry: SensorGeometry,
    config: ScaleConfig = ScaleConfig(),
    fixed_window: int | None = None,
    scorer: str = "fast",
    surface: TimeSurface | None = None,
    buffer: SaliencyBuffer | None = None,
) -> ScoredStream:
    """Update-then-score every event in order.

    With ``fixed_window=None`` each raw score is the full multi-scale sum;
    with ``fixed_window=u`` it is the sum over radii at window index u.
    ``scorer`` selects the compiled single-pass kernel (``"fast"``) or the
    reference per-scale counter (``"oracle"``).  Passing ``surface`` and
    ``buffer`` continues an earlier run.
    """
    if events.dtype != EVENT_DTYPE:
        raise ValidationError(f"unexpected event dtype {events.dtype}")
    if fixed_window is not None and not 0 <= fixed_window < len(config.windows):
        raise ValueError(f"window index {fixed_window} outside 0..{len(config.windows) - 1}")
    if scorer not in ("fast", "oracle"):
        raise ValueError(f"unknown scorer {scorer!r}")
    surface = surface or TimeSurface(geometry)
    buffer = buffer or SaliencyBuffer(geometry)
    n = len(events)
    ts = events["t"].astype(np.int64)
    xs = events["x"].astype(np.int64)
    ys = events["y"].astype(np.int64)
    if n:
        if np.any(ts[1:] < ts[:-1]) or ts[0] < surface.last_update_t:
            raise ValidationError("events must be sorted by timestamp")
        if xs.max() >= geometry.width or ys.max() >= geometry.height:
            bad = int(np.flatnonzero((xs >= geometry.width) | (ys >= geometry.height))[0])
            raise ValidationError("event outside sensor", index=bad)
    scores = np.zeros(n, dtype=np.float64)
    if scorer == "fast":
        _process_kernel(ts, xs, ys, surface.cells, _radius_lookup(config.radii),
                        np.asarray(config.windows, dtype=np.int64),
                        np.asarray(config.denominators, dtype=np.int64),
                        -1 if fixed_window is None else fixed_window,
                        scores, buffer.score, buffer.stamp)
        if n:
            surface.last_update_t = max(surface.last_update_t, int(ts[-1]))
    else:
        for i in range(n):
            e = Event(int(ts[i]), int(xs[i]), int(ys[i]))
            surface.update(e)
            grid = score_event(surface, e, config)
            scores[i] = grid.raw_sum if fixed_window is None else grid.window_sum(fixed_window)
            buffer.update(e.x, e.y, e.t, scores[i])
    return ScoredStream(events, scores, buffer)


class Normalized(NamedTuple):
    values: np.ndarray
    degenerate: bool | np.ndarray


def normalize_scores(values, mode: str = "global") -> Normalized:
    """Divide by the maximum so the result spans [0, 1].

    ``global`` uses one maximum over everything; ``per_frame`` uses the
    maximum of each 2-D frame (the last two axes).  An all-zero domain is
    returned as zeros with its degenerate flag set.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and arr.min() < 0:
        raise ValueError("scores must be non-negative")
    if mode == "global" or arr.ndim < 2:
        peak = arr.max() if arr.size else 0.0
        if peak <= 0:
            return Normalized(np.zeros_like(arr), True)
        return Normalized(arr / peak, False)
    if mode != "per_frame":
        raise ValueError(f"unknown normalization mode {mode!r}")
    peak = arr.max(axis=(-2, -1), keepdims=True)
    degenerate = peak <= 0
    out = np.divide(arr, peak, out=np.zeros_like(arr), where=~degenerate)
    flag = degenerate.reshape(arr.shape[:-2])
    return Normalized(out, bool(flag) if flag.ndim == 0 else flag)
