"""Synthetic event scenes with known attention targets.

Scenes are described by a flat ``SceneSpec``; the same keys are accepted in
scene files (``key = value`` per line)::

    kind = composite            # moving_dot | flicker_patch | poisson_noise | composite
    components = moving_dot, poisson_noise
    width = 304
    height = 240
    duration = 8s
    seed = 0
    dot_radius = 5              # pixels
    dot_x0 = 152                # start centre, defaults to the sensor centre
    dot_y0 = 120
    dot_vx = 100                # pixels per second
    dot_vy = 0
    patch_x = 142               # flicker rectangle (left, top, width, height)
    patch_y = 110
    patch_w = 20
    patch_h = 20
    flicker_period = 200ms
    noise_rate = 0.1            # events per pixel per second

The dot bounces off the sensor edges.  Its occupancy (pixels whose centre
lies within the radius of the dot centre) is re-evaluated every 1 ms tick
from t=0 through t=duration inclusive, and every occupancy change emits
one event: ON when a pixel becomes covered, OFF when it is uncovered.  The
dot's appearance at t=0 produces ON events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .config import parse_duration, parse_list, read_flat_config
from .errors import ValidationError
from .events import FixationRecord, SensorGeometry, empty_events, make_events

KINDS = ("moving_dot", "flicker_patch", "poisson_noise", "composite")
TICK_US = 1_000


@dataclass(frozen=True)
class SceneSpec:
    kind: str = "moving_dot"
    width: int = 304
    height: int = 240
    duration: int = 8_000_000
    seed: int = 0
    name: str = "synth"
    components: tuple[str, ...] = ()
    dot_radius: float = 5.0
    dot_x0: float | None = None
    dot_y0: float | None = None
    dot_vx: float = 100.0
    dot_vy: float = 0.0
    patch_x: int = 142
    patch_y: int = 110
    patch_w: int = 20
    patch_h: int = 20
    flicker_period: int = 200_000
    noise_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scene kind {self.kind!r}")
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        if self.kind == "composite":
            if not self.components:
                raise ValidationError("composite scene needs components")
            for c in self.components:
                if c not in KINDS or c == "composite":
                    raise ValidationError(f"invalid component {c!r}")
        kinds = self.components if self.kind == "composite" else (self.kind,)
        if "moving_dot" in kinds:
            x0, y0 = self.dot_start
            if self.dot_radius <= 0 or not self.geometry.contains(x0, y0):
                raise ValidationError("dot must start on the sensor with a positive radius")
        if "flicker_patch" in kinds:
            if (self.patch_w < 1 or self.patch_h < 1 or self.patch_x < 0 or self.patch_y < 0
                    or self.patch_x + self.patch_w > self.width
                    or self.patch_y + self.patch_h > self.height):
                raise ValidationError("flicker patch must lie inside the sensor")
            if self.flicker_period <= 0:
                raise ValidationError("flicker period must be positive")
        if self.noise_rate < 0:
            raise ValidationError("noise rate must be non-negative")

    @property
    def geometry(self) -> SensorGeometry:
        return SensorGeometry(self.width, self.height)

    @property
    def dot_start(self) -> tuple[float, float]:
        x0 = (self.width - 1) / 2 if self.dot_x0 is None else self.dot_x0
        y0 = (self.height - 1) / 2 if self.dot_y0 is None else self.dot_y0
        return x0, y0


def load_scene(path: str | Path) -> SceneSpec:
    raw = read_flat_config(path)
    kinds = {f.name: f for f in fields(SceneSpec)}
    values = {}
    for key, text in raw.items():
        if key not in kinds:
            raise ValidationError(f"unknown scene key {key!r}")
        if key in ("kind", "name"):
            values[key] = text.strip()
        elif key == "components":
            values[key] = tuple(parse_list(text))
        elif key in ("duration", "flicker_period"):
            values[key] = parse_duration(text)
        elif key in ("width", "height", "seed", "patch_x", "patch_y", "patch_w", "patch_h"):
            values[key] = int(text)
        else:
            values[key] = float(text)
    return SceneSpec(**values)


def _reflect(p: np.ndarray, hi: float) -> np.ndarray:
    """Fold positions into [0, hi] as a ball bouncing between the walls."""
    if hi <= 0:
        return np.zeros_like(p)
    q = np.mod(p, 2 * hi)
    return np.where(q <= hi, q, 2 * hi - q)


def dot_center(spec: SceneSpec, t_us) -> tuple[np.ndarray, np.ndarray]:
    """Analytic dot centre at the given time(s)."""
    t = np.asarray(t_us, dtype=np.float64) * 1e-6
    x0, y0 = spec.dot_start
    return (_reflect(x0 + spec.dot_vx * t, spec.width - 1),
            _reflect(y0 + spec.dot_vy * t, spec.height - 1))


def _moving_dot(spec: SceneSpec) -> np.ndarray:
    h, w = spec.height, spec.width
    ticks = np.arange(0, spec.duration + 1, TICK_US, dtype=np.int64)
    cx, cy = dot_center(spec, ticks)
    r = spec.dot_radius
    reach = int(math.ceil(r)) + 1
    occupied = np.zeros((h, w), dtype=bool)
    chunks = []
    prev_box = None
    for k, t in enumerate(ticks):
        x_lo, x_hi = max(int(cx[k]) - reach, 0), min(int(cx[k]) + reach + 1, w)
        y_lo, y_hi = max(int(cy[k]) - reach, 0), min(int(cy[k]) + reach + 1, h)
        box = (y_lo, y_hi, x_lo, x_hi) if prev_box is None else (
            min(y_lo, prev_box[0]), max(y_hi, prev_box[1]),
            min(x_lo, prev_box[2]), max(x_hi, prev_box[3]))
        prev_box = (y_lo, y_hi, x_lo, x_hi)
        ys = np.arange(box[0], box[1])[:, None]
        xs = np.arange(box[2], box[3])[None, :]
        now = (xs - cx[k]) ** 2 + (ys - cy[k]) ** 2 <= r * r
        before = occupied[box[0]:box[1], box[2]:box[3]]
        changed = now != before
        if changed.any():
            ry, rx = np.nonzero(changed)
            chunks.append(make_events(np.full(ry.size, t), rx + box[2], ry + box[0],
                                      now[ry, rx].astype(np.uint8)))
            occupied[box[0]:box[1], box[2]:box[3]] = now
    return np.concatenate(chunks) if chunks else empty_events()


def _flicker_patch(spec: SceneSpec) -> np.ndarray:
    ys, xs = np.mgrid[spec.patch_y:spec.patch_y + spec.patch_h,
                      spec.patch_x:spec.patch_x + spec.patch_w]
    xs, ys = xs.ravel(), ys.ravel()
    chunks = []
    for k, t in enumerate(range(0, spec.duration, spec.flicker_period)):
        chunks.append(make_events(np.full(xs.size, t), xs, ys, 1 - k % 2))
    return np.concatenate(chunks) if chunks else empty_events()


def _poisson_noise(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    expected = spec.noise_rate * spec.width * spec.height * spec.duration * 1e-6
    n = int(rng.poisson(expected)) if expected > 0 else 0
    t = np.sort(rng.integers(0, spec.duration, n))
    return make_events(t, rng.integers(0, spec.width, n), rng.integers(0, spec.height, n),
                       rng.integers(0, 2, n))


def generate(spec: SceneSpec) -> np.ndarray:
    """Deterministic, time-sorted event array for the scene."""
    kinds = spec.components if spec.kind == "composite" else (spec.kind,)
    seeds = np.random.SeedSequence(spec.seed).spawn(len(kinds))
    parts = []
    for kind, seed in zip(kinds, seeds):
        if kind == "moving_dot":
            parts.append(_moving_dot(spec))
        elif kind == "flicker_patch":
            parts.append(_flicker_patch(spec))
        else:
            parts.append(_poisson_noise(spec, np.random.default_rng(seed)))
    events = np.concatenate(parts) if parts else empty_events()
    return events[np.argsort(events["t"], kind="stable")]


def target_location(spec: SceneSpec, t_us) -> tuple[np.ndarray, np.ndarray]:
    """Where a viewer should look: the dot centre or the patch centre,
    taken from the first component that has one."""
    kinds = spec.components if spec.kind == "composite" else (spec.kind,)
    for kind in kinds:
        if kind == "moving_dot":
            return dot_center(spec, t_us)
        if kind == "flicker_patch":
            n = np.shape(t_us)
            return (np.full(n, spec.patch_x + (spec.patch_w - 1) / 2),
                    np.full(n, spec.patch_y + (spec.patch_h - 1) / 2))
    raise ValidationError(f"scene {spec.kind!r} ({', '.join(kinds)}) has no attention target")


def ground_truth_fixations(spec: SceneSpec, frame_period: int = 10_000,
                           participant_id: str = "synth") -> list[FixationRecord]:
    """One zero-length fixation per frame time at the target location."""
    times = np.arange(1, spec.duration // frame_period + 1, dtype=np.int64) * frame_period
    xs, ys = target_location(spec, times)
    return [FixationRecord(participant_id, spec.name, int(t), int(t), float(x), float(y))
            for t, x, y in zip(times, xs, ys)]

