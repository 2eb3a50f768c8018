"""Per-pixel latest-timestamp buffer.

Only the most recent event at each pixel is kept and nothing decays; a
cell is either EMPTY or the timestamp of the last event seen there.
Polarity is ignored: ON and OFF events update the same buffer.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .events import Event, SensorGeometry

EMPTY = -1


@lru_cache(maxsize=64)
def manhattan_distance_patch(r: int) -> np.ndarray:
    """(2r+1, 2r+1) array of city-block distances from the centre cell."""
    d = np.abs(np.arange(-r, r + 1))
    return d[:, None] + d[None, :]


class TimeSurface:
    """Mutable latest-event store for one sensor.

    ``cells[y, x]`` is an int64 timestamp in microseconds, or ``EMPTY``.
    """

    def __init__(self, geometry: SensorGeometry, strict: bool = True):
        self.geometry = geometry
        self.strict = strict
        self.cells = np.full(geometry.shape, EMPTY, dtype=np.int64)
        self.last_update_t = 0

    def __getitem__(self, xy) -> int:
        x, y = xy
        return int(self.cells[y, x])

    def copy(self) -> "TimeSurface":
        other = TimeSurface(self.geometry, self.strict)
        other.cells = self.cells.copy()
        other.last_update_t = self.last_update_t
        return other

    @property
    def population(self) -> int:
        return int(np.count_nonzero(self.cells != EMPTY))

    def update(self, e: Event | tuple) -> "TimeSurface":
        t, x, y = (e.t, e.x, e.y) if isinstance(e, Event) else e[:3]
        t, x, y = int(t), int(x), int(y)
        if not self.geometry.contains(x, y):
            raise ValidationError(
                f"event at ({x}, {y}) outside {self.geometry.width}x{self.geometry.height} sensor"
            )
        if self.strict and t < self.last_update_t:
            raise ValidationError(f"timestamp {t} precedes last update {self.last_update_t}")
        self.cells[y, x] = t
        self.last_update_t = max(self.last_update_t, t)
        return self

    def count_in_window(self, cx: int, cy: int, r: int, t_now: int, t_window: int) -> int:
        """Number of non-empty cells within city-block radius ``r`` of
        ``(cx, cy)`` whose age ``t_now - t`` is at most ``t_window``.

        Pixels beyond the sensor edge contribute nothing.
        """
        if r < 0 or t_window <= 0:
            raise ValueError("need r >= 0 and t_window > 0")
        if not self.geometry.contains(cx, cy):
            raise ValidationError(f"query centre ({cx}, {cy}) outside sensor")
        h, w = self.geometry.shape
        y0, y1 = max(cy - r, 0), min(cy + r + 1, h)
        x0, x1 = max(cx - r, 0), min(cx + r + 1, w)
        block = self.cells[y0:y1, x0:x1]
        dist = manhattan_distance_patch(r)[y0 - cy + r:y1 - cy + r, x0 - cx + r:x1 - cx + r]
        hit = (block != EMPTY) & (dist <= r) & (t_now - block <= t_window)
        return int(np.count_nonzero(hit))
