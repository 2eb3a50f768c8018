import numpy as np
import pytest

from evsal.events import SensorGeometry, make_events


def naive_count(latest: dict, cx, cy, r, t_now, t_window):
    """Brute force over a dict {(x, y): t} that keeps only the latest event
    per pixel."""
    return sum(
        1 for (x, y), t in latest.items()
        if abs(cx - x) + abs(cy - y) <= r and t_now - t <= t_window
    )


def random_stream(rng, geometry, n, max_dt=300, edge_fraction=0.2):
    """Sorted random events; a share of them pinned to the sensor border."""
    w, h = geometry.width, geometry.height
    t = np.cumsum(rng.integers(0, max_dt + 1, n))
    x = rng.integers(0, w, n)
    y = rng.integers(0, h, n)
    edge = rng.random(n) < edge_fraction
    side = rng.integers(0, 4, n)
    x = np.where(edge & (side == 0), 0, x)
    x = np.where(edge & (side == 1), w - 1, x)
    y = np.where(edge & (side == 2), 0, y)
    y = np.where(edge & (side == 3), h - 1, y)
    return make_events(t, x, y, rng.integers(0, 2, n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_geometry():
    return SensorGeometry(64, 64)
