import math

import numpy as np
import pytest

from evsal.errors import ValidationError
from evsal.synth import (
    SceneSpec,
    dot_center,
    generate,
    ground_truth_fixations,
    load_scene,
    target_location,
)


def test_zero_noise_is_empty():
    ev = generate(SceneSpec(kind="poisson_noise", noise_rate=0.0, duration=1_000_000))
    assert ev.size == 0


def test_single_pixel_flicker():
    spec = SceneSpec(kind="flicker_patch", width=4, height=4, patch_x=2, patch_y=1,
                     patch_w=1, patch_h=1, flicker_period=10_000, duration=100_000)
    ev = generate(spec)
    assert ev.size == 10
    np.testing.assert_array_equal(ev["t"], np.arange(10) * 10_000)
    np.testing.assert_array_equal(ev["p"], [1, 0] * 5)
    assert set(ev["x"]) == {2} and set(ev["y"]) == {1}


def test_dot_events_stay_near_centre():
    spec = SceneSpec(kind="moving_dot", width=64, height=48, duration=1_500_000,
                     dot_radius=3, dot_vx=70, dot_vy=-45)
    ev = generate(spec)
    assert ev.size > 0
    cx, cy = dot_center(spec, ev["t"])
    d = np.hypot(ev["x"] - cx, ev["y"] - cy)
    assert d.max() <= spec.dot_radius + 1
    assert np.all(np.diff(ev["t"].astype(np.int64)) >= 0)


def test_dot_bounces_inside_sensor():
    spec = SceneSpec(kind="moving_dot", width=40, height=30, dot_vx=500, dot_vy=300)
    cx, cy = dot_center(spec, np.arange(0, 5_000_000, 1000))
    assert cx.min() >= 0 and cx.max() <= 39
    assert cy.min() >= 0 and cy.max() <= 29


def test_reproducible_bytes():
    spec = SceneSpec(kind="composite", components=("moving_dot", "poisson_noise"),
                     width=64, height=64, duration=500_000, noise_rate=2.0, seed=7)
    a, b = generate(spec), generate(spec)
    assert a.tobytes() == b.tobytes()
    other = generate(SceneSpec(**{**spec.__dict__, "seed": 8}))
    assert other.tobytes() != a.tobytes()


def test_poisson_count_within_three_sigma():
    spec = SceneSpec(kind="poisson_noise", width=100, height=100, duration=2_000_000,
                     noise_rate=0.5, seed=3)
    expected = 0.5 * 100 * 100 * 2.0
    n = generate(spec).size
    assert abs(n - expected) <= 3 * math.sqrt(expected)


def test_ground_truth_for_dot():
    spec = SceneSpec(kind="moving_dot", duration=100_000)
    fx = ground_truth_fixations(spec, 10_000)
    assert [f.t_start for f in fx] == list(range(10_000, 100_001, 10_000))
    cx, cy = dot_center(spec, 30_000)
    assert (fx[2].x, fx[2].y) == pytest.approx((float(cx), float(cy)))


def test_ground_truth_for_patch_and_composite():
    spec = SceneSpec(kind="composite", components=("poisson_noise", "flicker_patch"),
                     duration=50_000, patch_x=10, patch_y=20, patch_w=4, patch_h=6)
    fx = ground_truth_fixations(spec, 10_000)
    assert len(fx) == 5
    assert {(f.x, f.y) for f in fx} == {(11.5, 22.5)}


def test_noise_only_has_no_target():
    with pytest.raises(ValidationError):
        target_location(SceneSpec(kind="poisson_noise", noise_rate=1.0), [0])


@pytest.mark.parametrize("kw", [
    {"kind": "spiral"},
    {"duration": 0},
    {"kind": "composite"},
    {"kind": "composite", "components": ("composite",)},
    {"kind": "flicker_patch", "patch_x": 300},
    {"kind": "moving_dot", "dot_x0": -4},
    {"noise_rate": -1},
])
def test_invalid_specs(kw):
    with pytest.raises(ValidationError):
        SceneSpec(**kw)


def test_load_scene(tmp_path):
    p = tmp_path / "scene.cfg"
    p.write_text("kind = composite\ncomponents = moving_dot, poisson_noise\n"
                 "duration = 2s\nseed = 5\ndot_vx = 40\nnoise_rate = 0.1\nflicker_period = 50ms\n")
    spec = load_scene(p)
    assert spec.components == ("moving_dot", "poisson_noise")
    assert spec.duration == 2_000_000 and spec.flicker_period == 50_000
    assert spec.seed == 5 and spec.dot_vx == 40.0
    p.write_text("kind = moving_dot\nbogus = 1\n")
    with pytest.raises(ValidationError):
        load_scene(p)
