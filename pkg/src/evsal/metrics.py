"""Fixation-prediction metrics and fixation bookkeeping.

Location metrics (NSS, shuffled AUC) read the saliency map at fixated
pixels; distribution metrics (SIM, CC) compare the map with a fixation
map built by smoothing fixation impulses.  Standard deviations are
population (ddof=0) statistics over all pixels of the map.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DegenerateMetricError, ValidationError
from .events import FixationRecord, SensorGeometry

DEFAULT_ATTENTION_THRESHOLD = 0.9


@dataclass(frozen=True)
class FixationSample:
    frame_index: int
    x: float
    y: float


@dataclass
class FixationMap:
    values: np.ndarray
    normalized: bool = True


def to_pixel(x: float, y: float) -> tuple[int, int]:
    """Nearest pixel (round half up) of a continuous video coordinate."""
    return int(math.floor(x + 0.5)), int(math.floor(y + 0.5))


def is_attentive(x: float, y: float, geometry: SensorGeometry) -> bool:
    px, py = to_pixel(x, y)
    return geometry.contains(px, py)


def _pixels(points, shape) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of in-bounds points; off-map points dropped."""
    h, w = shape
    rows, cols = [], []
    for p in points:
        x, y = (p.x, p.y) if hasattr(p, "x") else p
        px, py = to_pixel(x, y)
        if 0 <= px < w and 0 <= py < h:
            rows.append(py)
            cols.append(px)
    return np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp)


def _values(m) -> np.ndarray:
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


def nss(saliency, fixations: Sequence) -> float:
    """Mean z-score of the saliency map at fixated pixels."""
    s = _values(saliency)
    rows, cols = _pixels(fixations, s.shape)
    if rows.size == 0:
        raise DegenerateMetricError("NSS needs at least one in-bounds fixation")
    sd = s.std()
    if not sd > 0:
        raise DegenerateMetricError("NSS undefined for a constant map")
    return float(((s[rows, cols] - s.mean()) / sd).mean())


def auc_from_scores(pos: np.ndarray, neg: np.ndarray) -> float:
    """ROC area as the Mann-Whitney statistic with ties counted as 1/2."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DegenerateMetricError("AUC needs positives and negatives")
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    wins = below.sum() + 0.5 * (not_above - below).sum()
    return float(wins / (pos.size * neg.size))


def sauc(saliency, positives: Sequence, negatives: Sequence) -> float:
    """Shuffled AUC.

    ``positives`` are this video's fixations, ``negatives`` fixations pooled
    from other videos.  Locations off the map are ignored.
    """
    s = _values(saliency)
    pr, pc = _pixels(positives, s.shape)
    nr, nc = _pixels(negatives, s.shape)
    if pr.size == 0:
        raise DegenerateMetricError("sAUC needs at least one positive fixation")
    if nr.size == 0:
        raise DegenerateMetricError("sAUC needs at least one negative fixation")
    return auc_from_scores(s[pr, pc], s[nr, nc])


def as_distribution(values) -> np.ndarray:
    """Scale a non-negative map to unit sum."""
    v = _values(values)
    total = v.sum()
    if not total > 0:
        raise DegenerateMetricError("cannot normalize a map with zero mass")
    return v / total


def _check_unit_sum(v: np.ndarray, name: str) -> None:
    if abs(v.sum() - 1.0) > 1e-6:
        raise ValidationError(f"{name} must sum to 1 (got {v.sum():.9g}); normalize it first")


def sim(s, fm) -> float:
    """Histogram intersection of two unit-sum maps."""
    a, b = _values(s), _values(fm)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    _check_unit_sum(a, "saliency map")
    _check_unit_sum(b, "fixation map")
    return float(np.minimum(a, b).sum())


def cc(s, fm) -> float:
    """Pearson correlation over all pixels."""
    a, b = _values(s).ravel(), _values(fm).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = np.sqrt((a * a).mean()), np.sqrt((b * b).mean())
    if not (sa > 0 and sb > 0):
        raise DegenerateMetricError("CC undefined when either map is constant")
    r = float((a * b).mean() / (sa * sb))
    return min(1.0, max(-1.0, r))


def degrees_to_pixels(
    degrees: float = 1.0,
    distance_cm: float = 150.0,
    screen_width_cm: float = 168.0,
    screen_width_px: int = 1024,
) -> float:
    """Visual angle to display pixels for a given viewing geometry.

    Defaults describe a 168 cm wide, 1024 px display seen from 1.5 m, with
    video shown at native resolution (one video pixel per screen pixel).
    """
    extent_cm = 2.0 * distance_cm * math.tan(math.radians(degrees) / 2.0)
    return extent_cm * screen_width_px / screen_width_cm


DEFAULT_FIXATION_SIGMA = degrees_to_pixels(1.0)


@lru_cache(maxsize=16)
def gaussian_stamp(sigma: float) -> np.ndarray:
    """Separable isotropic Gaussian truncated at 3 sigma, unit sum."""
    radius = int(3.0 * sigma + 0.5)
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (d / sigma) ** 2)
    k /= k.sum()
    return np.outer(k, k)


def build_fixation_map(fixations: Sequence, geometry: SensorGeometry,
                       sigma: float = DEFAULT_FIXATION_SIGMA) -> FixationMap:
    """Unit impulses at fixated pixels, blurred by a Gaussian truncated at
    3 sigma, rescaled to unit sum.  ``sigma=0`` keeps the bare impulses.

    Mass blurred past the sensor edge is dropped before rescaling.
    """
    rows, cols = _pixels(fixations, geometry.shape)
    if rows.size == 0:
        raise DegenerateMetricError("no attentive fixations to build a fixation map")
    h, w = geometry.shape
    fm = np.zeros((h, w), dtype=np.float64)
    if sigma <= 0:
        np.add.at(fm, (rows, cols), 1.0)
        return FixationMap(fm / fm.sum(), True)
    stamp = gaussian_stamp(float(sigma))
    rad = stamp.shape[0] // 2
    for (y, x), n in Counter(zip(rows.tolist(), cols.tolist())).items():
        y0, y1 = max(y - rad, 0), min(y + rad + 1, h)
        x0, x1 = max(x - rad, 0), min(x + rad + 1, w)
        fm[y0:y1, x0:x1] += n * stamp[y0 - y + rad:y1 - y + rad, x0 - x + rad:x1 - x + rad]
    return FixationMap(fm / fm.sum(), True)


def attention_score(fixations: Sequence[FixationRecord], geometry: SensorGeometry) -> float:
    """Fraction of fixations landing on the video area (edge pixels inside)."""
    if not fixations:
        raise ValidationError("attention score needs at least one fixation")
    inside = sum(is_attentive(f.x, f.y, geometry) for f in fixations)
    return inside / len(fixations)


@dataclass
class FilterResult:
    records: list[FixationRecord]
    scores: dict[tuple[str, str], float]
    kept: dict[str, int] = field(default_factory=dict)
    total: dict[str, int] = field(default_factory=dict)

    def retention(self) -> dict[str, tuple[int, int]]:
        """Per category: (participant-video pairs kept, pairs seen)."""
        return {c: (self.kept.get(c, 0), n) for c, n in self.total.items()}


def filter_dataset(
    records: Iterable[FixationRecord],
    geometry: SensorGeometry,
    threshold: float = DEFAULT_ATTENTION_THRESHOLD,
    categories: Mapping[str, str] | None = None,
) -> FilterResult:
    """Drop participant-video pairs whose attention score is below threshold."""
    categories = categories or {}
    groups: dict[tuple[str, str], list[FixationRecord]] = defaultdict(list)
    for r in records:
        groups[(r.participant_id, r.video_id)].append(r)
    result = FilterResult([], {})
    for key, recs in groups.items():
        score = attention_score(recs, geometry)
        result.scores[key] = score
        cat = categories.get(key[1], "all")
        result.total[cat] = result.total.get(cat, 0) + 1
        if score >= threshold:
            result.kept[cat] = result.kept.get(cat, 0) + 1
            result.records.extend(recs)
    return result


def fixations_per_frame(
    records: Iterable[FixationRecord],
    frame_times: Iterable[int],
    geometry: SensorGeometry | None = None,
) -> Iterator[list[FixationSample]]:
    """For each frame time (ascending), the fixations whose
    ``[t_start, t_end]`` interval contains it.

    Lazy in ``frame_times``.  Off-video fixations are dropped when
    ``geometry`` is given.
    """
    pending = sorted(
        (r for r in records if geometry is None or is_attentive(r.x, r.y, geometry)),
        key=lambda r: r.t_start,
    )
    active: list[FixationRecord] = []
    i = 0
    for k, t in enumerate(frame_times):
        while i < len(pending) and pending[i].t_start <= t:
            active.append(pending[i])
            i += 1
        active = [r for r in active if r.t_end >= t]
        yield [FixationSample(k, r.x, r.y) for r in active]


@dataclass
class GroupSummary:
    group: str
    mean: float
    n_frames: int
    n_excluded: int

    @property
    def flagged(self) -> bool:
        """True when the group had no valid frame to average."""
        return self.n_frames == 0


def aggregate(values: Sequence, groups: Sequence[str] | None = None) -> dict[str, GroupSummary]:
    """Mean per group, skipping None/NaN (degenerate) entries and counting them."""
    if groups is None:
        groups = ["all"] * len(values)
    if len(groups) != len(values):
        raise ValueError("values and groups differ in length")
    valid: dict[str, list[float]] = defaultdict(list)
    excluded: dict[str, int] = defaultdict(int)
    for v, g in zip(values, groups):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            excluded[g] += 1
            valid.setdefault(g, [])
        else:
            valid[g].append(float(v))
    out = {}
    for g, vals in valid.items():
        mean = float(np.mean(vals)) if vals else math.nan
        out[g] = GroupSummary(g, mean, len(vals), excluded[g])
    return out
