"""Event-based multi-scale spatiotemporal saliency."""

__version__ = "0.1.0"

from .errors import DegenerateMetricError, EvsalError, FormatError, GeometryError, ValidationError
from .events import (
    Event,
    EventStream,
    FixationRecord,
    Polarity,
    SensorGeometry,
    make_events,
    read_event_stream,
    read_fixations,
    write_event_stream,
    write_fixations,
)
from .metrics import attention_score, build_fixation_map, cc, filter_dataset, nss, sauc, sim
from .rasterizer import SaliencyFrame, read_frames, render_frames, write_frames
from .saliency import (
    ScaleConfig,
    ScaleGrid,
    normalize_scores,
    process_stream,
    score_event,
    score_event_fast,
    score_single_scale,
)
from .time_surface import TimeSurface
