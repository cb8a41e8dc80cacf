"""Chart rendering for sweep and decomposition result CSVs."""

from .charts import CHARTS, KINDS, build_figure, render
from .frames import HEADERS, Frame, FrameError, load_frame, series

__all__ = [
    "CHARTS",
    "Frame",
    "FrameError",
    "HEADERS",
    "KINDS",
    "build_figure",
    "load_frame",
    "render",
    "series",
]
