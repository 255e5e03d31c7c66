"""Desk-scale crime-scene drone toolkit.

Three capabilities, each verifiable with synthetic scenes:
  - transfer-stain (blood smear) direction inference,
  - marker-anchored evidence mapping with pairwise distance reports,
  - window-entry feasibility and Monte-Carlo approach trials.
"""

__version__ = "0.1.0"

from .estimator import SmearDirectionEstimator  # noqa: F401
from .raster import Raster, StrokeSpec, generate_smear, read_image, write_image  # noqa: F401
from .smear import (DirectionEstimate, HueRangeSet, angular_error,  # noqa: F401
                    estimate_direction, evaluate_dataset, extract_contours,
                    fit_line, segment_red)
