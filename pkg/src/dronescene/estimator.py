"""scikit-learn style wrapper around the smear direction pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import smear
from .raster import Raster


class SmearDirectionEstimator(BaseEstimator):
    """Predicts the motion direction of transfer stains.

    Stateless (the pipeline has no trained parameters); fit validates the
    configuration and returns self so the estimator composes with sklearn
    pipelines, cloning, and grid search.

    Parameters mirror the pipeline knobs: hue intervals plus saturation and
    value floors for red picking, the minimum contour area as a fraction of
    the image, and the ambiguity threshold on the blood-midpoint offset.
    """

    def __init__(self, hue_ranges=((345.0, 360.0), (0.0, 10.0)),
                 min_saturation=0.45, min_value=0.25,
                 min_area_fraction=smear.DEFAULT_MIN_AREA_FRACTION,
                 ambiguity_threshold=smear.DEFAULT_AMBIGUITY_THRESHOLD):
        self.hue_ranges = hue_ranges
        self.min_saturation = min_saturation
        self.min_value = min_value
        self.min_area_fraction = min_area_fraction
        self.ambiguity_threshold = ambiguity_threshold

    def _range_set(self) -> smear.HueRangeSet:
        return smear.HueRangeSet(ranges=tuple(tuple(r) for r in self.hue_ranges),
                                 min_saturation=self.min_saturation,
                                 min_value=self.min_value)

    def fit(self, X=None, y=None):
        if not 0.0 <= self.min_saturation <= 1.0 or not 0.0 <= self.min_value <= 1.0:
            raise ValueError("saturation and value floors must be in [0, 1]")
        if not self.hue_ranges:
            raise ValueError("at least one hue interval is required")
        return self

    def predict_one(self, image) -> smear.DirectionEstimate:
        if isinstance(image, Raster):
            return smear.analyze_raster(image, self._range_set(),
                                        self.min_area_fraction,
                                        self.ambiguity_threshold)
        return smear.analyze_mask(np.asarray(image, dtype=bool),
                                  self.min_area_fraction,
                                  self.ambiguity_threshold)

    def predict(self, X) -> list:
        """Per-image DirectionEstimate for a list of rasters or masks."""
        return [self.predict_one(image) for image in X]

    def score(self, X, y) -> float:
        """Codebook label accuracy against true labels."""
        estimates = self.predict(X)
        hits = sum(est.label == truth for est, truth in zip(estimates, y))
        return hits / len(estimates)
