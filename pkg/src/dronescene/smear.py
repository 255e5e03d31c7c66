"""Transfer-stain direction inference.

Pipeline: hue segmentation -> connected components with area filtering ->
line fit (principal axis of contour centroids, or second-order moments of a
single contour) -> motion direction from the offset of the red-mass midpoint
along the line -> nearest codebook label.

Internally all pixel geometry lives in image storage coords (x right, y
down); angles cross the API boundary in math convention (CCW from +x, y up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import Raster, rgb_to_hsv_array

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)

DEFAULT_MIN_AREA_FRACTION = 0.0005
DEFAULT_AMBIGUITY_THRESHOLD = 0.02
DEFAULT_LINE_TOLERANCE_DEG = 30.0


class NoBloodDetectedError(ValueError):
    """Segmentation produced no usable contour."""


class InsufficientExtentError(ValueError):
    """The stain extent along the fitted line is too small to orient."""


@dataclass(frozen=True)
class HueRangeSet:
    """Hue intervals (degrees) plus saturation/value floors for red picking.

    The defaults keep two narrow red bands and exclude orange-red hues and
    dark shadows; an interval with low > high wraps around 360.
    """

    ranges: tuple = ((345.0, 360.0), (0.0, 10.0))
    min_saturation: float = 0.45
    min_value: float = 0.25

    def contains_hue(self, hue: np.ndarray) -> np.ndarray:
        hit = np.zeros(np.shape(hue), dtype=bool)
        for low, high in self.ranges:
            if low <= high:
                hit |= (hue >= low) & (hue < high)
            else:
                hit |= (hue >= low) | (hue < high)
        return hit


@dataclass(frozen=True)
class Contour:
    """One 8-connected red component with its first and second moments."""

    pixel_count: int
    centroid: tuple  # (x, y), image coords, sub-pixel
    mu20: float
    mu02: float
    mu11: float
    bbox: tuple  # (row, col, height, width)


@dataclass(frozen=True)
class FittedLine:
    anchor: tuple  # (x, y), image coords
    direction: tuple  # unit vector, math convention; angle in [0, 180)
    source: str  # "multi-contour-fit" | "single-contour-moments"

    @property
    def angle_deg(self) -> float:
        return math.degrees(math.atan2(self.direction[1], self.direction[0])) % 180.0


@dataclass(frozen=True)
class DirectionEstimate:
    angle_deg: float  # motion direction, math convention, [0, 360)
    label: str  # up | down | left | right
    ambiguous: bool
    offset_magnitude: float  # signed blood-midpoint offset along the line, px


CODEBOOK = {"right": 0.0, "up": 90.0, "left": 180.0, "down": 270.0}
# Tie-break order at exact 45-degree boundaries: prefer horizontal labels.
_CODEBOOK_ORDER = ("right", "left", "up", "down")


def classify_angle(angle_deg: float) -> str:
    """Nearest codebook label by maximum dot product."""
    a = math.radians(angle_deg)
    v = (math.cos(a), math.sin(a))
    dots = {}
    for label, code_deg in CODEBOOK.items():
        c = math.radians(code_deg)
        dots[label] = v[0] * math.cos(c) + v[1] * math.sin(c)
    best = max(dots.values())
    for label in _CODEBOOK_ORDER:
        if dots[label] >= best - 1e-9:
            return label
    raise AssertionError("unreachable")


def segment_red(raster: Raster, ranges: HueRangeSet | None = None) -> np.ndarray:
    """Boolean mask of pixels whose hue falls in any red interval and whose
    saturation and value clear the configured floors."""
    ranges = ranges or HueRangeSet()
    hsv = rgb_to_hsv_array(raster.pixels)
    return (ranges.contains_hue(hsv[..., 0])
            & (hsv[..., 1] >= ranges.min_saturation)
            & (hsv[..., 2] >= ranges.min_value))


def extract_contours(mask: np.ndarray,
                     min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION) -> list:
    """8-connected components above the area threshold, sorted by descending
    area (ties by bounding-box origin, row then col)."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    min_area = min_area_fraction * w * h
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    contours = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        rows, cols = np.nonzero(labels[sl] == idx)
        count = rows.size
        if count < min_area:
            continue
        rows = rows + sl[0].start
        cols = cols + sl[1].start
        cx = cols.mean()
        cy = rows.mean()
        dx = cols - cx
        dy = rows - cy
        contours.append(Contour(
            pixel_count=int(count),
            centroid=(float(cx), float(cy)),
            mu20=float((dx * dx).sum()),
            mu02=float((dy * dy).sum()),
            mu11=float((dx * dy).sum()),
            bbox=(int(sl[0].start), int(sl[1].start),
                  int(sl[0].stop - sl[0].start), int(sl[1].stop - sl[1].start)),
        ))
    contours.sort(key=lambda c: (-c.pixel_count, c.bbox[0], c.bbox[1]))
    return contours


def _normalize_axis(angle_rad: float) -> tuple:
    """Unit vector for an undirected axis, sign-normalized to [0, 180)."""
    deg = math.degrees(angle_rad) % 180.0
    a = math.radians(deg)
    return (math.cos(a), math.sin(a))


def _moments_axis(contour: Contour) -> tuple:
    # Storage y points down, so mu11 flips sign in math convention.
    angle = 0.5 * math.atan2(-2.0 * contour.mu11, contour.mu20 - contour.mu02)
    return _normalize_axis(angle)


def fit_line(contours: list) -> FittedLine:
    """Principal-axis (total least squares) line through contour centroids;
    falls back to second-order moments for a single contour."""
    if not contours:
        raise NoBloodDetectedError("no contours to fit")
    if len(contours) == 1:
        c = contours[0]
        return FittedLine(anchor=c.centroid, direction=_moments_axis(c),
                          source="single-contour-moments")

    pts = np.array([c.centroid for c in contours], dtype=float)
    pts[:, 1] *= -1.0  # math convention for the fit
    mean = pts.mean(axis=0)
    centered = pts - mean
    scatter = centered.T @ centered
    if np.trace(scatter) < 1e-12:
        # Coincident centroids: fall back to the largest contour's shape.
        c = contours[0]
        return FittedLine(anchor=c.centroid, direction=_moments_axis(c),
                          source="single-contour-moments")
    eigvals, eigvecs = np.linalg.eigh(scatter)
    principal = eigvecs[:, int(np.argmax(eigvals))]
    direction = _normalize_axis(math.atan2(principal[1], principal[0]))
    return FittedLine(anchor=(float(mean[0]), float(-mean[1])),
                      direction=direction, source="multi-contour-fit")


def estimate_direction(line: FittedLine, mask: np.ndarray,
                       ambiguity_threshold: float = DEFAULT_AMBIGUITY_THRESHOLD,
                       ) -> DirectionEstimate:
    """Motion direction from the fitted line and the red-pixel mass.

    Every set pixel is projected onto the line; the blood-mass midpoint
    (mean projection) is compared against the midpoint of the projection
    extent. Motion points away from the blood-heavy end. A near-zero offset
    relative to the extent flags the estimate ambiguous.
    """
    mask = np.asarray(mask, dtype=bool)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise NoBloodDetectedError("mask has no set pixels")
    ux, uy = line.direction
    t = cols * ux + (-rows.astype(float)) * uy  # math frame projection
    t_min, t_max = float(t.min()), float(t.max())
    extent = t_max - t_min
    if extent < 2.0:
        raise InsufficientExtentError(
            f"projection extent {extent:.2f} px is too small to orient")
    t_mid = 0.5 * (t_min + t_max)
    t_bary = float(t.mean())
    s = t_bary - t_mid
    if s > 0:
        motion = (-ux, -uy)
    else:
        motion = (ux, uy)
    angle = math.degrees(math.atan2(motion[1], motion[0])) % 360.0
    ambiguous = abs(s) < ambiguity_threshold * extent
    return DirectionEstimate(angle_deg=angle, label=classify_angle(angle),
                             ambiguous=ambiguous, offset_magnitude=s)


def angular_error(predicted_deg: float, truth_deg: float) -> float:
    """Smallest absolute angle between two directions, in [0, 180]."""
    d = abs(predicted_deg - truth_deg) % 360.0
    return min(d, 360.0 - d)


def analyze_mask(mask: np.ndarray,
                 min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION,
                 ambiguity_threshold: float = DEFAULT_AMBIGUITY_THRESHOLD,
                 ) -> DirectionEstimate:
    contours = extract_contours(mask, min_area_fraction)
    line = fit_line(contours)
    return estimate_direction(line, mask, ambiguity_threshold)


def analyze_raster(raster: Raster,
                   ranges: HueRangeSet | None = None,
                   min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION,
                   ambiguity_threshold: float = DEFAULT_AMBIGUITY_THRESHOLD,
                   ) -> DirectionEstimate:
    return analyze_mask(segment_red(raster, ranges), min_area_fraction,
                        ambiguity_threshold)


@dataclass(frozen=True)
class EvaluationReport:
    n_samples: int
    label_accuracy: float
    mean_angular_error_deg: float
    mean_error_correct_deg: float
    line_of_motion_accuracy: float

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "label_accuracy": self.label_accuracy,
            "mean_angular_error_deg": self.mean_angular_error_deg,
            "mean_error_correct_deg": self.mean_error_correct_deg,
            "line_of_motion_accuracy": self.line_of_motion_accuracy,
        }


def summarize_predictions(pairs: list,
                          line_tolerance_deg: float = DEFAULT_LINE_TOLERANCE_DEG,
                          ) -> EvaluationReport:
    """Aggregate (estimate-or-None, truth_deg, truth_label) triples.

    A None estimate (no blood found) counts as an incorrect label and an
    incorrect line of motion, and is excluded from the angular-error means.
    """
    if not pairs:
        raise ValueError("at least one sample is required")
    n = len(pairs)
    correct = 0
    line_correct = 0
    errors = []
    errors_correct = []
    for est, truth_deg, truth_label in pairs:
        if est is None:
            continue
        err = angular_error(est.angle_deg, truth_deg)
        errors.append(err)
        line_err = min(err, 180.0 - err)
        if line_err <= line_tolerance_deg:
            line_correct += 1
        if est.label == truth_label:
            correct += 1
            errors_correct.append(err)
    return EvaluationReport(
        n_samples=n,
        label_accuracy=correct / n,
        mean_angular_error_deg=float(np.mean(errors)) if errors else float("nan"),
        mean_error_correct_deg=(float(np.mean(errors_correct))
                                if errors_correct else float("nan")),
        line_of_motion_accuracy=line_correct / n,
    )


def evaluate_dataset(samples: list,
                     ranges: HueRangeSet | None = None,
                     min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION,
                     ambiguity_threshold: float = DEFAULT_AMBIGUITY_THRESHOLD,
                     line_tolerance_deg: float = DEFAULT_LINE_TOLERANCE_DEG,
                     ) -> EvaluationReport:
    """Run the full pipeline on (mask-or-raster, truth_deg, truth_label)
    samples and aggregate the four dataset statistics."""
    if not samples:
        raise ValueError("at least one sample is required")
    pairs = []
    for image, truth_deg, truth_label in samples:
        try:
            if isinstance(image, Raster):
                est = analyze_raster(image, ranges, min_area_fraction,
                                     ambiguity_threshold)
            else:
                est = analyze_mask(image, min_area_fraction, ambiguity_threshold)
        except (NoBloodDetectedError, InsufficientExtentError):
            est = None
        pairs.append((est, truth_deg, truth_label))
    return summarize_predictions(pairs, line_tolerance_deg)
