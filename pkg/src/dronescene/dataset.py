"""Synthetic stain dataset recipes.

The standard 20-sample composition mirrors the physical dataset the
pipeline is scored against: 5 hand-staccato, 5 shoe-staccato and 5
hand-legato directional strokes, plus 5 amorphous depletion-0 blobs whose
direction is intentionally ambiguous.
"""

from __future__ import annotations

import math

import numpy as np

from .raster import Raster, StrokeSpec, generate_smear
from .smear import classify_angle

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240


def centered_stroke(direction_deg: float, length: float, stamp: str,
                    stamp_size: float, continuity: str, depletion: float,
                    seed: int, interval: float = 0.0,
                    width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                    ) -> StrokeSpec:
    """StrokeSpec whose midpoint sits at the canvas center."""
    theta = math.radians(direction_deg)
    # storage frame: y down
    start = (width / 2.0 - 0.5 * length * math.cos(theta),
             height / 2.0 + 0.5 * length * math.sin(theta))
    return StrokeSpec(start=start, direction_deg=direction_deg, length=length,
                      stamp=stamp, stamp_size=stamp_size, continuity=continuity,
                      interval=interval, depletion=depletion, seed=seed)


def blob_spec(seed: int, width: int = DEFAULT_WIDTH,
              height: int = DEFAULT_HEIGHT) -> StrokeSpec:
    """Depletion-0 amorphous blob stroke along a seeded random direction."""
    rng = np.random.default_rng(seed)
    direction = float(rng.choice([0.0, 90.0, 180.0, 270.0])
                      + rng.uniform(-20.0, 20.0)) % 360.0
    # Overlapping stamps smear into an amorphous deposit, like a dragged
    # soaked tissue; with zero depletion both ends carry equal mass.
    return centered_stroke(direction, length=144.0, stamp="blob",
                           stamp_size=30.0, continuity="staccato",
                           interval=24.0, depletion=0.0, seed=seed,
                           width=width, height=height)


def standard_composition(base_seed: int = 0, width: int = DEFAULT_WIDTH,
                         height: int = DEFAULT_HEIGHT) -> list:
    """The 20 StrokeSpecs of the standard dataset composition."""
    specs = []

    def directional(i, stamp, continuity):
        rng = np.random.default_rng(base_seed * 1000 + i)
        direction = float(rng.choice([0.0, 90.0, 180.0, 270.0])
                          + rng.uniform(-20.0, 20.0)) % 360.0
        return centered_stroke(direction, length=140.0, stamp=stamp,
                               stamp_size=26.0, continuity=continuity,
                               depletion=0.35, seed=base_seed * 1000 + i,
                               width=width, height=height)

    for i in range(5):
        specs.append(directional(i, "hand", "staccato"))
    for i in range(5, 10):
        specs.append(directional(i, "shoe", "staccato"))
    for i in range(10, 15):
        specs.append(directional(i, "hand", "legato"))
    for i in range(15, 20):
        specs.append(blob_spec(base_seed * 1000 + i, width, height))
    return specs


def generate_sample(spec: StrokeSpec, width: int = DEFAULT_WIDTH,
                    height: int = DEFAULT_HEIGHT) -> tuple:
    """(raster, truth_deg, truth_label) for one spec."""
    raster = generate_smear(Raster.blank(width, height), spec)
    truth_deg = spec.direction_deg % 360.0
    return raster, truth_deg, classify_angle(truth_deg)


def spec_to_dict(spec: StrokeSpec) -> dict:
    return {
        "start": [spec.start[0], spec.start[1]],
        "direction_deg": spec.direction_deg,
        "length": spec.length,
        "stamp": spec.stamp,
        "stamp_size": spec.stamp_size,
        "continuity": spec.continuity,
        "interval": spec.interval,
        "depletion": spec.depletion,
        "seed": spec.seed,
    }


def spec_from_dict(doc: dict) -> StrokeSpec:
    return StrokeSpec(start=tuple(doc["start"]),
                      direction_deg=doc["direction_deg"],
                      length=doc["length"], stamp=doc["stamp"],
                      stamp_size=doc["stamp_size"],
                      continuity=doc["continuity"],
                      interval=doc.get("interval", 0.0),
                      depletion=doc.get("depletion", 0.0),
                      seed=doc.get("seed", 0))
