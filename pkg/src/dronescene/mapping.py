"""Marker-anchored 3D scene map with evidence positions and distance reports.

Frame: x and z span the horizontal plane, y is vertical (up), all in meters.
The map frame is anchored at the first detected marker, which sits at
x = z = 0; its height comes from the drone's range-sensor altitude at
observation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EVIDENCE_CLASSES = ("gun", "blood", "casing")


class InconsistentSensorError(ValueError):
    """Downward range reads beyond the drone's altitude."""


@dataclass(frozen=True)
class MarkerObservation:
    marker_id: int
    bearing_deg: float  # drone-frame yaw to marker center
    range_m: float  # from apparent marker size
    drone_yaw_deg: float  # world-frame heading at observation time
    drone_altitude_m: float  # downward range-sensor reading

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError("range must be positive")
        for v in (self.bearing_deg, self.range_m, self.drone_yaw_deg,
                  self.drone_altitude_m):
            if not math.isfinite(v):
                raise ValueError("observation fields must be finite")


@dataclass(frozen=True)
class EvidenceItem:
    cls: str
    position: tuple  # (x, y, z) meters
    source_confidence: float

    def __post_init__(self):
        if self.cls not in EVIDENCE_CLASSES:
            raise ValueError(f"unknown evidence class {self.cls!r}")
        if not all(math.isfinite(v) for v in self.position):
            raise ValueError("evidence position must be finite")
        if not 0.0 <= self.source_confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass
class SceneMap:
    """Markers and evidence in the first-marker-anchored frame.

    The anchor marker is pinned at x = z = 0; re-observations of other
    markers are fused by running mean. mapping_drone_position carries the
    drone's map-frame position during the (rotate-in-place) mapping pass so
    a later pass can align itself to the same frame.
    """

    anchor_id: int
    markers: dict = field(default_factory=dict)  # id -> np.ndarray (3,)
    evidence: list = field(default_factory=list)
    mapping_drone_position: tuple = (0.0, 0.0, 0.0)
    _obs_counts: dict = field(default_factory=dict)


def _horizontal_offset(obs: MarkerObservation) -> tuple:
    alpha = math.radians(obs.drone_yaw_deg + obs.bearing_deg)
    return obs.range_m * math.cos(alpha), obs.range_m * math.sin(alpha)


def init_map(first: MarkerObservation) -> SceneMap:
    """Anchor the map at the first detected marker.

    The marker lands at (0, altitude, 0); the drone's map-frame position is
    back-solved so the observation is exactly explained.
    """
    dx, dz = _horizontal_offset(first)
    scene_map = SceneMap(anchor_id=first.marker_id)
    scene_map.markers[first.marker_id] = np.array(
        [0.0, first.drone_altitude_m, 0.0])
    scene_map.mapping_drone_position = (-dx, first.drone_altitude_m, -dz)
    scene_map._obs_counts[first.marker_id] = 1
    return scene_map


def localize_marker(scene_map: SceneMap, obs: MarkerObservation,
                    drone_position=None) -> SceneMap:
    """Place (or refine, by running mean) a marker relative to the drone's
    map-frame position. The anchor marker stays pinned at the origin."""
    if drone_position is None:
        drone_position = scene_map.mapping_drone_position
    if obs.marker_id == scene_map.anchor_id:
        return scene_map
    dx, dz = _horizontal_offset(obs)
    pos = np.array([drone_position[0] + dx,
                    obs.drone_altitude_m,
                    drone_position[2] + dz])
    count = scene_map._obs_counts.get(obs.marker_id, 0)
    if count == 0:
        scene_map.markers[obs.marker_id] = pos
    else:
        prev = scene_map.markers[obs.marker_id]
        scene_map.markers[obs.marker_id] = prev + (pos - prev) / (count + 1)
    scene_map._obs_counts[obs.marker_id] = count + 1
    return scene_map


def add_evidence(scene_map: SceneMap, cls: str, drone_position,
                 drone_altitude_m: float, downward_range_m: float,
                 confidence: float = 1.0) -> SceneMap:
    """Record an evidence item under the drone; height from the difference
    between altitude and the downward range reading."""
    if downward_range_m > drone_altitude_m:
        raise InconsistentSensorError(
            f"downward range {downward_range_m} m exceeds altitude "
            f"{drone_altitude_m} m")
    y = drone_altitude_m - downward_range_m
    scene_map.evidence.append(EvidenceItem(
        cls=cls,
        position=(float(drone_position[0]), float(y), float(drone_position[2])),
        source_confidence=confidence))
    return scene_map


@dataclass(frozen=True)
class DistanceReport:
    """All unordered evidence pair distances, ordered by item index."""

    items: tuple  # (index, class) per evidence item
    pairs: tuple  # (index_a, index_b, distance_m)
    mean_discrepancy_m: float | None = None
    sd_discrepancy_m: float | None = None

    @property
    def empty(self) -> bool:
        return len(self.pairs) == 0

    def to_dict(self) -> dict:
        d = {
            "units": "m",
            "items": [{"index": i, "class": c} for i, c in self.items],
            "pairs": [{"a": a, "b": b, "distance_m": dist,
                       "distance_cm": dist * 100.0}
                      for a, b, dist in self.pairs],
        }
        if self.mean_discrepancy_m is not None:
            d["mean_discrepancy_m"] = self.mean_discrepancy_m
            d["sd_discrepancy_m"] = self.sd_discrepancy_m
        return d

    def to_table(self) -> str:
        lines = [f"{'pair':<16}{'distance [m]':>14}{'distance [cm]':>15}"]
        for a, b, dist in self.pairs:
            name = f"{a}:{self.items[a][1]}-{b}:{self.items[b][1]}"
            lines.append(f"{name:<16}{dist:>14.4f}{dist * 100.0:>15.2f}")
        if not self.pairs:
            lines.append("(fewer than two evidence items; nothing to report)")
        return "\n".join(lines)


def pairwise_distances(scene_map: SceneMap) -> DistanceReport:
    """Euclidean 3D distance for every unordered evidence pair.

    Fewer than two items yields an empty (not failing) report.
    """
    items = tuple((i, e.cls) for i, e in enumerate(scene_map.evidence))
    pairs = []
    for i in range(len(scene_map.evidence)):
        for j in range(i + 1, len(scene_map.evidence)):
            a = np.asarray(scene_map.evidence[i].position)
            b = np.asarray(scene_map.evidence[j].position)
            pairs.append((i, j, float(np.linalg.norm(a - b))))
    return DistanceReport(items=items, pairs=tuple(pairs))


def discrepancy_stats(estimated: DistanceReport, truth: DistanceReport) -> tuple:
    """Mean and population SD of |estimated - true| distance over pairs."""
    est_keys = [(a, b) for a, b, _ in estimated.pairs]
    truth_keys = [(a, b) for a, b, _ in truth.pairs]
    if est_keys != truth_keys:
        raise ValueError("estimated and truth reports cover different pairs")
    if not est_keys:
        raise ValueError("no pairs to compare")
    diffs = np.array([abs(e[2] - t[2])
                      for e, t in zip(estimated.pairs, truth.pairs)])
    return float(diffs.mean()), float(diffs.std())


def map_to_dict(scene_map: SceneMap) -> dict:
    return {
        "units": "m",
        "anchor_id": scene_map.anchor_id,
        "markers": [{"id": mid, "position": [float(v) for v in pos]}
                    for mid, pos in scene_map.markers.items()],
        "evidence": [{"class": e.cls,
                      "position": [float(v) for v in e.position],
                      "source_confidence": e.source_confidence}
                     for e in scene_map.evidence],
    }
