"""Image grid, color conversion, PPM I/O, and synthetic transfer-stain generation.

Coordinate conventions:
    - Storage is row-major RGB8, x right / y down (image coords).
    - All angles at the public API are math convention: degrees CCW from +x
      with y pointing up. Conversion happens at the boundary only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Deposition color approximating carmine dye on white paper; jittered
# per pixel by +/- COLOR_JITTER per channel.
STAIN_COLOR = (180, 20, 30)
COLOR_JITTER = 15
BASE_COVERAGE = 0.85

STAMP_SHAPES = ("hand", "shoe", "blob")
CONTINUITIES = ("legato", "staccato")


class RasterIOError(Exception):
    """Base class for image read/write failures."""


class MalformedPpmError(RasterIOError):
    pass


class TruncatedPpmError(RasterIOError):
    pass


class UnsupportedMaxvalError(RasterIOError):
    pass


class StrokeOutOfBoundsError(ValueError):
    """A stamp of the stroke would fall outside the canvas."""

    def __init__(self, stamp_index: int, message: str):
        self.stamp_index = stamp_index
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Raster:
    """Owned 8-bit RGB image, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"pixel buffer must be (h, w, 3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        if p.dtype != np.uint8:
            raise ValueError(f"pixel dtype must be uint8, got {p.dtype}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, color=(255, 255, 255)) -> "Raster":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = np.asarray(color, dtype=np.uint8)
        return cls(px)

    def copy(self) -> "Raster":
        return Raster(self.pixels.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class HsvPixel:
    """Hue in [0, 360) degrees, saturation and value in [0, 1].

    An achromatic pixel (saturation 0) has hue 0 by convention.
    """

    hue: float
    saturation: float
    value: float


def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized hexcone RGB -> HSV. Input (..., 3) uint8, output (..., 3) float."""
    arr = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    v = arr.max(axis=-1)
    c = v - arr.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.select(
        [c == 0, v == r, v == g],
        [0.0, ((g - b) / safe_c) % 6.0, (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    )
    return np.stack([h * 60.0, s, v], axis=-1)


def rgb_to_hsv(pixel) -> HsvPixel:
    """Convert one RGB8 triplet to HSV."""
    h, s, v = rgb_to_hsv_array(np.asarray(pixel, dtype=np.uint8))
    return HsvPixel(float(h), float(s), float(v))


# ---------------------------------------------------------------------------
# PPM (P6) I/O. Binary, maxval 255, bit-exact round trips.
# ---------------------------------------------------------------------------

def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-separated header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise MalformedPpmError("unexpected end of header")
    return data[start:pos], pos


def write_image(raster: Raster, path) -> None:
    header = f"P6\n{raster.width} {raster.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.pixels.tobytes())


def read_image(path) -> Raster:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P6":
        raise MalformedPpmError(f"not a binary PPM (magic {data[:2]!r})")
    pos = 2
    try:
        wtok, pos = _read_token(data, pos)
        htok, pos = _read_token(data, pos)
        mtok, pos = _read_token(data, pos)
        width, height, maxval = int(wtok), int(htok), int(mtok)
    except ValueError as exc:
        raise MalformedPpmError(f"non-numeric header field: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedPpmError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:pos + width * height * 3]
    if len(payload) < width * height * 3:
        raise TruncatedPpmError(
            f"expected {width * height * 3} payload bytes, got {len(payload)}"
        )
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return Raster(px)


# ---------------------------------------------------------------------------
# Synthetic transfer-stain generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrokeSpec:
    """Recipe for one synthetic transfer stain.

    start is in image coords (x right, y down); direction_deg is math
    convention (CCW from +x, y up). depletion is the fraction of deposition
    coverage lost per stamp-size unit of travel; 0 gives a statistically
    uniform (direction-ambiguous) stain.
    """

    start: tuple[float, float]
    direction_deg: float
    length: float
    stamp: str = "shoe"
    stamp_size: float = 24.0
    continuity: str = "staccato"
    interval: float = field(default=0.0)  # staccato step; defaults to 1.5 * stamp_size
    depletion: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("stroke length must be positive")
        if self.stamp not in STAMP_SHAPES:
            raise ValueError(f"unknown stamp shape {self.stamp!r}")
        if self.continuity not in CONTINUITIES:
            raise ValueError(f"unknown continuity {self.continuity!r}")
        if not 0.0 <= self.depletion <= 1.0:
            raise ValueError("depletion must be in [0, 1]")
        if self.stamp_size <= 0:
            raise ValueError("stamp size must be positive")

    @property
    def step(self) -> float:
        if self.continuity == "legato":
            return 1.0
        return self.interval if self.interval > 0 else 1.5 * self.stamp_size


def _stamp_footprint(spec: StrokeSpec, rng: np.random.Generator):
    """Footprint as (inside_fn, bounding_radius) in stamp-local storage coords."""
    size = spec.stamp_size
    theta = math.radians(spec.direction_deg)
    ux, uy = math.cos(theta), -math.sin(theta)  # stroke direction, storage frame

    def rotated(dx, dy):
        along = dx * ux + dy * uy
        cross = -dx * uy + dy * ux
        return along, cross

    if spec.stamp == "shoe":
        a, b = 0.5 * size, 0.2 * size

        def inside(dx, dy):
            al, cr = rotated(dx, dy)
            return (al / a) ** 2 + (cr / b) ** 2 <= 1.0

        return inside, 0.5 * size

    if spec.stamp == "hand":
        a, b = 0.42 * size, 0.28 * size
        finger_r = 0.11 * size
        finger_along = a + 0.08 * size
        finger_cross = np.array([-0.27, -0.09, 0.09, 0.27]) * size

        def inside(dx, dy):
            al, cr = rotated(dx, dy)
            palm = (al / a) ** 2 + (cr / b) ** 2 <= 1.0
            al = np.asarray(al)[..., None]
            cr = np.asarray(cr)[..., None]
            fingers = ((al - finger_along) ** 2
                       + (cr - finger_cross) ** 2) <= finger_r ** 2
            return palm | fingers.any(axis=-1)

        return inside, finger_along + finger_r

    # blob: circle with per-stamp radius jitter
    r = 0.5 * size * (1.0 + 0.2 * rng.uniform(-1.0, 1.0))

    def inside(dx, dy):
        return dx ** 2 + dy ** 2 <= r ** 2

    return inside, r


def generate_smear(canvas: Raster, spec: StrokeSpec) -> Raster:
    """Deposit a seeded synthetic red stroke onto a white canvas.

    Returns a new raster; the input is left unmodified. Deposition coverage
    per stamp decays multiplicatively with depletion along the stroke, so
    nonzero depletion front-loads red mass at the stroke start.
    """
    if not np.all(canvas.pixels == 255):
        raise ValueError("canvas must be uniform white")
    rng = np.random.default_rng(spec.seed)
    out = canvas.pixels.copy()
    h, w = out.shape[:2]

    theta = math.radians(spec.direction_deg)
    step = spec.step
    stepv = (step * math.cos(theta), -step * math.sin(theta))  # storage frame
    n_stamps = int(spec.length // step) + 1

    for k in range(n_stamps):
        cx = spec.start[0] + k * stepv[0]
        cy = spec.start[1] + k * stepv[1]
        inside, radius = _stamp_footprint(spec, rng)
        if cx - radius < 0 or cx + radius > w - 1 or cy - radius < 0 or cy + radius > h - 1:
            raise StrokeOutOfBoundsError(
                k, f"stamp {k} at ({cx:.1f}, {cy:.1f}) exceeds the {w}x{h} canvas")

        x0, x1 = int(math.floor(cx - radius)), int(math.ceil(cx + radius))
        y0, y1 = int(math.floor(cy - radius)), int(math.ceil(cy + radius))
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        gx, gy = np.meshgrid(xs, ys)
        mask = inside(gx - cx, gy - cy)

        coverage = BASE_COVERAGE * (1.0 - spec.depletion) ** (k * step / spec.stamp_size)
        hit = mask & (rng.random(mask.shape) < coverage)
        n_hit = int(hit.sum())
        if n_hit == 0:
            continue
        jitter = rng.integers(-COLOR_JITTER, COLOR_JITTER + 1, size=(n_hit, 3))
        color = np.asarray(STAIN_COLOR, dtype=np.int64) + jitter
        rows = gy[hit]
        cols = gx[hit]
        out[rows, cols] = np.clip(color, 0, 255).astype(np.uint8)

    return Raster(out)
