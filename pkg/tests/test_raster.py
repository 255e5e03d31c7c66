import colorsys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dronescene.raster import (MalformedPpmError, Raster, StrokeSpec,
                               StrokeOutOfBoundsError, TruncatedPpmError,
                               UnsupportedMaxvalError, generate_smear,
                               read_image, rgb_to_hsv, write_image)


class TestRgbToHsv:
    def test_pure_red(self):
        hsv = rgb_to_hsv((255, 0, 0))
        assert hsv.hue == 0.0
        assert hsv.saturation == 1.0
        assert hsv.value == 1.0

    def test_black_achromatic_convention(self):
        hsv = rgb_to_hsv((0, 0, 0))
        assert (hsv.hue, hsv.saturation, hsv.value) == (0.0, 0.0, 0.0)

    def test_desaturated_red(self):
        hsv = rgb_to_hsv((128, 64, 64))
        assert hsv.hue == pytest.approx(0.0)
        assert hsv.saturation == pytest.approx(0.5)
        assert hsv.value == pytest.approx(128 / 255, abs=1e-6)

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255),
                     st.integers(0, 255)))
    def test_roundtrip_via_inverse(self, rgb):
        hsv = rgb_to_hsv(rgb)
        back = colorsys.hsv_to_rgb(hsv.hue / 360.0, hsv.saturation, hsv.value)
        for orig, rec in zip(rgb, back):
            assert abs(orig - rec * 255.0) <= 1.0

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255),
                     st.integers(0, 255)))
    def test_ranges(self, rgb):
        hsv = rgb_to_hsv(rgb)
        assert 0.0 <= hsv.hue < 360.0
        assert 0.0 <= hsv.saturation <= 1.0
        assert 0.0 <= hsv.value <= 1.0


class TestPpmIO:
    def test_roundtrip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        raster = Raster(rng.integers(0, 256, (2, 2, 3), dtype=np.uint8))
        p1 = tmp_path / "a.ppm"
        p2 = tmp_path / "b.ppm"
        write_image(raster, p1)
        write_image(read_image(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_reads_plain_header(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + bytes(range(12)))
        raster = read_image(p)
        assert (raster.width, raster.height) == (2, 2)
        assert raster.pixels[0, 0].tolist() == [0, 1, 2]
        assert raster.pixels[1, 1].tolist() == [9, 10, 11]

    def test_unsupported_maxval(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n2 2\n65535\n" + bytes(24))
        with pytest.raises(UnsupportedMaxvalError):
            read_image(p)

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P5\n2 2\n255\n" + bytes(12))
        with pytest.raises(MalformedPpmError):
            read_image(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(TruncatedPpmError):
            read_image(p)

    def test_comment_in_header(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n# made by hand\n2 2\n255\n" + bytes(12))
        assert read_image(p).width == 2


def _red_mask(raster):
    px = raster.pixels
    return ~np.all(px == 255, axis=-1)


class TestGenerateSmear:
    def test_depletion_front_loads_left_to_right(self):
        canvas = Raster.blank(320, 240)
        spec = StrokeSpec(start=(60.0, 120.0), direction_deg=0.0, length=180.0,
                          stamp="shoe", stamp_size=24.0, continuity="legato",
                          depletion=0.3, seed=1)
        mask = _red_mask(generate_smear(canvas, spec))
        left = mask[:, :160].sum()
        right = mask[:, 160:].sum()
        assert left > right

    def test_zero_depletion_blob_is_balanced(self):
        # Averaged over 10 seeds; start and end halves carry similar mass.
        imbalance = []
        for seed in range(10):
            canvas = Raster.blank(320, 240)
            spec = StrokeSpec(start=(60.0, 120.0), direction_deg=0.0,
                              length=180.0, stamp="blob", stamp_size=26.0,
                              continuity="staccato", interval=30.0,
                              depletion=0.0, seed=seed)
            mask = _red_mask(generate_smear(canvas, spec))
            cols = np.nonzero(mask)[1]
            mid = (cols.min() + cols.max()) / 2.0
            start_half = (cols < mid).sum()
            end_half = (cols >= mid).sum()
            imbalance.append(abs(start_half - end_half) / cols.size)
        assert np.mean(imbalance) < 0.1

    def test_deterministic_per_seed(self):
        canvas = Raster.blank(160, 120)
        spec = StrokeSpec(start=(40.0, 60.0), direction_deg=10.0, length=80.0,
                          stamp="hand", stamp_size=20.0, continuity="staccato",
                          depletion=0.4, seed=9)
        a = generate_smear(canvas, spec)
        b = generate_smear(canvas, spec)
        assert np.array_equal(a.pixels, b.pixels)

    def test_input_canvas_unmodified(self):
        canvas = Raster.blank(160, 120)
        spec = StrokeSpec(start=(40.0, 60.0), direction_deg=0.0, length=60.0,
                          stamp="blob", stamp_size=18.0, continuity="legato",
                          depletion=0.2, seed=0)
        generate_smear(canvas, spec)
        assert np.all(canvas.pixels == 255)

    def test_stroke_exiting_canvas_names_stamp(self):
        canvas = Raster.blank(100, 100)
        spec = StrokeSpec(start=(50.0, 50.0), direction_deg=0.0, length=200.0,
                          stamp="blob", stamp_size=16.0, continuity="staccato",
                          interval=20.0, depletion=0.0, seed=0)
        with pytest.raises(StrokeOutOfBoundsError) as exc:
            generate_smear(canvas, spec)
        assert exc.value.stamp_index > 0

    def test_never_writes_outside_bounds(self):
        # A stroke near the border leaves a one-pixel white frame intact.
        canvas = Raster.blank(200, 200)
        spec = StrokeSpec(start=(20.0, 100.0), direction_deg=0.0, length=160.0,
                          stamp="shoe", stamp_size=30.0, continuity="legato",
                          depletion=0.0, seed=2)
        out = generate_smear(canvas, spec)
        border = np.concatenate([out.pixels[0].ravel(), out.pixels[-1].ravel(),
                                 out.pixels[:, 0].ravel(),
                                 out.pixels[:, -1].ravel()])
        assert np.all(border == 255)

    def test_centroid_lies_in_start_half(self):
        # Depletion > 0.2 with >= 10 stamps front-loads the red mass.
        rng = np.random.default_rng(123)
        for _ in range(50):
            direction = float(rng.uniform(0.0, 360.0))
            depletion = float(rng.uniform(0.25, 0.6))
            interval = float(rng.uniform(18.0, 30.0))
            n_stamps = int(rng.integers(10, 14))
            length = interval * (n_stamps - 1) + 1.0
            canvas = Raster.blank(800, 800)
            theta = np.radians(direction)
            start = (400.0 - 0.5 * length * np.cos(theta),
                     400.0 + 0.5 * length * np.sin(theta))
            spec = StrokeSpec(start=start, direction_deg=direction,
                              length=length, stamp="shoe", stamp_size=20.0,
                              continuity="staccato", interval=interval,
                              depletion=depletion, seed=int(rng.integers(1 << 31)))
            mask = _red_mask(generate_smear(canvas, spec))
            rows, cols = np.nonzero(mask)
            u = np.array([np.cos(theta), np.sin(theta)])
            t_mass = float(np.mean(cols * u[0] + (-rows) * u[1]))
            t_start = start[0] * u[0] + (-start[1]) * u[1]
            end = (start[0] + length * np.cos(theta),
                   start[1] - length * np.sin(theta))
            t_end = end[0] * u[0] + (-end[1]) * u[1]
            assert abs(t_mass - t_start) < abs(t_mass - t_end)


class TestRasterInvariants:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Raster(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            Raster(np.zeros((0, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            Raster(np.zeros((4, 4, 3), dtype=np.float32))
