import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dronescene import dataset
from dronescene.raster import Raster, StrokeSpec, generate_smear
from dronescene.smear import (Contour, HueRangeSet, InsufficientExtentError,
                              NoBloodDetectedError, analyze_mask,
                              analyze_raster, angular_error, classify_angle,
                              estimate_direction, evaluate_dataset,
                              extract_contours, fit_line, segment_red,
                              summarize_predictions)


def _paint(raster_px, row, col, h, w, color):
    raster_px[row:row + h, col:col + w] = color


class TestSegmentRed:
    def test_white_image_is_empty(self):
        mask = segment_red(Raster.blank(20, 20))
        assert not mask.any()

    def test_single_pure_red_pixel(self):
        px = np.full((10, 10, 3), 255, dtype=np.uint8)
        px[4, 7] = (255, 0, 0)
        mask = segment_red(Raster(px))
        assert mask.sum() == 1 and mask[4, 7]

    def test_orange_excluded_by_defaults(self):
        # Hue 25 degrees, saturated and bright.
        px = np.full((16, 16, 3), 255, dtype=np.uint8)
        _paint(px, 4, 4, 8, 8, (255, 106, 0))
        mask = segment_red(Raster(px))
        assert not mask.any()

    def test_wrapping_interval(self):
        ranges = HueRangeSet(ranges=((350.0, 10.0),))
        assert ranges.contains_hue(np.array([355.0, 5.0])).all()
        assert not ranges.contains_hue(np.array([180.0])).any()


class TestExtractContours:
    def test_area_threshold_keeps_two_blobs(self):
        mask = np.zeros((240, 320), dtype=bool)
        mask[10:20, 10:20] = True  # 100 px
        mask[100:110, 200:210] = True  # 100 px
        for i in range(5):  # five 2-px specks
            mask[200, 10 + 10 * i:12 + 10 * i] = True
        contours = extract_contours(mask, min_area_fraction=0.0005)
        assert len(contours) == 2
        assert all(c.pixel_count == 100 for c in contours)

    def test_empty_mask(self):
        assert extract_contours(np.zeros((10, 10), dtype=bool)) == []

    def test_full_mask_symmetry(self):
        mask = np.ones((21, 31), dtype=bool)
        (c,) = extract_contours(mask)
        assert c.centroid == (15.0, 10.0)
        assert c.mu11 == 0.0

    def test_moments_match_naive_summation(self):
        # Oracle: BFS flood fill plus per-pixel loops, fully independent of
        # the labeled implementation.
        rng = np.random.default_rng(42)
        for _ in range(50):
            mask = rng.random((40, 50)) < 0.25
            expected = _naive_contours(mask, min_area=0.0005 * 40 * 50)
            got = extract_contours(mask, min_area_fraction=0.0005)
            assert len(got) == len(expected)
            for g, e in zip(got, expected):
                assert g.pixel_count == e["count"]
                assert g.centroid == pytest.approx(e["centroid"])
                assert g.mu20 == pytest.approx(e["mu20"])
                assert g.mu02 == pytest.approx(e["mu02"])
                assert g.mu11 == pytest.approx(e["mu11"])

    def test_sorted_by_descending_area(self):
        mask = np.zeros((60, 60), dtype=bool)
        mask[2:6, 2:6] = True
        mask[20:30, 20:30] = True
        mask[40:47, 40:47] = True
        areas = [c.pixel_count for c in extract_contours(mask)]
        assert areas == sorted(areas, reverse=True)


def _naive_contours(mask, min_area):
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for r0 in range(h):
        for c0 in range(w):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            stack = [(r0, c0)]
            seen[r0, c0] = True
            pix = []
            while stack:
                r, c = stack.pop()
                pix.append((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] \
                                and not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
            if len(pix) < min_area:
                continue
            cx = sum(c for _, c in pix) / len(pix)
            cy = sum(r for r, _ in pix) / len(pix)
            comps.append({
                "count": len(pix),
                "centroid": (cx, cy),
                "mu20": sum((c - cx) ** 2 for _, c in pix),
                "mu02": sum((r - cy) ** 2 for r, _ in pix),
                "mu11": sum((c - cx) * (r - cy) for r, c in pix),
                "bbox_origin": (min(r for r, _ in pix), min(c for _, c in pix)),
            })
    comps.sort(key=lambda e: (-e["count"], e["bbox_origin"]))
    return comps


def _blob_mask(centers, size=3, shape=(60, 60)):
    mask = np.zeros(shape, dtype=bool)
    for x, y in centers:
        mask[y:y + size, x:x + size] = True
    return mask


class TestFitLine:
    def test_collinear_horizontal(self):
        mask = _blob_mask([(0, 30), (20, 30), (40, 30)])
        line = fit_line(extract_contours(mask, 0.0))
        assert line.angle_deg == pytest.approx(0.0, abs=1e-9)
        assert line.source == "multi-contour-fit"

    def test_single_rectangle_long_axis(self):
        mask = np.zeros((30, 40), dtype=bool)
        mask[10:14, 5:25] = True  # 20 x 4
        line = fit_line(extract_contours(mask, 0.0))
        assert line.angle_deg == pytest.approx(0.0, abs=1e-9)
        assert line.source == "single-contour-moments"

    def test_diagonal_with_perturbation(self):
        # Centroids on the math-convention 45-degree line (row decreasing as
        # col grows), one moved by a pixel.
        mask = _blob_mask([(0, 41), (20, 21), (40, 2)], shape=(60, 60))
        line = fit_line(extract_contours(mask, 0.0))
        assert line.angle_deg == pytest.approx(45.0, abs=3.0)

    def test_empty_raises(self):
        with pytest.raises(NoBloodDetectedError):
            fit_line([])

    def test_matches_brute_force_tls(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(3, 10))
            pts = rng.uniform(0, 100, (n, 2))
            contours = [Contour(pixel_count=50, centroid=(x, y), mu20=1.0,
                                mu02=1.0, mu11=0.0, bbox=(0, 0, 1, 1))
                        for x, y in pts]
            line = fit_line(contours)
            best = _brute_force_axis(pts)
            diff = abs(line.angle_deg - best) % 180.0
            assert min(diff, 180.0 - diff) < 0.2


def _brute_force_axis(pts_image):
    """3600-angle search minimizing summed perpendicular squared distance."""
    pts = pts_image * np.array([1.0, -1.0])  # math frame
    centered = pts - pts.mean(axis=0)
    total = (centered ** 2).sum()
    best_angle, best_cost = 0.0, np.inf
    for i in range(3600):
        ang = math.radians(i * 180.0 / 3600.0)
        u = np.array([math.cos(ang), math.sin(ang)])
        cost = total - ((centered @ u) ** 2).sum()
        if cost < best_cost:
            best_cost, best_angle = cost, i * 180.0 / 3600.0
    return best_angle


class TestEstimateDirection:
    def test_legato_left_to_right(self):
        canvas = Raster.blank(320, 240)
        spec = StrokeSpec(start=(60.0, 120.0), direction_deg=0.0, length=180.0,
                          stamp="hand", stamp_size=26.0, continuity="legato",
                          depletion=0.4, seed=5)
        est = analyze_raster(generate_smear(canvas, spec))
        assert angular_error(est.angle_deg, 0.0) <= 30.0
        assert est.label == "right"
        assert not est.ambiguous

    def test_blob_mostly_ambiguous(self):
        ambiguous = 0
        for seed in range(10):
            raster, _, _ = dataset.generate_sample(dataset.blob_spec(seed))
            if analyze_raster(raster).ambiguous:
                ambiguous += 1
        assert ambiguous > 5

    def test_mirror_flips_direction_exactly(self):
        # Horizontally fitted line, mass decaying left to right; mirroring
        # about the vertical axis reverses the motion by exactly 180.
        mask = np.zeros((40, 120), dtype=bool)
        mask[12:28, 5:20] = True
        mask[15:25, 50:59] = True
        mask[18:22, 90:95] = True
        est = analyze_mask(mask)
        flipped = analyze_mask(np.fliplr(mask))
        assert est.angle_deg == pytest.approx(0.0, abs=1e-9)
        assert flipped.angle_deg == pytest.approx(180.0, abs=1e-9)

    def test_rotating_mask_rotates_estimate(self):
        for seed in (3, 11):
            spec = dataset.centered_stroke(20.0, 140.0, "shoe", 24.0,
                                           "staccato", 0.4, seed, interval=30.0,
                                           width=300, height=300)
            raster, _, _ = dataset.generate_sample(spec, 300, 300)
            mask = segment_red(raster)
            est = analyze_mask(mask)
            rotated = analyze_mask(np.rot90(mask))
            if est.ambiguous or rotated.ambiguous:
                continue
            assert angular_error(rotated.angle_deg, est.angle_deg + 90.0) <= 2.0

    def test_scale_invariance(self):
        spec = dataset.centered_stroke(10.0, 120.0, "shoe", 22.0, "staccato",
                                       0.4, seed=4, interval=28.0)
        raster, _, _ = dataset.generate_sample(spec)
        mask = segment_red(raster)
        est = analyze_mask(mask)
        upscaled = analyze_mask(np.kron(mask, np.ones((2, 2), dtype=bool)))
        assert angular_error(upscaled.angle_deg, est.angle_deg) <= 3.0

    def test_degenerate_extent(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[5, 5] = True
        from dronescene.smear import FittedLine
        line = FittedLine(anchor=(5.0, 5.0), direction=(1.0, 0.0),
                          source="single-contour-moments")
        with pytest.raises(InsufficientExtentError):
            estimate_direction(line, mask)

    def test_staccato_label_accuracy_over_100_seeds(self):
        correct = 0
        for seed in range(100):
            rng = np.random.default_rng(seed + 900)
            direction = float(rng.uniform(0.0, 360.0))
            spec = dataset.centered_stroke(direction, 140.0, "shoe", 24.0,
                                           "staccato", 0.4, seed, interval=30.0)
            raster, _, truth_label = dataset.generate_sample(spec)
            est = analyze_raster(raster)
            correct += est.label == truth_label
        assert correct / 100 >= 0.9


class TestCodebook:
    def test_cardinals(self):
        assert classify_angle(0.0) == "right"
        assert classify_angle(90.0) == "up"
        assert classify_angle(180.0) == "left"
        assert classify_angle(270.0) == "down"

    def test_tie_prefers_horizontal(self):
        assert classify_angle(45.0) == "right"
        assert classify_angle(135.0) == "left"
        assert classify_angle(225.0) == "left"
        assert classify_angle(315.0) == "right"


class TestAngularError:
    def test_examples(self):
        assert angular_error(0.0, 0.0) == 0.0
        assert angular_error(10.0, 350.0) == 20.0
        assert angular_error(0.0, 180.0) == 180.0

    @given(st.floats(0, 360, exclude_max=True), st.floats(0, 360, exclude_max=True))
    def test_symmetric_and_bounded(self, a, b):
        assert angular_error(a, b) == pytest.approx(angular_error(b, a))
        assert 0.0 <= angular_error(a, b) <= 180.0


class _FakeEstimate:
    def __init__(self, angle_deg, label):
        self.angle_deg = angle_deg
        self.label = label


class TestSummarize:
    def test_sixteen_of_twenty(self):
        pairs = []
        for i in range(20):
            if i < 16:
                pairs.append((_FakeEstimate(0.0, "right"), 0.0, "right"))
            else:
                pairs.append((_FakeEstimate(90.0, "up"), 0.0, "right"))
        report = summarize_predictions(pairs)
        assert report.label_accuracy == pytest.approx(0.80)

    def test_perfect_predictions(self):
        pairs = [(_FakeEstimate(33.0, "right"), 33.0, "right")] * 5
        report = summarize_predictions(pairs)
        assert report.label_accuracy == 1.0
        assert report.mean_angular_error_deg == 0.0

    def test_reversals_keep_line_of_motion(self):
        pairs = [(_FakeEstimate(180.0, "left"), 0.0, "right")] * 4
        report = summarize_predictions(pairs)
        assert report.label_accuracy == 0.0
        assert report.line_of_motion_accuracy == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize_predictions([])

    def test_evaluate_dataset_runs_pipeline(self):
        samples = []
        for spec in dataset.standard_composition(1)[:3]:
            raster, truth_deg, truth_label = dataset.generate_sample(spec)
            samples.append((raster, truth_deg, truth_label))
        report = evaluate_dataset(samples)
        assert report.n_samples == 3
        assert report.label_accuracy == 1.0
