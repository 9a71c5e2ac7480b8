import numpy as np
import pytest

from core.metrics import (PSNR_CAP, MetricsReport, budget, fps_at_link, implied_frame_pixels, psnr,
                          ssim, tb_ratio)
from core.raster import RasterImage
from core.sensor_sim import ALL_SCHEMES, QuantScheme

FRAME_W, FRAME_H = 40000, 25000


def report(scheme='OneDir1p5Bit', psnr_value=30.0, ssim_value=0.9, ratio=0.05):
    return MetricsReport(frame='f.png', scheme=scheme, psnr=psnr_value, ssim=ssim_value,
                         compression_ratio=ratio, tb_ratio=0.1875, readout_speedup=128, fps_at_link=27)


class TestPsnr:
    def test_identical_images_hit_cap(self, smooth_image):
        assert psnr(smooth_image, smooth_image) == PSNR_CAP == 99.0

    def test_checker_vs_zero(self):
        checker = np.indices((8, 8)).sum(axis=0) % 2
        assert psnr(checker.astype(float), np.zeros((8, 8))) == pytest.approx(3.0103, abs=1e-4)

    def test_known_mse(self):
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.1)) == pytest.approx(20.0)

    def test_symmetric_and_translation_invariant(self, rng):
        a, b = rng.random((16, 16)) * 0.5, rng.random((16, 16)) * 0.5
        assert psnr(a, b) == psnr(b, a)
        assert psnr(a + 0.25, b + 0.25) == pytest.approx(psnr(a, b))

    def test_dims_must_match(self):
        with pytest.raises(ValueError, match="dims differ"):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_border_crop_too_large(self):
        with pytest.raises(ValueError, match="Border"):
            psnr(np.zeros((8, 8)), np.zeros((8, 8)), border=4)


class TestSsim:
    def test_identical(self, smooth_image):
        assert ssim(smooth_image, smooth_image) == 1.0

    def test_symmetric(self, rng, smooth_image):
        noisy = RasterImage.from_array(smooth_image.data + rng.normal(0, 0.05, smooth_image.shape), clamp=True)
        assert ssim(smooth_image, noisy) == pytest.approx(ssim(noisy, smooth_image))
        assert 0.0 <= ssim(smooth_image, noisy) < 1.0

    def test_negative_image(self, smooth_image):
        assert ssim(smooth_image, 1.0 - smooth_image.data) < 0.2

    def test_constant_offset_luminance_only(self):
        c1 = 0.01 ** 2
        expected = (2 * 0.25 * 0.75 + c1) / (0.25 ** 2 + 0.75 ** 2 + c1)
        assert ssim(np.full((32, 32), 0.25), np.full((32, 32), 0.75)) == pytest.approx(expected, rel=1e-6)

    def test_smaller_than_window(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((8, 8)), np.ones((8, 8)))


class TestBudget:
    def test_tb_ratios(self):
        assert [tb_ratio(QuantScheme.from_id(s)) for s in ALL_SCHEMES] == [0.125, 0.1875, 0.25, 0.25, 0.25]

    def test_implied_frame_size(self):
        assert implied_frame_pixels() == 1_000_000_000 == FRAME_W * FRAME_H

    def test_fps_at_link(self):
        fps = [fps_at_link(QuantScheme.from_id(s), FRAME_W, FRAME_H, 41.4) for s in ALL_SCHEMES]
        assert fps == [41, 27, 20, 20, 20]

    def test_fps_inverse_in_bit_rate(self):
        fps = [fps_at_link(QuantScheme.from_id(s), 1, 1, 6.0) for s in ('OneDir1Bit', 'OneDir1p5Bit', 'OneDir2Bit')]
        assert fps == [6_000_000_000, 4_000_000_000, 3_000_000_000]

    def test_fps_needs_positive_link(self):
        with pytest.raises(ValueError):
            fps_at_link(QuantScheme.from_id('OneDir1Bit'), FRAME_W, FRAME_H, 0)

    def test_budget_columns(self):
        assert budget(QuantScheme.from_id('TwoDir2BitHalfRes'), FRAME_W, FRAME_H, 41.4) == {
            'tb_ratio': 0.25, 'readout_speedup': 85, 'fps_at_link': 20,
        }


class TestMetricsReport:
    def test_row_drops_tiles(self):
        r = report()
        r.per_tile = [report(psnr_value=28.0), report(ssim_value=None)]
        assert 'per_tile' not in r.row()
        assert [row['psnr'] for row in r.rows()] == [30.0, 28.0, 30.0]
        assert r.rows()[2]['ssim'] is None

    def test_aggregate_means(self):
        summary = MetricsReport.aggregate([report(psnr_value=30.0, ratio=0.04),
                                           report(psnr_value=34.0, ratio=0.06)])
        assert summary.frame == 'aggregate'
        assert summary.psnr == pytest.approx(32.0)
        assert summary.compression_ratio == pytest.approx(0.05)
        assert summary.readout_speedup == 128

    def test_aggregate_keeps_largest_residual(self):
        a, b, c = report(), report(), report()
        a.residual, b.residual = 2e-12, 7e-11
        assert MetricsReport.aggregate([a, b, c]).residual == 7e-11
        assert MetricsReport.aggregate([c]).residual is None

    def test_aggregate_mixed_schemes(self):
        assert MetricsReport.aggregate([report(), report(scheme='OneDir1Bit')]).scheme == 'mixed'

    def test_aggregate_empty(self):
        with pytest.raises(ValueError):
            MetricsReport.aggregate([])
