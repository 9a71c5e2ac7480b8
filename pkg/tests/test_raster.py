import logging

import numpy as np
import pytest
from PIL import Image

from core.raster import (RasterImage, TileGrid, crop_to_multiple, downsample_avg, list_frames,
                         load_image, save_image, tile, untile, upsample_zoh)


class TestRasterImage:
    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            RasterImage(np.full((2, 2), 1.5))

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((2, 2, 3)))

    def test_rejects_unsupported_bit_depth(self):
        with pytest.raises(ValueError, match="bit depth"):
            RasterImage(np.zeros((2, 2)), source_bit_depth=7)

    def test_data_is_read_only(self):
        img = RasterImage(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0

    def test_from_array_clamps(self):
        img = RasterImage.from_array(np.array([[-0.5, 2.0]]), clamp=True)
        assert img.data.tolist() == [[0.0, 1.0]]


class TestImageIO:
    def test_8bit_normalization(self, tmp_path):
        path = tmp_path / 'px.png'
        Image.fromarray(np.array([[0, 128, 255]], dtype=np.uint8)).save(path)

        img = load_image(path)

        assert img.source_bit_depth == 8
        assert img.data[0, 0] == 0.0
        assert img.data[0, 1] == pytest.approx(128 / 255)
        assert img.data[0, 2] == 1.0

    def test_8bit_roundtrip_is_exact(self, tmp_path, rng):
        levels = rng.integers(0, 256, size=(17, 23))
        img = RasterImage(levels / 255.0)

        save_image(img, tmp_path / 'frame.png')
        loaded = load_image(tmp_path / 'frame.png')

        assert np.array_equal(np.round(loaded.data * 255).astype(int), levels)

    def test_pgm_roundtrip(self, tmp_path, rng):
        levels = rng.integers(0, 256, size=(8, 8))
        save_image(RasterImage(levels / 255.0), tmp_path / 'frame.pgm')
        assert np.array_equal(np.round(load_image(tmp_path / 'frame.pgm').data * 255), levels)

    def test_16bit_roundtrip(self, tmp_path, rng):
        levels = rng.integers(0, 65536, size=(9, 11))
        img = RasterImage(levels / 65535.0, source_bit_depth=16)

        save_image(img, tmp_path / 'deep.png')
        loaded = load_image(tmp_path / 'deep.png')

        assert loaded.source_bit_depth == 16
        assert np.array_equal(np.round(loaded.data * 65535).astype(int), levels)

    def test_rgb_converted_to_luma(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        Image.fromarray(rgb).save(tmp_path / 'red.png')

        img = load_image(tmp_path / 'red.png')

        assert np.allclose(img.data, 0.299)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / 'broken.png'
        path.write_bytes(b'not an image')
        with pytest.raises(ValueError, match="Cannot read image"):
            load_image(path)


class TestResampling:
    def test_downsample_block_means(self, rng):
        values = rng.random((16, 16))
        out = downsample_avg(RasterImage(values), 8)

        expected = [[values[r:r + 8, c:c + 8].mean() for c in (0, 8)] for r in (0, 8)]
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_downsample_symmetric_pair(self):
        out = downsample_avg(RasterImage(np.array([[0.0, 1.0], [1.0, 0.0]])), 2)
        assert out.data.tolist() == [[0.5]]

    def test_downsample_preserves_mean(self, rng):
        values = rng.random((32, 24))
        assert downsample_avg(RasterImage(values), 8).data.mean() == pytest.approx(values.mean(), abs=1e-9)

    def test_downsample_crops_indivisible(self, caplog):
        caplog.set_level(logging.WARNING, logger='gradcam.raster')
        out = downsample_avg(RasterImage(np.full((10, 9), 0.25)), 4)
        assert out.shape == (2, 2)
        assert "Center-cropping" in caplog.text

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            downsample_avg(RasterImage(np.zeros((4, 4))), 0)
        with pytest.raises(ValueError):
            upsample_zoh(RasterImage(np.zeros((4, 4))), -1)

    def test_upsample_replicates(self):
        out = upsample_zoh(RasterImage(np.array([[0.2, 0.8]])), 2)
        assert out.data.tolist() == [[0.2, 0.2, 0.8, 0.8], [0.2, 0.2, 0.8, 0.8]]

    def test_upsample_then_downsample_is_identity(self, rng):
        img = RasterImage(rng.random((5, 7)))
        assert np.allclose(downsample_avg(upsample_zoh(img, 8), 8).data, img.data, atol=1e-12)

    def test_crop_to_multiple_box(self):
        img, box = crop_to_multiple(RasterImage(np.zeros((11, 13))), 4)
        assert img.shape == (8, 12)
        assert box == (1, 0, 9, 12)


class TestTiling:
    def test_exact_division(self):
        assert len(TileGrid(256, 256).layout(512, 512)) == 4

    def test_partial_border_tiles(self):
        tiles = TileGrid(4, 4).layout(10, 6)
        assert [(t.x, t.y) for t in tiles] == [(0, 0), (4, 0), (8, 0), (0, 4), (4, 4), (8, 4)]
        assert [t.partial for t in tiles] == [False, False, True, True, True, True]
        assert tiles[2].width == 2 and tiles[3].height == 2

    def test_untile_tile_identity(self, rng):
        img = RasterImage(rng.random((768, 1024)))
        grid = TileGrid(256, 256)
        assert untile(tile(img, grid), grid, img.width, img.height) == img

    def test_untile_with_overlap(self, rng):
        img = RasterImage(rng.random((40, 40)))
        grid = TileGrid(16, 16, overlap=4)
        assert np.allclose(untile(tile(img, grid), grid, 40, 40).data, img.data)

    def test_aligned_scaled_grid(self):
        grid = TileGrid(256, 256)
        hr = grid.layout(4096, 4096)
        lri = grid.scaled(8).layout(512, 512)

        assert len(hr) == len(lri) == 256
        assert all((h.x, h.y) == (8 * l.x, 8 * l.y) for h, l in zip(hr, lri))

    def test_scaled_needs_divisible_dims(self):
        with pytest.raises(ValueError):
            TileGrid(100, 100).scaled(8)

    def test_tile_larger_than_image(self):
        with pytest.raises(ValueError, match="exceeds"):
            tile(RasterImage(np.zeros((4, 4))), TileGrid(8, 8))


def test_list_frames_natural_order(tmp_path):
    for name in ('frame_10.png', 'frame_2.png', 'frame_1.png', 'notes.txt'):
        (tmp_path / name).write_bytes(b'')

    frames = list_frames(tmp_path, ['*.png'])

    assert [p.name for p in frames] == ['frame_1.png', 'frame_2.png', 'frame_10.png']
