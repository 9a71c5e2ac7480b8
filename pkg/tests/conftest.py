import logging
from pathlib import Path

import numpy as np
import pytest
import yaml

from core.raster import RasterImage, save_image

GOLDEN_DIR = Path(__file__).parent / 'fixtures' / 'golden'


def smooth_values(height: int, width: int, phase: float = 0.0) -> np.ndarray:
    """Band-limited test content quantized to 8-bit levels, values in [0.1, 0.9]"""
    rows, cols = np.indices((height, width), dtype=np.float64)
    values = (0.5
              + 0.25 * np.sin(2 * np.pi * cols / 37.0 + phase)
              + 0.15 * np.cos(2 * np.pi * rows / 23.0 - phase))
    return np.round(np.clip(values, 0.1, 0.9) * 255.0) / 255.0


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch):
    for name in ('GCAM_OUTPUT_DIR', 'GCAM_LOG_LEVEL'):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(autouse=True)
def reset_app_logger():
    yield
    logger = logging.getLogger('gradcam')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def smooth_image():
    return RasterImage(smooth_values(64, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def frame_dir(tmp_path):
    frames = tmp_path / 'frames'
    for index, phase in ((1, 0.0), (2, 1.3)):
        save_image(RasterImage(smooth_values(64, 64, phase)), frames / f"frame_{index}.png")
    return frames


@pytest.fixture
def config_file(tmp_path, frame_dir):
    """User config pointing at the synthetic frames with a small LRI factor"""
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump({
        'input': {'path': str(frame_dir)},
        'acquisition': {'schemes': ['OneDir1p5Bit', 'TwoDir2BitHalfRes'], 'lri_factor': 4, 'seed': 7},
        'noise_sweep': {'sigmas': [0, 10]},
        'reconstruction': {'border_crop': 4, 'tile': None},
        'output': {'directory': str(tmp_path / 'out')},
    }), encoding='utf-8')
    return path
