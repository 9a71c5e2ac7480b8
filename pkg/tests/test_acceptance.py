"""
Corpus checks on real photographs.

Set GCAM_CORPUS_DIR to a directory of high-detail 8-bit frames to run them;
they are skipped otherwise.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from core.fourier_recon import ReconConfig, gradient_fields, reconstruct_closed_form, residual_check, solve_closed_form
from core.gradient_codec import compression_ratio, decode, encode
from core.metrics import psnr
from core.pipeline import PipelineConfig, noise_sweep, sweep_table1
from core.raster import crop_to_multiple, list_frames, load_image, upsample_zoh
from core.sensor_sim import QuantScheme, gradient_exact, simulate_acquisition
from utils.config import Config

CORPUS = os.environ.get('GCAM_CORPUS_DIR')
PATTERNS = ('*.png', '*.pgm', '*.tif', '*.tiff', '*.bmp')

pytestmark = pytest.mark.skipif(not CORPUS, reason="GCAM_CORPUS_DIR not set")


@pytest.fixture(scope='module')
def corpus():
    frames = list_frames(Path(CORPUS), PATTERNS)
    if not frames:
        pytest.skip(f"No frames in {CORPUS}")
    return [crop_to_multiple(load_image(p), 8)[0] for p in frames]


@pytest.fixture
def corpus_config(tmp_path):
    config = Config()
    config.set('input.path', CORPUS)
    config.set('output.directory', str(tmp_path))
    config.set('reconstruction.tile', None)
    return config


def test_ternary_compression_ratio_below_ten_percent(corpus):
    scheme = QuantScheme.from_id('OneDir1p5Bit')
    ratios = [compression_ratio(encode(simulate_acquisition(hr, scheme, 8).gradients['x'])) for hr in corpus]
    assert float(np.mean(ratios)) < 0.10


def test_corpus_maps_roundtrip(corpus):
    scheme = QuantScheme.from_id('OneDir1p5Bit')
    for hr in corpus:
        m = simulate_acquisition(hr, scheme, 8).gradients['x']
        assert decode(encode(m)) == m


def test_reconstruction_beats_zoh(corpus):
    cfg = ReconConfig(lam=1.0, beta=1e-3, upsample_factor=8)
    scheme = QuantScheme.from_id('OneDir1p5Bit')
    for hr in corpus:
        acq = simulate_acquisition(hr, scheme, 8)
        zoh = psnr(hr, upsample_zoh(acq.lri, 8), cfg.border_crop)

        gx, gy = gradient_exact(hr, 'x'), gradient_exact(hr, 'y')
        exact = solve_closed_form(acq.lri, gx, cfg, gy)
        assert residual_check(exact, acq.lri, gx, cfg, gy) <= 1e-5
        exact_psnr = psnr(hr, np.clip(exact, 0.0, 1.0), cfg.border_crop)
        assert exact_psnr >= zoh + 3.0

        fields = gradient_fields(list(acq.gradients.values()), cfg)
        quantized = reconstruct_closed_form(acq.lri, fields['x'], cfg)
        assert psnr(hr, quantized, cfg.border_crop) >= zoh + 1.0


def test_scheme_ordering(corpus_config):
    rows = {r['scheme']: r for r in sweep_table1(PipelineConfig.from_config(corpus_config))}
    assert rows['OneDir2Bit']['PSNR'] >= rows['OneDir1p5Bit']['PSNR'] >= rows['OneDir1Bit']['PSNR']


def test_psnr_non_increasing_in_noise(corpus_config):
    corpus_config.set('acquisition.schemes', ['OneDir1p5Bit'])
    rows = noise_sweep(PipelineConfig.from_config(corpus_config))
    values = [r['PSNR'] for r in rows]
    assert all(b <= a for a, b in zip(values, values[1:]))
