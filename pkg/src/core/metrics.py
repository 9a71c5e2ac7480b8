"""
Metrics Module
Fidelity (PSNR, SSIM) and budget accounting (bandwidth, frame rate, readout speedup)
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from skimage.metrics import structural_similarity

from core.raster import RasterImage
from core.sensor_sim import QuantScheme, readout_speedup

PSNR_CAP = 99.0
RAW_BITS_PER_PIXEL = 8

# SSIM settings are fixed so numbers stay comparable across runs
SSIM_CONFIG = {
    'window': 'gaussian',
    'sigma': 1.5,
    'win_size': 11,
    'k1': 0.01,
    'k2': 0.03,
    'data_range': 1.0,
    'use_sample_covariance': False,
}


def _pixels(image: Union[RasterImage, np.ndarray]) -> np.ndarray:
    return image.data if isinstance(image, RasterImage) else np.asarray(image, dtype=np.float64)


def _crop(values: np.ndarray, border: int) -> np.ndarray:
    if border <= 0:
        return values
    if 2 * border >= min(values.shape):
        raise ValueError(f"Border crop {border} leaves nothing of a {values.shape} image")
    return values[border:-border, border:-border]


def _pair(a, b, border: int):
    a_px, b_px = _pixels(a), _pixels(b)
    if a_px.shape != b_px.shape:
        raise ValueError(f"Image dims differ: {a_px.shape} vs {b_px.shape}")
    return _crop(a_px, border), _crop(b_px, border)


def psnr(a: Union[RasterImage, np.ndarray], b: Union[RasterImage, np.ndarray],
         border: int = 0) -> float:
    """PSNR in dB with peak 1.0; identical images give the 99 dB cap"""
    a_px, b_px = _pair(a, b, border)
    mse = float(np.mean((a_px - b_px) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def ssim(a: Union[RasterImage, np.ndarray], b: Union[RasterImage, np.ndarray],
         border: int = 0) -> float:
    """Mean single-scale SSIM, clipped to [0, 1]"""
    a_px, b_px = _pair(a, b, border)
    if min(a_px.shape) < SSIM_CONFIG['win_size']:
        raise ValueError(f"Image {a_px.shape} smaller than the {SSIM_CONFIG['win_size']}px SSIM window")
    if np.array_equal(a_px, b_px):
        return 1.0
    value = structural_similarity(
        a_px, b_px,
        data_range=SSIM_CONFIG['data_range'],
        gaussian_weights=True,
        sigma=SSIM_CONFIG['sigma'],
        use_sample_covariance=SSIM_CONFIG['use_sample_covariance'],
        K1=SSIM_CONFIG['k1'],
        K2=SSIM_CONFIG['k2'],
    )
    return float(np.clip(value, 0.0, 1.0))


def tb_ratio(scheme: QuantScheme) -> float:
    """Raw transmitted bits per pixel relative to 8-bit intensity"""
    return scheme.avg_bits_per_pixel / RAW_BITS_PER_PIXEL


def fps_at_link(scheme: QuantScheme, width: int, height: int, link_gbps: float) -> int:
    """Frames per second the link carries at the scheme's raw bit rate"""
    if link_gbps <= 0:
        raise ValueError(f"Link bandwidth must be positive, got {link_gbps}")
    if width <= 0 or height <= 0:
        raise ValueError(f"Frame dims must be positive, got {width}x{height}")
    return int(math.floor(link_gbps * 1e9 / (width * height * scheme.avg_bits_per_pixel)))


def implied_frame_pixels(required_gbps: float = 240.0, bits_per_pixel: int = RAW_BITS_PER_PIXEL,
                         fps: int = 30) -> int:
    """Frame size implied by the bandwidth an 8-bit real-time stream needs"""
    return int(round(required_gbps * 1e9 / (bits_per_pixel * fps)))


@dataclass
class MetricsReport:
    """Metrics for one frame (or tile) under one scheme"""
    frame: str
    scheme: str
    psnr: float
    ssim: Optional[float]
    compression_ratio: float
    tb_ratio: float
    readout_speedup: int
    fps_at_link: int
    noise_sigma: float = 0.0
    seed: Optional[int] = None
    psnr_zoh: Optional[float] = None
    border_crop: int = 0
    residual: Optional[float] = None
    per_tile: List['MetricsReport'] = field(default_factory=list)

    def row(self) -> Dict[str, Any]:
        """Flat record without per-tile detail"""
        record = asdict(self)
        record.pop('per_tile')
        return record

    def rows(self) -> List[Dict[str, Any]]:
        """The frame row followed by one row per tile"""
        return [self.row()] + [t.row() for t in self.per_tile]

    @classmethod
    def aggregate(cls, reports: Sequence['MetricsReport'], label: str = 'aggregate') -> 'MetricsReport':
        """
        Mean over reports; integer budget columns come from the first report.
        The residual is the largest one.
        """
        if not reports:
            raise ValueError("Cannot aggregate an empty report list")

        def mean(name):
            values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
            return float(np.mean(values)) if values else None

        residuals = [r.residual for r in reports if r.residual is not None]
        schemes = {r.scheme for r in reports}
        first = reports[0]
        return cls(
            frame=label,
            scheme=first.scheme if len(schemes) == 1 else 'mixed',
            psnr=mean('psnr'),
            ssim=mean('ssim'),
            compression_ratio=mean('compression_ratio'),
            tb_ratio=first.tb_ratio,
            readout_speedup=first.readout_speedup,
            fps_at_link=first.fps_at_link,
            noise_sigma=first.noise_sigma,
            seed=first.seed,
            psnr_zoh=mean('psnr_zoh'),
            border_crop=first.border_crop,
            residual=max(residuals) if residuals else None,
        )


def budget(scheme: QuantScheme, width: int, height: int, link_gbps: float) -> Dict[str, Any]:
    """Bandwidth and readout columns for a scheme"""
    return {
        'tb_ratio': tb_ratio(scheme),
        'readout_speedup': readout_speedup(scheme),
        'fps_at_link': fps_at_link(scheme, width, height, link_gbps),
    }
