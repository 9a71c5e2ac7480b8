"""
Core modules for the low-bit gradient camera
"""

from .raster import RasterImage, TileGrid, load_image, save_image
from .sensor_sim import GradientMap, QuantScheme, SchemeId, simulate_acquisition
from .gradient_codec import EncodedStream, decode, encode
from .fourier_recon import ReconConfig, reconstruct_closed_form, reconstruct_tiled
from .metrics import MetricsReport, psnr, ssim
from .pipeline import GradientCameraPipeline, PipelineConfig

__all__ = [
    'RasterImage', 'TileGrid', 'load_image', 'save_image',
    'GradientMap', 'QuantScheme', 'SchemeId', 'simulate_acquisition',
    'EncodedStream', 'encode', 'decode',
    'ReconConfig', 'reconstruct_closed_form', 'reconstruct_tiled',
    'MetricsReport', 'psnr', 'ssim',
    'GradientCameraPipeline', 'PipelineConfig',
]
