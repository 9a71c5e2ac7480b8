"""
Fourier Reconstruction Module
Closed-form high-resolution reconstruction from a low-resolution intensity
image and low-bit gradient maps.

The solver minimizes

    ||U - I||^2 + lambda * ||Dx I - Gx||^2 [+ lambda * ||Dy I - Gy||^2] + beta * ||I||^2

with U the zero-order-hold upsampled LRI and Dx, Dy periodic forward
differences, which diagonalizes in the Fourier domain.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from core.raster import RasterImage, TileGrid, upsample_zoh
from core.sensor_sim import GradientMap, Lattice, QuantScheme
from utils.logger import get_logger

logger = get_logger(__name__)

GRADIENT_SOURCES = ('decoded', 'exact')


@dataclass(frozen=True)
class ReconConfig:
    """Solver weights and dequantization settings"""
    lam: float = 1.0
    beta: float = 1e-3
    upsample_factor: int = 8
    saturation: float = 32.0            # 8-bit units
    dequant: Optional[Mapping[int, float]] = None   # explicit table, 8-bit units
    use_y_term: bool = True
    gradient_source: str = 'decoded'
    border_crop: int = 8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.upsample_factor < 1:
            raise ValueError(f"upsample_factor must be >= 1, got {self.upsample_factor}")
        if self.saturation <= 0:
            raise ValueError(f"saturation must be > 0, got {self.saturation}")
        if self.gradient_source not in GRADIENT_SOURCES:
            raise ValueError(f"gradient_source must be one of {GRADIENT_SOURCES}")
        if self.border_crop < 0:
            raise ValueError(f"border_crop must be >= 0, got {self.border_crop}")
        if self.dequant is not None:
            table = {int(k): float(v) for k, v in self.dequant.items()}
            ordered = [table[k] for k in sorted(table)]
            if any(b < a for a, b in zip(ordered, ordered[1:])):
                raise ValueError(f"Dequant table must be monotone over levels: {table}")
            object.__setattr__(self, 'dequant', table)

    @classmethod
    def from_mapping(cls, mapping: Mapping, upsample_factor: int) -> 'ReconConfig':
        """Build from the ``reconstruction`` config section"""
        return cls(
            lam=float(mapping.get('lambda', 1.0)),
            beta=float(mapping.get('beta', 1e-3)),
            upsample_factor=upsample_factor,
            saturation=float(mapping.get('saturation', 32.0)),
            dequant=mapping.get('dequant'),
            use_y_term=bool(mapping.get('use_y_term', True)),
            gradient_source=str(mapping.get('gradient_source', 'decoded')),
            border_crop=int(mapping.get('border_crop', 8)),
        )


def dequant_table(scheme: QuantScheme, cfg: ReconConfig) -> Dict[int, float]:
    """
    Representative gradient per level, in normalized units.

    Level 0 maps to 0. Any other level maps to the midpoint of its
    quantization interval, an open end being replaced by +/- saturation.
    """
    if cfg.dequant is not None:
        missing = set(scheme.levels) - set(cfg.dequant)
        if missing:
            raise ValueError(f"Dequant table has no entry for levels {sorted(missing)}")
        return {level: cfg.dequant[level] / 255.0 for level in scheme.levels}

    if cfg.saturation <= max(abs(t) for t in scheme.thresholds):
        raise ValueError(f"Saturation {cfg.saturation} must exceed every threshold magnitude")

    edges = [-cfg.saturation, *scheme.thresholds, cfg.saturation]
    table = {}
    for k, level in enumerate(scheme.levels):
        table[level] = 0.0 if level == 0 else (edges[k] + edges[k + 1]) / (2.0 * 255.0)
    return table


def fill_lattice(gradient: np.ndarray, lattice: Lattice) -> np.ndarray:
    """Estimate off-lattice samples as the mean of their four (periodic) neighbours"""
    if lattice is Lattice.FULL:
        return gradient
    mask = lattice.mask(*gradient.shape)
    on = np.where(mask, gradient, 0.0)
    weight = mask.astype(np.float64)
    total = sum(np.roll(on, s, axis=a) for s in (1, -1) for a in (0, 1))
    count = sum(np.roll(weight, s, axis=a) for s in (1, -1) for a in (0, 1))
    filled = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return np.where(mask, gradient, filled)


def dequantize(m: GradientMap, cfg: ReconConfig) -> np.ndarray:
    """Real-valued gradient field from a level map; half-resolution lattices are filled"""
    table = dequant_table(m.scheme, cfg)
    lut_levels = np.asarray(sorted(table))
    lut_values = np.asarray([table[lv] for lv in lut_levels])
    field = lut_values[np.searchsorted(lut_levels, m.levels)]
    return fill_lattice(field, m.lattice)


def difference_transfer(shape, direction: str) -> np.ndarray:
    """Fourier transform of the periodic forward-difference kernel"""
    kernel = np.zeros(shape)
    kernel[0, 0] = -1.0
    if direction == 'x':
        kernel[0, -1] = 1.0
    elif direction == 'y':
        kernel[-1, 0] = 1.0
    else:
        raise ValueError(f"Unknown direction {direction!r}")
    return np.fft.fft2(kernel)


def _check_inputs(lri: RasterImage, gx: np.ndarray, cfg: ReconConfig,
                  gy: Optional[np.ndarray]) -> np.ndarray:
    if cfg.beta <= 0:
        raise ValueError("beta must be > 0")
    expected = (lri.height * cfg.upsample_factor, lri.width * cfg.upsample_factor)
    for name, g in (('gx', gx), ('gy', gy)):
        if g is not None and np.shape(g) != expected:
            raise ValueError(f"{name} has shape {np.shape(g)}, expected {expected}")
    return upsample_zoh(lri, cfg.upsample_factor).data


def solve_closed_form(lri: RasterImage, gx: np.ndarray, cfg: ReconConfig,
                      gy: Optional[np.ndarray] = None) -> np.ndarray:
    """Unclamped minimizer of the reconstruction objective (complex128 FFTs)"""
    upsampled = _check_inputs(lri, gx, cfg, gy)
    shape = upsampled.shape

    dx = difference_transfer(shape, 'x')
    numerator = np.fft.fft2(upsampled) + cfg.lam * np.conj(dx) * np.fft.fft2(gx)
    denominator = 1.0 + cfg.beta + cfg.lam * np.abs(dx) ** 2
    if gy is not None:
        dy = difference_transfer(shape, 'y')
        numerator += cfg.lam * np.conj(dy) * np.fft.fft2(gy)
        denominator += cfg.lam * np.abs(dy) ** 2

    return np.real(np.fft.ifft2(numerator / denominator))


def reconstruct_closed_form(lri: RasterImage, gx: np.ndarray, cfg: ReconConfig,
                            gy: Optional[np.ndarray] = None) -> RasterImage:
    """High-resolution image clamped to [0, 1]"""
    solution = solve_closed_form(lri, gx, cfg, gy)
    return RasterImage.from_array(solution, lri.source_bit_depth, clamp=True)


def _forward(values: np.ndarray, axis: int) -> np.ndarray:
    return np.roll(values, -1, axis=axis) - values


def _adjoint(values: np.ndarray, axis: int) -> np.ndarray:
    return np.roll(values, 1, axis=axis) - values


def residual_check(image: Union[RasterImage, np.ndarray], lri: RasterImage, gx: np.ndarray,
                   cfg: ReconConfig, gy: Optional[np.ndarray] = None) -> float:
    """
    Max-norm of the normal-equation residual
    (1 + beta) I + lambda Dx^T Dx I - U - lambda Dx^T Gx  (+ the y terms).
    """
    values = image.data if isinstance(image, RasterImage) else np.asarray(image, dtype=np.float64)
    upsampled = _check_inputs(lri, gx, cfg, gy)

    residual = (1.0 + cfg.beta) * values - upsampled
    residual += cfg.lam * _adjoint(_forward(values, 1) - gx, 1)
    if gy is not None:
        residual += cfg.lam * _adjoint(_forward(values, 0) - gy, 0)
    return float(np.max(np.abs(residual)))


def objective(image: Union[RasterImage, np.ndarray], lri: RasterImage, gx: np.ndarray,
              cfg: ReconConfig, gy: Optional[np.ndarray] = None) -> float:
    """Objective value with periodic differences"""
    values = image.data if isinstance(image, RasterImage) else np.asarray(image, dtype=np.float64)
    upsampled = _check_inputs(lri, gx, cfg, gy)

    total = np.sum((upsampled - values) ** 2)
    total += cfg.lam * np.sum((_forward(values, 1) - gx) ** 2)
    if gy is not None:
        total += cfg.lam * np.sum((_forward(values, 0) - gy) ** 2)
    total += cfg.beta * np.sum(values ** 2)
    return float(total)


def reconstruct_tiled(lri: RasterImage, gx: np.ndarray, cfg: ReconConfig,
                      grid: TileGrid, gy: Optional[np.ndarray] = None,
                      workers: int = 1) -> RasterImage:
    """
    Solve each aligned (HR tile, LRI tile) pair independently and reassemble.

    ``grid`` is the high-resolution grid; its tile dims must divide by the
    upsample factor.
    """
    factor = cfg.upsample_factor
    height, width = lri.height * factor, lri.width * factor
    lri_tiles = grid.scaled(factor).layout(lri.width, lri.height)
    hr_tiles = grid.layout(width, height)
    if len(lri_tiles) != len(hr_tiles):
        raise ValueError("HR and LRI tile layouts are not aligned")

    def solve(pair):
        hr_tile, lri_tile = pair
        sub_lri = RasterImage(lri.data[lri_tile.slices], lri.source_bit_depth)
        sub_gy = gy[hr_tile.slices] if gy is not None else None
        return hr_tile, solve_closed_form(sub_lri, gx[hr_tile.slices], cfg, sub_gy)

    total = np.zeros((height, width))
    weight = np.zeros((height, width))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for hr_tile, solution in pool.map(solve, zip(hr_tiles, lri_tiles)):
            total[hr_tile.slices] += solution
            weight[hr_tile.slices] += 1.0
            logger.debug(f"Reconstructed tile at ({hr_tile.x}, {hr_tile.y})")

    return RasterImage.from_array(total / weight, lri.source_bit_depth, clamp=True)


def gradient_fields(maps: Sequence[GradientMap], cfg: ReconConfig) -> Dict[str, np.ndarray]:
    """Dequantized fields keyed by direction; the y field is dropped unless use_y_term"""
    fields = {m.direction: dequantize(m, cfg) for m in maps}
    if not cfg.use_y_term:
        fields.pop('y', None)
    return fields
