"""
Raster Module
Grayscale image representation, lossless file I/O, resampling and tiling
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from utils.logger import get_logger

logger = get_logger(__name__)

SUPPORTED_BIT_DEPTHS = (8, 10, 12, 16)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Single-channel intensity image, values in [0, 1], row-major"""
    data: np.ndarray
    source_bit_depth: int = 8

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"RasterImage needs a non-empty 2-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("RasterImage data contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError(
                f"RasterImage values must lie in [0, 1], got [{data.min()}, {data.max()}]"
            )
        if self.source_bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise ValueError(f"Unsupported bit depth: {self.source_bit_depth}")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (self.source_bit_depth == other.source_bit_depth
                and np.array_equal(self.data, other.data))

    @classmethod
    def from_array(cls, values: np.ndarray, source_bit_depth: int = 8,
                   clamp: bool = False) -> 'RasterImage':
        """Build from a float array, optionally clamping to [0, 1]"""
        values = np.asarray(values, dtype=np.float64)
        if clamp:
            values = np.clip(values, 0.0, 1.0)
        return cls(values, source_bit_depth)


@dataclass(frozen=True)
class Tile:
    """One tile of a TileGrid layout"""
    x: int
    y: int
    width: int
    height: int
    partial: bool = False

    @property
    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y, self.y + self.height), slice(self.x, self.x + self.width)


@dataclass(frozen=True)
class TileGrid:
    """Regular tiling; border tiles that do not fit are clipped and flagged partial"""
    tile_width: int
    tile_height: int
    overlap: int = 0

    def __post_init__(self):
        if self.tile_width <= 0 or self.tile_height <= 0:
            raise ValueError(f"Tile dims must be positive, got {self.tile_width}x{self.tile_height}")
        if not 0 <= self.overlap < min(self.tile_width, self.tile_height):
            raise ValueError(f"Overlap {self.overlap} must be in [0, tile size)")

    def layout(self, width: int, height: int) -> List[Tile]:
        """Row-major list of tiles covering a width x height image"""
        tiles = []
        for y in self._origins(height, self.tile_height):
            for x in self._origins(width, self.tile_width):
                w = min(self.tile_width, width - x)
                h = min(self.tile_height, height - y)
                tiles.append(Tile(x, y, w, h, partial=(w, h) != (self.tile_width, self.tile_height)))
        return tiles

    def _origins(self, extent: int, size: int) -> List[int]:
        stride = size - self.overlap
        origins = [0]
        while origins[-1] + size < extent:
            origins.append(origins[-1] + stride)
        return origins

    def scaled(self, factor: int) -> 'TileGrid':
        """Grid aligned to an image downsampled by ``factor``"""
        if (self.tile_width % factor or self.tile_height % factor
                or self.overlap % factor):
            raise ValueError(f"Tile grid {self} is not divisible by factor {factor}")
        return TileGrid(self.tile_width // factor, self.tile_height // factor,
                        self.overlap // factor)


def load_image(path: Union[str, Path]) -> RasterImage:
    """Load an 8/16-bit lossless grayscale or RGB raster, normalized to [0, 1]"""
    path = Path(path)
    try:
        with Image.open(path) as pil:
            pil.load()
            mode = pil.mode
            if mode in ('1', 'P', 'LA', 'RGBA', 'CMYK', 'YCbCr'):
                pil = pil.convert('RGB' if mode != 'LA' else 'L')
                mode = pil.mode
            array = np.asarray(pil)
    except (UnidentifiedImageError, OSError) as e:
        raise ValueError(f"Cannot read image {path}: {e}") from e

    if mode == 'L':
        bit_depth = 8
    elif mode in ('I;16', 'I;16L', 'I;16B', 'I'):
        bit_depth = 16
    elif mode == 'RGB':
        bit_depth = 8
        array = array[..., :3].astype(np.float64) @ np.asarray(LUMA_WEIGHTS)
    else:
        raise ValueError(f"Unsupported image mode {mode!r} in {path}")

    peak = float(2 ** bit_depth - 1)
    values = np.asarray(array, dtype=np.float64) / peak
    if values.max(initial=0.0) > 1.0:
        raise ValueError(f"Values in {path} exceed the {bit_depth}-bit range")

    logger.debug(f"Loaded {path} ({mode}, {values.shape[1]}x{values.shape[0]})")
    return RasterImage(values, bit_depth)


def save_image(img: RasterImage, path: Union[str, Path], bit_depth: Optional[int] = None):
    """Write a lossless grayscale raster; 8-bit content as 'L', deeper content as 16-bit"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bit_depth = bit_depth or img.source_bit_depth

    if bit_depth <= 8:
        pil = Image.fromarray(np.round(img.data * 255.0).astype(np.uint8))
    else:
        levels = np.round(img.data * 65535.0).astype(np.uint16)
        pil = Image.fromarray(levels)

    try:
        pil.save(path)
    except (OSError, ValueError) as e:
        raise ValueError(f"Cannot write image {path}: {e}") from e


def crop_to_multiple(img: RasterImage, factor: int) -> Tuple[RasterImage, Tuple[int, int, int, int]]:
    """
    Center-crop so both dims divide by ``factor``.

    Returns the cropped image and the crop box (top, left, bottom, right).
    """
    if factor <= 0:
        raise ValueError(f"Factor must be positive, got {factor}")

    height = img.height - img.height % factor
    width = img.width - img.width % factor
    if height == 0 or width == 0:
        raise ValueError(f"Image {img.width}x{img.height} is smaller than factor {factor}")

    top = (img.height - height) // 2
    left = (img.width - width) // 2
    box = (top, left, top + height, left + width)
    if (height, width) == img.shape:
        return img, box

    logger.warning(
        f"Center-cropping {img.width}x{img.height} to {width}x{height} for factor {factor}"
    )
    return RasterImage(img.data[top:top + height, left:left + width], img.source_bit_depth), box


def downsample_avg(img: RasterImage, factor: int) -> RasterImage:
    """Average pooling over factor x factor blocks"""
    if factor <= 0:
        raise ValueError(f"Downsample factor must be positive, got {factor}")

    img, _ = crop_to_multiple(img, factor)
    h, w = img.height // factor, img.width // factor
    blocks = img.data.reshape(h, factor, w, factor)
    return RasterImage.from_array(blocks.mean(axis=(1, 3)), img.source_bit_depth, clamp=True)


def upsample_zoh(img: RasterImage, factor: int) -> RasterImage:
    """Zero-order hold (pixel replication) upsampling"""
    if factor <= 0:
        raise ValueError(f"Upsample factor must be positive, got {factor}")

    data = np.repeat(np.repeat(img.data, factor, axis=0), factor, axis=1)
    return RasterImage(data, img.source_bit_depth)


def tile(img: RasterImage, grid: TileGrid) -> List[RasterImage]:
    """Split an image into row-major tiles"""
    if grid.tile_width > img.width or grid.tile_height > img.height:
        raise ValueError(
            f"Tile {grid.tile_width}x{grid.tile_height} exceeds image {img.width}x{img.height}"
        )
    return [RasterImage(img.data[t.slices], img.source_bit_depth)
            for t in grid.layout(img.width, img.height)]


def untile(tiles: Sequence[RasterImage], grid: TileGrid, width: int, height: int) -> RasterImage:
    """Reassemble tiles produced by :func:`tile`; overlaps are averaged"""
    layout = grid.layout(width, height)
    if len(tiles) != len(layout):
        raise ValueError(f"Expected {len(layout)} tiles, got {len(tiles)}")

    total = np.zeros((height, width))
    weight = np.zeros((height, width))
    for t, part in zip(layout, tiles):
        if part.shape != (t.height, t.width):
            raise ValueError(f"Tile at ({t.x}, {t.y}) has shape {part.shape}")
        total[t.slices] += part.data
        weight[t.slices] += 1.0

    bit_depth = tiles[0].source_bit_depth if tiles else 8
    return RasterImage.from_array(total / weight, bit_depth, clamp=True)


def _natural_key(path: Path):
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r'(\d+)', path.name)]


def list_frames(source: Union[str, Path], patterns: Sequence[str]) -> List[Path]:
    """Numbered frame files in natural order, or the single file given"""
    source = Path(source)
    if source.is_file():
        return [source]
    if not source.is_dir():
        raise ValueError(f"Input path does not exist: {source}")

    frames = {p for pattern in patterns for p in source.glob(pattern) if p.is_file()}
    return sorted(frames, key=_natural_key)
