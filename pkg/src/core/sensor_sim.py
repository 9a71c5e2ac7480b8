"""
Sensor Simulation Module
Gradient acquisition: exact differences, noise injection and low-bit quantization schemes
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.raster import RasterImage, downsample_avg
from utils.logger import get_logger

logger = get_logger(__name__)

# Comparisons needed by an 8-bit single-slope ADC ramp
SS_ADC_COMPARISONS = 256
# Absorbs float rounding when 8-bit content is differenced and compared to 8-bit thresholds
TIE_TOLERANCE = 1e-9

DIRECTIONS = ('x', 'y')


class SchemeId(str, Enum):
    """The five acquisition schemes, ordered as in the comparison table"""
    ONE_DIR_1BIT = 'OneDir1Bit'
    ONE_DIR_1P5BIT = 'OneDir1p5Bit'
    ONE_DIR_2BIT = 'OneDir2Bit'
    TWO_DIR_1BIT = 'TwoDir1Bit'
    TWO_DIR_2BIT_HALF_RES = 'TwoDir2BitHalfRes'

    @property
    def code(self) -> int:
        """8-bit identifier used in stream headers"""
        return list(SchemeId).index(self)

    @classmethod
    def from_code(cls, code: int) -> 'SchemeId':
        members = list(cls)
        if not 0 <= code < len(members):
            raise ValueError(f"Unknown scheme code {code}")
        return members[code]


class Lattice(str, Enum):
    """Sampling positions of a gradient map"""
    FULL = 'full'
    EVEN = 'even'   # (row + col) even
    ODD = 'odd'     # (row + col) odd

    def mask(self, height: int, width: int) -> np.ndarray:
        if self is Lattice.FULL:
            return np.ones((height, width), dtype=bool)
        rows, cols = np.indices((height, width))
        parity = 0 if self is Lattice.EVEN else 1
        return (rows + cols) % 2 == parity

    def count(self, height: int, width: int) -> int:
        """Number of sampled positions, without building the mask"""
        cells = height * width
        if self is Lattice.FULL:
            return cells
        return (cells + 1) // 2 if self is Lattice.EVEN else cells // 2


# scheme -> (directions, default thresholds in 8-bit units, levels, avg bits/pixel, half res)
_SCHEME_TABLE: Dict[SchemeId, Tuple[Tuple[str, ...], Tuple[int, ...], Tuple[int, ...], float, bool]] = {
    SchemeId.ONE_DIR_1BIT: (('x',), (1,), (0, 1), 1.0, False),
    SchemeId.ONE_DIR_1P5BIT: (('x',), (-4, 4), (-1, 0, 1), 1.5, False),
    SchemeId.ONE_DIR_2BIT: (('x',), (-8, -4, 4), (-2, -1, 0, 1), 2.0, False),
    SchemeId.TWO_DIR_1BIT: (('x', 'y'), (1,), (0, 1), 2.0, False),
    SchemeId.TWO_DIR_2BIT_HALF_RES: (('x', 'y'), (-8, -4, 4), (-2, -1, 0, 1), 2.0, True),
}


@dataclass(frozen=True)
class QuantScheme:
    """A gradient acquisition scheme; thresholds are kept in 8-bit units"""
    scheme_id: SchemeId
    directions: Tuple[str, ...]
    thresholds: Tuple[int, ...]
    levels: Tuple[int, ...]
    avg_bits_per_pixel: float
    half_resolution: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'scheme_id', SchemeId(self.scheme_id))
        object.__setattr__(self, 'thresholds', tuple(int(t) for t in self.thresholds))
        object.__setattr__(self, 'directions', tuple(self.directions))
        object.__setattr__(self, 'levels', tuple(int(v) for v in self.levels))
        expected = _SCHEME_TABLE[self.scheme_id]

        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError(f"Thresholds must be strictly increasing: {self.thresholds}")
        if len(self.thresholds) != len(expected[1]):
            raise ValueError(
                f"{self.scheme_id.value} takes {len(expected[1])} thresholds, got {len(self.thresholds)}"
            )
        if any(not -255 <= t <= 255 for t in self.thresholds):
            raise ValueError(f"Thresholds must lie in [-255, 255]: {self.thresholds}")
        if len(self.levels) != len(self.thresholds) + 1:
            raise ValueError("Need exactly one more level than thresholds")
        if (self.directions, self.levels, self.avg_bits_per_pixel,
                self.half_resolution) != (expected[0], expected[2], expected[3], expected[4]):
            raise ValueError(f"Scheme fields do not match {self.scheme_id.value}")

    @classmethod
    def from_id(cls, scheme_id, thresholds: Optional[Sequence[int]] = None) -> 'QuantScheme':
        scheme_id = SchemeId(scheme_id)
        directions, default_thresholds, levels, bits, half_res = _SCHEME_TABLE[scheme_id]
        return cls(
            scheme_id=scheme_id,
            directions=directions,
            thresholds=tuple(thresholds) if thresholds is not None else default_thresholds,
            levels=levels,
            avg_bits_per_pixel=bits,
            half_resolution=half_res,
        )

    @classmethod
    def from_config(cls, mapping: Mapping[str, Any]) -> 'QuantScheme':
        """Build from a config entry like ``{scheme_id: OneDir1p5Bit, thresholds: [-4, 4]}``"""
        if 'scheme_id' not in mapping:
            raise ValueError("Scheme entry needs a 'scheme_id'")
        scheme = cls.from_id(mapping['scheme_id'], mapping.get('thresholds'))
        if 'directions' in mapping and tuple(mapping['directions']) != scheme.directions:
            raise ValueError(
                f"{scheme.scheme_id.value} acquires directions {scheme.directions}, "
                f"not {tuple(mapping['directions'])}"
            )
        return scheme

    @property
    def thresholds_normalized(self) -> np.ndarray:
        return np.asarray(self.thresholds, dtype=np.float64) / 255.0

    @property
    def samples_per_pixel(self) -> int:
        """Gradient samples acquired per pixel position"""
        return 1 if self.half_resolution else len(self.directions)

    @property
    def bits_per_sample(self) -> float:
        return self.avg_bits_per_pixel / self.samples_per_pixel

    def lattice(self, direction: str) -> Lattice:
        if direction not in self.directions:
            raise ValueError(f"{self.scheme_id.value} does not acquire direction {direction!r}")
        if not self.half_resolution:
            return Lattice.FULL
        return Lattice.EVEN if direction == 'x' else Lattice.ODD

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scheme_id': self.scheme_id.value,
            'directions': list(self.directions),
            'thresholds': list(self.thresholds),
            'levels': list(self.levels),
            'avg_bits_per_pixel': self.avg_bits_per_pixel,
        }


ALL_SCHEMES = tuple(SchemeId)


@dataclass(frozen=True, eq=False)
class GradientMap:
    """Quantized gradient levels for one direction, stored on the full pixel grid"""
    levels: np.ndarray
    direction: str
    scheme: QuantScheme
    lattice: Lattice = field(default=Lattice.FULL)

    def __post_init__(self):
        levels = np.array(self.levels, dtype=np.int8)
        if levels.ndim != 2 or levels.size == 0:
            raise ValueError(f"GradientMap needs a non-empty 2-D grid, got shape {levels.shape}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"Unknown direction {self.direction!r}")
        if not np.all(np.isin(levels, self.scheme.levels)):
            bad = np.setdiff1d(np.unique(levels), self.scheme.levels)
            raise ValueError(f"Levels {bad.tolist()} not in alphabet {self.scheme.levels}")
        lattice = Lattice(self.lattice)
        if np.any(levels[~lattice.mask(*levels.shape)] != 0):
            raise ValueError("Off-lattice samples must hold level 0")
        levels.setflags(write=False)
        object.__setattr__(self, 'levels', levels)
        object.__setattr__(self, 'lattice', lattice)

    @property
    def width(self) -> int:
        return self.levels.shape[1]

    @property
    def height(self) -> int:
        return self.levels.shape[0]

    def samples(self) -> np.ndarray:
        """Transmitted samples in row-major scan order"""
        if self.lattice is Lattice.FULL:
            return self.levels.ravel()
        return self.levels[self.lattice.mask(self.height, self.width)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradientMap):
            return NotImplemented
        return (self.direction == other.direction
                and self.scheme == other.scheme
                and self.lattice == other.lattice
                and np.array_equal(self.levels, other.levels))


@dataclass(frozen=True)
class Acquisition:
    """Output of one simulated exposure"""
    gradients: Dict[str, GradientMap]
    lri: RasterImage
    noise_sigma: float = 0.0
    seed: Optional[int] = None


def gradient_exact(img: RasterImage, direction: str) -> np.ndarray:
    """Forward difference I(x+1) - I(x); the last column (or row) is zero"""
    data = img.data
    field_ = np.zeros_like(data)
    if direction == 'x':
        if img.width < 2:
            raise ValueError("x-gradient needs width >= 2")
        field_[:, :-1] = data[:, 1:] - data[:, :-1]
    elif direction == 'y':
        if img.height < 2:
            raise ValueError("y-gradient needs height >= 2")
        field_[:-1, :] = data[1:, :] - data[:-1, :]
    else:
        raise ValueError(f"Unknown direction {direction!r}")
    return field_


def quantize(gradient: np.ndarray, scheme: QuantScheme, direction: str) -> GradientMap:
    """
    Map each gradient value to the level of the interval containing it.

    Interval k is [tau_k, tau_{k+1}) with open outer ends, so a value equal
    to a threshold falls into the upper interval. Edges are lowered by
    TIE_TOLERANCE, so any value within 1e-9 below a threshold also goes up;
    for 8-bit content this only absorbs differencing round-off.

    The last column (x) or row (y) has no forward neighbour and is always
    level 0, whatever the thresholds.
    """
    lattice = scheme.lattice(direction)
    gradient = np.asarray(gradient, dtype=np.float64)
    edges = scheme.thresholds_normalized - TIE_TOLERANCE
    index = np.searchsorted(edges, gradient, side='right')
    levels = np.asarray(scheme.levels, dtype=np.int8)[index]
    if direction == 'x':
        levels[:, -1] = 0
    else:
        levels[-1, :] = 0
    levels[~lattice.mask(*levels.shape)] = 0
    return GradientMap(levels, direction, scheme, lattice)


def comparison_count(scheme: QuantScheme) -> int:
    """Comparator operations per pixel"""
    return len(scheme.thresholds) * scheme.samples_per_pixel


def readout_speedup(scheme: QuantScheme) -> int:
    """Speedup over the 256-comparison ramp of an 8-bit SS-ADC"""
    return SS_ADC_COMPARISONS // comparison_count(scheme)


def add_noise(img: RasterImage, sigma: float, seed: Optional[int] = None) -> RasterImage:
    """Add i.i.d. Gaussian noise (sigma in normalized units) and clamp to [0, 1]"""
    if sigma < 0:
        raise ValueError(f"Noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img

    rng = np.random.default_rng(seed)
    noisy = img.data + rng.normal(0.0, sigma, size=img.shape)
    return RasterImage.from_array(noisy, img.source_bit_depth, clamp=True)


def simulate_acquisition(hr: RasterImage, scheme: QuantScheme, lri_factor: int,
                         noise_sigma: float = 0.0, seed: Optional[int] = None) -> Acquisition:
    """Capture the low-bit gradient maps and the low-resolution intensity image of a scene"""
    if lri_factor <= 0:
        raise ValueError(f"LRI factor must be positive, got {lri_factor}")
    if hr.width % lri_factor or hr.height % lri_factor:
        raise ValueError(f"Image {hr.width}x{hr.height} is not divisible by LRI factor {lri_factor}")
    if scheme.half_resolution and (hr.width % 2 or hr.height % 2):
        raise ValueError(f"{scheme.scheme_id.value} needs even image dims")

    # Photodiode noise reaches the comparators only; the LRI path stays clean
    sensed = add_noise(hr, noise_sigma, seed)
    gradients = {
        direction: quantize(gradient_exact(sensed, direction), scheme, direction)
        for direction in scheme.directions
    }
    lri = downsample_avg(hr, lri_factor)

    logger.debug(
        f"Acquired {scheme.scheme_id.value} {hr.width}x{hr.height}, "
        f"LRI {lri.width}x{lri.height}, sigma={noise_sigma:.5f}"
    )
    return Acquisition(gradients=gradients, lri=lri, noise_sigma=noise_sigma, seed=seed)
