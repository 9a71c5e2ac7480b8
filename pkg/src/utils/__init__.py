"""
Utility modules for the low-bit gradient camera
"""

from .bitio import BitReader, BitstreamError, BitWriter
from .config import Config, ConfigError
from .logger import get_logger, setup_logger
from .reports import print_table, write_report

__all__ = ['BitReader', 'BitWriter', 'BitstreamError', 'Config', 'ConfigError',
           'get_logger', 'setup_logger', 'print_table', 'write_report']
