#!/usr/bin/env python3
"""
Low-bit Gradient Camera - Main Entry Point
Simulates gradient acquisition, stream coding, closed-form reconstruction and
bandwidth accounting for a low-bit gradient camera.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from core.fourier_recon import ReconConfig, gradient_fields, reconstruct_closed_form
from core.gradient_codec import compression_ratio, decode, encode, read_stream, write_stream
from core.metrics import MetricsReport, budget, psnr, ssim
from core.pipeline import GradientCameraPipeline, PipelineConfig
from core.raster import crop_to_multiple, load_image, save_image
from core.sensor_sim import ALL_SCHEMES, GradientMap, QuantScheme, simulate_acquisition
from utils.config import Config, ConfigError
from utils.logger import setup_logger
from utils.reports import print_table, write_report

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

SCHEME_CHOICES = [s.value for s in ALL_SCHEMES]

# CLI flag -> config key
OVERRIDES = {
    'input': 'input.path',
    'schemes': 'acquisition.schemes',
    'lri_factor': 'acquisition.lri_factor',
    'noise_sigma': 'acquisition.noise_sigma',
    'seed': 'acquisition.seed',
    'sigmas': 'noise_sweep.sigmas',
    'lam': 'reconstruction.lambda',
    'beta': 'reconstruction.beta',
    'saturation': 'reconstruction.saturation',
    'gradient_source': 'reconstruction.gradient_source',
    'border_crop': 'reconstruction.border_crop',
    'link_gbps': 'link.gbps',
    'output_dir': 'output.directory',
    'workers': 'runtime.workers',
}


def add_recon_args(parser: argparse.ArgumentParser):
    parser.add_argument('--lambda', dest='lam', type=float, help='Gradient term weight')
    parser.add_argument('--beta', type=float, help='Ridge weight (> 0)')
    parser.add_argument('--saturation', type=float, help='Dequant saturation, 8-bit units')
    parser.add_argument('--lri-factor', type=int, help='LRI downsampling factor')


def add_run_args(parser: argparse.ArgumentParser):
    parser.add_argument('--input', help='Image file or directory of numbered frames')
    parser.add_argument('--output-dir', help='Output directory (env GCAM_OUTPUT_DIR)')
    parser.add_argument('--seed', type=int, help='Noise seed')
    parser.add_argument('--noise-sigma', type=float, help='Noise sigma, 8-bit units')
    parser.add_argument('--workers', type=int, help='Frame worker threads')
    parser.add_argument('--gradient-source', choices=['decoded', 'exact'],
                        help='Feed decoded low-bit or exact gradients to the solver')
    parser.add_argument('--border-crop', type=int, help='Border excluded from PSNR/SSIM')
    parser.add_argument('--link-gbps', type=float, help='Link bandwidth for the fps column')
    add_recon_args(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Low-bit gradient camera - acquisition, coding and reconstruction simulator'
    )
    parser.add_argument('--config', help='YAML config layered over config/default.yaml')
    parser.add_argument('--log-level', help='Logging level (env GCAM_LOG_LEVEL)')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Simulate command
    simulate_parser = subparsers.add_parser('simulate', help='Acquire gradient maps and LRI from an image')
    simulate_parser.add_argument('--input', required=True, help='High-resolution image')
    simulate_parser.add_argument('--scheme', choices=SCHEME_CHOICES, default='OneDir1p5Bit')
    simulate_parser.add_argument('--thresholds', type=int, nargs='+', help='Thresholds, 8-bit units')
    simulate_parser.add_argument('--lri-factor', type=int, help='LRI downsampling factor')
    simulate_parser.add_argument('--noise-sigma', type=float, help='Noise sigma, 8-bit units')
    simulate_parser.add_argument('--seed', type=int, help='Noise seed')
    simulate_parser.add_argument('--output-dir', help='Output directory')

    # Encode command
    encode_parser = subparsers.add_parser('encode', help='Encode a level map (.npy) into a .gcs stream')
    encode_parser.add_argument('--levels', required=True, help='Level map saved by simulate')
    encode_parser.add_argument('--scheme', choices=SCHEME_CHOICES, required=True)
    encode_parser.add_argument('--direction', choices=['x', 'y'], default='x')
    encode_parser.add_argument('--thresholds', type=int, nargs='+', help='Thresholds, 8-bit units')
    encode_parser.add_argument('--output', required=True, help='Output .gcs file')

    # Decode command
    decode_parser = subparsers.add_parser('decode', help='Decode a .gcs stream into a level map (.npy)')
    decode_parser.add_argument('--stream', required=True, help='Input .gcs file')
    decode_parser.add_argument('--output', required=True, help='Output .npy file')

    # Reconstruct command
    recon_parser = subparsers.add_parser('reconstruct', help='Closed-form reconstruction from LRI + streams')
    recon_parser.add_argument('--lri', required=True, help='Low-resolution intensity image')
    recon_parser.add_argument('--streams', required=True, nargs='+', help='Gradient .gcs stream(s)')
    recon_parser.add_argument('--output', required=True, help='Output image')
    add_recon_args(recon_parser)

    # Metrics command
    metrics_parser = subparsers.add_parser('metrics', help='Fidelity and budget report for one image pair')
    metrics_parser.add_argument('--reference', required=True, help='Ground-truth image')
    metrics_parser.add_argument('--test', required=True, help='Reconstructed image')
    metrics_parser.add_argument('--streams', nargs='*', default=[], help='Streams for the compression ratio')
    metrics_parser.add_argument('--scheme', choices=SCHEME_CHOICES, help='Scheme when no stream is given')
    metrics_parser.add_argument('--border-crop', type=int, help='Border excluded from PSNR/SSIM')
    metrics_parser.add_argument('--link-gbps', type=float, help='Link bandwidth for the fps column')
    metrics_parser.add_argument('--output-dir', help='Report directory')

    # Pipeline command
    pipeline_parser = subparsers.add_parser('pipeline', help='Full simulate/encode/decode/reconstruct run')
    pipeline_parser.add_argument('--schemes', nargs='+', choices=SCHEME_CHOICES)
    add_run_args(pipeline_parser)

    # Sweep commands
    sweep_parser = subparsers.add_parser('sweep-schemes', help='Comparison table over the five schemes')
    add_run_args(sweep_parser)

    noise_parser = subparsers.add_parser('sweep-noise', help='PSNR/SSIM against noise sigma')
    noise_parser.add_argument('--schemes', nargs='+', choices=SCHEME_CHOICES)
    noise_parser.add_argument('--sigmas', type=float, nargs='+', help='Sigmas, 8-bit units')
    add_run_args(noise_parser)

    return parser


def apply_overrides(config: Config, args: argparse.Namespace):
    """CLI flags win over config file and environment"""
    for dest, key in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            config.set(key, value)


def recon_config(config: Config) -> ReconConfig:
    factor = int(config.get('acquisition.lri_factor', 8))
    return ReconConfig.from_mapping(config.get('reconstruction') or {}, factor)


def cmd_simulate(args, config: Config, logger) -> int:
    scheme = QuantScheme.from_id(args.scheme, args.thresholds)
    factor = int(config.get('acquisition.lri_factor', 8))
    sigma = float(config.get('acquisition.noise_sigma', 0.0))
    out_dir = config.output_directory

    hr = load_image(args.input)
    hr, _ = crop_to_multiple(hr, math.lcm(factor, 2) if scheme.half_resolution else factor)
    acquisition = simulate_acquisition(hr, scheme, factor, sigma / 255.0,
                                       int(config.get('acquisition.seed', 0)))

    stem = Path(args.input).stem
    save_image(acquisition.lri, out_dir / f"{stem}.lri.png", bit_depth=16)
    for direction, gradient_map in acquisition.gradients.items():
        path = out_dir / f"{stem}.{direction}.npy"
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, np.asarray(gradient_map.levels))
        logger.info(f"Gradient map ({direction}) saved to {path}")

    logger.info(f"Simulation complete. LRI saved to {out_dir / f'{stem}.lri.png'}")
    return EXIT_OK


def cmd_encode(args, config: Config, logger) -> int:
    scheme = QuantScheme.from_id(args.scheme, args.thresholds)
    levels = np.load(args.levels)
    gradient_map = GradientMap(levels, args.direction, scheme, scheme.lattice(args.direction))

    stream = encode(gradient_map)
    path = write_stream(args.output, stream)
    logger.info(f"Encoded {gradient_map.width}x{gradient_map.height} map to {path} "
                f"({stream.bit_length} bits, ratio {compression_ratio(stream):.5f})")
    return EXIT_OK


def cmd_decode(args, config: Config, logger) -> int:
    stream = read_stream(args.stream)
    gradient_map = decode(stream)

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    np.save(output, np.asarray(gradient_map.levels))
    logger.info(f"Decoded {stream.scheme.scheme_id.value} {gradient_map.direction}-map "
                f"{gradient_map.width}x{gradient_map.height} to {output}: {stream.summary()}")
    return EXIT_OK


def cmd_reconstruct(args, config: Config, logger) -> int:
    cfg = recon_config(config)
    lri = load_image(args.lri)
    maps = [decode(read_stream(path)) for path in args.streams]

    fields = gradient_fields(maps, cfg)
    if 'x' not in fields:
        raise ValueError("An x-direction stream is required")
    recon = reconstruct_closed_form(lri, fields['x'], cfg, fields.get('y'))

    save_image(recon, args.output, bit_depth=8)
    logger.info(f"Reconstruction ({recon.width}x{recon.height}) saved to {args.output}")
    return EXIT_OK


def cmd_metrics(args, config: Config, logger) -> int:
    reference = load_image(args.reference)
    test = load_image(args.test)
    border = int(config.get('reconstruction.border_crop', 0))
    link_gbps = float(config.get('link.gbps', 41.4))

    streams = [read_stream(p) for p in args.streams]
    if streams:
        scheme = streams[0].scheme
        ratio = sum(s.bit_length for s in streams) / (reference.width * reference.height * 8)
    elif args.scheme:
        scheme = QuantScheme.from_id(args.scheme)
        ratio = None
    else:
        raise ValueError("Pass --streams or --scheme for the budget columns")

    report = MetricsReport(
        frame=Path(args.test).name,
        scheme=scheme.scheme_id.value,
        psnr=psnr(reference, test, border),
        ssim=ssim(reference, test, border),
        compression_ratio=ratio,
        border_crop=border,
        **budget(scheme, int(config.get('link.frame_width', 40000)),
                 int(config.get('link.frame_height', 25000)), link_gbps),
    )
    paths = write_report(config.output_directory, 'metrics', [report.row()],
                         formats=config.get('output.formats') or ('csv', 'json', 'yaml'))
    print_table('Metrics', [report.row()],
                ['scheme', 'psnr', 'ssim', 'compression_ratio', 'tb_ratio', 'readout_speedup', 'fps_at_link'])
    logger.info(f"Metrics saved to {[str(p) for p in paths]}")
    return EXIT_OK


def cmd_pipeline(args, config: Config, logger) -> int:
    result = GradientCameraPipeline(PipelineConfig.from_config(config)).run()
    logger.info(f"Pipeline complete. Reports: {[str(p) for p in result.report_paths]}")
    return result.exit_code


def cmd_sweep_schemes(args, config: Config, logger) -> int:
    rows, result = GradientCameraPipeline(PipelineConfig.from_config(config)).sweep_schemes()
    print_table('Gradient acquisition schemes (closed-form reconstruction)', rows,
                ['scheme', 'bits', 'directions', 'PSNR', 'SSIM', 'TB', 'RS', 'compression_ratio'])
    return result.exit_code


def cmd_sweep_noise(args, config: Config, logger) -> int:
    rows, result = GradientCameraPipeline(PipelineConfig.from_config(config)).sweep_noise()
    print_table('Noise sweep', rows, ['scheme', 'sigma', 'PSNR', 'SSIM', 'seed'])
    return result.exit_code


COMMANDS = {
    'simulate': cmd_simulate,
    'encode': cmd_encode,
    'decode': cmd_decode,
    'reconstruct': cmd_reconstruct,
    'metrics': cmd_metrics,
    'pipeline': cmd_pipeline,
    'sweep-schemes': cmd_sweep_schemes,
    'sweep-noise': cmd_sweep_noise,
}


def main(argv=None) -> int:
    """Main entry point for the gradient camera simulator"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    try:
        config = Config(args.config)
        apply_overrides(config, args)
        if args.log_level:
            config.set('logging.level', args.log_level)
        logger = setup_logger(level=config.log_level, log_file=config.log_file)
    except (ConfigError, ValueError) as e:
        setup_logger().error(f"Configuration error: {e}")
        return EXIT_CONFIG

    logger.info(f"Starting gradient camera: {args.command}")

    try:
        return COMMANDS[args.command](args, config, logger)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Error executing command: {e}", exc_info=True)
        return EXIT_PARTIAL


if __name__ == '__main__':
    sys.exit(main())
