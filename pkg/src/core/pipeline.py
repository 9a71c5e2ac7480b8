"""
Pipeline Module
Per-frame orchestration: simulate -> encode -> decode -> reconstruct -> metrics,
plus the scheme and noise sweeps.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.fourier_recon import (ReconConfig, dequant_table, gradient_fields, residual_check,
                                reconstruct_tiled, solve_closed_form)
from core.gradient_codec import STREAM_SUFFIX, EncodedStream, decode, encode
from core.metrics import SSIM_CONFIG, MetricsReport, budget, psnr, ssim
from core.raster import (RasterImage, TileGrid, crop_to_multiple, list_frames, load_image,
                         save_image, upsample_zoh)
from core.sensor_sim import (ALL_SCHEMES, QuantScheme, SchemeId, add_noise, gradient_exact,
                             simulate_acquisition)
from utils.config import Config, ConfigError
from utils.logger import get_logger
from utils.reports import write_report

logger = get_logger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline settings"""
    input_path: Path
    schemes: Tuple[QuantScheme, ...]
    output_dir: Path
    patterns: Tuple[str, ...] = ('*.png', '*.pgm', '*.tif', '*.tiff', '*.bmp')
    lri_factor: int = 8
    noise_sigma: float = 0.0                  # 8-bit units
    noise_sigmas: Tuple[float, ...] = (0.0,)  # 8-bit units
    recon: ReconConfig = field(default_factory=ReconConfig)
    tile: Optional[TileGrid] = None
    seed: int = 0
    link_gbps: float = 41.4
    frame_width: int = 40000
    frame_height: int = 25000
    formats: Tuple[str, ...] = ('csv', 'json', 'yaml')
    save_images: bool = True
    workers: int = 1
    threshold_overrides: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    def validate(self) -> 'PipelineConfig':
        if not self.input_path.exists():
            raise ConfigError(f"Input path does not exist: {self.input_path}")
        if not self.schemes:
            raise ConfigError("Scheme list is empty")
        if not self.noise_sigmas:
            raise ConfigError("Noise sigma list is empty")
        if any(s < 0 for s in (self.noise_sigma, *self.noise_sigmas)):
            raise ConfigError("Noise sigmas must be >= 0")
        if self.lri_factor < 1:
            raise ConfigError(f"lri_factor must be >= 1, got {self.lri_factor}")
        if self.recon.upsample_factor != self.lri_factor:
            raise ConfigError("Reconstruction factor must equal lri_factor")
        if self.tile is not None:
            try:
                self.tile.scaled(self.lri_factor)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        if self.link_gbps <= 0:
            raise ConfigError(f"link.gbps must be positive, got {self.link_gbps}")
        if self.workers < 1:
            raise ConfigError(f"runtime.workers must be >= 1, got {self.workers}")
        return self

    @classmethod
    def from_config(cls, config: Config) -> 'PipelineConfig':
        """Build and validate from a loaded :class:`Config`"""
        if not config.get('input.path'):
            raise ConfigError("input.path is required (set it in the config or pass --input)")
        try:
            overrides = {str(k): tuple(v) for k, v in (config.get('acquisition.thresholds') or {}).items()}
            schemes = tuple(_scheme_entry(entry, overrides)
                            for entry in config.get('acquisition.schemes') or [])
            lri_factor = int(config.get('acquisition.lri_factor', 8))
            recon_section = config.get('reconstruction') or {}
            tile_section = recon_section.get('tile')
            tile = (TileGrid(int(tile_section['width']), int(tile_section['height']),
                             int(tile_section.get('overlap', 0)))
                    if tile_section else None)

            cfg = cls(
                input_path=Path(config.get('input.path') or ''),
                patterns=tuple(config.get('input.patterns') or cls.patterns),
                schemes=schemes,
                output_dir=config.output_directory,
                lri_factor=lri_factor,
                noise_sigma=float(config.get('acquisition.noise_sigma', 0.0)),
                noise_sigmas=tuple(float(s) for s in config.get('noise_sweep.sigmas') or []),
                recon=ReconConfig.from_mapping(recon_section, lri_factor),
                tile=tile,
                seed=int(config.get('acquisition.seed', 0)),
                link_gbps=float(config.get('link.gbps', 41.4)),
                frame_width=int(config.get('link.frame_width', 40000)),
                frame_height=int(config.get('link.frame_height', 25000)),
                formats=tuple(config.get('output.formats') or cls.formats),
                save_images=bool(config.get('output.save_images', True)),
                workers=int(config.get('runtime.workers', 1)),
                threshold_overrides=overrides,
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid configuration: {e}") from e
        return cfg.validate()

    def scheme_for(self, scheme_id) -> QuantScheme:
        """Scheme with any configured threshold override"""
        scheme_id = SchemeId(scheme_id)
        return QuantScheme.from_id(scheme_id, self.threshold_overrides.get(scheme_id.value))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'input_path': str(self.input_path),
            'schemes': [s.to_dict() for s in self.schemes],
            'lri_factor': self.lri_factor,
            'noise_sigma': self.noise_sigma,
            'noise_sigmas': list(self.noise_sigmas),
            'reconstruction': {
                'lambda': self.recon.lam,
                'beta': self.recon.beta,
                'saturation': self.recon.saturation,
                'use_y_term': self.recon.use_y_term,
                'gradient_source': self.recon.gradient_source,
                'border_crop': self.recon.border_crop,
                'tile': None if self.tile is None else
                [self.tile.tile_width, self.tile.tile_height, self.tile.overlap],
            },
            'seed': self.seed,
            'link_gbps': self.link_gbps,
            'frame_size': [self.frame_width, self.frame_height],
        }


def _scheme_entry(entry, overrides: Dict[str, Tuple[int, ...]]) -> QuantScheme:
    if isinstance(entry, dict):
        return QuantScheme.from_config(entry)
    return QuantScheme.from_id(entry, overrides.get(str(entry)))


def frame_seed(seed: int, index: int) -> int:
    """Per-frame seed, independent of worker scheduling"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@dataclass
class FrameOutcome:
    report: Optional[MetricsReport] = None
    streams: List[Path] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class PipelineResult:
    reports: List[MetricsReport]
    failures: List[str]
    report_paths: List[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


class GradientCameraPipeline:
    """Runs the simulated camera over a corpus of frames"""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.logger = logger

    def frames(self) -> List[Path]:
        frames = list_frames(self.cfg.input_path, self.cfg.patterns)
        if not frames:
            raise ConfigError(f"No frames matching {list(self.cfg.patterns)} in {self.cfg.input_path}")
        return frames

    def process_frame(self, path: Path, index: int, scheme: QuantScheme,
                      sigma: float, artifact_dir: Optional[Path] = None) -> FrameOutcome:
        """Simulate, transmit and reconstruct one frame under one scheme"""
        cfg = self.cfg
        factor = cfg.lri_factor
        seed = frame_seed(cfg.seed, index)

        hr = load_image(path)
        hr, _ = crop_to_multiple(hr, math.lcm(factor, 2) if scheme.half_resolution else factor)
        acquisition = simulate_acquisition(hr, scheme, factor, sigma / 255.0, seed)

        # The reconstruction only ever sees what came back out of the codec
        streams = []
        decoded = []
        total_bits = 0
        for direction, gradient_map in acquisition.gradients.items():
            payload = encode(gradient_map).to_bytes()
            total_bits += 8 * len(payload)
            received = decode(EncodedStream.from_bytes(payload))
            if received != gradient_map:
                raise RuntimeError(f"Codec roundtrip mismatch on {path.name} ({direction})")
            decoded.append(received)
            if artifact_dir is not None:
                stream_path = artifact_dir / f"{path.stem}.{direction}{STREAM_SUFFIX}"
                stream_path.parent.mkdir(parents=True, exist_ok=True)
                stream_path.write_bytes(payload)
                streams.append(stream_path)

        if cfg.recon.gradient_source == 'exact':
            sensed = add_noise(hr, sigma / 255.0, seed)
            fields = {d: gradient_exact(sensed, d) for d in scheme.directions}
            if not cfg.recon.use_y_term:
                fields.pop('y', None)
        else:
            fields = gradient_fields(decoded, cfg.recon)
        gx, gy = fields['x'], fields.get('y')

        residual = None
        tiled = cfg.tile is not None and (hr.width > cfg.tile.tile_width
                                          or hr.height > cfg.tile.tile_height)
        if tiled:
            recon = reconstruct_tiled(acquisition.lri, gx, cfg.recon, cfg.tile, gy)
        else:
            solution = solve_closed_form(acquisition.lri, gx, cfg.recon, gy)
            residual = residual_check(solution, acquisition.lri, gx, cfg.recon, gy)
            recon = RasterImage.from_array(solution, hr.source_bit_depth, clamp=True)

        border = cfg.recon.border_crop
        zoh = upsample_zoh(acquisition.lri, factor)
        report = MetricsReport(
            frame=path.name,
            scheme=scheme.scheme_id.value,
            psnr=psnr(hr, recon, border),
            ssim=ssim(hr, recon, border),
            compression_ratio=total_bits / (hr.width * hr.height * 8),
            noise_sigma=sigma,
            seed=seed,
            psnr_zoh=psnr(hr, zoh, border),
            border_crop=border,
            residual=residual,
            **budget(scheme, cfg.frame_width, cfg.frame_height, cfg.link_gbps),
        )
        if tiled:
            report.per_tile = self._tile_reports(hr, recon, report)

        if artifact_dir is not None and cfg.save_images:
            save_image(recon, artifact_dir / f"{path.stem}.recon.png")

        self.logger.info(
            f"{path.name} [{scheme.scheme_id.value}] PSNR {report.psnr:.2f} dB "
            f"(ZOH {report.psnr_zoh:.2f}), SSIM {report.ssim:.4f}, "
            f"ratio {report.compression_ratio:.4f}"
        )
        return FrameOutcome(report=report, streams=streams)

    def _tile_reports(self, hr: RasterImage, recon: RasterImage,
                      frame_report: MetricsReport) -> List[MetricsReport]:
        reports = []
        for t in self.cfg.tile.layout(hr.width, hr.height):
            ref, out = hr.data[t.slices], recon.data[t.slices]
            reports.append(MetricsReport(
                frame=f"{frame_report.frame}@{t.x},{t.y}",
                scheme=frame_report.scheme,
                psnr=psnr(ref, out),
                ssim=ssim(ref, out) if min(ref.shape) >= SSIM_CONFIG['win_size'] else None,
                compression_ratio=frame_report.compression_ratio,
                tb_ratio=frame_report.tb_ratio,
                readout_speedup=frame_report.readout_speedup,
                fps_at_link=frame_report.fps_at_link,
                noise_sigma=frame_report.noise_sigma,
                seed=frame_report.seed,
            ))
        return reports

    def _safe_process(self, task) -> FrameOutcome:
        path, index, scheme, sigma, artifact_dir = task
        try:
            return self.process_frame(path, index, scheme, sigma, artifact_dir)
        except Exception as e:
            self.logger.error(f"Frame {path.name} [{scheme.scheme_id.value}] failed: {e}",
                              exc_info=True)
            return FrameOutcome(error=f"{path.name} [{scheme.scheme_id.value}]: {e}")

    def evaluate(self, schemes: Sequence[QuantScheme], sigma: float,
                 write_artifacts: bool) -> Tuple[List[MetricsReport], List[str]]:
        """Every (frame, scheme) pair at one noise level, in deterministic order"""
        frames = self.frames()
        tasks = []
        for scheme in schemes:
            artifact_dir = self.cfg.output_dir / scheme.scheme_id.value if write_artifacts else None
            for index, path in enumerate(frames):
                tasks.append((path, index, scheme, sigma, artifact_dir))

        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            outcomes = list(pool.map(self._safe_process, tasks))

        reports = [o.report for o in outcomes if o.report is not None]
        failures = [o.error for o in outcomes if o.error is not None]
        return reports, failures

    def _meta(self, schemes: Sequence[QuantScheme]) -> Dict[str, Any]:
        return {
            'config': self.cfg.to_dict(),
            'ssim': dict(SSIM_CONFIG),
            'dequant': {
                s.scheme_id.value: {lv: round(v * 255.0, 6) for lv, v in dequant_table(s, self.cfg.recon).items()}
                for s in schemes
            },
            'reconstruction': 'closed-form Fourier solver (not a learned model)',
        }

    def run(self) -> PipelineResult:
        cfg = self.cfg
        self.logger.info(f"Running pipeline on {cfg.input_path} with "
                         f"{[s.scheme_id.value for s in cfg.schemes]}")
        reports, failures = self.evaluate(cfg.schemes, cfg.noise_sigma, write_artifacts=True)

        rows = []
        for scheme in cfg.schemes:
            scheme_reports = [r for r in reports if r.scheme == scheme.scheme_id.value]
            for r in scheme_reports:
                rows.extend(r.rows())
            if scheme_reports:
                rows.append(MetricsReport.aggregate(scheme_reports).row())

        paths = write_report(cfg.output_dir, 'metrics', rows, self._meta(cfg.schemes), cfg.formats)
        self._log_summary(failures)
        return PipelineResult(reports, failures, paths)

    def sweep_schemes(self) -> Tuple[List[Dict[str, Any]], PipelineResult]:
        """Comparison table over all five acquisition schemes"""
        schemes = [self.cfg.scheme_for(s) for s in ALL_SCHEMES]
        reports, failures = self.evaluate(schemes, self.cfg.noise_sigma, write_artifacts=False)
        if not reports:
            raise ValueError("No frame could be evaluated; the corpus is empty or unreadable")

        rows = []
        for scheme in schemes:
            scheme_reports = [r for r in reports if r.scheme == scheme.scheme_id.value]
            if not scheme_reports:
                continue
            summary = MetricsReport.aggregate(scheme_reports)
            rows.append({
                'scheme': scheme.scheme_id.value,
                'bits': scheme.bits_per_sample,
                'directions': len(scheme.directions),
                'PSNR': summary.psnr,
                'SSIM': summary.ssim,
                'TB': summary.tb_ratio,
                'RS': summary.readout_speedup,
                'compression_ratio': summary.compression_ratio,
                'fps_at_link': summary.fps_at_link,
                'PSNR_zoh': summary.psnr_zoh,
                'frames': len(scheme_reports),
            })

        paths = write_report(self.cfg.output_dir, 'table1', rows, self._meta(schemes), self.cfg.formats)
        self._log_summary(failures)
        return rows, PipelineResult(reports, failures, paths)

    def sweep_noise(self) -> Tuple[List[Dict[str, Any]], PipelineResult]:
        """PSNR / SSIM against noise sigma for each configured scheme"""
        all_reports = []
        all_failures = []
        rows = []
        for sigma in self.cfg.noise_sigmas:
            reports, failures = self.evaluate(self.cfg.schemes, sigma, write_artifacts=False)
            all_reports.extend(reports)
            all_failures.extend(failures)
            for scheme in self.cfg.schemes:
                scheme_reports = [r for r in reports if r.scheme == scheme.scheme_id.value]
                if not scheme_reports:
                    continue
                summary = MetricsReport.aggregate(scheme_reports)
                rows.append({
                    'scheme': scheme.scheme_id.value,
                    'sigma': sigma,
                    'PSNR': summary.psnr,
                    'SSIM': summary.ssim,
                    'compression_ratio': summary.compression_ratio,
                    'seed': self.cfg.seed,
                    'frames': len(scheme_reports),
                })

        paths = write_report(self.cfg.output_dir, 'noise_sweep', rows,
                             self._meta(self.cfg.schemes), self.cfg.formats)
        self._log_summary(all_failures)
        return rows, PipelineResult(all_reports, all_failures, paths)

    def _log_summary(self, failures: Sequence[str]):
        if failures:
            self.logger.error(f"{len(failures)} frame run(s) failed: {'; '.join(failures)}")
        else:
            self.logger.info("All frames completed")


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    return GradientCameraPipeline(cfg).run()


def sweep_table1(cfg: PipelineConfig) -> List[Dict[str, Any]]:
    rows, _ = GradientCameraPipeline(cfg).sweep_schemes()
    return rows


def noise_sweep(cfg: PipelineConfig) -> List[Dict[str, Any]]:
    rows, _ = GradientCameraPipeline(cfg).sweep_noise()
    return rows
