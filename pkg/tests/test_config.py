import pytest
import yaml

from core.pipeline import PipelineConfig
from utils.config import Config, ConfigError


def write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload), encoding='utf-8')
    return path


class TestConfig:
    def test_defaults(self):
        config = Config()
        assert config.get('acquisition.lri_factor') == 8
        assert config.get('reconstruction.lambda') == 1.0
        assert config.get('link.gbps') == 41.4
        assert config.log_level == 'INFO'

    def test_missing_key_returns_default(self):
        assert Config().get('acquisition.nothing.here', 'fallback') == 'fallback'

    def test_user_file_layers_over_defaults(self, tmp_path):
        path = write_yaml(tmp_path / 'user.yaml', {'reconstruction': {'lambda': 4.0}})
        config = Config(path)
        assert config.get('reconstruction.lambda') == 4.0
        assert config.get('reconstruction.beta') == 0.001

    def test_missing_user_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            Config(tmp_path / 'absent.yaml')

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / 'bad.yaml'
        path.write_text('acquisition: [unclosed', encoding='utf-8')
        with pytest.raises(ConfigError, match="Cannot parse"):
            Config(path)

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / 'list.yaml'
        path.write_text('- a\n- b\n', encoding='utf-8')
        with pytest.raises(ConfigError, match="mapping"):
            Config(path)

    def test_environment_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv('GCAM_OUTPUT_DIR', str(tmp_path / 'env-out'))
        monkeypatch.setenv('GCAM_LOG_LEVEL', 'debug')
        config = Config()
        assert config.output_directory == tmp_path / 'env-out'
        assert config.log_level == 'DEBUG'

    def test_set_creates_nested_keys(self):
        config = Config()
        config.set('runtime.extra.depth', 3)
        assert config.get('runtime.extra.depth') == 3
        assert config.get('runtime.workers') == 1


class TestPipelineConfig:
    def test_from_config(self, config_file):
        cfg = PipelineConfig.from_config(Config(config_file))
        assert [s.scheme_id.value for s in cfg.schemes] == ['OneDir1p5Bit', 'TwoDir2BitHalfRes']
        assert cfg.lri_factor == cfg.recon.upsample_factor == 4
        assert cfg.noise_sigmas == (0.0, 10.0)
        assert cfg.tile is None

    def test_input_path_required(self):
        with pytest.raises(ConfigError, match="input.path"):
            PipelineConfig.from_config(Config())

    def test_input_path_must_exist(self, config_file, tmp_path):
        config = Config(config_file)
        config.set('input.path', str(tmp_path / 'nowhere'))
        with pytest.raises(ConfigError, match="does not exist"):
            PipelineConfig.from_config(config)

    def test_unknown_scheme(self, config_file):
        config = Config(config_file)
        config.set('acquisition.schemes', ['OneDir3Bit'])
        with pytest.raises(ConfigError, match="Invalid configuration"):
            PipelineConfig.from_config(config)

    def test_tile_must_align_with_factor(self, config_file):
        config = Config(config_file)
        config.set('reconstruction.tile', {'width': 30, 'height': 32})
        with pytest.raises(ConfigError, match="not divisible"):
            PipelineConfig.from_config(config)

    def test_threshold_overrides(self, config_file):
        config = Config(config_file)
        config.set('acquisition.thresholds', {'OneDir1p5Bit': [-6, 6]})
        cfg = PipelineConfig.from_config(config)
        assert cfg.schemes[0].thresholds == (-6, 6)
        assert cfg.scheme_for('OneDir1p5Bit').thresholds == (-6, 6)
        assert cfg.scheme_for('OneDir2Bit').thresholds == (-8, -4, 4)

    def test_scheme_entries_as_mappings(self, config_file):
        config = Config(config_file)
        config.set('acquisition.schemes', [{'scheme_id': 'OneDir2Bit', 'thresholds': [-10, -5, 5]}])
        cfg = PipelineConfig.from_config(config)
        assert cfg.schemes[0].thresholds == (-10, -5, 5)

    def test_invalid_recon_weights(self, config_file):
        config = Config(config_file)
        config.set('reconstruction.beta', 0)
        with pytest.raises(ConfigError, match="beta"):
            PipelineConfig.from_config(config)
