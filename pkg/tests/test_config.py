import pytest

from lightattack.config import (
    ConfigError,
    load_experiment_config,
    load_scene_config,
    parse_kv,
)
from lightattack.prng import derive_seed


class TestParseKv:
    def test_basic(self):
        pairs = parse_kv("a = 1\n# comment\n\nb=two\n")
        assert pairs == {"a": "1", "b": "two"}

    def test_rejects_bare_line(self):
        with pytest.raises(ConfigError, match="cfg:2"):
            parse_kv("a = 1\nnonsense\n", "cfg")

    def test_rejects_duplicates(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_kv("a=1\na=2\n")


class TestSceneConfig:
    def test_fixture_scene_loads(self, fixture_dir):
        bundle = load_scene_config(fixture_dir / "airplane.cfg")
        assert bundle.scene.reflectance.height == 64
        assert bundle.scene.true_class == 0
        assert bundle.projector.gamma == 2.2
        assert bundle.camera.shot_noise_sigma0 == 0.0

    def test_unknown_key_rejected(self, fixture_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        text = (fixture_dir / "airplane.cfg").read_text() + "mystery = 1\n"
        cfg.write_text(text)
        (tmp_path / "airplane.ppm").write_bytes(
            (fixture_dir / "airplane.ppm").read_bytes()
        )
        with pytest.raises(ConfigError, match="mystery"):
            load_scene_config(cfg)

    def test_missing_required_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("ambient = 1,1,1\n")
        with pytest.raises(ConfigError, match="reflectance"):
            load_scene_config(cfg)

    def test_defaults_applied(self, fixture_dir, tmp_path):
        cfg = tmp_path / "minimal.cfg"
        cfg.write_text(
            "reflectance = scene.ppm\nambient = 0.5,0.5,0.5\ntrue_class = 3\n"
        )
        (tmp_path / "scene.ppm").write_bytes(
            (fixture_dir / "airplane.ppm").read_bytes()
        )
        bundle = load_scene_config(cfg)
        assert bundle.projector.black_level == (0.02, 0.02, 0.02)
        assert bundle.projector.intensity == 0.8
        assert bundle.projector.cell_h == 2  # 64 / 32
        assert bundle.camera.wb_gain_max == 2.0
        assert bundle.scene.true_class == 3


class TestExperimentConfig:
    def test_fixture_experiment_loads(self, fixture_dir):
        config = load_experiment_config(fixture_dir / "susceptible.cfg")
        assert config.classifier == "builtin"
        assert config.background == 255
        assert config.captures_per_condition == 20
        assert config.de.population_size == 50
        assert config.de.generations == 4
        assert config.include_gen0 is True
        assert config.mode == "nontargeted"
        # de.seed omitted -> derived from the master seed
        assert config.de.seed == derive_seed(config.master_seed, 3)

    def test_config_hash_tracks_text(self, fixture_dir):
        a = load_experiment_config(fixture_dir / "susceptible.cfg")
        b = load_experiment_config(fixture_dir / "invariant.cfg")
        assert a.config_hash != b.config_hash
        assert len(a.config_hash) == 64

    def test_unknown_key_rejected(self, fixture_dir, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(f"scene = {fixture_dir}/airplane.cfg\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_experiment_config(cfg)

    def test_builtin_requires_model(self, fixture_dir, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(f"scene = {fixture_dir}/airplane.cfg\nclassifier = builtin\n")
        with pytest.raises(ConfigError, match="model"):
            load_experiment_config(cfg)

    def test_external_requires_endpoint(self, fixture_dir, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(f"scene = {fixture_dir}/airplane.cfg\nclassifier = external\n")
        with pytest.raises(ConfigError, match="endpoint"):
            load_experiment_config(cfg)

    def test_targeted_mode(self, fixture_dir, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            f"scene = {fixture_dir}/airplane.cfg\n"
            f"model = {fixture_dir}/model.json\n"
            "attack.mode = targeted\n"
            "attack.target = truck\n"
        )
        config = load_experiment_config(cfg)
        assert config.mode == "targeted"
        assert config.target == 9

    def test_captures_minimum(self, fixture_dir, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            f"scene = {fixture_dir}/airplane.cfg\n"
            f"model = {fixture_dir}/model.json\n"
            "captures_per_condition = 1\n"
        )
        with pytest.raises(ConfigError, match="captures_per_condition"):
            load_experiment_config(cfg)
