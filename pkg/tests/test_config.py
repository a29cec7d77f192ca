import pytest

from idskit.config import (
    DEFAULT_REBALANCE_TARGETS,
    RunConfig,
    SEED_FOREST,
    SEED_KMEANS,
    config_from_text,
    load_config,
)
from idskit.dataset import ClassLabel


class TestDefaults:
    def test_paper_defaults(self):
        cfg = RunConfig()
        assert cfg.feature_count == 23
        assert cfg.clusters == 3
        assert cfg.nt == 5
        assert cfg.forest_size == 50
        assert cfg.entropy_window == 20
        assert cfg.interval_seconds == 5.0
        assert cfg.rebalance_targets is None

    def test_default_rebalance_targets(self):
        t = DEFAULT_REBALANCE_TARGETS
        assert t[ClassLabel.NORMAL] == 20000
        assert t[ClassLabel.DOS] == 20000
        assert t[ClassLabel.U2R] == 4000
        assert t[ClassLabel.R2L] == 4000
        assert ClassLabel.PROBE not in t

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(feature_count=0)
        with pytest.raises(ValueError):
            RunConfig(feature_count=42)
        with pytest.raises(ValueError):
            RunConfig(interval_seconds=0.0)

    def test_seed_offsets(self):
        cfg = RunConfig(master_seed=100)
        assert cfg.seed(SEED_FOREST) == 100 + SEED_FOREST
        assert cfg.seed(SEED_KMEANS) == 100 + SEED_KMEANS


class TestTextRoundtrip:
    def test_roundtrip(self):
        cfg = RunConfig(
            master_seed=9,
            feature_count=10,
            rebalance_targets={ClassLabel.NORMAL: 100, ClassLabel.U2R: 50},
            attack_classes_only=True,
        )
        assert config_from_text(cfg.to_text()) == cfg

    def test_overrides_apply_over_base(self):
        base = RunConfig(master_seed=1, nt=7)
        cfg = config_from_text("nt = 9\n", base)
        assert cfg.nt == 9
        assert cfg.master_seed == 1

    def test_comments_and_blanks_skipped(self):
        cfg = config_from_text("# comment\n\nmaster_seed = 4\n")
        assert cfg.master_seed == 4

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            config_from_text("bogus = 1\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            config_from_text("just a line\n")

    def test_none_targets(self):
        cfg = config_from_text("rebalance_targets = none\n")
        assert cfg.rebalance_targets is None

    def test_target_parsing(self):
        cfg = config_from_text("rebalance_targets = Normal:10,DoS:20\n")
        assert cfg.rebalance_targets == {ClassLabel.NORMAL: 10, ClassLabel.DOS: 20}

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("master_seed = 77\nclusters = 4\n")
        cfg = load_config(path)
        assert cfg.master_seed == 77
        assert cfg.clusters == 4
