"""TOML config loading: defaults, strict keys, coercion, seed wiring."""

import textwrap

import pytest

from xcnn.config import load_config
from xcnn.errors import ConfigError
from xcnn.model import ConvBlock


def write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(textwrap.dedent(text), encoding="utf-8")
    return p


class TestDefaults:
    def test_minimal_file_gets_full_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, """
            [data]
            root = "corpus"
        """))
        assert cfg.seed == 0
        assert cfg.output_dir == "runs/out"
        assert cfg.data.root == "corpus"
        assert cfg.data.input_size == 64
        assert cfg.data.normalization == "unit"
        assert cfg.model.blocks == (16, 32, 64)
        assert cfg.model.kernel == 3
        t = cfg.train
        assert (t.epochs, t.batch_size) == (150, 32)
        assert (t.learning_rate, t.momentum, t.weight_decay) == (0.05, 0.9, 5e-4)
        assert t.lr_schedule == "constant"
        assert t.checkpoint_every == 0
        assert cfg.eval.split == "test"
        e = cfg.explain
        assert (e.method, e.layer, e.class_name, e.alpha) == ("hirescam", "", "", 0.45)
        assert e.images == ()

    def test_empty_file_is_valid(self, tmp_path):
        cfg = load_config(write(tmp_path, ""))
        assert cfg.data.root == ""

    def test_class_key_maps_to_class_name(self, tmp_path):
        cfg = load_config(write(tmp_path, """
            [explain]
            class = "dog"
            images = ["a.png", "b.png"]
        """))
        assert cfg.explain.class_name == "dog"
        assert cfg.explain.images == ("a.png", "b.png")


class TestSeedWiring:
    # one seed in the file, three derived streams: split, init, shuffle
    def test_derived_seeds(self, tmp_path):
        cfg = load_config(write(tmp_path, "seed = 9"))
        assert cfg.split_seed == 9
        assert cfg.model_config(4).seed == 10
        assert cfg.hyperparams().seed == 11

    def test_model_config_wiring(self, tmp_path):
        cfg = load_config(write(tmp_path, """
            [data]
            input_size = 32
            [model]
            blocks = [4, 8]
            kernel = 5
        """))
        mc = cfg.model_config(7)
        assert mc.num_classes == 7
        assert mc.input_size == 32
        assert mc.blocks == (ConvBlock(4, kernel=5), ConvBlock(8, kernel=5))

    def test_hyperparams_wiring(self, tmp_path):
        cfg = load_config(write(tmp_path, """
            seed = 2
            [train]
            epochs = 7
            batch_size = 4
            learning_rate = 0.5
            momentum = 0.0
            weight_decay = 0.0
            lr_schedule = "cosine"
            checkpoint_every = 3
        """))
        hp = cfg.hyperparams()
        assert (hp.epochs, hp.batch_size, hp.seed) == (7, 4, 4)
        assert (hp.learning_rate, hp.momentum, hp.weight_decay) == (0.5, 0.0, 0.0)
        assert hp.lr_schedule == "cosine"
        assert hp.checkpoint_every == 3


class TestRejection:
    @pytest.mark.parametrize("text,fragment", [
        ("sed = 1", "sed"),
        ("[train]\nlearing_rate = 0.1", "learing_rate"),
        ("[data]\nroots = 'x'", "roots"),
        ("[explain]\nmode = 'y'", "mode"),
        ("[eval]\nsplits = 'test'", "splits"),
    ])
    def test_unknown_keys_named(self, tmp_path, text, fragment):
        with pytest.raises(ConfigError, match=fragment):
            load_config(write(tmp_path, text))

    def test_int_coerces_to_float(self, tmp_path):
        cfg = load_config(write(tmp_path, "[train]\nlearning_rate = 1"))
        assert cfg.train.learning_rate == 1.0
        assert isinstance(cfg.train.learning_rate, float)

    def test_bool_not_a_number(self, tmp_path):
        with pytest.raises(ConfigError, match="momentum"):
            load_config(write(tmp_path, "[train]\nmomentum = true"))

    def test_wrong_type_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="int"):
            load_config(write(tmp_path, "[train]\nepochs = 'ten'"))

    @pytest.mark.parametrize("blocks", ["[]", "[0]", "['a']", "3", "[4, true]"])
    def test_blocks_validated(self, tmp_path, blocks):
        with pytest.raises(ConfigError, match="blocks"):
            load_config(write(tmp_path, f"[model]\nblocks = {blocks}"))

    def test_images_must_be_string_list(self, tmp_path):
        with pytest.raises(ConfigError, match="images"):
            load_config(write(tmp_path, "[explain]\nimages = [1, 2]"))

    def test_eval_split_checked(self, tmp_path):
        with pytest.raises(ConfigError, match="eval.split"):
            load_config(write(tmp_path, "[eval]\nsplit = 'validation'"))

    def test_method_checked(self, tmp_path):
        with pytest.raises(ConfigError, match="hirescam or gradcam"):
            load_config(write(tmp_path, "[explain]\nmethod = 'cam'"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(write(tmp_path, "seed = "))

    def test_section_must_be_table(self, tmp_path):
        with pytest.raises(ConfigError, match="table"):
            load_config(write(tmp_path, "data = 3"))
