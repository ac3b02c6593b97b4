import json
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from backend.expressivity.models import random_model, save_model
from backend.expressivity.regimes import assemble_critical_model, construct_critical_point
from frontend import app
from frontend.page import gradcheck
from frontend.run_config import load_config
from tests.conftest import scalar_model
from utils.config.env_loader import get_project_root

TRAIN_CONFIG = """
runs = 2
figure_resolution = 21

[dataset]
kind = "Circle2D"
size = 100

[skeleton]
eps = 1.0
delta = 0.1
depth = 2
n_in = 2
n_hid = 2
input_kind = "tanh"
output_kind = "sigmoid"
residual_form = "outer"

[train]
epochs = 2
batch_size = 50
loss = "bce"
batch_norm = true
"""

MONOTONE_CONFIG = """
runs = 2
figure_resolution = 41

[dataset]
kind = "Quad1D"
size = 60

[skeleton]
eps = 0.0
delta = 1.0
depth = 2
n_in = 1
n_hid = 1
input_kind = "identity"
output_kind = "affine"
residual_form = "full"

[train]
epochs = 3
batch_size = 20
loss = "mse"
batch_norm = false

[criterion]
kind = "monotone"
min_runs = {min_runs}
"""

EXPERIMENTS = get_project_root() / "data" / "config" / "experiments"
PRESET_CRITERIA = {
    "quad1d_mlp": "monotone",
    "circle_node_regime": "tunnel",
    "circle_balanced": "bounded_accurate",
    "xor_tunnel": "xor_signature",
}


def write_config(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def read_manifest(out):
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def run(*argv):
    return app.main([str(a) for a in argv])


class TestGradcheck:
    def test_small_sweep_passes(self, tmp_path):
        config = write_config(tmp_path, "g.toml", "cases = 20\nmax_depth = 3\n")
        out = tmp_path / "out"
        assert run("gradcheck", "--config", config, "--out", out, "--seed", 3) == 0
        manifest = read_manifest(out)
        assert manifest["status"] == "ok"
        assert manifest["artifacts"] == ["gradcheck.csv"]
        assert manifest["seeds"] == [3]
        frame = pd.read_csv(out / "gradcheck.csv")
        assert len(frame) == 20
        assert frame["pass"].all()

    def test_wrong_gradient_exits_with_property_violation(self, tmp_path, monkeypatch):
        monkeypatch.setattr(gradcheck, "input_gradient",
                            lambda model, x: SimpleNamespace(grad=np.full(model.n_in, 1e3)))
        config = write_config(tmp_path, "g.toml", "cases = 5\n")
        out = tmp_path / "out"
        assert run("gradcheck", "--config", config, "--out", out) == 3
        assert read_manifest(out)["status"] == "GRADIENT_MISMATCH"

    def test_unknown_config_key(self, tmp_path):
        config = write_config(tmp_path, "g.toml", "cases = 5\nmystery = 1\n")
        assert run("gradcheck", "--config", config, "--out", tmp_path / "out") == 2

    def test_missing_config_file(self, tmp_path):
        assert run("gradcheck", "--config", tmp_path / "nope.toml", "--out", tmp_path / "out") == 2

    def test_manifest_replays_the_configuration(self, tmp_path):
        config = write_config(tmp_path, "g.toml", "cases = 4\n")
        first, second = tmp_path / "a", tmp_path / "b"
        assert run("gradcheck", "--config", config, "--out", first) == 0
        assert run("gradcheck", "--config", first / "manifest.json", "--out", second) == 0
        assert read_manifest(first)["config_hash"] == read_manifest(second)["config_hash"]
        assert (first / "gradcheck.csv").read_bytes() == (second / "gradcheck.csv").read_bytes()


class TestRegime:
    def test_node_side_model(self, tmp_path):
        model_path = save_model(scalar_model(1.0, 0.1, [(1.0, 1.0, 0.0, 0.0)]), tmp_path / "model.json")
        out = tmp_path / "out"
        assert run("regime", "--model", model_path, "--out", out, "--search") == 0
        report = json.loads((out / "regime_report.json").read_text(encoding="utf-8"))
        assert report["verdict"] == "NoCriticalPointsNodeSide"
        search = json.loads((out / "critical_search.json").read_text(encoding="utf-8"))
        assert not search["found"]
        one_layer = json.loads((out / "one_layer.json").read_text(encoding="utf-8"))
        assert one_layer["no_critical_point"]
        assert one_layer["alpha"] == pytest.approx(0.1)
        rank = json.loads((out / "rank_check.json").read_text(encoding="utf-8"))
        assert rank["all_full_rank"]
        assert rank["points"] == 201
        assert rank["min_sigma_min_D"] > 0

    def test_constructed_critical_point_is_found(self, tmp_path):
        model = assemble_critical_model(construct_critical_point(1.0, -2.0, 0.25))
        model_path = save_model(model, tmp_path / "critical.json")
        out = tmp_path / "out"
        assert run("regime", "--model", model_path, "--out", out, "--search") == 0
        search = json.loads((out / "critical_search.json").read_text(encoding="utf-8"))
        assert search["found"]
        assert any(abs(c[0] - 0.25) < 1e-6 for c in search["candidates"])
        one_layer = json.loads((out / "one_layer.json").read_text(encoding="utf-8"))
        assert not one_layer["no_critical_point"]
        assert one_layer["reason"] == "critical_point_possible"

    def test_deep_model_skips_single_layer_verdict(self, tmp_path):
        model = random_model(np.random.default_rng(3), n_in=2, n_hid=2, depth=2, eps=1.0, delta=0.5)
        out = tmp_path / "out"
        assert run("regime", "--model", save_model(model, tmp_path / "m.json"), "--out", out) == 0
        assert read_manifest(out)["artifacts"] == ["rank_check.json", "regime_report.json"]

    def test_augmented_model_exits_5(self, tmp_path):
        model = random_model(np.random.default_rng(0), n_in=1, n_hid=2, depth=2, eps=1.0, delta=1.0)
        model_path = save_model(model, tmp_path / "aug.json")
        out = tmp_path / "out"
        assert run("regime", "--model", model_path, "--out", out) == 5
        assert read_manifest(out)["status"] == "AUGMENTED_MODEL"

    def test_missing_model(self, tmp_path):
        assert run("regime", "--out", tmp_path / "out") == 2


class TestBounds:
    def test_small_euler_sweep(self, tmp_path):
        config = write_config(tmp_path, "b.toml", "kind = 'euler'\ninstances = 2\ndepths = [5, 10]\n")
        out = tmp_path / "out"
        assert run("bounds", "--config", config, "--out", out) == 0
        frame = pd.read_csv(out / "bounds_euler.csv")
        assert len(frame) == 4
        assert list(frame.columns)[0] == "instance"
        assert frame["pass"].all()

    def test_small_mlp_sweep(self, tmp_path):
        config = write_config(tmp_path, "b.toml", "instances = 2\neps_values = [0.1, 0.01]\n")
        out = tmp_path / "out"
        assert run("bounds", "--config", config, "--kind", "mlp", "--out", out) == 0
        frame = pd.read_csv(out / "bounds_mlp.csv")
        assert len(frame) == 4
        for column in ("crossing_applicable", "crossing_pass", "reference_certified"):
            assert column in frame.columns
        instances = pd.read_csv(out / "bounds_mlp_instances.csv")
        assert list(instances["instance"]) == [0, 1]
        assert (instances["eps_spread"] < 0.15).all()

    def test_mlp_spread_above_threshold_fails(self, tmp_path, capsys):
        config = write_config(tmp_path, "b.toml", "kind = 'mlp'\ninstances = 1\ndepth = 3\n"
                                                  "eps_values = [0.1, 0.01]\nmax_eps_spread = 0.0\n")
        out = tmp_path / "out"
        assert run("bounds", "--config", config, "--out", out) == 3
        assert "max eps spread" in capsys.readouterr().out
        assert (out / "bounds_mlp_instances.csv").exists()

    def test_euler_order_outside_range_fails(self, tmp_path):
        config = write_config(tmp_path, "b.toml", "kind = 'euler'\ninstances = 1\ndepths = [5, 10, 20]\n"
                                                  "order_ratio_range = [5.0, 6.0]\n")
        out = tmp_path / "out"
        assert run("bounds", "--config", config, "--out", out) == 3
        instances = pd.read_csv(out / "bounds_euler_instances.csv")
        assert not instances["order_in_range"].any()

    def test_bad_order_range_is_rejected(self, tmp_path):
        config = write_config(tmp_path, "b.toml", "order_ratio_range = [2.4, 1.6]\n")
        assert run("bounds", "--config", config, "--out", tmp_path / "out") == 2

    def test_eps_of_one_is_rejected(self, tmp_path):
        config = write_config(tmp_path, "b.toml", "kind = 'mlp'\ninstances = 1\neps_values = [1.0]\n")
        assert run("bounds", "--config", config, "--out", tmp_path / "out") == 2


class TestLevelset:
    def test_two_dimensional_model(self, tmp_path):
        model = random_model(np.random.default_rng(1), n_in=2, n_hid=2, depth=2, eps=1.0, delta=0.5)
        model_path = save_model(model, tmp_path / "m.json")
        config = write_config(tmp_path, "l.toml", "level = 0.0\n[domain]\nlo = [-1.0, -1.0]\nhi = [1.0, 1.0]\n"
                                                  "resolution = 41\n")
        out = tmp_path / "out"
        assert run("levelset", "--config", config, "--model", model_path, "--out", out) == 0
        assert read_manifest(out)["artifacts"] == ["levelset.svg", "levelset_checks.json", "levelset_report.json"]
        assert (out / "levelset.svg").read_text(encoding="utf-8").startswith("<svg")
        checks = json.loads((out / "levelset_checks.json").read_text(encoding="utf-8"))
        assert isinstance(checks["xor_signature"], bool)
        assert checks["tunnel_1d"] is None
        assert checks["crossings"] is None

    def test_monotone_one_dimensional_model_has_a_tunnel(self, tmp_path):
        model_path = save_model(scalar_model(1.0, 0.1, [(1.0, 1.0, 0.0, 0.0)]), tmp_path / "m.json")
        config = write_config(tmp_path, "l.toml", "level = 0.0\n[domain]\nlo = [-1.0]\nhi = [1.0]\n"
                                                  "resolution = 101\n")
        out = tmp_path / "out"
        assert run("levelset", "--config", config, "--model", model_path, "--out", out) == 0
        checks = json.loads((out / "levelset_checks.json").read_text(encoding="utf-8"))
        assert checks["tunnel_1d"] is True
        assert checks["xor_signature"] is None

    def test_levels_cross_against_a_reference(self, tmp_path):
        model_path = save_model(scalar_model(1.0, 0.1, [(1.0, 1.0, 0.0, 0.0)]), tmp_path / "m.json")
        config = write_config(tmp_path, "l.toml", "level = 0.0\n[domain]\nlo = [-1.0]\nhi = [1.0]\n"
                                                  "resolution = 101\n")
        out = tmp_path / "out"
        assert run("levelset", "--config", config, "--model", model_path, "--reference", model_path,
                   "--out", out) == 0
        crossings = json.loads((out / "levelset_checks.json").read_text(encoding="utf-8"))["crossings"]
        assert crossings["applicable"]
        assert crossings["mu"] == 0.0
        assert crossings["intersects"] and all(crossings["intersects"])

    def test_large_mu_is_not_applicable(self, tmp_path):
        model_path = save_model(scalar_model(1.0, 0.1, [(1.0, 1.0, 0.0, 0.0)]), tmp_path / "m.json")
        config = write_config(tmp_path, "l.toml", "level = 0.0\n[domain]\nlo = [-1.0]\nhi = [1.0]\n")
        out = tmp_path / "out"
        assert run("levelset", "--config", config, "--model", model_path, "--reference", model_path,
                   "--mu", 5.0, "--out", out) == 0
        crossings = json.loads((out / "levelset_checks.json").read_text(encoding="utf-8"))["crossings"]
        assert not crossings["applicable"]

    def test_three_dimensional_model_is_evaluation_only(self, tmp_path):
        model = random_model(np.random.default_rng(2), n_in=3, n_hid=2, depth=1, eps=1.0, delta=0.5)
        model_path = save_model(model, tmp_path / "m.json")
        config = write_config(tmp_path, "l.toml", "[domain]\nlo = [-1.0, -1.0, -1.0]\nhi = [1.0, 1.0, 1.0]\n"
                                                  "resolution = 9\n")
        out = tmp_path / "out"
        assert run("levelset", "--config", config, "--model", model_path, "--out", out) == 0
        assert read_manifest(out)["artifacts"] == ["field_summary.json"]
        summary = json.loads((out / "field_summary.json").read_text(encoding="utf-8"))
        assert summary["dim"] == 3
        assert summary["points"] == 9 ** 3


class TestTrain:
    def test_small_run(self, tmp_path):
        config = write_config(tmp_path, "t.toml", TRAIN_CONFIG)
        out = tmp_path / "out"
        assert run("train", "--config", config, "--out", out, "--seed", 7) == 0
        manifest = read_manifest(out)
        assert len(manifest["seeds"]) == 2
        summary = pd.read_csv(out / "summary.csv")
        assert len(summary) == 2
        for seed in manifest["seeds"]:
            assert (out / f"seed_{seed}" / "model.json").exists()
            assert (out / f"seed_{seed}" / "levelset.svg").exists()
            assert len(pd.read_csv(out / f"seed_{seed}" / "record.csv")) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        config = write_config(tmp_path, "t.toml", TRAIN_CONFIG)
        first, second = tmp_path / "a", tmp_path / "b"
        assert run("train", "--config", config, "--out", first) == 0
        assert run("train", "--config", config, "--out", second) == 0
        csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
        assert csvs
        for name in csvs:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_missing_skeleton(self, tmp_path):
        config = write_config(tmp_path, "t.toml", "runs = 1\n")
        assert run("train", "--config", config, "--out", tmp_path / "out") == 2

    def test_feed_forward_scalar_runs_are_monotone(self, tmp_path):
        config = write_config(tmp_path, "t.toml", MONOTONE_CONFIG.format(min_runs=2))
        out = tmp_path / "out"
        assert run("train", "--config", config, "--out", out) == 0
        criterion = json.loads((out / "criterion.json").read_text(encoding="utf-8"))
        assert criterion["passed"]
        assert criterion["satisfied"] == 2
        summary = pd.read_csv(out / "summary.csv")
        assert summary["monotone"].all()
        assert summary["tunnel_verdict"].notna().all()

    def test_missed_criterion_exits_3_after_writing_results(self, tmp_path):
        config = write_config(tmp_path, "t.toml", MONOTONE_CONFIG.format(min_runs=3))
        out = tmp_path / "out"
        assert run("train", "--config", config, "--out", out) == 3
        assert read_manifest(out)["status"] == "CRITERION_MISSED"
        criterion = json.loads((out / "criterion.json").read_text(encoding="utf-8"))
        assert not criterion["passed"]
        assert len(pd.read_csv(out / "summary.csv")) == 2


class TestExperimentPresets:
    @pytest.mark.parametrize("preset", sorted(EXPERIMENTS.glob("*.toml")), ids=lambda p: p.stem)
    def test_preset_validates_with_ten_runs(self, preset):
        config = load_config("train", preset)
        assert config.runs == 10
        if preset.stem in PRESET_CRITERIA:
            assert config.criterion.kind == PRESET_CRITERIA[preset.stem]

    def test_tunnel_preset_settings(self):
        config = load_config("train", EXPERIMENTS / "xor_tunnel.toml")
        assert config.skeleton.eps == 0.1
        assert config.skeleton.delta == 1.0
        assert config.skeleton.depth == 6
        assert config.dataset.kind.value == "Xor2D"

    @pytest.mark.slow
    @pytest.mark.parametrize("name", sorted(PRESET_CRITERIA))
    def test_preset_meets_its_criterion(self, tmp_path, name):
        out = tmp_path / name
        assert run("train", "--config", EXPERIMENTS / f"{name}.toml", "--out", out) == 0
        criterion = json.loads((out / "criterion.json").read_text(encoding="utf-8"))
        assert criterion["kind"] == PRESET_CRITERIA[name]
        assert criterion["passed"]
        assert criterion["runs"] == 10


@pytest.mark.slow
def test_default_gradcheck_corpus(tmp_path):
    assert run("gradcheck", "--out", tmp_path / "out") == 0
