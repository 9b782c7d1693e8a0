"""Run configuration files and the command line."""

import json

import numpy as np
import pytest

from spikederain.cli import main
from spikederain.config import ConfigError, RunConfig, load_run_config, run_config_from_dict, save_run_config
from spikederain.data import load_image, save_image

TINY = {
    "network": {"base_channels": 4, "refine_blocks": 1, "timesteps": 2},
    "train": {"iterations": 3, "log_interval": 1, "eval_interval": 2, "patch_size": 16},
    "data": {"count": 4, "size": 16, "test_count": 2},
}


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = run_config_from_dict({**TINY, "neuron": {"beta": 0.25}, "vlif": {"r": 2, "patch_order": "column_major"}})
        save_run_config(tmp_path / "c.json", cfg)
        back = load_run_config(tmp_path / "c.json")
        assert back == cfg
        assert back.neuron.beta == 0.25 and back.network.patch_order == "column_major"

    def test_defaults(self):
        assert run_config_from_dict({}) == RunConfig()

    def test_with_seed_pins_everything(self):
        cfg = RunConfig().with_seed(7)
        assert cfg.network.seed == cfg.train.seed == cfg.rain.seed == cfg.data.seed == 7

    @pytest.mark.parametrize(
        "doc, match",
        [
            ({"netwrk": {}}, "unknown section"),
            ({"network": {"depth": 3}}, "allowed"),
            ({"vlif": {"beta": 1}}, "accepts only"),
            ({"network": {"timesteps": 0}}, "timesteps"),
            ({"train": {"lr_schedule": "step"}}, "cosine"),
            ({"data": []}, "object"),
        ],
    )
    def test_rejects(self, doc, match):
        with pytest.raises(ConfigError, match=match):
            run_config_from_dict(doc)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "missing.json")
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_run_config(tmp_path / "bad.json")


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


class TestCli:
    def test_usage_errors_exit_2(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["no-such-command"])
        assert e.value.code == 2
        with pytest.raises(SystemExit) as e:
            main(["infer"])
        assert e.value.code == 2

    def test_bad_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"network": {"depth": 1}}))
        assert main(["analyze-neuron", "--config", str(bad)]) == 2
        assert "unknown key" in capsys.readouterr().err

    def test_missing_checkpoint_exit_2(self, tmp_path, capsys):
        assert main(["eval", "--checkpoint", str(tmp_path / "none.ckpt")]) == 2

    def test_decay_report(self, tmp_path, capsys):
        assert main(["analyze-neuron", "--experiment", "decay", "--n", "16", "--out", str(tmp_path)]) == 0
        printed = last_json(capsys)
        saved = json.loads((tmp_path / "decay_report.json").read_text())
        assert printed == saved
        assert {"lif_rate", "vlif_rate", "ratio", "low_bucket", "buckets"} <= set(saved)

    def test_saturation_report(self, tmp_path, capsys):
        assert main(["analyze-neuron", "--experiment", "saturation", "--n", "32", "--t-max", "3", "--out", str(tmp_path)]) == 0
        rep = last_json(capsys)
        assert rep["saturated"] and len(rep["norms"]) == 3
        assert load_image(tmp_path / "spectrum_masked.pgm").shape == (32, 32)

    def test_profile_energy_untrained(self, capsys):
        assert main(["profile-energy", "--size", "16", "--seed", "1"]) == 0
        rep = last_json(capsys)
        assert rep["total_uj"] == pytest.approx(rep["mac_uj"] + rep["sop_uj"] + rep["sign_uj"])

    def test_profile_energy_bad_size(self, capsys):
        assert main(["profile-energy", "--size", "12"]) == 2

    def test_pipeline(self, tmp_path, tiny_config, capsys):
        data, run = tmp_path / "data", tmp_path / "run"
        assert main(["gen-data", "--config", tiny_config, "--out", str(data)]) == 0
        assert len(list((data / "train" / "rainy").iterdir())) == 2
        assert main(["train", "--config", tiny_config, "--data", str(data), "--out", str(run)]) == 0
        summary = last_json(capsys)
        assert summary["iterations"] == 3
        for name in ("config.json", "metrics.jsonl", "best.ckpt", "last.ckpt", "train_summary.json"):
            assert (run / name).is_file(), name
        assert len((run / "metrics.jsonl").read_text().splitlines()) == 3

        assert main(["eval", "--checkpoint", str(run / "last.ckpt"), "--data", str(data / "test")]) == 0
        ev = last_json(capsys)
        assert ev["neuron_variant"] == "hybrid" and np.isfinite(ev["psnr"])
        assert main(["eval", "--checkpoint", str(run / "last.ckpt"), "--data", str(data / "test"), "--neuron-variant", "lif"]) == 0
        assert last_json(capsys)["neuron_variant"] == "lif"

        # odd-sized input is padded for the network and cropped back
        img = np.random.default_rng(0).uniform(size=(13, 10, 3))
        save_image(tmp_path / "odd.ppm", img)
        assert main(["infer", "--checkpoint", str(run / "last.ckpt"), "--input", str(tmp_path / "odd.ppm"), "--reference", str(tmp_path / "odd.ppm")]) == 0
        rep = last_json(capsys)
        assert load_image(rep["output"]).shape == (13, 10, 3)
        assert "psnr" in rep

    def test_train_without_data_exit_2(self, tmp_path, tiny_config, capsys):
        assert main(["train", "--config", tiny_config, "--data", str(tmp_path), "--out", str(tmp_path / "r")]) == 2
        assert "no training pairs" in capsys.readouterr().err
