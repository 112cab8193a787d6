"""Integration tests for CLI commands."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from cape.autodiff import Tensor
from cape.cli.main import cli
from cape.detection import LossBreakdown
from cape.models.metrics import MetricsRecord
from cape.services import training
from cape.services.ablation import AblationTable
from cape.services.checkpoint import CheckpointService
from cape.services.config import ConfigService
from cape.services.robustness import RobustnessReport
from cape.services.training import TrainingService
from tests.conftest import make_tiny_config


@pytest.fixture
def runner() -> CliRunner:
    """Create a CLI test runner."""
    return CliRunner()


@pytest.fixture
def tiny_config_path(tmp_path: Path) -> Path:
    """The tiny configuration written as JSON."""
    path = tmp_path / "tiny.json"
    ConfigService().save(make_tiny_config(), path)
    return path


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Checkpoint directory of a two-step tiny training run."""
    run_dir = tmp_path_factory.mktemp("trained")
    TrainingService().train(make_tiny_config(optim={"steps": 2}), run_dir)
    return run_dir / "checkpoint"


class TestHelp:
    """Tests for command discovery."""

    def test_lists_commands(self, runner: CliRunner) -> None:
        """The group help should list every verb."""
        result = runner.invoke(cli, ["--help"])

        assert result.exit_code == 0
        for verb in ("train", "eval", "ablate", "robustness", "dump-attn", "gen-data"):
            assert verb in result.output

    @pytest.mark.parametrize(
        "verb", ["train", "eval", "ablate", "robustness", "dump-attn", "gen-data"]
    )
    def test_verb_help(self, runner: CliRunner, verb: str) -> None:
        """Every verb should accept --help and document --config."""
        result = runner.invoke(cli, [verb, "--help"])

        assert result.exit_code == 0
        assert "--config" in result.output


class TestTrainCommand:
    """Tests for cape train."""

    def test_train_writes_run(
        self, runner: CliRunner, tiny_config_path: Path, tmp_path: Path
    ) -> None:
        """train should write the resolved config, metrics and a checkpoint."""
        out = tmp_path / "run"

        result = runner.invoke(
            cli, ["train", "-c", str(tiny_config_path), "--steps", "2", "-o", str(out)]
        )

        assert result.exit_code == 0, result.output
        assert "Checkpoint:" in result.output
        assert len((out / "metrics.jsonl").read_text().splitlines()) == 2
        saved = ConfigService().load(out / "config.json")
        assert saved.optim.steps == 2
        assert CheckpointService().load(out / "checkpoint").step == 2

    def test_train_seed_override(
        self, runner: CliRunner, tiny_config_path: Path, tmp_path: Path
    ) -> None:
        """--seed should replace the experiment seed."""
        out = tmp_path / "run"

        result = runner.invoke(
            cli,
            ["train", "-c", str(tiny_config_path), "--steps", "0", "--seed", "5", "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        assert ConfigService().load(out / "config.json").seed == 5

    def test_train_resume(self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path) -> None:
        """--resume should continue from the checkpoint's step with its config."""
        out = tmp_path / "run"

        result = runner.invoke(
            cli, ["train", "--resume", str(tiny_checkpoint), "--steps", "3", "-o", str(out)]
        )

        assert result.exit_code == 0, result.output
        lines = (out / "metrics.jsonl").read_text().splitlines()
        assert [json.loads(line)["step"] for line in lines] == [2]
        assert ConfigService().load(out / "config.json").name == "tiny"
        assert CheckpointService().load(out / "checkpoint").step == 3

    def test_train_resume_past_end(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """Resuming with fewer steps than the checkpoint has should exit with code 1."""
        result = runner.invoke(
            cli,
            ["train", "--resume", str(tiny_checkpoint), "--steps", "1", "-o", str(tmp_path / "r")],
        )

        assert result.exit_code == 1
        assert "Error:" in result.output

    def test_train_invalid_config(self, runner: CliRunner, tmp_path: Path) -> None:
        """An invalid config file should exit with code 1."""
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"model": {"channels": 0}}))

        result = runner.invoke(cli, ["train", "-c", str(bad), "-o", str(tmp_path / "run")])

        assert result.exit_code == 1
        assert "Error:" in result.output

    def test_train_missing_config(self, runner: CliRunner, tmp_path: Path) -> None:
        """A missing config path should be a usage error."""
        result = runner.invoke(cli, ["train", "-c", str(tmp_path / "nope.json")])

        assert result.exit_code == 2

    def test_train_divergence_exit_code(
        self,
        runner: CliRunner,
        tiny_config_path: Path,
        tmp_path: Path,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """A diverged run should exit with code 2 and leave a dump."""
        monkeypatch.setattr(
            training,
            "sample_loss",
            lambda *_: LossBreakdown(Tensor(np.array(np.nan)), {"total": math.nan}),
        )
        out = tmp_path / "run"

        result = runner.invoke(cli, ["train", "-c", str(tiny_config_path), "-o", str(out)])

        assert result.exit_code == 2
        assert "Diverged" in result.output
        assert (out / "divergence.json").is_file()


class TestEvalCommand:
    """Tests for cape eval."""

    def test_eval_writes_metrics(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """eval should score the checkpoint's eval split."""
        out = tmp_path / "eval"

        result = runner.invoke(cli, ["eval", "-k", str(tiny_checkpoint), "-o", str(out)])

        assert result.exit_code == 0, result.output
        record = MetricsRecord.model_validate_json((out / "metrics.json").read_text())
        assert record.split == "eval"
        assert record.num_scenes == 2
        assert set(record.metrics.ap) == {"0.5", "1.0", "2.0", "4.0"}
        assert 0.0 <= record.metrics.mean_ap <= 1.0

    def test_eval_train_split(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """--split train should use the training seed range."""
        out = tmp_path / "eval"

        result = runner.invoke(
            cli, ["eval", "-k", str(tiny_checkpoint), "--split", "train", "-o", str(out)]
        )

        assert result.exit_code == 0, result.output
        record = MetricsRecord.model_validate_json((out / "metrics.json").read_text())
        assert record.split == "train"
        assert record.num_scenes == 6

    def test_eval_mismatched_config(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """A config with a different model section should exit with code 1."""
        other = tmp_path / "other.json"
        ConfigService().save(make_tiny_config(model={"bilateral": False}), other)

        result = runner.invoke(
            cli, ["eval", "-k", str(tiny_checkpoint), "-c", str(other), "-o", str(tmp_path)]
        )

        assert result.exit_code == 1
        assert not (tmp_path / "metrics.json").exists()

    def test_eval_missing_checkpoint(self, runner: CliRunner, tmp_path: Path) -> None:
        """A checkpoint directory without a manifest should exit with code 1."""
        empty = tmp_path / "empty"
        empty.mkdir()

        result = runner.invoke(cli, ["eval", "-k", str(empty), "-o", str(tmp_path)])

        assert result.exit_code == 1


class TestGenDataCommand:
    """Tests for cape gen-data."""

    def test_gen_data_writes_index(
        self, runner: CliRunner, tiny_config_path: Path, tmp_path: Path
    ) -> None:
        """gen-data should write the requested scenes and an index."""
        out = tmp_path / "data"

        result = runner.invoke(
            cli,
            ["gen-data", "-c", str(tiny_config_path), "--count", "2", "--workers", "1",
             "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        index = json.loads((out / "index.json").read_text())
        seeds = [entry["seed"] for entry in index["scenes"]]
        assert seeds == [1_000_000, 1_000_001]
        for entry in index["scenes"]:
            assert (out / entry["file"]).is_file()

    def test_gen_data_seed_offset(
        self, runner: CliRunner, tiny_config_path: Path, tmp_path: Path
    ) -> None:
        """--seed should start the scenes at that seed."""
        out = tmp_path / "data"

        result = runner.invoke(
            cli,
            ["gen-data", "-c", str(tiny_config_path), "--split", "train", "--seed", "40",
             "--count", "3", "--workers", "1", "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        index = json.loads((out / "index.json").read_text())
        assert [entry["seed"] for entry in index["scenes"]] == [40, 41, 42]


class TestDumpAttnCommand:
    """Tests for cape dump-attn."""

    def test_dump_writes_manifest(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """dump-attn should write a manifest and one CSV per layer, head, view and kind."""
        out = tmp_path / "attn"

        result = runner.invoke(
            cli, ["dump-attn", "-k", str(tiny_checkpoint), "-q", "0,1", "-o", str(out)]
        )

        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["query_ids"] == [0, 1]
        assert manifest["num_layers"] == 1
        assert set(manifest["kinds"]) == {"overall", "softmax", "local", "global"}
        for entry in manifest["files"]:
            assert (out / entry["file"]).is_file()
        assert len(manifest["files"]) == 4 * 2 * 2
        assert (out / "layer0_head1_view1_local.csv").is_file()

    def test_dump_scene_file(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """--scene should dump the maps of a saved scene."""
        data = tmp_path / "data"
        config_path = tmp_path / "tiny.json"
        ConfigService().save(make_tiny_config(), config_path)
        runner.invoke(
            cli,
            ["gen-data", "-c", str(config_path), "--count", "1", "--seed", "9", "--workers",
             "1", "-o", str(data)],
        )
        out = tmp_path / "attn"

        result = runner.invoke(
            cli,
            ["dump-attn", "-k", str(tiny_checkpoint), "--scene",
             str(data / "scene_00000009.json"), "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        assert json.loads((out / "manifest.json").read_text())["scene_seed"] == 9

    def test_dump_invalid_query(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """A query id outside the query set should exit with code 1."""
        result = runner.invoke(
            cli, ["dump-attn", "-k", str(tiny_checkpoint), "-q", "4", "-o", str(tmp_path)]
        )

        assert result.exit_code == 1
        assert not (tmp_path / "manifest.json").exists()


class TestRobustnessCommand:
    """Tests for cape robustness."""

    def test_robustness_report(
        self, runner: CliRunner, tiny_checkpoint: Path, tiny_config_path: Path, tmp_path: Path
    ) -> None:
        """robustness should write one curve per checkpoint label."""
        out = tmp_path / "robust"

        result = runner.invoke(
            cli,
            ["robustness", "-c", str(tiny_config_path), "-k", f"tiny={tiny_checkpoint}",
             "--levels", "0,4", "--trials", "1", "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        report = RobustnessReport.model_validate_json((out / "robustness.json").read_text())
        assert [c.label for c in report.curves] == ["tiny"]
        assert [lv.r_max_deg for lv in report.curves[0].levels] == [0.0, 4.0]

    def test_robustness_bad_checkpoint_format(
        self, runner: CliRunner, tiny_checkpoint: Path, tmp_path: Path
    ) -> None:
        """A -k value without LABEL= should be rejected."""
        result = runner.invoke(
            cli, ["robustness", "-k", str(tiny_checkpoint), "-o", str(tmp_path)]
        )

        assert result.exit_code == 2
        assert "LABEL=DIR" in result.output


class TestAblateCommand:
    """Tests for cape ablate."""

    @pytest.fixture
    def quick_config_path(self, tmp_path: Path) -> Path:
        """Tiny config with one training step and one eval scene."""
        path = tmp_path / "quick.json"
        config = make_tiny_config(
            optim={"steps": 1}, dataset={"train_scenes": 2, "eval_scenes": 1}
        )
        ConfigService().save(config, path)
        return path

    def test_ablate_table(
        self, runner: CliRunner, quick_config_path: Path, tmp_path: Path
    ) -> None:
        """ablate should write every row of the table."""
        out = tmp_path / "ablate"

        result = runner.invoke(
            cli,
            ["ablate", "-c", str(quick_config_path), "-t", "6", "--seeds", "0", "--workers",
             "1", "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        table = AblationTable.model_validate_json((out / "table6.json").read_text())
        assert [row.row for row in table.rows] == ["a", "b", "c"]
        assert all(row.status == "ok" for row in table.rows)
        assert all(len(row.seeds) == 1 for row in table.rows)

    def test_ablate_divergence_exit_code(
        self,
        runner: CliRunner,
        quick_config_path: Path,
        tmp_path: Path,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """Diverged rows should be recorded and the command should exit with code 2."""
        monkeypatch.setattr(
            training,
            "sample_loss",
            lambda *_: LossBreakdown(Tensor(np.array(np.nan)), {"total": math.nan}),
        )
        monkeypatch.setenv("CAPE_THREADS", "1")
        out = tmp_path / "ablate"

        result = runner.invoke(
            cli,
            ["ablate", "-c", str(quick_config_path), "-t", "4", "--seeds", "0", "-o", str(out)],
        )

        assert result.exit_code == 2
        table = AblationTable.model_validate_json((out / "table4.json").read_text())
        assert all(row.diverged for row in table.rows)
        assert table.row("a").seeds[0].diverged_step == 0

    def test_ablate_unknown_table(self, runner: CliRunner, quick_config_path: Path) -> None:
        """An unknown table id should be a usage error."""
        result = runner.invoke(cli, ["ablate", "-c", str(quick_config_path), "-t", "9"])

        assert result.exit_code == 2
