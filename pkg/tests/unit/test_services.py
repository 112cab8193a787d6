"""Unit tests for checkpoints, optimization, datasets and experiment services."""

import json
from pathlib import Path

import numpy as np
import pytest

from cape.autodiff import Tensor
from cape.exceptions import (
    CheckpointError,
    ConfigMismatchError,
    EmptyDatasetError,
    InvalidQueryIdError,
)
from cape.layers import CapeDetector
from cape.models.config import ExperimentConfig, OptimConfig
from cape.models.scene import SceneSample
from cape.scenegen import generate_scene, load_scene
from cape.services import (
    ABLATION_TABLES,
    AdamOptimizer,
    AttentionDumpService,
    Checkpoint,
    CheckpointService,
    EvaluationService,
    RobustnessService,
    SceneDataset,
    ablation_rows,
    clip_grad_norm,
    cosine_lr,
    perturb_sample,
    write_dataset,
)
from cape.services.ablation import AblationRow, SeedResult, summarize_row
from cape.services.evaluation import split_seeds
from cape.services.workers import THREADS_ENV, run_parallel, worker_count
from tests.conftest import make_tiny_config


@pytest.fixture
def checkpoint(tiny_detector: CapeDetector) -> Checkpoint:
    """Checkpoint of a freshly initialized tiny detector."""
    return Checkpoint.from_detector(tiny_detector, step=0)


class TestCheckpoint:
    """Tests for checkpoint persistence."""

    def test_round_trip(self, checkpoint: Checkpoint, tmp_path: Path) -> None:
        """A saved checkpoint should load back with identical parameters."""
        service = CheckpointService()
        service.save(checkpoint, tmp_path / "ckpt")
        loaded = service.load(tmp_path / "ckpt")
        assert loaded.config == checkpoint.config
        assert loaded.config_hash == checkpoint.config_hash
        assert loaded.normalizer == checkpoint.normalizer
        assert sorted(loaded.params) == sorted(checkpoint.params)
        for name, value in checkpoint.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_build_detector_restores_outputs(
        self, checkpoint: Checkpoint, tiny_detector: CapeDetector, tiny_sample: SceneSample
    ) -> None:
        """A detector rebuilt from a checkpoint should give identical predictions."""
        rebuilt = checkpoint.build_detector()
        expected = tiny_detector(tiny_sample.current).current[-1].logits.data
        np.testing.assert_array_equal(rebuilt(tiny_sample.current).current[-1].logits.data,
                                      expected)

    def test_config_mismatch(self, checkpoint: Checkpoint) -> None:
        """A config with different model sections should be refused."""
        with pytest.raises(ConfigMismatchError):
            checkpoint.require_compatible(make_tiny_config(model={"bilateral": False}))

    def test_missing_directory(self, tmp_path: Path) -> None:
        """Loading from an empty directory should raise CheckpointError."""
        with pytest.raises(CheckpointError):
            CheckpointService().load(tmp_path)

    def test_tampered_manifest(self, checkpoint: Checkpoint, tmp_path: Path) -> None:
        """A manifest whose hash does not match its config should be refused."""
        service = CheckpointService()
        service.save(checkpoint, tmp_path)
        manifest = json.loads((tmp_path / "checkpoint.json").read_text())
        manifest["config_hash"] = "0" * 64
        (tmp_path / "checkpoint.json").write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError):
            service.load(tmp_path)


class TestOptimizer:
    """Tests for the optimizer utilities."""

    def test_cosine_schedule_endpoints(self) -> None:
        """The step size should start at lr and end at lr * min_lr_ratio."""
        config = OptimConfig(steps=11, lr=1.0, min_lr_ratio=0.1)
        assert cosine_lr(0, config) == pytest.approx(1.0)
        assert cosine_lr(5, config) == pytest.approx(0.55)
        assert cosine_lr(10, config) == pytest.approx(0.1)

    def test_clip_grad_norm(self) -> None:
        """Gradients above the cap should be scaled to it; the old norm is returned."""
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([3.0, 4.0])
        assert clip_grad_norm([p], 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(p.grad, [0.6, 0.8])

    def test_clip_leaves_small_gradients(self) -> None:
        """Gradients below the cap should be untouched."""
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([0.3, 0.4])
        clip_grad_norm([p], 1.0)
        np.testing.assert_array_equal(p.grad, [0.3, 0.4])

    def test_adam_first_step(self) -> None:
        """The first Adam step should move each coordinate by about lr against its gradient."""
        p = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        p.grad = np.array([0.5, -2.0])
        optimizer = AdamOptimizer([p], OptimConfig(weight_decay=0.0))
        optimizer.step(0.1)
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)
        optimizer.zero_grad()
        assert p.grad is None

    def test_adam_minimizes_quadratic(self) -> None:
        """Adam should drive a quadratic toward its minimum."""
        p = Tensor(np.array([3.0]), requires_grad=True)
        optimizer = AdamOptimizer([p], OptimConfig(weight_decay=0.0))
        for _ in range(300):
            p.grad = 2.0 * (p.data - 1.0)
            optimizer.step(0.05)
        assert abs(p.data[0] - 1.0) < 0.1

    def test_adam_state_round_trip(self) -> None:
        """A restored optimizer should take the same next step as the original."""
        config = OptimConfig(weight_decay=0.0)
        a = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        b = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        original = AdamOptimizer([a], config)
        a.grad = np.array([0.5, -2.0])
        original.step(0.1)
        b.data[...] = a.data
        restored = AdamOptimizer([b], config)
        restored.load_state_dict(["w"], original.state_dict(["w"]))

        a.grad = np.array([0.25, 1.0])
        b.grad = np.array([0.25, 1.0])
        original.step(0.1)
        restored.step(0.1)

        np.testing.assert_array_equal(a.data, b.data)

    def test_adam_state_mismatch(self) -> None:
        """State for other parameter names should raise ValueError."""
        p = Tensor(np.zeros(2), requires_grad=True)
        optimizer = AdamOptimizer([p], OptimConfig())
        with pytest.raises(ValueError):
            optimizer.load_state_dict(["other"], optimizer.state_dict(["w"]))


class TestWorkers:
    """Tests for process-level parallelism."""

    def test_env_caps_workers(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """CAPE_THREADS should cap the worker count."""
        monkeypatch.setenv(THREADS_ENV, "1")
        assert worker_count(8) == 1

    def test_bad_env_is_ignored(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A non-integer CAPE_THREADS should fall back to the CPU count."""
        monkeypatch.setenv(THREADS_ENV, "many")
        assert worker_count(1) == 1

    def test_results_independent_of_workers(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Results should keep job order whatever the worker count."""
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert run_parallel(abs, [-2, 3, -5, 0], 1) == [2, 3, 5, 0]
        assert run_parallel(abs, [-2, 3, -5, 0], 2) == [2, 3, 5, 0]


class TestDataset:
    """Tests for seed-addressed datasets."""

    def test_cache_returns_same_object(self, tiny_config: ExperimentConfig) -> None:
        """A cached dataset should return the same sample twice."""
        dataset = SceneDataset(tiny_config.scene, [1, 2])
        assert dataset.get(1) is dataset.get(1)
        assert len(dataset) == 2

    def test_uncached_matches_generator(self, tiny_config: ExperimentConfig) -> None:
        """Uncached samples should equal freshly generated ones."""
        dataset = SceneDataset(tiny_config.scene, [4], cache=False)
        assert next(iter(dataset)) == generate_scene(tiny_config.scene, 4)

    def test_write_dataset(self, tiny_config: ExperimentConfig, tmp_path: Path) -> None:
        """write_dataset should write one loadable scene per seed and an index."""
        index_path = write_dataset(tiny_config.scene, [3, 10], tmp_path, workers=1)
        index = json.loads(index_path.read_text())
        assert [s["seed"] for s in index["scenes"]] == [3, 10]
        assert index["scenes"][0]["file"] == "scene_00000003.json"
        loaded = load_scene(tmp_path / "scene_00000010.json")
        assert loaded == generate_scene(tiny_config.scene, 10)


class TestEvaluation:
    """Tests for EvaluationService."""

    def test_record_fields(self, checkpoint: Checkpoint) -> None:
        """An evaluation record should carry the hash, split and scene count."""
        record = EvaluationService().evaluate(checkpoint, split="eval")
        assert record.config_hash == checkpoint.config_hash
        assert record.split == "eval"
        assert record.num_scenes == 2
        assert 0.0 <= record.metrics.mean_ap <= 1.0
        assert set(record.metrics.ap) == {"0.5", "1.0", "2.0", "4.0"}

    def test_explicit_seeds(self, checkpoint: Checkpoint) -> None:
        """Explicit seeds should override the split."""
        record = EvaluationService().evaluate(checkpoint, seeds=[5])
        assert record.split == "custom"
        assert record.num_scenes == 1

    def test_deterministic(self, checkpoint: Checkpoint) -> None:
        """Evaluating twice should give identical metrics."""
        service = EvaluationService()
        assert service.evaluate(checkpoint).metrics == service.evaluate(checkpoint).metrics

    def test_empty_split(self, checkpoint: Checkpoint) -> None:
        """An empty seed list should raise EmptyDatasetError."""
        with pytest.raises(EmptyDatasetError):
            EvaluationService().evaluate(checkpoint, seeds=[])

    def test_noise_needs_generator(self, checkpoint: Checkpoint) -> None:
        """Noisy evaluation without a generator should be refused."""
        with pytest.raises(ValueError):
            EvaluationService().evaluate(checkpoint, r_max_deg=2.0)

    def test_unknown_split(self, tiny_config: ExperimentConfig) -> None:
        """Unknown split names should be refused."""
        with pytest.raises(ValueError):
            split_seeds(tiny_config, "test")

    def test_perturb_sample_keeps_content(self, tiny_sample: SceneSample) -> None:
        """Perturbation should change extrinsics only."""
        noisy = perturb_sample(tiny_sample, 4.0, np.random.default_rng(0))
        np.testing.assert_array_equal(noisy.current.features, tiny_sample.current.features)
        assert noisy.current.boxes == tiny_sample.current.boxes
        assert noisy.current.rig != tiny_sample.current.rig
        assert perturb_sample(tiny_sample, 0.0, np.random.default_rng(0)) is tiny_sample


class TestRobustness:
    """Tests for RobustnessService."""

    def test_sweep_shape(self, checkpoint: Checkpoint) -> None:
        """A sweep should report every level and a zero drop without noise."""
        report = RobustnessService().sweep(
            [("tiny", checkpoint)], levels=(0.0, 4.0), trials=2, seeds=[1, 2]
        )
        (curve,) = report.curves
        assert [level.r_max_deg for level in curve.levels] == [0.0, 4.0]
        assert curve.drop_at(0.0) == 0.0
        assert curve.levels[1].trials == 2
        assert report.num_scenes == 2
        assert report.reference["r_max_deg"] == 4.0

    def test_sweep_is_reproducible(self, checkpoint: Checkpoint) -> None:
        """The same noise seed should reproduce the sweep."""
        service = RobustnessService()
        a = service.sweep([("a", checkpoint)], levels=(8.0,), trials=1, seeds=[1])
        b = service.sweep([("a", checkpoint)], levels=(8.0,), trials=1, seeds=[1])
        assert a == b

    def test_trials_must_be_positive(self, checkpoint: Checkpoint) -> None:
        """Zero trials should be refused."""
        with pytest.raises(ValueError):
            RobustnessService().sweep([("a", checkpoint)], trials=0)


class TestAttentionDump:
    """Tests for attention dumps."""

    def test_dump_and_load(
        self, checkpoint: Checkpoint, tiny_sample: SceneSample, tmp_path: Path
    ) -> None:
        """Dumped maps should read back exactly for the requested queries."""
        service = AttentionDumpService()
        manifest_path = service.dump(checkpoint, tiny_sample, [2, 0], tmp_path)
        dump = service.load(manifest_path)
        records = service.record(checkpoint, tiny_sample)
        assert dump.manifest.kinds == ["global", "local", "overall", "softmax"]
        assert dump.manifest.softmax_normalization == "joint"
        assert len(dump.manifest.files) == 4 * 2 * 2
        for kind, maps in records[0].maps().items():
            np.testing.assert_array_equal(dump.get(0, kind), maps[:, :, [2, 0]])

    def test_one_file_per_head_and_view(
        self, checkpoint: Checkpoint, tiny_sample: SceneSample, tmp_path: Path
    ) -> None:
        """Every (layer, head, view, kind) should get its own manifest entry and file."""
        manifest_path = AttentionDumpService().dump(checkpoint, tiny_sample, [0], tmp_path)
        manifest = json.loads(manifest_path.read_text())
        entries = {(f["layer"], f["head"], f["view"], f["kind"]) for f in manifest["files"]}
        assert entries == {
            (0, h, n, kind)
            for h in range(2)
            for n in range(2)
            for kind in ("global", "local", "overall", "softmax")
        }
        assert sorted(p.name for p in tmp_path.glob("*.csv")) == sorted(
            f["file"] for f in manifest["files"]
        )

    def test_csv_layout(
        self, checkpoint: Checkpoint, tiny_sample: SceneSample, tmp_path: Path
    ) -> None:
        """Each CSV should be a headerless matrix of one row per query and one column per pixel."""
        service = AttentionDumpService()
        service.dump(checkpoint, tiny_sample, [3, 1], tmp_path)
        lines = (tmp_path / "layer0_head1_view0_softmax.csv").read_text().splitlines()
        assert len(lines) == 2
        assert all(len(line.split(",")) == 32 for line in lines)

        matrix = np.loadtxt(tmp_path / "layer0_head1_view0_softmax.csv", delimiter=",")
        softmax = service.record(checkpoint, tiny_sample)[0].maps()["softmax"]
        np.testing.assert_array_equal(matrix, softmax[1, 0, [3, 1]])

    def test_load_rejects_wrong_shape(
        self, checkpoint: Checkpoint, tiny_sample: SceneSample, tmp_path: Path
    ) -> None:
        """A map file with the wrong number of rows should raise CheckpointError."""
        service = AttentionDumpService()
        manifest_path = service.dump(checkpoint, tiny_sample, [0, 1], tmp_path)
        (tmp_path / "layer0_head0_view1_overall.csv").write_text(",".join(["0"] * 32) + "\n")
        with pytest.raises(CheckpointError):
            service.load(manifest_path)

    @pytest.mark.parametrize("query_ids", [[4], [-1], []])
    def test_invalid_query(
        self, checkpoint: Checkpoint, tiny_sample: SceneSample, tmp_path: Path,
        query_ids: list[int],
    ) -> None:
        """Query ids outside [0, M) should raise InvalidQueryIdError."""
        with pytest.raises(InvalidQueryIdError):
            AttentionDumpService().dump(checkpoint, tiny_sample, query_ids, tmp_path)


class TestAblationTables:
    """Tests for ablation table definitions."""

    def test_tables(self) -> None:
        """Every table should have its rows in order."""
        assert {t: [r.row for r in rows] for t, rows in ABLATION_TABLES.items()} == {
            4: ["a", "b", "c", "d"],
            5: ["a", "b", "c", "d"],
            6: ["a", "b", "c"],
            7: ["a", "b", "c", "d"],
        }

    @pytest.mark.parametrize("table", sorted(ABLATION_TABLES))
    def test_rows_apply_to_base(self, table: int) -> None:
        """Every row should yield a valid configuration."""
        base = make_tiny_config()
        for row in ablation_rows(table):
            config = row.apply(base)
            assert config.name == f"tiny-t{table}{row.row}"

    def test_camera_bilateral_row(self) -> None:
        """Row 4d should enable camera-view PE with bilateral attention."""
        config = ablation_rows(4)[3].apply(make_tiny_config())
        assert config.model.pe_mode.value == "camera"
        assert config.model.bilateral

    def test_unknown_table(self) -> None:
        """Unknown tables should be refused."""
        with pytest.raises(ValueError):
            ablation_rows(3)

    def test_summary_marks_divergence(self) -> None:
        """A row with a diverged seed should be marked and average the rest."""
        row = AblationRow(table=4, row="a", description="x", overrides={})
        seeds = [
            SeedResult(seed=0, status="ok", mean_ap=0.2, mave=1.0),
            SeedResult(seed=1, status="diverged", diverged_step=3),
            SeedResult(seed=2, status="ok", mean_ap=0.4, mave=3.0),
        ]
        result = summarize_row(row, seeds)
        assert result.diverged
        assert result.mean_ap == pytest.approx(0.3)
        assert (result.mean_ap_min, result.mean_ap_max) == (0.2, 0.4)
        assert result.mave == pytest.approx(2.0)
