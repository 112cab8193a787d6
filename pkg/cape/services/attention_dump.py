"""Cross-attention map dumps for inspection.

A dump directory holds one headerless CSV per decoder layer, head, view and
map kind, named ``layer{L}_head{h}_view{n}_{kind}.csv``, plus a
``manifest.json`` listing them. Each file is a ``Q x I`` matrix: one row per
requested query in ``query_ids`` order, one column per pixel of the view in
row-major order. Values are printed with 17 significant digits so they read
back exactly. Maps are never thresholded; the manifest only carries the
display threshold.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from cape.exceptions import CheckpointError, InvalidQueryIdError
from cape.layers import AttentionRecord, temporal_forward
from cape.models.scene import SceneSample
from cape.services.checkpoint import Checkpoint

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"
DUMP_SCHEMA_VERSION = 2
DISPLAY_THRESHOLD = 1e-4
CSV_FORMAT = "%.17g"


def map_filename(layer: int, head: int, view: int, kind: str) -> str:
    return f"layer{layer}_head{head}_view{view}_{kind}.csv"


class DumpFile(BaseModel):
    layer: int
    head: int
    view: int
    kind: str
    file: str


class AttentionManifest(BaseModel):
    schema_version: int = DUMP_SCHEMA_VERSION
    config_hash: str
    scene_seed: int
    query_ids: list[int]
    num_layers: int
    num_heads: int
    num_views: int
    height: int
    width: int
    softmax_normalization: str = Field(description="joint over all views, or per_view")
    display_threshold: float = DISPLAY_THRESHOLD
    kinds: list[str]
    files: list[DumpFile] = Field(default_factory=list)


@dataclass
class AttentionDump:
    """Maps read back from a dump, each ``[h x N x Q x I]`` for the dumped queries."""

    manifest: AttentionManifest
    maps: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)

    def get(self, layer: int, kind: str) -> np.ndarray:
        return self.maps[(layer, kind)]


class AttentionDumpService:
    """Write and read attention dumps."""

    def record(self, checkpoint: Checkpoint, sample: SceneSample) -> list[AttentionRecord]:
        """Current-frame attention records of every decoder layer."""
        detector = checkpoint.build_detector()
        return temporal_forward(detector, sample, record=True).records

    def dump(
        self,
        checkpoint: Checkpoint,
        sample: SceneSample,
        query_ids: Sequence[int],
        out_dir: Path,
    ) -> Path:
        """Dump the maps of ``query_ids``; returns the manifest path.

        Raises:
            InvalidQueryIdError: If a query id is outside ``[0, M)``.
        """
        num_queries = checkpoint.config.model.num_queries
        if not query_ids:
            raise InvalidQueryIdError(-1, num_queries)
        for q in query_ids:
            if not 0 <= q < num_queries:
                raise InvalidQueryIdError(q, num_queries)

        records = self.record(checkpoint, sample)
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rig = sample.current.rig
        first = records[0] if records else None
        manifest = AttentionManifest(
            config_hash=checkpoint.config_hash,
            scene_seed=sample.seed,
            query_ids=list(query_ids),
            num_layers=len(records),
            num_heads=first.num_heads if first else checkpoint.config.model.num_heads,
            num_views=first.num_views if first else rig.num_cameras,
            height=rig.height,
            width=rig.width,
            softmax_normalization=(
                "per_view" if checkpoint.config.model.per_view_softmax else "joint"
            ),
            kinds=sorted(first.maps()) if first else [],
        )
        rows = list(query_ids)
        for layer, rec in enumerate(records):
            for kind, maps in sorted(rec.maps().items()):
                heads, views = maps.shape[:2]
                for h in range(heads):
                    for n in range(views):
                        name = map_filename(layer, h, n, kind)
                        np.savetxt(
                            out_dir / name, maps[h, n, rows], fmt=CSV_FORMAT, delimiter=","
                        )
                        manifest.files.append(
                            DumpFile(layer=layer, head=h, view=n, kind=kind, file=name)
                        )
        path = out_dir / MANIFEST_FILENAME
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("Attention dump written: %s (%d files)", out_dir, len(manifest.files))
        return path

    def load(self, manifest_path: Path) -> AttentionDump:
        """Read a dump back into ``[h x N x Q x I]`` arrays ordered like ``query_ids``.

        Raises:
            CheckpointError: If the manifest or a map file is malformed.
        """
        manifest_path = Path(manifest_path)
        try:
            manifest = AttentionManifest.model_validate_json(
                manifest_path.read_text(encoding="utf-8")
            )
        except (OSError, ValidationError) as e:
            raise CheckpointError(f"Cannot read attention manifest {manifest_path}: {e}") from e
        dump = AttentionDump(manifest=manifest)
        shape = (
            manifest.num_heads,
            manifest.num_views,
            len(manifest.query_ids),
            manifest.height * manifest.width,
        )
        for entry in manifest.files:
            path = manifest_path.parent / entry.file
            try:
                matrix = np.loadtxt(path, delimiter=",", ndmin=2)
            except (OSError, ValueError) as e:
                raise CheckpointError(f"Cannot read attention map {path}: {e}") from e
            if matrix.shape != shape[2:]:
                raise CheckpointError(
                    f"Attention map {path} has shape {matrix.shape}, expected {shape[2:]}"
                )
            maps = dump.maps.setdefault((entry.layer, entry.kind), np.zeros(shape))
            maps[entry.head, entry.view] = matrix
        return dump
