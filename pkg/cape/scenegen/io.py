"""Scene files: a versioned JSON document plus a binary feature blob.

Blob layout (little-endian)::

    bytes 0-7    magic  b"CAPEBLOB"
    u32          format version (1)
    u32          number of dimensions (4)
    u32 x dims   extents [2, N, C, H*W]
    f64 x prod   feature payload, row-major; index 0 is the current frame

The JSON document stores boxes, rigs and ego motion with explicit field names
and the blob's file name relative to the document.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from cape.exceptions import InvalidGeometryError, SceneParseError, ShapeMismatchError
from cape.geometry import Camera, CameraRig, EgoMotion, Extrinsics, Intrinsics
from cape.models.box import Box3D
from cape.models.scene import Frame, SceneSample

logger = logging.getLogger(__name__)

SCENE_SCHEMA_VERSION = 1
BLOB_MAGIC = b"CAPEBLOB"
BLOB_VERSION = 1
BLOB_SUFFIX = ".blob"


class CameraDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intrinsics: list[list[float]] = Field(description="3x3, row-major")
    extrinsics: list[list[float]] = Field(description="4x4 global-to-camera, row-major")


class RigDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    height: int = Field(ge=1)
    width: int = Field(ge=1)
    depth_bins: list[float]
    cameras: list[CameraDocument] = Field(min_length=1)


class FrameDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    boxes: list[Box3D] = Field(default_factory=list)
    rig: RigDocument


class MotionDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    matrix: list[list[float]] = Field(description="4x4 current-to-previous, row-major")
    dt: float = Field(gt=0)


class SceneDocument(BaseModel):
    """Top-level scene file."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(default=SCENE_SCHEMA_VERSION)
    seed: int = 0
    blob: str = Field(description="Feature blob path relative to this file")
    ego_motion: MotionDocument
    current: FrameDocument
    previous: FrameDocument


def _rig_document(rig: CameraRig) -> RigDocument:
    return RigDocument(
        height=rig.height,
        width=rig.width,
        depth_bins=rig.depth_bins.tolist(),
        cameras=[
            CameraDocument(
                intrinsics=cam.intrinsics.matrix.tolist(),
                extrinsics=cam.extrinsics.matrix.tolist(),
            )
            for cam in rig.cameras
        ],
    )


def _rig_from_document(doc: RigDocument) -> CameraRig:
    cameras = tuple(
        Camera(Intrinsics(np.array(c.intrinsics)), Extrinsics(np.array(c.extrinsics)))
        for c in doc.cameras
    )
    return CameraRig(cameras, doc.height, doc.width, np.array(doc.depth_bins))


def write_blob(path: Path, payload: np.ndarray) -> None:
    payload = np.ascontiguousarray(payload, dtype="<f8")
    header = BLOB_MAGIC + struct.pack("<II", BLOB_VERSION, payload.ndim)
    header += struct.pack(f"<{payload.ndim}I", *payload.shape)
    path.write_bytes(header + payload.tobytes(order="C"))


def read_blob(path: Path) -> np.ndarray:
    """Read a feature blob.

    Raises:
        SceneParseError: If the file is missing, truncated or has a bad header.
    """
    try:
        data = path.read_bytes()
    except OSError as e:
        raise SceneParseError(str(path), f"cannot read blob: {e}") from e
    fixed = len(BLOB_MAGIC) + 8
    if len(data) < fixed:
        raise SceneParseError(str(path), f"blob header truncated ({len(data)} bytes)")
    if data[: len(BLOB_MAGIC)] != BLOB_MAGIC:
        raise SceneParseError(str(path), "bad blob magic", field="magic")
    version, dims = struct.unpack_from("<II", data, len(BLOB_MAGIC))
    if version != BLOB_VERSION:
        raise SceneParseError(str(path), f"unsupported blob version {version}", field="version")
    if len(data) < fixed + 4 * dims:
        raise SceneParseError(str(path), "blob extents truncated", field="extents")
    shape = struct.unpack_from(f"<{dims}I", data, fixed)
    offset = fixed + 4 * dims
    expected = 8 * int(np.prod(shape, dtype=np.int64))
    if len(data) - offset != expected:
        raise SceneParseError(
            str(path),
            f"payload has {len(data) - offset} bytes, extents {shape} need {expected}",
            field="payload",
        )
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(shape).astype(np.float64)


def save_scene(sample: SceneSample, path: Path) -> Path:
    """Write ``sample`` as ``path`` plus a sidecar blob; returns the blob path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob_path = path.with_suffix(BLOB_SUFFIX)
    document = SceneDocument(
        seed=sample.seed,
        blob=blob_path.name,
        ego_motion=MotionDocument(
            matrix=sample.ego_motion.matrix.tolist(), dt=sample.ego_motion.dt
        ),
        current=FrameDocument(
            boxes=list(sample.current.boxes), rig=_rig_document(sample.current.rig)
        ),
        previous=FrameDocument(
            boxes=list(sample.previous.boxes), rig=_rig_document(sample.previous.rig)
        ),
    )
    write_blob(blob_path, np.stack([sample.current.features, sample.previous.features]))
    path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    return blob_path


def load_scene(path: Path) -> SceneSample:
    """Read a scene written by ``save_scene``.

    Raises:
        SceneParseError: With the line and column of a JSON syntax error, the
            field path of a schema violation, or the blob defect.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SceneParseError(str(path), f"cannot read file: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError(str(path), e.msg, line=e.lineno, column=e.colno) from e
    try:
        document = SceneDocument.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        raise SceneParseError(str(path), first["msg"], field=location) from e
    if document.schema_version != SCENE_SCHEMA_VERSION:
        raise SceneParseError(
            str(path), f"unsupported schema version {document.schema_version}",
            field="schema_version",
        )

    payload = read_blob(path.parent / document.blob)
    if payload.ndim != 4 or payload.shape[0] != 2:
        raise SceneParseError(
            str(path), f"blob must hold [2 x N x C x I], got {payload.shape}", field="blob"
        )
    try:
        motion = EgoMotion(np.array(document.ego_motion.matrix), document.ego_motion.dt)
        frames = [
            Frame(tuple(doc.boxes), _rig_from_document(doc.rig), payload[k])
            for k, doc in enumerate((document.current, document.previous))
        ]
    except (InvalidGeometryError, ShapeMismatchError, ValueError) as e:
        raise SceneParseError(str(path), str(e), field="geometry") from e
    logger.debug("Loaded scene %s", path)
    return SceneSample(frames[0], frames[1], motion, document.seed)
