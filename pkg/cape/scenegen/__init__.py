"""Synthetic multi-camera scenes for training and evaluation."""

from cape.scenegen.generator import (
    CLASS_BASE_SIZES,
    build_intrinsics,
    build_rig,
    generate_scene,
    sample_boxes,
    sample_ego_motion,
)
from cape.scenegen.io import (
    BLOB_MAGIC,
    SCENE_SCHEMA_VERSION,
    SceneDocument,
    load_scene,
    read_blob,
    save_scene,
    write_blob,
)
from cape.scenegen.render import (
    ENERGY_CHANNEL,
    code_length,
    feature_code,
    mixing_matrix,
    render_features,
    render_frame,
    splat_center,
)

__all__ = [
    "BLOB_MAGIC",
    "CLASS_BASE_SIZES",
    "ENERGY_CHANNEL",
    "SCENE_SCHEMA_VERSION",
    "SceneDocument",
    "build_intrinsics",
    "build_rig",
    "code_length",
    "feature_code",
    "generate_scene",
    "load_scene",
    "mixing_matrix",
    "read_blob",
    "render_features",
    "render_frame",
    "sample_boxes",
    "sample_ego_motion",
    "save_scene",
    "splat_center",
    "write_blob",
]
