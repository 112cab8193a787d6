"""Key and query position embeddings.

Camera-view mode builds key embeddings from frustum points in each camera's
own frame (intrinsics only) and query embeddings from reference points moved
into each camera frame (extrinsics only). Global mode lifts both into the ego
frame, which is the PETR-style baseline.
"""

from dataclasses import dataclass
from typing import Any, TypeVar

import numpy as np

from cape.autodiff import MLP2, Activation, Module, Tensor
from cape.exceptions import ShapeMismatchError
from cape.geometry import CameraRig, Extrinsics, camera_to_global, frustum_points, global_to_camera
from cape.models.config import PEMode, SceneConfig

Points = TypeVar("Points", np.ndarray, Tensor)

EXTRINSIC_WIDTH = 12


@dataclass(frozen=True, eq=False)
class CoordinateNormalizer:
    """Maps metric coordinates into the unit range the embedding perceptrons see.

    Global points use the scene bounds (``[lo, hi] -> [0, 1]`` per axis);
    camera-frame points are divided by a single ``camera_range``.
    """

    bounds_min: np.ndarray
    bounds_max: np.ndarray
    camera_range: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds_min", np.array(self.bounds_min, dtype=np.float64))
        object.__setattr__(self, "bounds_max", np.array(self.bounds_max, dtype=np.float64))

    @classmethod
    def from_scene(cls, scene: SceneConfig, camera_range: float) -> "CoordinateNormalizer":
        return cls(np.array(scene.bounds_min), np.array(scene.bounds_max), camera_range)

    @property
    def extent(self) -> np.ndarray:
        return self.bounds_max - self.bounds_min  # type: ignore[no-any-return]

    def normalize_global(self, points: Points) -> Points:
        return (points - self.bounds_min) / self.extent  # type: ignore[no-any-return]

    def denormalize_global(self, points: Points) -> Points:
        return points * self.extent + self.bounds_min  # type: ignore[no-any-return]

    def normalize_camera(self, points: Points) -> Points:
        return points / self.camera_range  # type: ignore[no-any-return]

    def to_dict(self) -> dict[str, Any]:
        return {
            "bounds_min": self.bounds_min.tolist(),
            "bounds_max": self.bounds_max.tolist(),
            "camera_range": self.camera_range,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CoordinateNormalizer":
        return cls(
            np.array(data["bounds_min"]), np.array(data["bounds_max"]), float(data["camera_range"])
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CoordinateNormalizer)
            and np.array_equal(self.bounds_min, other.bounds_min)
            and np.array_equal(self.bounds_max, other.bounds_max)
            and self.camera_range == other.camera_range
        )


def key_coordinates(
    rig: CameraRig, camera_index: int, mode: PEMode, normalizer: CoordinateNormalizer
) -> np.ndarray:
    """Normalized frustum coordinates of one view, ``[H x W x D x 3]``.

    Camera mode reads only the view's intrinsics.
    """
    frustum = frustum_points(rig, camera_index)
    if mode == PEMode.CAMERA:
        return normalizer.normalize_camera(frustum)
    lifted = camera_to_global(frustum, rig.cameras[camera_index].extrinsics)
    return normalizer.normalize_global(lifted)


class KeyPositionEncoder(Module):
    """Key embedding ``phi(c')``, optionally guided by image features: ``phi(c') * xi(x)``."""

    def __init__(
        self,
        channels: int,
        depth_bins: int,
        rng: np.random.Generator,
        feature_guided: bool = True,
        activation: Activation = Activation.RELU,
    ) -> None:
        self.channels = channels
        self.depth_bins = depth_bins
        self.feature_guided = feature_guided
        self.phi = MLP2(3 * depth_bins, channels, rng, activation=activation)
        self.xi = MLP2(channels, channels, rng, activation=activation) if feature_guided else None

    def _flatten(self, coords: np.ndarray) -> Tensor:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape[-2:] != (self.depth_bins, 3):
            raise ShapeMismatchError(
                "key_pe", coords.shape, (self.depth_bins, 3), detail="expected [... x D x 3]"
            )
        return Tensor(coords.reshape(-1, 3 * self.depth_bins).T)

    def key_pe(self, coords: np.ndarray) -> Tensor:
        """Embed each pixel's ``D`` frustum points: ``[... x D x 3] -> [C x I]``."""
        return self.phi(self._flatten(coords))

    def key_fpe(self, coords: np.ndarray, features: Tensor) -> Tensor:
        """Feature-guided key embedding ``phi(c') * xi(x)`` per pixel.

        Raises:
            ShapeMismatchError: If the feature map's pixel count differs from the coordinates'.
        """
        if self.xi is None:
            raise ShapeMismatchError("key_fpe", features.shape, detail="encoder built without xi")
        pe = self.key_pe(coords)
        if features.shape != pe.shape:
            raise ShapeMismatchError("key_fpe", features.shape, pe.shape)
        return pe * self.xi(features)

    def __call__(self, coords: np.ndarray, features: Tensor) -> Tensor:
        if self.feature_guided:
            return self.key_fpe(coords, features)
        return self.key_pe(coords)


class QueryPositionEncoder(Module):
    """Query embeddings ``psi(r)`` with optional decoder-embedding guidance.

    The guided form is ``psi(r) * eta_l(o * eta_g(vec(T)))`` where ``vec(T)`` is
    the top three rows of the view's extrinsic matrix. ``rho_self`` embeds the
    global reference points for self-attention.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        feature_guided: bool = True,
        activation: Activation = Activation.RELU,
    ) -> None:
        self.channels = channels
        self.feature_guided = feature_guided
        self.psi = MLP2(3, channels, rng, activation=activation)
        self.rho_self = MLP2(3, channels, rng, activation=activation)
        if feature_guided:
            self.eta_g: MLP2 | None = MLP2(EXTRINSIC_WIDTH, channels, rng, activation=activation)
            self.eta_l: MLP2 | None = MLP2(channels, channels, rng, activation=activation)
        else:
            self.eta_g = None
            self.eta_l = None

    def query_pe(self, points: Tensor | np.ndarray) -> Tensor:
        """``[M x 3] -> [C x M]``, column ``m`` is ``psi(r_m)``."""
        return self.psi(_columns(points))

    def query_fpe(
        self, points: Tensor | np.ndarray, embeddings: Tensor, extrinsics: Extrinsics
    ) -> Tensor:
        """Decoder-embedding-guided query embedding for one view."""
        if self.eta_g is None or self.eta_l is None:
            raise ShapeMismatchError(
                "query_fpe", embeddings.shape, detail="encoder built without eta"
            )
        if embeddings.shape != (self.channels, _row_count(points)):
            raise ShapeMismatchError(
                "query_fpe", embeddings.shape, (self.channels, _row_count(points))
            )
        camera_code = self.eta_g(Tensor(extrinsics.vec12().reshape(EXTRINSIC_WIDTH, 1)))
        return self.query_pe(points) * self.eta_l(embeddings * camera_code)

    def self_pos_embedding(self, points: Tensor | np.ndarray) -> Tensor:
        """Self-attention positional term from normalized global reference points."""
        return self.rho_self(_columns(points))

    def __call__(
        self, points: Tensor | np.ndarray, embeddings: Tensor, extrinsics: Extrinsics
    ) -> Tensor:
        if self.feature_guided:
            return self.query_fpe(points, embeddings, extrinsics)
        return self.query_pe(points)


def query_coordinates(
    reference: Tensor,
    extrinsics: Extrinsics,
    mode: PEMode,
    normalizer: CoordinateNormalizer,
) -> Tensor:
    """Normalized query points for one view.

    ``reference`` holds normalized global reference points ``[M x 3]``. Camera
    mode moves them into the view's frame; global mode returns them unchanged.
    """
    if mode == PEMode.GLOBAL:
        return reference
    metric = normalizer.denormalize_global(reference)
    return normalizer.normalize_camera(global_to_camera(metric, extrinsics))


def _columns(points: Tensor | np.ndarray) -> Tensor:
    if isinstance(points, Tensor):
        if points.ndim != 2 or points.shape[1] != 3:
            raise ShapeMismatchError("query_pe", points.shape, (3,), detail="expected [M x 3]")
        return points.T
    array = np.asarray(points, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 3:
        raise ShapeMismatchError("query_pe", array.shape, (3,), detail="expected [M x 3]")
    return Tensor(array.T)


def _row_count(points: Tensor | np.ndarray) -> int:
    return int(points.shape[0])
