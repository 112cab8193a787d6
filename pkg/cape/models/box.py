"""3D box and detection models."""

import math

from pydantic import BaseModel, ConfigDict, Field, field_validator

Vec3 = tuple[float, float, float]
Vec2 = tuple[float, float]


class Box3D(BaseModel):
    """A ground-truth or predicted 3D box in an ego frame.

    Size is ``(w, l, h)``: width across the heading, length along it, height.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    center: Vec3 = Field(description="Box center in meters, ego frame")
    size: Vec3 = Field(description="(w, l, h) in meters")
    yaw: float = Field(default=0.0, description="Heading in radians, in (-pi, pi]")
    velocity: Vec2 = Field(default=(0.0, 0.0), description="(vx, vy) in m/s")
    label: int = Field(default=0, ge=0, description="Class id")

    @field_validator("size")
    @classmethod
    def _positive_size(cls, value: Vec3) -> Vec3:
        if any(not s > 0 for s in value):
            raise ValueError(f"Box sizes must be positive, got {value}")
        return value

    @field_validator("yaw")
    @classmethod
    def _yaw_range(cls, value: float) -> float:
        if not -math.pi < value <= math.pi:
            raise ValueError(f"yaw must lie in (-pi, pi], got {value}")
        return value

    @field_validator("center", "velocity")
    @classmethod
    def _finite(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(v) for v in value):
            raise ValueError(f"Non-finite coordinate {value}")
        return value


class Detection(BaseModel):
    """A scored box produced by the detector."""

    model_config = ConfigDict(frozen=True)

    box: Box3D
    score: float = Field(ge=0, le=1)
    query: int = Field(default=-1, description="Index of the query that produced it")
