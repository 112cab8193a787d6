"""Angle helpers."""

import math


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians into ``(-pi, pi]``; in-range angles are returned as is."""
    if -math.pi < angle <= math.pi:
        return float(angle)
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    if wrapped <= -math.pi:
        return math.pi
    return wrapped
