"""Convex bodies, polarity, volume products and ellipsoid estimates."""

from .bodies import BodyMeasures, ConvexBody, Ellipsoid, Polytope, RadialBody, ball, body_measures
from .ellipsoids import bm_ball_report, bm_ball_upper, john_ellipsoid, khachiyan
from .polar import PolarVolume, polar_body, volume_product
from .sandwich import SandwichInput, random_sandwich_instance, sandwich_check
from .santalo import SantaloResult, santalo_point

__all__ = [
    "BodyMeasures",
    "ConvexBody",
    "Ellipsoid",
    "Polytope",
    "RadialBody",
    "ball",
    "body_measures",
    "bm_ball_report",
    "bm_ball_upper",
    "john_ellipsoid",
    "khachiyan",
    "PolarVolume",
    "polar_body",
    "volume_product",
    "SandwichInput",
    "random_sandwich_instance",
    "sandwich_check",
    "SantaloResult",
    "santalo_point",
]
