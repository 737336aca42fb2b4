"""Scene representation, ingestion, and ray queries."""

from .bsdf import bsdf_eval, bsdf_sample
from .builtin import cornell_box, furnace_sphere
from .bvh import BVH, build_bvh
from .camera import camera_ray
from .light import sample_light
from .loader import load_obj, load_scene
from .traverse import intersect, occluded, surface_geometry
from .types import (
    Camera,
    FlatScene,
    HitRecord,
    Instance,
    Material,
    Mesh,
    Ray,
    Scene,
    SceneError,
    SurfaceGeometry,
)

__all__ = [
    "BVH",
    "Camera",
    "FlatScene",
    "HitRecord",
    "Instance",
    "Material",
    "Mesh",
    "Ray",
    "Scene",
    "SceneError",
    "SurfaceGeometry",
    "bsdf_eval",
    "bsdf_sample",
    "build_bvh",
    "camera_ray",
    "cornell_box",
    "furnace_sphere",
    "intersect",
    "load_obj",
    "load_scene",
    "occluded",
    "sample_light",
    "surface_geometry",
]
