"""Scene data model: meshes, materials, instances, camera, and the packed form.

The authoring-side types below are plain dataclasses.  `Scene.build()`
validates the description and packs everything into a `FlatScene` — a
NamedTuple of contiguous numpy arrays that the jitted kernels traverse
directly (vertex/index pools, per-mesh and top-level BVH nodes, instance
transforms, material tables, the emissive-triangle table, and camera
basis vectors).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

# Fixed intersection epsilon for primary/secondary rays (scene units).
T_MIN = 1e-4


class SceneError(ValueError):
    """Malformed scene description or unsatisfiable build input."""


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = T_MIN
    t_max: float = np.inf

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        if not self.t_min < self.t_max:
            raise ValueError("ray needs t_min < t_max")


@dataclass(frozen=True)
class HitRecord:
    hit_flag: bool
    t: float = np.inf
    instance_id: int = -1
    primitive_id: int = -1
    barycentrics: tuple = (0.0, 0.0)  # (b1, b2); b0 = 1 - b1 - b2


@dataclass(frozen=True)
class SurfaceGeometry:
    position: np.ndarray
    shading_normal: np.ndarray
    geometric_normal: np.ndarray
    tangent: np.ndarray
    bitangent: np.ndarray
    uv: np.ndarray


@dataclass(frozen=True)
class Material:
    base_color: tuple = (0.8, 0.8, 0.8)
    roughness: float = 1.0
    metallic: float = 0.0
    emission: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        base = np.asarray(self.base_color, dtype=np.float64)
        emit = np.asarray(self.emission, dtype=np.float64)
        if base.shape != (3,) or emit.shape != (3,):
            raise SceneError("base_color and emission must be RGB triples")
        if not ((0.0 <= base).all() and (base <= 1.0).all()):
            raise SceneError("base_color components must lie in [0, 1]")
        if not (emit >= 0.0).all():
            raise SceneError("emission must be non-negative")
        if not 0.0 <= self.roughness <= 1.0:
            raise SceneError("roughness must lie in [0, 1]")
        if not 0.0 <= self.metallic <= 1.0:
            raise SceneError("metallic must lie in [0, 1]")
        object.__setattr__(self, "base_color", tuple(map(float, base)))
        object.__setattr__(self, "emission", tuple(map(float, emit)))

    @property
    def is_emissive(self) -> bool:
        return any(c > 0.0 for c in self.emission)


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    indices: np.ndarray  # (T, 3) int64, CCW front face
    normals: np.ndarray = None  # (V, 3); area-weighted average when omitted
    uvs: np.ndarray = None  # (V, 2); zeros when omitted

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise SceneError("mesh vertices must be (V, 3)")
        if self.indices.ndim != 2 or self.indices.shape[1] != 3:
            raise SceneError("mesh indices must be (T, 3)")
        if not np.isfinite(self.vertices).all():
            raise SceneError("mesh vertices must be finite")
        v = len(self.vertices)
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= v):
            raise SceneError("mesh indices out of range")
        if self.normals is None:
            self.normals = _vertex_normals(self.vertices, self.indices)
        else:
            self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
            if self.normals.shape != self.vertices.shape:
                raise SceneError("mesh normals must match vertices")
        if self.uvs is None:
            self.uvs = np.zeros((v, 2), dtype=np.float64)
        else:
            self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64)
            if self.uvs.shape != (v, 2):
                raise SceneError("mesh uvs must be (V, 2)")

    @property
    def triangle_count(self) -> int:
        return len(self.indices)


@dataclass
class Instance:
    mesh: int
    material: int
    transform: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        self.transform = np.ascontiguousarray(self.transform, dtype=np.float64)
        if self.transform.shape != (4, 4):
            raise SceneError("instance transform must be a 4x4 matrix")


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = (0.0, 1.0, 0.0)
    vfov_deg: float = 40.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if not 0.0 < self.vfov_deg < 180.0:
            raise SceneError("vertical fov must lie in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise SceneError("camera resolution must be at least 1x1")

    def basis(self):
        """Right-handed view basis (forward, right, up)."""
        fwd = self.look_at - self.position
        n = np.linalg.norm(fwd)
        if n == 0.0:
            raise SceneError("camera look_at coincides with position")
        fwd = fwd / n
        right = np.cross(self.up, fwd)
        n = np.linalg.norm(right)
        if n < 1e-9:
            raise SceneError("camera up vector is parallel to view direction")
        right = right / n
        up = np.cross(fwd, right)
        return fwd, right, up

    @property
    def tan_half_vfov(self) -> float:
        return float(np.tan(np.radians(self.vfov_deg) * 0.5))


class FlatScene(NamedTuple):
    """Packed kernel-side scene: every field is a contiguous numpy array."""

    # Geometry pools (all meshes concatenated; triangle rows hold pool indices).
    vertices: np.ndarray  # (V, 3) f8
    normals: np.ndarray  # (V, 3) f8
    uvs: np.ndarray  # (V, 2) f8
    tris: np.ndarray  # (T, 3) i8
    mesh_tri_start: np.ndarray  # (M,) i8
    # Per-mesh BVH nodes, concatenated with global child/prim indices.
    blas_lo: np.ndarray  # (NB, 3) f8
    blas_hi: np.ndarray  # (NB, 3) f8
    blas_a: np.ndarray  # (NB,) i8: left child, or prim-range start for leaves
    blas_b: np.ndarray  # (NB,) i8: right child (-1 for leaves)
    blas_count: np.ndarray  # (NB,) i8: 0 inner, >0 leaf primitive count
    blas_prims: np.ndarray  # (T,) i8: reordered global triangle ids
    blas_root: np.ndarray  # (M,) i8
    # Instances.
    inst_mesh: np.ndarray  # (I,) i8
    inst_mat: np.ndarray  # (I,) i8
    w2o: np.ndarray  # (I, 3, 4) f8 world -> object
    o2w: np.ndarray  # (I, 3, 4) f8 object -> world
    nmat: np.ndarray  # (I, 3, 3) f8 inverse-transpose linear part
    # Top-level BVH over instance world bounds.
    tlas_lo: np.ndarray
    tlas_hi: np.ndarray
    tlas_a: np.ndarray
    tlas_b: np.ndarray
    tlas_count: np.ndarray
    tlas_prims: np.ndarray  # (I,) i8 instance ids
    # Material table.
    mat_base: np.ndarray  # (Mt, 3) f8
    mat_rough: np.ndarray  # (Mt,) f8
    mat_metal: np.ndarray  # (Mt,) f8
    mat_emit: np.ndarray  # (Mt, 3) f8
    # Emissive-triangle table (world space), used by light sampling.
    light_v0: np.ndarray  # (L, 3) f8
    light_v1: np.ndarray
    light_v2: np.ndarray
    light_n: np.ndarray  # (L, 3) f8 unit front-face normal
    light_emit: np.ndarray  # (L, 3) f8
    light_area: np.ndarray  # (L,) f8
    # Environment + camera.
    env: np.ndarray  # (3,) f8
    cam_pos: np.ndarray  # (3,) f8
    cam_right: np.ndarray
    cam_up: np.ndarray
    cam_fwd: np.ndarray
    cam_tan: np.ndarray  # (1,) f8: tan(vfov/2)


@dataclass
class Scene:
    meshes: list
    materials: list
    instances: list
    camera: Camera
    env_radiance: np.ndarray = field(default_factory=lambda: np.zeros(3))
    flat: FlatScene = None

    def __post_init__(self):
        self.env_radiance = np.asarray(self.env_radiance, dtype=np.float64)
        if self.env_radiance.shape != (3,) or (self.env_radiance < 0).any():
            raise SceneError("environment radiance must be a non-negative RGB triple")

    def build(self) -> "Scene":
        """Validate and pack; idempotent, returns self."""
        from .flatten import flatten_scene

        self._validate()
        self.flat = flatten_scene(self)
        return self

    def with_resolution(self, width: int, height: int) -> "Scene":
        """Copy of the scene with the camera retargeted to a new image size."""
        cam = replace(self.camera, width=width, height=height)
        return Scene(self.meshes, self.materials, self.instances, cam,
                     self.env_radiance).build()

    def _validate(self):
        # An instance-free scene is legal: every ray escapes to the
        # environment.  File loading rejects it earlier as an authoring
        # error; the programmatic API keeps it for analytic tests.
        for inst in self.instances:
            if not 0 <= inst.mesh < len(self.meshes):
                raise SceneError(f"instance references unknown mesh {inst.mesh}")
            if not 0 <= inst.material < len(self.materials):
                raise SceneError(f"instance references unknown material {inst.material}")
            if self.meshes[inst.mesh].triangle_count == 0:
                raise SceneError("instanced mesh has no triangles")
            if abs(np.linalg.det(inst.transform[:3, :3])) < 1e-12:
                raise SceneError("instance transform is not invertible")


def _vertex_normals(vertices, indices):
    """Area-weighted vertex normals: accumulate cross(e1, e2) per face."""
    normals = np.zeros_like(vertices)
    v0 = vertices[indices[:, 0]]
    e1 = vertices[indices[:, 1]] - v0
    e2 = vertices[indices[:, 2]] - v0
    face = np.cross(e1, e2)  # length = 2 x face area
    for k in range(3):
        np.add.at(normals, indices[:, k], face)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    degenerate = length[:, 0] < 1e-20
    normals[degenerate] = (0.0, 0.0, 1.0)
    length[degenerate] = 1.0
    return normals / length
