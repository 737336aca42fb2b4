"""Scene ingestion: the text scene format, an OBJ mesh subset, builtins.

Scene file grammar (one directive per line, `#` comments, whitespace
separated):

    camera pos X Y Z look X Y Z [up X Y Z] [vfov DEG]
    environment R G B
    material NAME [base R G B] [roughness R] [metallic M] [emission R G B]
    mesh NAME PATH.obj
    instance MESHNAME MATERIALNAME [OP ARGS]...

Instance transform ops — `translate X Y Z`, `rotate_x DEG`, `rotate_y DEG`,
`rotate_z DEG`, `scale X [Y Z]` — are applied to the object in the order
written.  Mesh paths are resolved relative to the scene file.  The OBJ
subset understands v/vn/vt/f with triangulated faces.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .builtin import BUILTINS, rotate_x, rotate_y, rotate_z, scaled, translate
from .types import Camera, Instance, Material, Mesh, Scene, SceneError

_DEFAULT_CAMERA = dict(position=(0.0, 0.0, -3.0), look_at=(0.0, 0.0, 0.0),
                       up=(0.0, 1.0, 0.0), vfov_deg=40.0)


def load_scene(path) -> Scene:
    """Load a built-in scene by name or a scene-description file by path."""
    name = str(path)
    if name in BUILTINS:
        return BUILTINS[name]()
    return _parse_scene_file(Path(path))


def load_obj(path) -> Mesh:
    """OBJ subset: v/vn/vt/f, faces already triangulated.

    Face corners may use any of the v, v/vt, v//vn, v/vt/vn forms; each
    distinct (v, vt, vn) triple becomes one mesh vertex.
    """
    positions, normals, uvs = [], [], []
    corner_ids = {}
    out_pos, out_n, out_uv, faces = [], [], [], []
    has_normals = False

    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            tag, args = parts[0], parts[1:]
            if tag == "v":
                positions.append(_floats(args, 3, path, line_no))
            elif tag == "vn":
                normals.append(_floats(args, 3, path, line_no))
            elif tag == "vt":
                uvs.append(_floats(args, 2, path, line_no))
            elif tag == "f":
                if len(args) != 3:
                    raise SceneError(
                        f"{path}:{line_no}: only triangulated faces are supported"
                    )
                face = []
                for corner in args:
                    key = _corner_key(corner, len(positions), len(uvs),
                                      len(normals), path, line_no)
                    if key not in corner_ids:
                        corner_ids[key] = len(out_pos)
                        vi, ti, ni = key
                        out_pos.append(positions[vi])
                        out_uv.append(uvs[ti] if ti >= 0 else (0.0, 0.0))
                        out_n.append(normals[ni] if ni >= 0 else None)
                    face.append(corner_ids[key])
                has_normals = has_normals or any(
                    n is not None for n in (out_n[i] for i in face)
                )
                faces.append(face)
            elif tag in ("o", "g", "s", "mtllib", "usemtl"):
                continue  # grouping/material statements carry no geometry
            else:
                raise SceneError(f"{path}:{line_no}: unsupported OBJ tag {tag!r}")

    if not faces:
        raise SceneError(f"{path}: OBJ file contains no triangles")
    vertex_normals = None
    if has_normals and all(n is not None for n in out_n):
        vertex_normals = np.array(out_n, dtype=np.float64)
    return Mesh(
        vertices=np.array(out_pos, dtype=np.float64),
        indices=np.array(faces, dtype=np.int64),
        normals=vertex_normals,
        uvs=np.array(out_uv, dtype=np.float64),
    )


def _parse_scene_file(path: Path) -> Scene:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    mesh_ids, material_ids = {}, {}
    meshes, materials, instances = [], [], []
    camera_kw = dict(_DEFAULT_CAMERA)
    env = np.zeros(3)

    for line_no, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        tag, args = parts[0], parts[1:]
        where = f"{path}:{line_no}"
        if tag == "camera":
            camera_kw.update(_parse_camera(args, where))
        elif tag == "environment":
            env = np.array(_floats(args, 3, path, line_no))
        elif tag == "material":
            if not args:
                raise SceneError(f"{where}: material needs a name")
            name = args[0]
            if name in material_ids:
                raise SceneError(f"{where}: duplicate material {name!r}")
            material_ids[name] = len(materials)
            materials.append(_parse_material(args[1:], where))
        elif tag == "mesh":
            if len(args) != 2:
                raise SceneError(f"{where}: expected `mesh NAME PATH`")
            name, rel = args
            if name in mesh_ids:
                raise SceneError(f"{where}: duplicate mesh {name!r}")
            mesh_ids[name] = len(meshes)
            meshes.append(load_obj(path.parent / rel))
        elif tag == "instance":
            if len(args) < 2:
                raise SceneError(f"{where}: expected `instance MESH MATERIAL ...`")
            mesh_name, mat_name = args[0], args[1]
            if mesh_name not in mesh_ids:
                raise SceneError(f"{where}: unknown mesh {mesh_name!r}")
            if mat_name not in material_ids:
                raise SceneError(f"{where}: unknown material {mat_name!r}")
            transform = _parse_transform(args[2:], where)
            instances.append(
                Instance(mesh_ids[mesh_name], material_ids[mat_name], transform)
            )
        else:
            raise SceneError(f"{where}: unknown directive {tag!r}")

    if not instances:
        raise SceneError(f"{path}: scene has no instances")
    camera = Camera(**camera_kw)
    return Scene(meshes, materials, instances, camera, env).build()


def _parse_camera(args, where):
    out = {}
    i = 0
    while i < len(args):
        key = args[i]
        if key in ("pos", "look", "up"):
            vals = tuple(float(a) for a in args[i + 1: i + 4])
            if len(vals) != 3:
                raise SceneError(f"{where}: camera {key} needs 3 numbers")
            field = {"pos": "position", "look": "look_at", "up": "up"}[key]
            out[field] = vals
            i += 4
        elif key == "vfov":
            out["vfov_deg"] = float(args[i + 1])
            i += 2
        else:
            raise SceneError(f"{where}: unknown camera key {key!r}")
    return out


def _parse_material(args, where) -> Material:
    kw = {}
    i = 0
    while i < len(args):
        key = args[i]
        if key in ("base", "emission"):
            vals = tuple(float(a) for a in args[i + 1: i + 4])
            if len(vals) != 3:
                raise SceneError(f"{where}: material {key} needs 3 numbers")
            kw["base_color" if key == "base" else "emission"] = vals
            i += 4
        elif key in ("roughness", "metallic"):
            kw[key] = float(args[i + 1])
            i += 2
        else:
            raise SceneError(f"{where}: unknown material key {key!r}")
    try:
        return Material(**kw)
    except SceneError as exc:
        raise SceneError(f"{where}: {exc}") from None


def _parse_transform(args, where):
    m = np.eye(4)
    i = 0
    while i < len(args):
        op = args[i]
        if op == "translate":
            step, n = translate(*_take(args, i, 3, where)), 4
        elif op == "rotate_x":
            step, n = rotate_x(_take(args, i, 1, where)[0]), 2
        elif op == "rotate_y":
            step, n = rotate_y(_take(args, i, 1, where)[0]), 2
        elif op == "rotate_z":
            step, n = rotate_z(_take(args, i, 1, where)[0]), 2
        elif op == "scale":
            rest = args[i + 1:]
            if len(rest) >= 3 and _is_number(rest[1]) and _is_number(rest[2]):
                vals, n = _take(args, i, 3, where), 4
            else:
                vals, n = _take(args, i, 1, where) * 3, 2
            step = scaled(*vals)
        else:
            raise SceneError(f"{where}: unknown transform op {op!r}")
        m = step @ m  # ops listed first apply to the object first
        i += n
    return m


def _take(args, i, n, where):
    vals = args[i + 1: i + 1 + n]
    if len(vals) != n or not all(_is_number(v) for v in vals):
        raise SceneError(f"{where}: {args[i]} needs {n} number(s)")
    return tuple(float(v) for v in vals)


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _floats(args, n, path, line_no):
    if len(args) < n:
        raise SceneError(f"{path}:{line_no}: expected {n} numbers")
    try:
        return tuple(float(a) for a in args[:n])
    except ValueError:
        raise SceneError(f"{path}:{line_no}: malformed number") from None


def _corner_key(corner, nv, nt, nn, path, line_no):
    fields = corner.split("/")
    if len(fields) > 3 or not fields[0]:
        raise SceneError(f"{path}:{line_no}: malformed face corner {corner!r}")

    def ref(s, count, kind):
        if s is None or s == "":
            return -1
        idx = int(s)
        if idx < 0 or idx > count:
            raise SceneError(
                f"{path}:{line_no}: {kind} index {idx} out of range"
            )
        if idx == 0:
            raise SceneError(f"{path}:{line_no}: OBJ indices are 1-based")
        return idx - 1

    vi = ref(fields[0], nv, "vertex")
    ti = ref(fields[1] if len(fields) > 1 else None, nt, "uv")
    ni = ref(fields[2] if len(fields) > 2 else None, nn, "normal")
    return vi, ti, ni
