"""Ray traversal, surface geometry, BSDF, and light sampling.

Traversal answers are checked against the all-pairs brute-force tracer in
oracles.py, which uses a different intersection formulation and no
acceleration structure.
"""

import numpy as np
import pytest
from numba import njit

from oracles import (
    brute_intersect,
    brute_intersect_mt,
    quadrature_direct_light,
    random_triangle_soup,
)
from pathbench.scene import (
    Camera,
    Instance,
    Material,
    Mesh,
    Ray,
    Scene,
    SurfaceGeometry,
    bsdf_eval,
    bsdf_sample,
    camera_ray,
    intersect,
    occluded,
    sample_light,
    surface_geometry,
)
from pathbench.scene.bsdf import DELTA_PDF, bsdf_sample_local
from pathbench.scene.traverse import intersect_raw, occluded_raw, STACK_DEPTH


def _golden_scene():
    mesh = Mesh(
        vertices=np.array([[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]]),
        indices=np.array([[0, 1, 2]]),
    )
    cam = Camera(position=(0, 0, -3), look_at=(0, 0, 0), width=4, height=4)
    return Scene([mesh], [Material()], [Instance(0, 0)], cam).build()


def _rays(n, seed, lo=-0.2, hi=1.2):
    rng = np.random.default_rng(seed)
    origins = rng.uniform(lo, hi, (n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


def _assert_matches_brute(fs, origins, dirs, oracle=brute_intersect_mt,
                          t_tol=0.0, t_min=1e-4, t_max=np.inf):
    """Production traversal vs. an exhaustive oracle.

    t_tol = 0 demands bitwise agreement (production-arithmetic oracle);
    a positive t_tol is a relative bound for the independent formulation.
    """
    st = np.empty(STACK_DEPTH, np.int64)
    sb = np.empty(STACK_DEPTH, np.int64)
    hits = misses = 0
    for o, d in zip(origins, dirs):
        got = intersect_raw(fs, o[0], o[1], o[2], d[0], d[1], d[2],
                            t_min, t_max, st, sb)
        want = oracle(fs, o[0], o[1], o[2], d[0], d[1], d[2], t_min, t_max)
        assert got[0] == want[0], (o, d)
        if want[0]:
            hits += 1
            assert got[2] == want[2] and got[3] == want[3], (o, d)
            if t_tol == 0.0:
                assert got[1] == want[1] and got[4] == want[4] \
                    and got[5] == want[5], (o, d)
            else:
                assert abs(got[1] - want[1]) <= t_tol * max(1.0, abs(want[1]))
                assert abs(got[4] - want[4]) <= t_tol
                assert abs(got[5] - want[5]) <= t_tol
        else:
            misses += 1
        srch = occluded_raw(fs, o[0], o[1], o[2], d[0], d[1], d[2],
                            t_min, t_max, st, sb)
        assert bool(srch) == bool(want[0])
    return hits, misses


class TestIntersect:
    def test_golden_triangle(self):
        s = _golden_scene()
        h = intersect(s, Ray(origin=(0, 0, -1), direction=(0, 0, 1)))
        assert h.hit_flag
        assert h.t == 1.0
        assert (h.instance_id, h.primitive_id) == (0, 0)
        b1, b2 = h.barycentrics
        assert (1.0 - b1 - b2, b1, b2) == (0.25, 0.25, 0.5)

    def test_interval_is_strict(self):
        s = _golden_scene()
        assert not intersect(s, Ray((0, 0, -1), (0, 0, 1), t_min=1.0)).hit_flag
        assert not intersect(s, Ray((0, 0, -1), (0, 0, 1), t_max=1.0)).hit_flag
        assert intersect(
            s, Ray((0, 0, -1), (0, 0, 1), t_min=0.999, t_max=1.001)
        ).hit_flag

    def test_direction_must_be_unit(self):
        s = _golden_scene()
        with pytest.raises(ValueError):
            intersect(s, Ray((0, 0, -1), (0, 0, 2)))

    def test_two_sided(self):
        s = _golden_scene()
        h = intersect(s, Ray((0, 0, 1), (0, 0, -1)))
        assert h.hit_flag and h.t == 1.0

    def test_tie_break_lowest_ids(self):
        # Two coincident triangles in one mesh, and a second identical
        # instance: the hit must report the lowest (instance, primitive).
        v = np.array([[-1.0, -1, 0], [1.0, -1, 0], [0.0, 1, 0]])
        mesh = Mesh(vertices=np.vstack([v, v]),
                    indices=np.array([[0, 1, 2], [3, 4, 5]]))
        cam = Camera(position=(0, 0, -3), look_at=(0, 0, 0), width=2, height=2)
        s = Scene([mesh], [Material()],
                  [Instance(0, 0), Instance(0, 0)], cam).build()
        h = intersect(s, Ray((0, 0, -1), (0, 0, 1)))
        assert (h.instance_id, h.primitive_id) == (0, 0)

    def test_axis_aligned_rays(self, cornell):
        # Zero direction components exercise the containment branch of the
        # slab test.  Five directions hit box surfaces; -z escapes through
        # the open front.
        for d in np.vstack([np.eye(3), -np.eye(3)]):
            r = Ray((0.5, 0.85, 0.5), d)
            h = intersect(cornell, r)
            assert h.hit_flag == (d[2] >= 0.0)

    def test_inward_wall_normals(self, cornell):
        cases = [
            ((0.5, 0.85, 0.5), (-1, 0, 0), (1, 0, 0)),    # red wall
            ((0.5, 0.85, 0.5), (1, 0, 0), (-1, 0, 0)),    # green wall
            ((0.5, 0.85, 0.5), (0, 0, 1), (0, 0, -1)),    # back wall
            ((0.5, 0.5, 0.5), (0, -1, 0), (0, 1, 0)),     # floor
            ((0.2, 0.85, 0.5), (0, 1, 0), (0, -1, 0)),    # ceiling
            ((0.5, 0.5, 0.5), (0, 1, 0), (0, -1, 0)),     # lamp face
        ]
        for o, d, n in cases:
            h = intersect(cornell, Ray(o, np.asarray(d, np.float64)))
            assert h.hit_flag
            g = surface_geometry(cornell, h)
            np.testing.assert_allclose(g.geometric_normal, n, atol=1e-12)

    def test_instancing_translated_hit(self):
        mesh = Mesh(
            vertices=np.array([[-1.0, -1, 0], [1.0, -1, 0], [0.0, 1, 0]]),
            indices=np.array([[0, 1, 2]]),
        )
        lift = np.eye(4)
        lift[:3, 3] = (0.0, 0.0, 4.0)
        cam = Camera(position=(0, 0, -3), look_at=(0, 0, 0), width=2, height=2)
        s = Scene([mesh], [Material()],
                  [Instance(0, 0, lift)], cam).build()
        h = intersect(s, Ray((0, 0, -1), (0, 0, 1)))
        assert h.hit_flag and abs(h.t - 5.0) < 1e-12

    def test_brute_force_cornell_bitwise(self, cornell):
        origins, dirs = _rays(2000, seed=11)
        hits, misses = _assert_matches_brute(cornell.flat, origins, dirs)
        assert hits > 0 and misses > 0  # both branches exercised

    def test_independent_formulation_cornell(self, cornell):
        # The plane-form oracle can pick the other face of an exactly
        # coplanar pair (box bottoms on the floor), so compare flag and t
        # only; ids are pinned by the bitwise test above.
        origins, dirs = _rays(800, seed=12)
        st = np.empty(STACK_DEPTH, np.int64)
        sb = np.empty(STACK_DEPTH, np.int64)
        for o, d in zip(origins, dirs):
            got = intersect_raw(cornell.flat, o[0], o[1], o[2],
                                d[0], d[1], d[2], 1e-4, np.inf, st, sb)
            want = brute_intersect(cornell.flat, o[0], o[1], o[2],
                                   d[0], d[1], d[2], 1e-4, np.inf)
            assert got[0] == want[0], (o, d)
            if want[0]:
                assert abs(got[1] - want[1]) <= 1e-6 * max(1.0, abs(want[1]))

    def test_brute_force_random_soup_instanced(self):
        # Generic-position geometry: the independent formulation must agree
        # on ids too.
        vertices, indices = random_triangle_soup(600, seed=3)
        mesh = Mesh(vertices=vertices, indices=indices)
        spin = np.eye(4)
        c, s_ = np.cos(0.7), np.sin(0.7)
        spin[:3, :3] = [[c, 0, s_], [0, 1, 0], [-s_, 0, c]]
        spin[:3, 3] = (0.4, -0.2, 0.1)
        cam = Camera(position=(0.5, 0.5, -3), look_at=(0.5, 0.5, 0.5),
                     width=2, height=2)
        scene = Scene([mesh], [Material()],
                      [Instance(0, 0), Instance(0, 0, spin)], cam).build()
        origins, dirs = _rays(1500, seed=5, lo=-0.5, hi=1.5)
        hits, _ = _assert_matches_brute(scene.flat, origins, dirs,
                                        oracle=brute_intersect, t_tol=1e-6)
        assert hits > 200
        # And bitwise against the production-arithmetic oracle.
        _assert_matches_brute(scene.flat, origins[:500], dirs[:500])

    def test_finite_window_against_brute(self, cornell):
        origins, dirs = _rays(500, seed=13)
        _assert_matches_brute(cornell.flat, origins, dirs,
                              t_min=0.05, t_max=0.9)


class TestSurfaceGeometry:
    def test_golden_point(self):
        s = _golden_scene()
        h = intersect(s, Ray((0, 0, -1), (0, 0, 1)))
        g = surface_geometry(s, h)
        np.testing.assert_allclose(g.position, [0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(g.geometric_normal, [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(g.uv, [0, 0], atol=0)

    def test_normal_not_flipped_toward_ray(self):
        # Approaching the front face from +z still yields the +z normal.
        s = _golden_scene()
        h = intersect(s, Ray((0, 0, 1), (0, 0, -1)))
        g = surface_geometry(s, h)
        np.testing.assert_allclose(g.geometric_normal, [0, 0, 1], atol=1e-15)

    def test_inverse_transpose_normals(self):
        # Slanted triangle under non-uniform scale: normals transform by the
        # inverse transpose, not the linear part.
        mesh = Mesh(
            vertices=np.array([[0.0, 0, 0], [0.0, 0, 1], [1.0, -1, 0]]),
            indices=np.array([[0, 1, 2]]),
        )
        # Object-space normal along (1, 1, 0)/sqrt(2).
        stretch = np.diag([2.0, 1.0, 1.0, 1.0])
        cam = Camera(position=(0, 0, -3), look_at=(0, 0, 0), width=2, height=2)
        s = Scene([mesh], [Material()], [Instance(0, 0, stretch)], cam).build()
        # World-space interior point (0.4, -0.2, 0.3), approached along -x.
        h = intersect(s, Ray((3.0, -0.2, 0.3), (-1.0, 0, 0)))
        assert h.hit_flag
        g = surface_geometry(s, h)
        want = np.array([0.5, 1.0, 0.0])
        want /= np.linalg.norm(want)
        np.testing.assert_allclose(g.geometric_normal, want, atol=1e-12)
        np.testing.assert_allclose(g.shading_normal, want, atol=1e-12)

    def test_orthonormal_frame(self, furnace):
        r = camera_ray(furnace.camera, 9, 21, (0.3, 0.6))
        g = surface_geometry(furnace, intersect(furnace, r))
        for v in (g.shading_normal, g.geometric_normal, g.tangent, g.bitangent):
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12
        assert abs(g.tangent @ g.shading_normal) < 1e-12
        assert abs(g.bitangent @ g.shading_normal) < 1e-12
        assert abs(g.tangent @ g.bitangent) < 1e-12
        # Right-handed: t x b = n.
        np.testing.assert_allclose(
            np.cross(g.tangent, g.bitangent), g.shading_normal, atol=1e-12
        )

    def test_sphere_shading_normal_is_radial(self, furnace):
        r = camera_ray(furnace.camera, 5, 11, (0.5, 0.5))
        h = intersect(furnace, r)
        g = surface_geometry(furnace, h)
        radial = g.position / np.linalg.norm(g.position)
        # Interpolated normal tracks the analytic sphere normal closely.
        assert g.shading_normal @ radial > 0.99999
        # ... and differs from the flat facet normal.
        assert not np.allclose(g.shading_normal, g.geometric_normal, atol=1e-9)

    def test_requires_valid_hit(self, cornell):
        from pathbench.scene import HitRecord

        with pytest.raises(ValueError):
            surface_geometry(cornell, HitRecord(hit_flag=False))
        with pytest.raises(ValueError):
            surface_geometry(
                cornell, HitRecord(hit_flag=True, t=1.0, instance_id=99,
                                   primitive_id=0)
            )


def _frame():
    return SurfaceGeometry(
        position=np.zeros(3),
        shading_normal=np.array([0.0, 0.0, 1.0]),
        geometric_normal=np.array([0.0, 0.0, 1.0]),
        tangent=np.array([1.0, 0.0, 0.0]),
        bitangent=np.array([0.0, 1.0, 0.0]),
        uv=np.zeros(2),
    )


@njit(cache=True)
def _mc_albedo(br, rough, metal, wox, woy, woz, us):
    acc = 0.0
    n = us.shape[0]
    for k in range(n):
        wix, wiy, wiz, fr, fg, fb, pdf, is_delta = bsdf_sample_local(
            br, br, br, rough, metal, wox, woy, woz, us[k, 0], us[k, 1]
        )
        if pdf == DELTA_PDF:
            acc += fr  # delta samples carry the full weight in f
        elif pdf > 0.0:
            acc += fr * wiz / pdf
    return acc / n


class TestBSDF:
    def test_pinned_diffuse_value(self):
        m = Material(base_color=(0.6, 0.6, 0.6), roughness=1.0, metallic=0.0)
        n = np.array([0.0, 0.0, 1.0])
        f, pdf = bsdf_eval(m, n, n, _frame())
        np.testing.assert_allclose(f, 0.6 / np.pi, rtol=1e-12)
        np.testing.assert_allclose(pdf, 1.0 / np.pi, rtol=1e-12)

    def test_below_horizon_is_black(self):
        m = Material(base_color=(0.6, 0.6, 0.6))
        up = np.array([0.0, 0.0, 1.0])
        down = np.array([0.0, 0.0, -1.0])
        f, pdf = bsdf_eval(m, up, down, _frame())
        assert (f == 0).all() and pdf == 0
        f, pdf = bsdf_eval(m, down, up, _frame())
        assert (f == 0).all() and pdf == 0

    def test_pure_diffuse_weight_equals_base(self):
        # metallic = 0: importance weight f*cos/pdf collapses to the albedo.
        rng = np.random.default_rng(2)
        m = Material(base_color=(0.25, 0.5, 0.75), roughness=0.4, metallic=0.0)
        wo = np.array([0.3, -0.2, 0.9])
        wo /= np.linalg.norm(wo)
        for _ in range(200):
            u1, u2 = rng.random(2)
            wi, f, pdf = bsdf_sample(m, wo, _frame(), u1, u2)
            assert pdf > 0
            w = f * (wi[2] / pdf)
            np.testing.assert_allclose(w, m.base_color, rtol=1e-12)
            # pdf is exactly the cosine density.
            np.testing.assert_allclose(pdf, wi[2] / np.pi, rtol=1e-12)

    def test_sample_eval_consistency(self):
        rng = np.random.default_rng(3)
        frame = _frame()
        for _ in range(300):
            m = Material(
                base_color=tuple(rng.uniform(0.05, 1.0, 3)),
                roughness=float(rng.uniform(0.05, 1.0)),
                metallic=float(rng.choice([0.0, 0.3, 0.7, 1.0])),
            )
            wo = rng.normal(size=3)
            wo[2] = abs(wo[2]) + 1e-3
            wo /= np.linalg.norm(wo)
            wi, f, pdf = bsdf_sample(m, wo, frame, rng.random(), rng.random())
            if pdf <= 0:
                continue
            f2, pdf2 = bsdf_eval(m, wo, wi, frame)
            np.testing.assert_allclose(f, f2, rtol=1e-12, atol=1e-300)
            np.testing.assert_allclose(pdf, pdf2, rtol=1e-12)

    def test_mirror_delta(self):
        m = Material(base_color=(0.9, 0.7, 0.4), roughness=0.0, metallic=1.0)
        wo = np.array([0.3, 0.4, np.sqrt(1 - 0.25)])
        wi, f, pdf = bsdf_sample(m, wo, _frame(), 0.37, 0.92)
        assert pdf == DELTA_PDF
        np.testing.assert_allclose(wi, [-0.3, -0.4, wo[2]], atol=1e-15)
        base = np.array(m.base_color)
        want = base + (1 - base) * (1 - wo[2]) ** 5
        np.testing.assert_allclose(f, want, rtol=1e-12)
        # eval of a delta lobe is zero.
        f2, pdf2 = bsdf_eval(m, wo, wi, _frame())
        assert (f2 == 0).all() and pdf2 == 0

    def test_albedo_bounded(self):
        us = np.random.default_rng(4).random((200_000, 2))
        for rough in (0.05, 0.1, 0.3, 0.6, 1.0):
            for metal in (0.0, 0.5, 1.0):
                for woz in (0.1, 0.5, 1.0):
                    wox = np.sqrt(1.0 - woz * woz)
                    a = _mc_albedo(1.0, rough, metal, wox, 0.0, woz, us)
                    assert a <= 1.02, (rough, metal, woz, a)

    def test_grazing_and_degenerate_inputs(self):
        m = Material(base_color=(0.5, 0.5, 0.5), roughness=0.2, metallic=1.0)
        frame = _frame()
        down = np.array([0.0, 0.0, -1.0])
        wi, f, pdf = bsdf_sample(m, down, frame, 0.5, 0.5)
        assert pdf == 0 and (f == 0).all()


class TestSampleLight:
    def test_perpendicular_pdf(self):
        # Single emissive triangle, connection along its normal:
        # pdf = d^2 / area exactly.
        v = np.array([[-1.0, -1.0, 2.0], [1.0, -1.0, 2.0], [0.0, 1.0, 2.0]])
        mesh = Mesh(vertices=v, indices=np.array([[0, 1, 2]]))
        cam = Camera(position=(0, 0, -3), look_at=(0, 0, 1), width=2, height=2)
        lamp = Material(emission=(5.0, 5.0, 5.0))
        s = Scene([mesh], [lamp], [Instance(0, 0)], cam).build()
        assert s.flat.light_v0.shape[0] == 1
        area = s.flat.light_area[0]
        np.testing.assert_allclose(area, 2.0, rtol=1e-12)

        # Front face points +z (CCW winding); sample from beyond the plane.
        d, dist, rad, pdf = sample_light(s, (0.0, -0.5, 4.0), 0.3, 0.2, 0.6)
        assert pdf > 0
        np.testing.assert_allclose(rad, [5, 5, 5])
        cos_l = -(d @ s.flat.light_n[0])
        np.testing.assert_allclose(pdf, dist**2 / (area * cos_l), rtol=1e-12)

    def test_back_side_sees_nothing(self, cornell):
        # Above the lamp plane the front face is turned away.
        d, dist, rad, pdf = sample_light(cornell, (0.5, 1.0 - 1e-6, 0.5),
                                         0.2, 0.3, 0.3)
        assert pdf == 0 and (rad == 0).all()

    def test_two_lights_picked_evenly(self, cornell):
        fs = cornell.flat
        su = np.sqrt(0.25)
        b0, b1 = 1.0 - su, 0.25 * su
        b2 = 1.0 - b0 - b1
        for u_pick, k in ((0.2, 0), (0.7, 1)):
            d, dist, rad, pdf = sample_light(
                cornell, (0.5, 0.2, 0.5), u_pick, 0.25, 0.25
            )
            want = (b0 * fs.light_v0[k] + b1 * fs.light_v1[k]
                    + b2 * fs.light_v2[k])
            got = np.array([0.5, 0.2, 0.5]) + dist * d
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_pick_statistics(self, cornell):
        # Uniform pick over 2 triangles: frequencies near 1/2.
        rng = np.random.default_rng(9)
        p = np.array([0.5, 0.2, 0.5])
        n0 = 0
        n = 4000
        for _ in range(n):
            u = rng.random(3)
            d, dist, rad, pdf = sample_light(cornell, p, u[0], u[1], u[2])
            if u[0] < 0.5:
                n0 += 1
        assert abs(n0 / n - 0.5) < 0.03

    def test_empty_light_table_raises(self):
        s = _golden_scene()
        with pytest.raises(ValueError):
            sample_light(s, (0, 0, 0), 0.5, 0.5, 0.5)

    def test_floor_direct_light_matches_quadrature(self, cornell):
        # Monte Carlo one-sample NEE estimates against midpoint quadrature
        # over the lamp, both with their own visibility tests.
        p = np.array([0.8, 0.0, 0.8])
        n = np.array([0.0, 1.0, 0.0])
        albedo = np.array([0.73, 0.73, 0.73])
        f_lam = albedo / np.pi

        want = quadrature_direct_light(cornell, p, n, f_lam, grid=120)

        rng = np.random.default_rng(17)
        acc = np.zeros(3)
        n_samples = 20_000
        for _ in range(n_samples):
            u = rng.random(3)
            d, dist, rad, pdf = sample_light(cornell, p, u[0], u[1], u[2])
            if pdf <= 0:
                continue
            cos_s = d @ n
            if cos_s <= 0:
                continue
            shadow = Ray(p, d, t_min=1e-4, t_max=dist * (1 - 1e-3))
            if occluded(cornell, shadow):
                continue
            acc += f_lam * rad * (cos_s / pdf)
        got = acc / n_samples
        np.testing.assert_allclose(got, want, rtol=0.02)
