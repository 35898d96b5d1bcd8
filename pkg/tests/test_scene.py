import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aldus.medium import DustCloud
from aldus.scene import (
    Box, Ellipsoid, Hit, Ray, RayBatch, SceneObject, TriangleMesh, cloud_segments, intersect_box,
    intersect_ellipsoid, intersect_triangle, nearest_hit, nearest_hit_batch, shape_interval_batch,
)

TRI = ((0, 0, 0), (1, 0, 0), (0, 1, 0))


def ray(o, d):
    n = math.sqrt(sum(c * c for c in d))
    return Ray(o, tuple(c / n for c in d))


def box_obj(i, cx, half=1.0, rho=0.5):
    return SceneObject(i, Box((cx + half, 0, 0), (half, half, half)), rho)


class TestIntersectBox:
    def test_head_on(self):
        assert intersect_box(ray((0, 0, 0), (1, 0, 0)), Box((5, 0, 0), (1, 1, 1))) == (4.0, 6.0)

    def test_perpendicular_miss(self):
        assert intersect_box(ray((0, 0, 0), (0, 1, 0)), Box((5, 0, 0), (1, 1, 1))) is None

    def test_interior_origin_clips_to_zero(self):
        assert intersect_box(ray((0, 0, 0), (1, 0, 0)), Box((0, 0, 0), (2, 2, 2))) == (0.0, 2.0)

    def test_box_behind_origin(self):
        assert intersect_box(ray((0, 0, 0), (-1, 0, 0)), Box((5, 0, 0), (1, 1, 1))) is None

    @settings(max_examples=300, deadline=None)
    @given(
        st.tuples(*[st.floats(-20, 20)] * 3),
        st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda d: sum(c * c for c in d) > 1e-3),
        st.tuples(*[st.floats(-10, 10)] * 3),
        st.tuples(*[st.floats(0.1, 5)] * 3),
    )
    def test_midpoint_inside(self, o, d, c, h):
        r = ray(o, d)
        box = Box(c, h)
        iv = intersect_box(r, box)
        if iv is None:
            return
        a, b = iv
        assert 0.0 <= a <= b
        assert box.contains(r.at(0.5 * (a + b)), tol=1e-7)


class TestIntersectTriangle:
    def test_straight_down(self):
        assert intersect_triangle(ray((0.1, 0.1, 1), (0, 0, -1)), TRI) == pytest.approx(1.0)

    def test_outside_barycentric(self):
        assert intersect_triangle(ray((2, 2, 1), (0, 0, -1)), TRI) is None

    def test_oblique(self):
        # hand solve: plane z=0 crossed at (0.5, 0.5, 0), inside; t = |(0.5, 0.5, -2)|
        t = intersect_triangle(ray((0, 0, 2), (0.25, 0.25, -1)), TRI)
        assert t == pytest.approx(2.1213203435596424, abs=1e-12)

    def test_degenerate_rejected_at_load(self):
        with pytest.raises(ValueError, match="degenerate"):
            TriangleMesh((((0, 0, 0), (1, 0, 0), (2, 0, 0)),))


class TestNearestHit:
    def test_car_and_truck(self):
        scene = [box_obj(7, 40.0), box_obj(3, 16.0)]
        assert nearest_hit(ray((0, 0, 0), (1, 0, 0)), scene) == Hit(3, 16.0)

    def test_empty_scene(self):
        assert nearest_hit(ray((0, 0, 0), (1, 0, 0)), []) is None

    def test_tie_lower_id_wins(self):
        scene = [box_obj(9, 10.0), box_obj(2, 10.0)]
        assert nearest_hit(ray((0, 0, 0), (1, 0, 0)), scene).object_id == 2

    def test_triangle_object(self):
        obj = SceneObject(1, TriangleMesh((((5, -1, -1), (5, 1, -1), (5, 0, 2)),)), 0.3)
        assert nearest_hit(ray((0, 0, 0), (1, 0, 0)), [obj]) == Hit(1, 5.0)

    def test_origin_inside_box_sees_past_it(self):
        scene = [SceneObject(0, Box((0, 0, 0), (2, 2, 2)), 0.5), box_obj(1, 10.0)]
        assert nearest_hit(ray((0, 0, 0), (1, 0, 0)), scene) == Hit(1, 10.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(-30, 30), st.floats(-5, 5), st.floats(0.2, 3)), min_size=1, max_size=8),
           st.integers(1, 7), st.floats(-0.3, 0.3))
    def test_decomposable(self, boxes, split, dy):
        objs = [SceneObject(i, Box((x, y, 0), (h, h, h)), 0.5) for i, (x, y, h) in enumerate(boxes)]
        r = ray((0, 0, 0), (1, dy, 0))
        s1, s2 = objs[:split], objs[split:]
        whole = nearest_hit(r, objs)
        parts = [h for h in (nearest_hit(r, s1), nearest_hit(r, s2)) if h is not None]
        if whole is None:
            assert not parts
        else:
            assert whole.range == min(h.range for h in parts)

    def test_batch_matches_scalar(self):
        gen = np.random.default_rng(3)
        objs = [SceneObject(i, Box(gen.uniform(-20, 20, 3), gen.uniform(0.5, 4, 3)), 0.5) for i in range(6)]
        objs.append(SceneObject(6, TriangleMesh(((tuple(gen.uniform(-10, 10, 3)), tuple(gen.uniform(-10, 10, 3)), tuple(gen.uniform(-10, 10, 3))),)), 0.5))
        dirs = gen.normal(size=(400, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs[:50, 1] = 0.0  # exercise zero direction components
        dirs[:50] /= np.linalg.norm(dirs[:50], axis=1, keepdims=True)
        t, ids = nearest_hit_batch(RayBatch((0.5, -0.2, 0.1), dirs), objs)
        for i, d in enumerate(dirs):
            h = nearest_hit(Ray((0.5, -0.2, 0.1), tuple(d)), objs)
            if h is None:
                assert ids[i] == -1
            else:
                assert ids[i] == h.object_id
                assert t[i] == pytest.approx(h.range, abs=1e-9)


def cloud(cid, shape):
    return DustCloud(cid, shape, 1e9, 5e-6)


class TestCloudSegments:
    def test_cloud_front_at_6m(self):
        c = cloud(0, Box((8, 0, 0), (2, 2, 2)))
        assert cloud_segments(ray((0, 0, 0), (1, 0, 0)), [c], 16.0) == [(0, 6.0, 10.0)]

    def test_clipped(self):
        c = cloud(0, Box((8, 0, 0), (2, 2, 2)))
        assert cloud_segments(ray((0, 0, 0), (1, 0, 0)), [c], 8.0) == [(0, 6.0, 8.0)]

    def test_no_clouds(self):
        assert cloud_segments(ray((0, 0, 0), (1, 0, 0)), [], 10.0) == []

    def test_overlapping_sorted(self):
        cs = [cloud(1, Box((9, 0, 0), (2, 1, 1))), cloud(0, Box((6, 0, 0), (2, 1, 1)))]
        assert cloud_segments(ray((0, 0, 0), (1, 0, 0)), cs, 50.0) == [(0, 4.0, 8.0), (1, 7.0, 11.0)]

    @settings(max_examples=200, deadline=None)
    @given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda d: sum(c * c for c in d) > 1e-3),
           st.floats(0.1, 30), st.tuples(*[st.floats(-10, 10)] * 3), st.tuples(*[st.floats(0.5, 6)] * 3))
    def test_within_bounds(self, d, max_t, c, h):
        for shape in (Box(c, h), Ellipsoid(c, h)):
            for _, a, b in cloud_segments(ray((0, 0, 0), d), [cloud(0, shape)], max_t):
                assert 0.0 <= a <= b <= max_t


def test_ellipsoid_matches_marching_oracle():
    """Analytic ellipsoid interval vs. 1e5-step point-in-shape marching on 100 rays."""
    gen = np.random.default_rng(11)
    ell = Ellipsoid((8.0, 1.0, 0.5), (3.0, 2.0, 1.5))
    steps, t_max = 100_000, 20.0
    h = t_max / steps
    ts = (np.arange(steps) + 0.5) * h
    checked = 0
    for _ in range(100):
        target = np.asarray(ell.center) + gen.uniform(-1.2, 1.2, 3) * np.asarray(ell.semi_axes)
        d = target / np.linalg.norm(target)
        r = Ray((0, 0, 0), tuple(d))
        pts = ts[:, None] * d
        inside = (((pts - ell.center) / ell.semi_axes) ** 2).sum(axis=1) <= 1.0
        iv = intersect_ellipsoid(r, ell)
        if not inside.any():
            assert iv is None or iv[1] - iv[0] < 2 * h
            continue
        idx = np.flatnonzero(inside)
        assert iv is not None
        assert abs(iv[0] - ts[idx[0]]) <= h
        assert abs(iv[1] - ts[idx[-1]]) <= h
        checked += 1
    assert checked > 50


def test_ellipsoid_batch_matches_scalar():
    gen = np.random.default_rng(5)
    ell = Ellipsoid((5.0, 0.0, 0.0), (2.0, 3.0, 1.0))
    dirs = gen.normal(size=(300, 3)) + np.array([3.0, 0, 0])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    a, b = shape_interval_batch(RayBatch((0, 0, 0), dirs), ell)
    for i, d in enumerate(dirs):
        iv = intersect_ellipsoid(Ray((0, 0, 0), tuple(d)), ell)
        if iv is None:
            assert not (b[i] >= a[i] and b[i] >= 0)
        else:
            assert max(a[i], 0) == pytest.approx(iv[0], abs=1e-9)
            assert b[i] == pytest.approx(iv[1], abs=1e-9)


def test_ray_requires_unit_direction():
    with pytest.raises(ValueError):
        Ray((0, 0, 0), (1, 1, 0))


def test_scene_object_validation():
    with pytest.raises(ValueError):
        SceneObject(0, Box((0, 0, 0), (1, 1, 1)), 1.5)
    with pytest.raises(ValueError):
        Box((0, 0, 0), (1, 0, 1))
