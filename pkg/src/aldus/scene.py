"""Scene description and exact ray/geometry intersection.

Opaque targets are axis-aligned boxes or triangle lists. Cloud volumes reuse
the same primitives (boxes) plus ellipsoids. Every scalar operation has a
batched numpy counterpart (``*_batch``) used by the frame engine; the scalar
forms are the reference contracts and are what the tests pin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

Vec3 = Tuple[float, float, float]

# Rays must advance this far before an opaque surface counts as a hit.
HIT_EPS = 1e-9
MIN_TRIANGLE_AREA = 1e-12


def as_vec3(v) -> Vec3:
    x, y, z = (float(c) for c in v)
    return (x, y, z)


def normalize(v) -> Vec3:
    x, y, z = as_vec3(v)
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (x / n, y / n, z / n)


@dataclass(frozen=True)
class Box:
    center: Vec3
    half_extents: Vec3

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "half_extents", as_vec3(self.half_extents))
        if min(self.half_extents) <= 0.0:
            raise ValueError(f"box half_extents must be > 0, got {self.half_extents}")

    @property
    def lo(self) -> Vec3:
        return tuple(c - h for c, h in zip(self.center, self.half_extents))

    @property
    def hi(self) -> Vec3:
        return tuple(c + h for c, h in zip(self.center, self.half_extents))

    def contains(self, p, tol: float = 0.0) -> bool:
        return all(abs(pi - ci) <= hi + tol for pi, ci, hi in zip(p, self.center, self.half_extents))

    def translated(self, offset) -> "Box":
        return Box(tuple(c + o for c, o in zip(self.center, offset)), self.half_extents)


@dataclass(frozen=True)
class Ellipsoid:
    center: Vec3
    semi_axes: Vec3

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "semi_axes", as_vec3(self.semi_axes))
        if min(self.semi_axes) <= 0.0:
            raise ValueError(f"ellipsoid semi_axes must be > 0, got {self.semi_axes}")

    def contains(self, p, tol: float = 0.0) -> bool:
        s = sum(((pi - ci) / ai) ** 2 for pi, ci, ai in zip(p, self.center, self.semi_axes))
        return s <= (1.0 + tol) ** 2

    def translated(self, offset) -> "Ellipsoid":
        return Ellipsoid(tuple(c + o for c, o in zip(self.center, offset)), self.semi_axes)


Triangle = Tuple[Vec3, Vec3, Vec3]


def triangle_area(tri: Triangle) -> float:
    a, b, c = (np.asarray(v, dtype=float) for v in tri)
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


@dataclass(frozen=True)
class TriangleMesh:
    triangles: Tuple[Triangle, ...]

    def __post_init__(self):
        tris = tuple(tuple(as_vec3(v) for v in tri) for tri in self.triangles)
        if not tris:
            raise ValueError("triangle list must not be empty")
        for i, tri in enumerate(tris):
            if len(tri) != 3:
                raise ValueError(f"triangle {i} must have exactly 3 vertices")
            if triangle_area(tri) <= MIN_TRIANGLE_AREA:
                raise ValueError(f"triangle {i} is degenerate (area <= {MIN_TRIANGLE_AREA} m^2)")
        object.__setattr__(self, "triangles", tris)


Geometry = Union[Box, TriangleMesh]
Shape = Union[Box, Ellipsoid]


@dataclass(frozen=True)
class SceneObject:
    id: int
    geometry: Geometry
    reflectivity: float
    label: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"object id must be >= 0, got {self.id}")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity must be in [0, 1], got {self.reflectivity}")


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    direction: Vec3
    channel: int = 0
    azimuth_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin))
        object.__setattr__(self, "direction", as_vec3(self.direction))
        n = math.sqrt(sum(c * c for c in self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {n!r}")

    def at(self, t: float) -> Vec3:
        return tuple(o + t * d for o, d in zip(self.origin, self.direction))


@dataclass(frozen=True)
class Hit:
    object_id: int
    range: float


def validate_scene(objects: Sequence[SceneObject]) -> None:
    seen = set()
    for obj in objects:
        if obj.id in seen:
            raise ValueError(f"duplicate scene object id {obj.id}")
        seen.add(obj.id)


# ---------------------------------------------------------------------------
# scalar reference intersections
# ---------------------------------------------------------------------------

def _slab_interval(origin, direction, lo, hi) -> Optional[Tuple[float, float]]:
    t_enter, t_exit = -math.inf, math.inf
    for o, d, l, h in zip(origin, direction, lo, hi):
        if d == 0.0:
            if o < l or o > h:
                return None
            continue
        t0, t1 = (l - o) / d, (h - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        t_enter = max(t_enter, t0)
        t_exit = min(t_exit, t1)
    if t_enter > t_exit:
        return None
    return t_enter, t_exit


def _ellipsoid_interval(origin, direction, ell: Ellipsoid) -> Optional[Tuple[float, float]]:
    o = [(oi - ci) / ai for oi, ci, ai in zip(origin, ell.center, ell.semi_axes)]
    d = [di / ai for di, ai in zip(direction, ell.semi_axes)]
    a = sum(x * x for x in d)
    b = sum(x * y for x, y in zip(o, d))
    c = sum(x * x for x in o) - 1.0
    disc = b * b - a * c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    return (-b - root) / a, (-b + root) / a


def shape_interval(ray: Ray, shape: Shape) -> Optional[Tuple[float, float]]:
    """Unclipped parametric interval of ``ray``'s line inside ``shape``."""
    if isinstance(shape, Box):
        return _slab_interval(ray.origin, ray.direction, shape.lo, shape.hi)
    if isinstance(shape, Ellipsoid):
        return _ellipsoid_interval(ray.origin, ray.direction, shape)
    raise TypeError(f"unsupported shape {type(shape).__name__}")


def intersect_box(ray: Ray, box: Box) -> Optional[Tuple[float, float]]:
    """Slab test clipped to ``t >= 0``; ``None`` on a miss or a box behind the origin."""
    iv = _slab_interval(ray.origin, ray.direction, box.lo, box.hi)
    if iv is None or iv[1] < 0.0:
        return None
    return max(iv[0], 0.0), iv[1]


def intersect_ellipsoid(ray: Ray, ell: Ellipsoid) -> Optional[Tuple[float, float]]:
    iv = _ellipsoid_interval(ray.origin, ray.direction, ell)
    if iv is None or iv[1] < 0.0:
        return None
    return max(iv[0], 0.0), iv[1]


def intersect_triangle(ray: Ray, tri: Triangle) -> Optional[float]:
    """Moller-Trumbore; returns the hit distance ``t > 0`` or ``None``."""
    v0, v1, v2 = (np.asarray(v, dtype=float) for v in tri)
    d = np.asarray(ray.direction)
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(d, e2)
    det = float(e1 @ p)
    if abs(det) < 1e-15:
        return None
    inv = 1.0 / det
    s = np.asarray(ray.origin) - v0
    u = float(s @ p) * inv
    if u < 0.0 or u > 1.0:
        return None
    q = np.cross(s, e1)
    v = float(d @ q) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = float(e2 @ q) * inv
    return t if t > HIT_EPS else None


def object_hit_distance(ray: Ray, obj: SceneObject) -> Optional[float]:
    """Distance to the first surface of ``obj`` hit from outside.

    An origin inside a box sees nothing of that box (back faces are culled),
    so sensors mounted inside enclosures still see past them.
    """
    geom = obj.geometry
    if isinstance(geom, Box):
        iv = _slab_interval(ray.origin, ray.direction, geom.lo, geom.hi)
        if iv is None or iv[0] <= HIT_EPS:
            return None
        return iv[0]
    best = None
    for tri in geom.triangles:
        t = intersect_triangle(ray, tri)
        if t is not None and (best is None or t < best):
            best = t
    return best


def nearest_hit(ray: Ray, scene: Sequence[SceneObject]) -> Optional[Hit]:
    best: Optional[Hit] = None
    for obj in sorted(scene, key=lambda o: o.id):
        t = object_hit_distance(ray, obj)
        if t is not None and (best is None or t < best.range):
            best = Hit(obj.id, t)
    return best


def cloud_segments(ray: Ray, clouds, max_t: float) -> list:
    """In-cloud intervals ``(cloud_id, t_in, t_out)`` clipped to ``[0, max_t]``.

    Intervals of distinct clouds may overlap; they are sorted by ``t_in``
    (then cloud id).
    """
    if max_t <= 0.0:
        raise ValueError("max_t must be > 0")
    out = []
    for cloud in clouds:
        iv = shape_interval(ray, cloud.shape)
        if iv is None:
            continue
        t_in, t_out = max(iv[0], 0.0), min(iv[1], max_t)
        if t_in < t_out:
            out.append((cloud.id, t_in, t_out))
    out.sort(key=lambda s: (s[1], s[0]))
    return out


# ---------------------------------------------------------------------------
# batched intersections: one origin, many directions
# ---------------------------------------------------------------------------

class RayBatch:
    """Rays sharing one origin; caches reciprocal directions for slab tests."""

    def __init__(self, origin, directions: np.ndarray):
        self.origin = np.asarray(origin, dtype=float)
        self.directions = np.ascontiguousarray(directions, dtype=float)
        self.zero = self.directions == 0.0
        with np.errstate(divide="ignore"):
            self.inv = 1.0 / self.directions
        # per-axis contiguous copies; 1-D ufuncs beat reductions over a length-3 axis
        self._inv_cols = [np.ascontiguousarray(self.inv[:, k]) for k in range(3)]
        self._zero_cols = [self.zero[:, k] if self.zero[:, k].any() else None for k in range(3)]

    def __len__(self) -> int:
        return self.directions.shape[0]

    def subset(self, idx) -> "RayBatch":
        return RayBatch(self.origin, self.directions[idx])


def slab_interval_batch(rays: RayBatch, lo, hi) -> Tuple[np.ndarray, np.ndarray]:
    """Raw slab intervals; misses come back with ``t_enter > t_exit``."""
    lo = np.asarray(lo, dtype=float) - rays.origin
    hi = np.asarray(hi, dtype=float) - rays.origin
    t_enter = t_exit = None
    for k in range(3):
        inv = rays._inv_cols[k]
        with np.errstate(invalid="ignore"):
            t0 = lo[k] * inv
            t1 = hi[k] * inv
        tmin = np.minimum(t0, t1)
        tmax = np.maximum(t0, t1)
        zero = rays._zero_cols[k]
        if zero is not None:
            inside = lo[k] <= 0.0 <= hi[k]
            tmin[zero] = -np.inf if inside else np.inf
            tmax[zero] = np.inf if inside else -np.inf
        if t_enter is None:
            t_enter, t_exit = tmin, tmax
        else:
            np.maximum(t_enter, tmin, out=t_enter)
            np.minimum(t_exit, tmax, out=t_exit)
    return t_enter, t_exit


def ellipsoid_interval_batch(rays: RayBatch, ell: Ellipsoid) -> Tuple[np.ndarray, np.ndarray]:
    axes = np.asarray(ell.semi_axes)
    o = (rays.origin - np.asarray(ell.center)) / axes
    d = rays.directions / axes
    a = np.einsum("ij,ij->i", d, d)
    b = d @ o
    c = float(o @ o) - 1.0
    disc = b * b - a * c
    miss = disc < 0.0
    root = np.sqrt(np.where(miss, 0.0, disc))
    t0 = (-b - root) / a
    t1 = (-b + root) / a
    t0[miss] = np.inf
    t1[miss] = -np.inf
    return t0, t1


def shape_interval_batch(rays: RayBatch, shape: Shape) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(shape, Box):
        return slab_interval_batch(rays, shape.lo, shape.hi)
    if isinstance(shape, Ellipsoid):
        return ellipsoid_interval_batch(rays, shape)
    raise TypeError(f"unsupported shape {type(shape).__name__}")


def triangle_hit_batch(rays: RayBatch, tri: Triangle) -> np.ndarray:
    """Moller-Trumbore over a batch; ``inf`` where the triangle is missed."""
    v0, v1, v2 = (np.asarray(v, dtype=float) for v in tri)
    e1, e2 = v1 - v0, v2 - v0
    d = rays.directions
    p = np.cross(d, e2)
    det = p @ e1
    ok = np.abs(det) >= 1e-15
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    s = rays.origin - v0
    u = (p @ s) * inv
    q = np.cross(s, e1)
    v = (d @ q) * inv
    t = float(e2 @ q) * inv
    ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > HIT_EPS)
    return np.where(ok, t, np.inf)


def object_hit_batch(rays: RayBatch, obj: SceneObject) -> np.ndarray:
    geom = obj.geometry
    if isinstance(geom, Box):
        t_enter, t_exit = slab_interval_batch(rays, geom.lo, geom.hi)
        return np.where((t_enter > HIT_EPS) & (t_enter <= t_exit), t_enter, np.inf)
    best = np.full(len(rays), np.inf)
    for tri in geom.triangles:
        np.minimum(best, triangle_hit_batch(rays, tri), out=best)
    return best


def nearest_hit_batch(rays: RayBatch, scene: Sequence[SceneObject]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-ray ``(range, object_id)``; ``inf`` / ``-1`` where nothing is hit."""
    best_t = np.full(len(rays), np.inf)
    best_id = np.full(len(rays), -1, dtype=np.int64)
    for obj in sorted(scene, key=lambda o: o.id):
        t = object_hit_batch(rays, obj)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_id[closer] = obj.id
    return best_t, best_id
