"""Scenario configuration: YAML schema, strict validation and rendering.

Schema (unknown keys are rejected at every level)::

    sensor: vlp16                # or {preset: vlp16, overrides: {...}}
    pose: {position: [0, 0, 1], yaw_deg: 0}
    scene:
      - {id: 0, label: car, reflectivity: 0.5,
         box: {center: [18.25, -3.1, 0.75], half_extents: [2.25, 0.9, 0.75]}}
      - {id: 1, reflectivity: 0.3, triangles: [[[0,0,0], [1,0,0], [0,1,0]]]}
    clouds:
      - {id: 0, number_density: 1.0e9, particle_radius: 5.0e-6,
         extinction_efficiency: 2.0, backscatter_albedo: 0.5,
         box: {center: [8, 0, 2], half_extents: [2, 6, 2]}}
         # or ellipsoid: {center: [...], semi_axes: [...]}
    seed: 0
    frames: 1
    output: {format: csv, path: "-"}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .medium import DustCloud
from .scene import Box, Ellipsoid, SceneObject, TriangleMesh, validate_scene
from .sensor import Pose, SensorModel, preset

OUTPUT_FORMATS = ("csv", "pcd", "stream")
_SENSOR_OVERRIDE_FIELDS = {f.name for f in fields(SensorModel) if f.init and f.name != "name"}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class OutputSpec:
    format: str = "csv"
    path: str = "-"


@dataclass(frozen=True)
class ScenarioConfig:
    sensor_preset: str
    sensor_overrides: Tuple[Tuple[str, Any], ...] = ()
    pose: Pose = Pose()
    scene: Tuple[SceneObject, ...] = ()
    clouds: Tuple[DustCloud, ...] = ()
    seed: int = 0
    frames: int = 1
    output: OutputSpec = OutputSpec()
    sensor: SensorModel = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scene", tuple(self.scene))
        object.__setattr__(self, "clouds", tuple(self.clouds))
        object.__setattr__(self, "sensor_overrides", tuple(sorted(dict(self.sensor_overrides).items())))
        object.__setattr__(self, "sensor", preset(self.sensor_preset).with_overrides(**dict(self.sensor_overrides)))
        validate_scene(self.scene)
        ids = [c.id for c in self.clouds]
        if len(set(ids)) != len(ids):
            raise ValueError("cloud ids must be unique")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def evolve(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _check_keys(obj: Dict, allowed, required, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}.{key} is required")


def _number(value, where: str) -> float:
    # YAML 1.1 reads "1e9" as a string; accept any float literal
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{where} must be finite, got {value!r}")
    return out


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _vec3(value, where: str) -> Tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where} must be a list of 3 numbers")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))


def _positive_vec3(value, where: str):
    v = _vec3(value, where)
    if min(v) <= 0.0:
        raise ConfigError(f"{where} must be > 0 in every component")
    return v


def _box(obj, where: str) -> Box:
    _check_keys(obj, ("center", "half_extents"), ("center", "half_extents"), where)
    return Box(_vec3(obj["center"], f"{where}.center"), _positive_vec3(obj["half_extents"], f"{where}.half_extents"))


def _ellipsoid(obj, where: str) -> Ellipsoid:
    _check_keys(obj, ("center", "semi_axes"), ("center", "semi_axes"), where)
    return Ellipsoid(_vec3(obj["center"], f"{where}.center"), _positive_vec3(obj["semi_axes"], f"{where}.semi_axes"))


def _range_check(value: float, where: str, lo=None, hi=None, lo_open=False) -> float:
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(f"{where} must be {'>' if lo_open else '>='} {lo:g}")
    if hi is not None and value > hi:
        raise ConfigError(f"{where} must be <= {hi:g}")
    return value


def _scene_object(obj, where: str) -> SceneObject:
    _check_keys(obj, ("id", "label", "reflectivity", "box", "triangles"), ("id", "reflectivity"), where)
    oid = _integer(obj["id"], f"{where}.id")
    if oid < 0:
        raise ConfigError(f"{where}.id must be >= 0")
    rho = _range_check(_number(obj["reflectivity"], f"{where}.reflectivity"), f"{where}.reflectivity", 0.0, 1.0)
    if ("box" in obj) == ("triangles" in obj):
        raise ConfigError(f"{where} must define exactly one of 'box' or 'triangles'")
    if "box" in obj:
        geom = _box(obj["box"], f"{where}.box")
    else:
        tris = obj["triangles"]
        if not isinstance(tris, list) or not tris:
            raise ConfigError(f"{where}.triangles must be a non-empty list")
        parsed = []
        for i, tri in enumerate(tris):
            if not isinstance(tri, list) or len(tri) != 3:
                raise ConfigError(f"{where}.triangles[{i}] must have 3 vertices")
            parsed.append(tuple(_vec3(v, f"{where}.triangles[{i}][{j}]") for j, v in enumerate(tri)))
        try:
            geom = TriangleMesh(tuple(parsed))
        except ValueError as exc:
            raise ConfigError(f"{where}.triangles: {exc}") from None
    label = obj.get("label", "")
    if not isinstance(label, str):
        raise ConfigError(f"{where}.label must be text")
    return SceneObject(oid, geom, rho, label)


def _cloud(obj, where: str) -> DustCloud:
    keys = ("id", "box", "ellipsoid", "number_density", "particle_radius", "extinction_efficiency", "backscatter_albedo")
    _check_keys(obj, keys, ("id", "number_density", "particle_radius"), where)
    cid = _integer(obj["id"], f"{where}.id")
    if ("box" in obj) == ("ellipsoid" in obj):
        raise ConfigError(f"{where} must define exactly one of 'box' or 'ellipsoid'")
    shape = _box(obj["box"], f"{where}.box") if "box" in obj else _ellipsoid(obj["ellipsoid"], f"{where}.ellipsoid")
    n = _range_check(_number(obj["number_density"], f"{where}.number_density"), f"{where}.number_density", 0.0)
    r = _range_check(_number(obj["particle_radius"], f"{where}.particle_radius"), f"{where}.particle_radius", 0.0, lo_open=True)
    q = _range_check(
        _number(obj.get("extinction_efficiency", 2.0), f"{where}.extinction_efficiency"),
        f"{where}.extinction_efficiency", 0.0, lo_open=True,
    )
    w = _range_check(
        _number(obj.get("backscatter_albedo", 0.5), f"{where}.backscatter_albedo"), f"{where}.backscatter_albedo", 0.0, 1.0
    )
    return DustCloud(cid, shape, n, r, q, w)


def _sensor(value) -> Tuple[str, Dict[str, Any]]:
    if isinstance(value, str):
        name, overrides = value, {}
    else:
        _check_keys(value, ("preset", "overrides"), ("preset",), "sensor")
        name, overrides = value["preset"], value.get("overrides") or {}
        if not isinstance(overrides, dict):
            raise ConfigError("sensor.overrides must be a mapping")
    try:
        preset(name)
    except ValueError as exc:
        raise ConfigError(f"sensor.preset: {exc}") from None
    unknown = sorted(set(overrides) - _SENSOR_OVERRIDE_FIELDS)
    if unknown:
        raise ConfigError(f"sensor.overrides: unknown key(s) {unknown}; allowed: {sorted(_SENSOR_OVERRIDE_FIELDS)}")
    clean = {}
    for key, v in overrides.items():
        where = f"sensor.overrides.{key}"
        if key == "vertical_angles":
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{where} must be a non-empty list")
            clean[key] = tuple(_number(a, f"{where}[{i}]") for i, a in enumerate(v))
        elif key == "azimuth_steps":
            clean[key] = _integer(v, where)
        elif key == "return_mode":
            clean[key] = str(v)
        else:
            clean[key] = _number(v, where)
    return name, clean


def config_from_dict(data: Dict) -> ScenarioConfig:
    keys = ("sensor", "pose", "scene", "clouds", "seed", "frames", "output")
    _check_keys(data, keys, ("sensor",), "config")
    name, overrides = _sensor(data["sensor"])

    pose_obj = data.get("pose") or {}
    _check_keys(pose_obj, ("position", "yaw_deg"), (), "pose")
    pose = Pose(
        _vec3(pose_obj.get("position", [0, 0, 0]), "pose.position"),
        _number(pose_obj.get("yaw_deg", 0.0), "pose.yaw_deg"),
    )

    scene_list = data.get("scene") or []
    if not isinstance(scene_list, list):
        raise ConfigError("scene must be a list")
    scene = tuple(_scene_object(o, f"scene[{i}]") for i, o in enumerate(scene_list))
    ids = [o.id for o in scene]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"scene: duplicate object id(s) {dup}")

    cloud_list = data.get("clouds") or []
    if not isinstance(cloud_list, list):
        raise ConfigError("clouds must be a list")
    clouds = tuple(_cloud(c, f"clouds[{i}]") for i, c in enumerate(cloud_list))
    cids = [c.id for c in clouds]
    dup = sorted({i for i in cids if cids.count(i) > 1})
    if dup:
        raise ConfigError(f"clouds: duplicate cloud id(s) {dup}")

    seed = _integer(data.get("seed", 0), "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    frames = _integer(data.get("frames", 1), "frames")
    if frames < 1:
        raise ConfigError("frames must be >= 1")

    out_obj = data.get("output") or {}
    _check_keys(out_obj, ("format", "path"), (), "output")
    fmt = out_obj.get("format", "csv")
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"output.format must be one of {list(OUTPUT_FORMATS)}, got {fmt!r}")
    output = OutputSpec(fmt, str(out_obj.get("path", "-")))

    try:
        return ScenarioConfig(name, tuple(overrides.items()), pose, scene, clouds, seed, frames, output)
    except ValueError as exc:
        raise ConfigError(f"sensor.overrides: {exc}") from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a YAML scenario."""
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML syntax error{where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error: {exc}") from None
    if data is None:
        raise ConfigError("config is empty")
    return config_from_dict(data)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _shape_dict(shape) -> Dict:
    if isinstance(shape, Box):
        return {"box": {"center": list(shape.center), "half_extents": list(shape.half_extents)}}
    return {"ellipsoid": {"center": list(shape.center), "semi_axes": list(shape.semi_axes)}}


def config_to_dict(config: ScenarioConfig) -> Dict:
    scene = []
    for o in config.scene:
        item = {"id": o.id, "label": o.label, "reflectivity": o.reflectivity}
        if isinstance(o.geometry, Box):
            item.update(_shape_dict(o.geometry))
        else:
            item["triangles"] = [[list(v) for v in tri] for tri in o.geometry.triangles]
        scene.append(item)
    clouds = []
    for c in config.clouds:
        item = {
            "id": c.id,
            "number_density": c.number_density,
            "particle_radius": c.particle_radius,
            "extinction_efficiency": c.extinction_efficiency,
            "backscatter_albedo": c.backscatter_albedo,
        }
        item.update(_shape_dict(c.shape))
        clouds.append(item)
    overrides = {k: (list(v) if isinstance(v, tuple) else v) for k, v in config.sensor_overrides}
    return {
        "sensor": {"preset": config.sensor_preset, "overrides": overrides},
        "pose": {"position": list(config.pose.position), "yaw_deg": config.pose.yaw_deg},
        "scene": scene,
        "clouds": clouds,
        "seed": config.seed,
        "frames": config.frames,
        "output": {"format": config.output.format, "path": config.output.path},
    }


def render_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)
