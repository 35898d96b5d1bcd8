"""Real-time LIDAR simulation with airborne dust and smoke clouds."""

from .config import ConfigError, ScenarioConfig, load_config, parse_config, render_config
from .medium import DustCloud, ScatterEvent, extinction_coefficient, sample_scatter, transmittance
from .scene import Box, Ellipsoid, Ray, SceneObject, TriangleMesh, nearest_hit
from .sensor import IntensityCalib, Pose, SensorModel, preset, scan_rays
from .sim import Frame, LidarReturn, run_scenario, simulate_beam, simulate_frame

__version__ = "0.1.0"
