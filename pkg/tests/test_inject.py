import math

import numpy as np
import pytest

from aldus.formats import FormatError, RecordedPoint, read_csv, write_csv
from aldus.inject import InjectError, inject_dust, inject_frames, points_from_frame
from aldus.medium import DustCloud
from aldus.scene import Box
from aldus.sensor import preset
from aldus.sim import KIND_DUST, simulate_frame

VLP = preset("vlp16").with_overrides(range_noise_sigma=0.0)
# channel 7 of the vlp16 is the -1 degree beam
CH_FLAT = 7


def slab(density, x0=6.0, x1=10.0, radius=5e-6):
    return DustCloud(0, Box(((x0 + x1) / 2, 0.0, 0.0), ((x1 - x0) / 2, 30.0, 30.0)), density, radius)


def density_for(alpha_l, length=4.0, radius=5e-6):
    return alpha_l / (length * 2.0 * math.pi * radius**2)


def test_identity_without_clouds(clear_cfg):
    text = write_csv(simulate_frame(clear_cfg.evolve(sensor_overrides=(("range_noise_sigma", 0.03),))))
    frames, report = inject_frames(read_csv(text), [], clear_cfg.sensor, 7, clear_cfg.pose)
    assert report.kept == report.total == len(text.splitlines()) - 1
    assert write_csv(frames[0]) == text


def test_identity_when_beams_miss_cloud(clear_cfg):
    text = write_csv(simulate_frame(clear_cfg))
    far = DustCloud(0, Box((0.0, 0.0, 500.0), (1.0, 1.0, 1.0)), 1e12, 5e-6)
    frames, report = inject_frames(read_csv(text), [far], clear_cfg.sensor, 0, clear_cfg.pose)
    assert report.kept == report.total
    assert write_csv(frames[0]) == text


def test_dense_cloud_replaces_point():
    p = RecordedPoint(CH_FLAT, 0.0, 16.0, 120)
    (out,), report = inject_dust([p], [slab(1e11)], VLP)
    assert report.replaced == 1
    assert out.kind == "dust" and out.source_id == 0
    assert 6.0 <= out.range <= 10.0


def test_light_cloud_attenuates():
    cloud = slab(density_for(0.01))
    n = 4000
    pts = [RecordedPoint(CH_FLAT, 0.0, 16.0, 200, frame_id=k) for k in range(n)]
    out, report = inject_dust(pts, [cloud], VLP, seed=3)
    assert report.total == n and report.dropped == 0
    target = [r for r in out if r.kind == "target"]
    assert {r.intensity for r in target} == {round(200 * math.exp(-0.02))}
    assert round(200 * math.exp(-0.02)) == 196
    p = 1.0 - math.exp(-0.01)
    sd = math.sqrt(n * p * (1 - p))
    assert abs(report.replaced - n * p) < 4 * sd
    assert report.attenuated == n - report.replaced


def test_attenuation_below_threshold_drops():
    p = RecordedPoint(CH_FLAT, 0.0, 16.0, 1)
    cloud = slab(density_for(0.6))
    # find a seed whose draw passes through the cloud
    for seed in range(50):
        _, report = inject_dust([p], [cloud], VLP, seed=seed)
        if report.replaced == 0:
            break
    assert report.dropped == 1 and report.attenuated == 0


def test_report_counts_and_segments(low_cfg):
    frame = simulate_frame(low_cfg.evolve(clouds=()))
    pts = points_from_frame(frame)
    frames, report = inject_frames(pts, low_cfg.clouds, low_cfg.sensor, 11, low_cfg.pose)
    assert report.total == len(pts)
    assert report.kept + report.attenuated + report.replaced == len(frames[0])
    f = frames[0]
    dust = f.kind == KIND_DUST
    assert dust.sum() == report.replaced > 0
    lo, hi = low_cfg.clouds[0].shape.lo, low_cfg.clouds[0].shape.hi
    assert np.all(f.points[dust] >= np.array(lo) - 1e-6)
    assert np.all(f.points[dust] <= np.array(hi) + 1e-6)
    assert f.dropped_count == report.dropped


def test_multi_frame_runs():
    pts = [RecordedPoint(CH_FLAT, 0.0, 16.0, 100, frame_id=k // 3) for k in range(9)]
    frames, report = inject_frames(pts, [], VLP)
    assert [f.frame_id for f in frames] == [0, 1, 2] and report.kept == 9


def test_rejects_unknown_channel():
    with pytest.raises(InjectError, match=r"channel\(s\) \[16\]"):
        inject_frames([RecordedPoint(16, 0.0, 10.0, 10)], [], VLP)


def test_csv_error_line():
    from aldus.formats import CSV_HEADER

    text = CSV_HEADER + "\n" + "0,1,0.2,-13,16,1,2,3,40,target,3\n" * 3 + "0,1,0.2,-13,oops,1,2,3,40,target,3\n"
    with pytest.raises(FormatError) as err:
        read_csv(text)
    assert err.value.line == 5
