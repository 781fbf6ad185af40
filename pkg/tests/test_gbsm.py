"""Stochastic cluster generator: determinism, power bookkeeping, kinematics."""

import math

import numpy as np
import pytest
from scipy.constants import c as C0

from dcmkit import (AntennaArray, ClusterRay, DynamicCluster, GbsmConfig, Taps,
                    cluster_state_at, dynamic_cir, ray_delay, spawn_clusters)

LOC = ((0.0, 0.0, 0.0), (50.0, 0.0, 0.0))


def one_ray_cluster(d_t=50.0, d_r=65.0, aod=(0.0, 0.0), aoa=(0.0, math.pi / 2),
                    vel_a=(0.0, 0.0, 0.0), vel_z=(0.0, 0.0, 0.0),
                    virtual=0.0, power=1.0):
    ray = ClusterRay(aod_offset=(0.0, 0.0), aoa_offset=(0.0, 0.0),
                     fraction=1.0, phases=(0.0, 0.0, 0.0, 0.0), xpr=math.inf)
    return DynamicCluster(id=0, power=power, d_t0=d_t, aod=aod, d_r0=d_r,
                          aoa=aoa, velocity_a=vel_a, velocity_z=vel_z,
                          virtual_delay=virtual, rays=(ray,))


def test_spawn_is_deterministic():
    cfg = GbsmConfig(seed=42)
    assert spawn_clusters(cfg, LOC) == spawn_clusters(cfg, LOC)
    assert spawn_clusters(cfg, LOC) != spawn_clusters(cfg.with_overrides(seed=43), LOC)
    other = ((0.0, 0.0, 0.0), (51.0, 0.0, 0.0))
    assert spawn_clusters(cfg, LOC) != spawn_clusters(cfg, other)


def test_cluster_streams_are_order_independent():
    # cluster n draws the same values no matter how many siblings exist
    cfg5 = GbsmConfig(seed=9, n_clusters=5)
    cfg15 = GbsmConfig(seed=9, n_clusters=15)
    a = spawn_clusters(cfg5, LOC)
    b = spawn_clusters(cfg15, LOC)
    for i in range(5):
        assert a[i].aod == b[i].aod
        assert a[i].d_t0 == b[i].d_t0
        assert a[i].rays == b[i].rays
        # powers renormalize across the ensemble, so those differ
    assert abs(sum(c.power for c in a) - 1.0) < 1e-12
    assert abs(sum(c.power for c in b) - 1.0) < 1e-12


def test_cluster_power_normalization():
    clusters = spawn_clusters(GbsmConfig(seed=3), LOC)
    assert len(clusters) == 15
    assert abs(math.fsum(c.power for c in clusters) - 1.0) < 1e-12
    for c in clusters:
        assert c.power > 0.0
        assert abs(math.fsum(r.fraction for r in c.rays) - 1.0) < 1e-12
        assert len(c.rays) == 10


def test_draws_respect_configured_ranges():
    cfg = GbsmConfig(seed=11, n_clusters=40,
                     anchor_range=(30.0, 40.0),
                     elevation_range=(-0.1, 0.1),
                     azimuth_range=(0.5, 1.0))
    for c in spawn_clusters(cfg, LOC):
        assert 30.0 <= c.d_t0 <= 40.0
        assert 30.0 <= c.d_r0 <= 40.0
        assert -0.1 <= c.aod[0] <= 0.1
        assert 0.5 <= c.aod[1] <= 1.0
        assert 0.5 <= c.aoa[1] <= 1.0
        assert c.virtual_delay >= 0.0


def test_speed_scales_velocities_without_redrawing():
    slow = spawn_clusters(GbsmConfig(seed=5, cluster_speed=0.5), LOC)
    fast = spawn_clusters(GbsmConfig(seed=5, cluster_speed=1.0), LOC)
    for a, b in zip(slow, fast):
        assert a.aod == b.aod and a.aoa == b.aoa
        assert a.power == b.power
        assert a.virtual_delay == b.virtual_delay
        assert a.velocity_a[1:] == b.velocity_a[1:]  # same direction draws
        assert b.velocity_a[0] == 2.0 * a.velocity_a[0]
        assert b.velocity_z[0] == 2.0 * a.velocity_z[0]


def test_anchor_displacement_is_speed_times_time():
    cluster = spawn_clusters(GbsmConfig(seed=1, n_clusters=1), LOC)[0]
    before = cluster_state_at(cluster, 0.0)
    after = cluster_state_at(cluster, 1.0)
    moved_tx = np.linalg.norm(after.tx_anchors - before.tx_anchors, axis=1)
    moved_rx = np.linalg.norm(after.rx_anchors - before.rx_anchors, axis=1)
    assert np.allclose(moved_tx, 0.5, atol=1e-12)
    assert np.allclose(moved_rx, 0.5, atol=1e-12)
    with pytest.raises(ValueError):
        cluster_state_at(cluster, -0.1)


def test_ray_delay_matches_geometry():
    cl = one_ray_cluster(virtual=25e-9)
    expected = (50.0 + 65.0) / C0 + 25e-9
    assert abs(ray_delay(cl, 0, 0.0) - expected) < 1e-18
    # element offsets shorten or stretch the legs
    shifted = ray_delay(cl, 0, 0.0, tx_offset=(1.0, 0.0, 0.0))
    assert abs(shifted - ((49.0 + 65.0) / C0 + 25e-9)) < 1e-18
    with pytest.raises(ValueError):
        ray_delay(cl, 5, 0.0)


def test_radial_recession_doppler():
    # both anchors recede along their own radial: delay rate is exactly 1/c
    cl = one_ray_cluster(aod=(0.0, 0.0), aoa=(0.0, 0.0),
                         vel_a=(0.5, 0.0, 0.0), vel_z=(0.5, 0.0, 0.0))
    h = 1e-3
    rate = (ray_delay(cl, 0, h) - ray_delay(cl, 0, 0.0)) / h
    assert abs(rate - 1.0 / C0) < 1e-9 / C0
    # carrier phase drift in the synthesized taps matches -f_c * rate
    # taps keep exp(+j 2 pi f_c tau): a growing delay advances the phase at
    # +f_c/c m/s; the spectral transform maps that to negative Doppler
    cfg = GbsmConfig(n_clusters=1, rays_per_cluster=1)
    arr = AntennaArray()
    t0 = dynamic_cir((cl,), arr, arr, 0.0, cfg)[(0, 0)]
    t1 = dynamic_cir((cl,), arr, arr, h, cfg)[(0, 0)]
    phase_step = np.angle(t1.amps[0] / t0.amps[0])
    drift = phase_step / (2.0 * math.pi * h)
    expected = cfg.carrier_frequency / C0
    assert abs(drift - expected) < 1e-3 * expected
    assert abs(expected - 18.346) < 0.01


def test_dynamic_cir_unit_power():
    cfg = GbsmConfig(seed=8)
    clusters = spawn_clusters(cfg, LOC)
    arr = AntennaArray()
    taps = dynamic_cir(clusters, arr, arr, 0.0, cfg)[(0, 0)]
    assert len(taps) == 150
    assert abs(taps.power - 1.0) < 1e-9
    assert all(k.startswith("dyn:") for k in taps.kinds)


def test_dynamic_cir_covers_all_pairs():
    cfg = GbsmConfig(seed=8, n_clusters=2)
    clusters = spawn_clusters(cfg, LOC)
    out = dynamic_cir(clusters, AntennaArray(n_elements=2),
                      AntennaArray(n_elements=3), 0.0, cfg)
    assert set(out) == {(v, u) for v in range(2) for u in range(3)}
    powers = [out[k].power for k in sorted(out)]
    assert np.allclose(powers, 1.0, atol=1e-9)


def test_empty_cluster_list():
    cfg = GbsmConfig(n_clusters=0)
    assert spawn_clusters(cfg, LOC) == ()
    out = dynamic_cir((), AntennaArray(), AntennaArray(), 0.0, cfg)
    assert len(out[(0, 0)]) == 0
    assert out[(0, 0)].power == 0.0


def test_taps_merge_keeps_delay_order():
    a = Taps(np.array([3e-7, 1e-7]), np.array([1 + 0j, 2 + 0j]), ("x", "y"))
    b = Taps(np.array([2e-7]), np.array([3 + 0j]), ("z",))
    merged = a.merged(b)
    assert list(merged.delays) == sorted([1e-7, 2e-7, 3e-7])
    assert merged.kinds == ("y", "z", "x")
    assert abs(merged.power - (1 + 4 + 9)) < 1e-12
    scaled = merged.scaled(0.5)
    assert abs(scaled.power - merged.power * 0.25) < 1e-12


def test_antenna_array_geometry():
    arr = AntennaArray(n_elements=4, spacing=0.03, orientation=(0.0, math.pi / 2))
    assert np.allclose(arr.element_offset(0), [0, 0, 0])
    assert np.allclose(arr.element_offset(2), [0, 0.06, 0], atol=1e-12)
    with pytest.raises(ValueError):
        arr.element_offset(4)
    with pytest.raises(ValueError):
        AntennaArray(n_elements=0)
    with pytest.raises(ValueError):
        AntennaArray(spacing=0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        GbsmConfig(n_clusters=-1)
    with pytest.raises(ValueError):
        GbsmConfig(rays_per_cluster=0)
    with pytest.raises(ValueError):
        GbsmConfig(delay_decay=0.0)
    with pytest.raises(ValueError):
        GbsmConfig(anchor_range=(0.0, 10.0))
    with pytest.raises(ValueError):
        GbsmConfig(cluster_speed=-1.0)
    cfg = GbsmConfig().with_overrides(n_clusters=7, seed=99)
    assert cfg.n_clusters == 7 and cfg.seed == 99
    assert GbsmConfig().n_clusters == 15


def test_dynamic_rays_identified_by_cluster_and_ray():
    cfg = GbsmConfig(seed=2, n_clusters=2, rays_per_cluster=3)
    clusters = spawn_clusters(cfg, LOC)
    taps = dynamic_cir(clusters, AntennaArray(), AntennaArray(), 0.0, cfg)[(0, 0)]
    assert set(taps.kinds) == {f"dyn:{c}:{r}" for c in range(2) for r in range(3)}
