"""Stochastic moving-cluster synthesis for the dynamic channel part.

Dynamic scatterers are grouped into clusters anchored near the link ends
(twin-cluster layout): each cluster owns an anchor direction and distance on
the transmit side and another on the receive side, a virtual delay that
stands in for the unobserved bounce in between, a constant velocity per
side, and a bundle of rays with small angle offsets.  Everything is drawn
from counter-based seeded streams so a (seed, config, location) triple
always produces the same ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

DEFAULT_CARRIER = 5.5e9


def isotropic_pattern(elevation, azimuth):
    """Unit vertical response, no horizontal response.  Accepts arrays."""
    shape = np.broadcast(elevation, azimuth).shape
    return np.ones(shape), np.zeros(shape)


@dataclass(frozen=True)
class AntennaArray:
    """Uniform linear array along a fixed axis.

    Element v sits at v * spacing along the axis given by `orientation`
    (elevation, azimuth).  `pattern(el, az) -> (F_v, F_h)` is the common
    element response per polarization and must broadcast over arrays.
    """

    n_elements: int = 1
    spacing: float = 0.5 * SPEED_OF_LIGHT / DEFAULT_CARRIER
    orientation: tuple[float, float] = (0.0, 0.0)
    pattern: object = isotropic_pattern

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if self.spacing <= 0.0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")

    @property
    def axis(self) -> np.ndarray:
        el, az = self.orientation
        ce = math.cos(el)
        return np.array([ce * math.cos(az), ce * math.sin(az), math.sin(el)])

    def element_offset(self, v: int) -> np.ndarray:
        if not 0 <= v < self.n_elements:
            raise ValueError(f"element index {v} out of range")
        return v * self.spacing * self.axis


@dataclass(frozen=True)
class GbsmConfig:
    """Knobs of the stochastic cluster generator.

    Cluster powers follow a single-slope exponential decay over excess delay
    with log-normal per-cluster shadowing, then normalize to unit total.
    Rays split a cluster's power uniformly.  Angles are radians, delays
    seconds, distances meters.
    """

    n_clusters: int = 15
    rays_per_cluster: int = 10
    carrier_frequency: float = DEFAULT_CARRIER
    cluster_speed: float = 0.5
    delay_decay: float = 200e-9
    virtual_delay_mean: float = 30e-9
    angle_spread_intra: float = math.radians(5.0)
    xpr_mean_db: float = 8.0
    xpr_std_db: float = 3.0
    copolar_imbalance: float = 1.0
    shadow_std_db: float = 3.0
    anchor_range: tuple[float, float] = (20.0, 200.0)
    elevation_range: tuple[float, float] = (-math.radians(20.0), math.radians(20.0))
    azimuth_range: tuple[float, float] = (-math.pi, math.pi)
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 0:
            raise ValueError(f"n_clusters must be >= 0, got {self.n_clusters}")
        if self.rays_per_cluster < 1:
            raise ValueError(f"rays_per_cluster must be >= 1, got {self.rays_per_cluster}")
        for name in ("carrier_frequency", "delay_decay", "virtual_delay_mean"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.cluster_speed < 0.0:
            raise ValueError("cluster_speed must be >= 0")
        if self.anchor_range[0] <= 0.0 or self.anchor_range[1] < self.anchor_range[0]:
            raise ValueError(f"bad anchor_range {self.anchor_range}")

    def with_overrides(self, **kwargs) -> "GbsmConfig":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(kwargs) - known)
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(unknown)}")
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ClusterRay:
    aod_offset: tuple[float, float]
    aoa_offset: tuple[float, float]
    fraction: float
    phases: tuple[float, float, float, float]
    xpr: float


@dataclass(frozen=True)
class DynamicCluster:
    """One moving twin-anchored cluster.

    `power` is this cluster's share of the total dynamic power (shares sum
    to one across an ensemble); ray fractions sum to one within a cluster.
    Velocities are (speed, elevation, azimuth).
    """

    id: int
    power: float
    d_t0: float
    aod: tuple[float, float]
    d_r0: float
    aoa: tuple[float, float]
    velocity_a: tuple[float, float, float]
    velocity_z: tuple[float, float, float]
    virtual_delay: float
    rays: tuple[ClusterRay, ...]

    def __post_init__(self):
        total = math.fsum(r.fraction for r in self.rays)
        if self.rays and abs(total - 1.0) > 1e-9:
            raise ValueError(f"ray power fractions sum to {total}, expected 1")
        if self.power < 0.0:
            raise ValueError("cluster power must be >= 0")
        if self.virtual_delay < 0.0:
            raise ValueError("virtual delay must be >= 0")


@dataclass(frozen=True)
class ClusterState:
    """Per-ray anchor positions at a fixed time, relative to the link ends."""

    tx_anchors: np.ndarray  # (n_rays, 3), meters from the tx reference point
    rx_anchors: np.ndarray


def _velocity_vector(speed_el_az) -> np.ndarray:
    speed, el, az = speed_el_az
    ce = math.cos(el)
    return speed * np.array([ce * math.cos(az), ce * math.sin(az), math.sin(el)])


def _ray_directions(base: tuple[float, float], offsets: np.ndarray) -> np.ndarray:
    el = np.clip(base[0] + offsets[:, 0], -math.pi / 2, math.pi / 2)
    az = base[1] + offsets[:, 1]
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=1)


def _location_words(location) -> list[int]:
    pts = np.asarray(location, dtype=np.float64).reshape(-1)
    return [int(w) for w in pts.view(np.uint64)]


def spawn_clusters(config: GbsmConfig, location) -> tuple[DynamicCluster, ...]:
    """Draw a cluster ensemble for a (tx, rx) location pair.

    Streams derive from (config.seed, location, cluster index), so clusters
    are reproducible individually and the ensemble is order-independent.
    """
    loc = _location_words(location)
    raw = []
    for n in range(config.n_clusters):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([config.seed & 0xFFFFFFFFFFFFFFFF, *loc, n])))
        d_t = rng.uniform(*config.anchor_range)
        aod = (rng.uniform(*config.elevation_range), rng.uniform(*config.azimuth_range))
        d_r = rng.uniform(*config.anchor_range)
        aoa = (rng.uniform(*config.elevation_range), rng.uniform(*config.azimuth_range))
        vel_a = (config.cluster_speed, math.asin(rng.uniform(-1.0, 1.0)),
                 rng.uniform(-math.pi, math.pi))
        vel_z = (config.cluster_speed, math.asin(rng.uniform(-1.0, 1.0)),
                 rng.uniform(-math.pi, math.pi))
        virtual = rng.exponential(config.virtual_delay_mean)
        shadow_db = rng.normal(0.0, config.shadow_std_db)
        m = config.rays_per_cluster
        offsets = rng.laplace(0.0, config.angle_spread_intra, size=(m, 4))
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(m, 4))
        xpr_db = rng.normal(config.xpr_mean_db, config.xpr_std_db, size=m)
        rays = tuple(
            ClusterRay(
                aod_offset=(float(offsets[i, 0]), float(offsets[i, 1])),
                aoa_offset=(float(offsets[i, 2]), float(offsets[i, 3])),
                fraction=1.0 / m,
                phases=tuple(float(p) for p in phases[i]),
                xpr=float(10.0 ** (xpr_db[i] / 10.0)),
            ) for i in range(m))
        raw.append((n, d_t, aod, d_r, aoa, vel_a, vel_z, virtual, shadow_db, rays))

    if not raw:
        return ()
    delays = np.array([(r[1] + r[3]) / SPEED_OF_LIGHT + r[7] for r in raw])
    excess = delays - delays.min()
    weights = np.exp(-excess / config.delay_decay) \
        * 10.0 ** (np.array([r[8] for r in raw]) / 10.0)
    weights /= weights.sum()
    return tuple(
        DynamicCluster(
            id=n, power=float(weights[i]), d_t0=d_t, aod=aod, d_r0=d_r, aoa=aoa,
            velocity_a=vel_a, velocity_z=vel_z, virtual_delay=virtual, rays=rays,
        )
        for i, (n, d_t, aod, d_r, aoa, vel_a, vel_z, virtual, _sh, rays) in enumerate(raw))


def cluster_state_at(cluster: DynamicCluster, t: float) -> ClusterState:
    """Anchor positions after moving for t seconds at constant velocity."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    aod_off = np.array([r.aod_offset for r in cluster.rays])
    aoa_off = np.array([r.aoa_offset for r in cluster.rays])
    tx_anchors = cluster.d_t0 * _ray_directions(cluster.aod, aod_off) \
        + _velocity_vector(cluster.velocity_a) * t
    rx_anchors = cluster.d_r0 * _ray_directions(cluster.aoa, aoa_off) \
        + _velocity_vector(cluster.velocity_z) * t
    return ClusterState(tx_anchors, rx_anchors)


def ray_delay(cluster: DynamicCluster, ray: int, t: float,
              tx_offset=None, rx_offset=None) -> float:
    """Propagation delay of one ray: end-to-anchor legs plus virtual delay.

    `tx_offset`/`rx_offset` are antenna element positions relative to the
    link reference points.
    """
    if not 0 <= ray < len(cluster.rays):
        raise ValueError(f"ray index {ray} out of range")
    state = cluster_state_at(cluster, t)
    l_t = np.zeros(3) if tx_offset is None else np.asarray(tx_offset, dtype=float)
    l_r = np.zeros(3) if rx_offset is None else np.asarray(rx_offset, dtype=float)
    d_t = float(np.linalg.norm(state.tx_anchors[ray] - l_t))
    d_r = float(np.linalg.norm(state.rx_anchors[ray] - l_r))
    return (d_t + d_r) / SPEED_OF_LIGHT + cluster.virtual_delay


@dataclass
class Taps:
    """Parallel-array tap container for one antenna pair."""

    delays: np.ndarray
    amps: np.ndarray
    kinds: tuple[str, ...]

    @staticmethod
    def empty() -> "Taps":
        return Taps(np.zeros(0), np.zeros(0, dtype=complex), ())

    def __len__(self) -> int:
        return len(self.delays)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def scaled(self, factor: float) -> "Taps":
        return Taps(self.delays, self.amps * factor, self.kinds)

    def merged(self, other: "Taps") -> "Taps":
        delays = np.concatenate([self.delays, other.delays])
        amps = np.concatenate([self.amps, other.amps])
        kinds = self.kinds + other.kinds
        order = np.argsort(delays, kind="stable")
        return Taps(delays[order], amps[order], tuple(kinds[i] for i in order))


def _angles_of(vectors: np.ndarray, norms: np.ndarray):
    el = np.arcsin(np.clip(vectors[:, 2] / norms, -1.0, 1.0))
    az = np.arctan2(vectors[:, 1], vectors[:, 0])
    return el, az


def _pol_mix(f_rx, f_tx, phases: np.ndarray, xpr: np.ndarray, mu: float) -> np.ndarray:
    rv, rh = f_rx
    tv, th = f_tx
    inv = 1.0 / xpr
    return (rv * (np.exp(1j * phases[:, 0]) * tv
                  + np.sqrt(mu * inv) * np.exp(1j * phases[:, 1]) * th)
            + rh * (np.sqrt(inv) * np.exp(1j * phases[:, 2]) * tv
                    + math.sqrt(mu) * np.exp(1j * phases[:, 3]) * th))


def dynamic_cir(clusters, tx_array: AntennaArray, rx_array: AntennaArray,
                t: float, config: GbsmConfig) -> dict:
    """Dynamic-part impulse response taps per antenna pair (v, u).

    Tap amplitude is sqrt(cluster power * ray fraction) times the
    polarization mix of the element patterns and the carrier phase
    exp(j 2 pi f_c tau).  The expected total power over all taps is one by
    construction (unit patterns).
    """
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    fc = config.carrier_frequency
    mu = config.copolar_imbalance

    if not clusters:
        return {(v, u): Taps.empty()
                for v in range(tx_array.n_elements)
                for u in range(rx_array.n_elements)}

    tx_anchor, rx_anchor, power, virtual, phases, xpr, kinds = [], [], [], [], [], [], []
    for cl in clusters:
        state = cluster_state_at(cl, t)
        tx_anchor.append(state.tx_anchors)
        rx_anchor.append(state.rx_anchors)
        power.append([cl.power * r.fraction for r in cl.rays])
        virtual.append([cl.virtual_delay] * len(cl.rays))
        phases.append([r.phases for r in cl.rays])
        xpr.append([r.xpr for r in cl.rays])
        kinds.extend(f"dyn:{cl.id}:{m}" for m in range(len(cl.rays)))
    tx_anchor = np.concatenate(tx_anchor)
    rx_anchor = np.concatenate(rx_anchor)
    amp_scale = np.sqrt(np.concatenate(power))
    virtual = np.concatenate(virtual)
    phases = np.concatenate(phases)
    xpr = np.concatenate(xpr)
    kinds = tuple(kinds)

    out = {}
    for v in range(tx_array.n_elements):
        l_v = tx_array.element_offset(v)
        dep = tx_anchor - l_v
        d_t = np.linalg.norm(dep, axis=1)
        f_tx = tx_array.pattern(*_angles_of(dep, d_t))
        for u in range(rx_array.n_elements):
            l_u = rx_array.element_offset(u)
            arr = rx_anchor - l_u
            d_r = np.linalg.norm(arr, axis=1)
            f_rx = rx_array.pattern(*_angles_of(arr, d_r))
            delays = (d_t + d_r) / SPEED_OF_LIGHT + virtual
            amps = amp_scale * _pol_mix(f_rx, f_tx, phases, xpr, mu) \
                * np.exp(2j * math.pi * fc * delays)
            out[(v, u)] = Taps(delays, amps, kinds)
    return out
