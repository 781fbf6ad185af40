"""Deterministic multipath extraction by the image method.

Paths are found by mirroring the transmitter through ordered facet sequences
and walking the chain back from the receiver.  A candidate sequence is kept
when every reflection point lands inside its facet and no other facet blocks
any leg of the path.  Facets are opaque specular reflectors; diffraction and
transmission are out of scope.

Per-bounce loss uses the polarization-averaged squared reflection magnitude
(|G_perp|^2 + |G_par|^2) / 2; the full 2x2 polarization behaviour of a path
is carried by its per-path phases and cross-polarization ratio instead of by
the scalar power.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0

from .scene import INTERSECT_TOL, Facet, Material, Scene

DEFAULT_FREQUENCY = 5.5e9

# log-normal cross-polarization ratio assigned to reflected paths
XPR_MEAN_DB = 8.0
XPR_STD_DB = 3.0

_CHUNK_ROWS = 400_000


# ---------------------------------------------------------------------------
# basic link budget and reflection coefficients

def friis_path_gain(distance: float, frequency: float) -> float:
    """Free-space power gain in dB: -20 log10(4 pi d f / c)."""
    if distance <= 0.0:
        raise ValueError(f"distance must be > 0, got {distance}")
    if frequency <= 0.0:
        raise ValueError(f"frequency must be > 0, got {frequency}")
    return -20.0 * math.log10(4.0 * math.pi * distance * frequency / SPEED_OF_LIGHT)


def fresnel_coefficients(material: Material, incidence: float, frequency: float):
    """Complex reflection coefficients (perpendicular, parallel).

    `incidence` is measured from the facet normal, in [0, pi/2].  The
    material enters through its complex relative permittivity
    eps_r - j sigma / (2 pi f eps0); loss carries a negative imaginary part.
    """
    if not 0.0 <= incidence <= math.pi / 2:
        raise ValueError(f"incidence must be in [0, pi/2], got {incidence}")
    if frequency <= 0.0:
        raise ValueError(f"frequency must be > 0, got {frequency}")
    g_perp, g_par = _fresnel_arrays(
        np.asarray(material.eps_r), np.asarray(material.sigma),
        np.asarray(math.cos(incidence)), frequency,
    )
    return complex(g_perp), complex(g_par)


def _fresnel_arrays(eps_r, sigma, cos_inc, frequency):
    eta = eps_r - 1j * sigma / (2.0 * np.pi * frequency * epsilon_0)
    sin2 = 1.0 - cos_inc**2
    root = np.sqrt(eta - sin2)  # principal branch: decaying transmitted wave
    g_perp = (cos_inc - root) / (cos_inc + root)
    g_par = (eta * cos_inc - root) / (eta * cos_inc + root)
    return g_perp, g_par


# ---------------------------------------------------------------------------
# path records

@dataclass(frozen=True)
class Mpc:
    """One multipath component.

    Angles are (elevation, azimuth) in radians with elevation in
    [-pi/2, pi/2] and azimuth in [-pi, pi).  `phases` are the four initial
    co/cross-polar phases (vv, vh, hv, hh); `xpr` is the linear
    cross-polarization power ratio (inf for a line-of-sight path, which has
    no cross-polar leakage).  `kind` encodes provenance:
    "los", "refl:<order>", or "dyn:<cluster>:<ray>".  `facets` lists the
    reflecting facet indices for traced paths (not persisted).
    """

    delay: float
    power: float
    aod: tuple[float, float]
    aoa: tuple[float, float]
    phases: tuple[float, float, float, float]
    xpr: float
    kind: str
    facets: tuple[int, ...] = ()

    def __post_init__(self):
        if self.delay < 0.0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")
        if self.power < 0.0:
            raise ValueError(f"power must be >= 0, got {self.power}")
        if not self.xpr > 0.0:
            raise ValueError(f"xpr must be > 0, got {self.xpr}")
        for name, (el, az) in (("aod", self.aod), ("aoa", self.aoa)):
            if not -math.pi / 2 <= el <= math.pi / 2:
                raise ValueError(f"{name} elevation out of [-pi/2, pi/2]: {el}")
            if not -math.pi <= az < math.pi:
                raise ValueError(f"{name} azimuth out of [-pi, pi): {az}")
        if not (self.kind == "los" or self.kind.startswith("refl:")
                or self.kind.startswith("dyn:")):
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def is_los(self) -> bool:
        return self.kind == "los"

    @property
    def order(self) -> int:
        """Reflection count; 0 for line of sight and dynamic rays."""
        if self.kind.startswith("refl:"):
            return int(self.kind.split(":", 1)[1])
        return 0


def direction_angles(vec) -> tuple[float, float]:
    """(elevation, azimuth) of a direction vector, azimuth wrapped to [-pi, pi)."""
    v = np.asarray(vec, dtype=float)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise ValueError("zero direction vector")
    el = math.asin(max(-1.0, min(1.0, v[2] / r)))
    az = math.atan2(v[1], v[0])
    if az >= math.pi:
        az -= 2.0 * math.pi
    return el, az


def unit_from_angles(elevation: float, azimuth: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth),
                     math.sin(elevation)])


def _path_rng(kind: str, facets: tuple[int, ...], delay: float) -> np.random.Generator:
    # geometry-keyed stream: the tracer stays a pure function of its inputs
    h = hashlib.blake2b(digest_size=8)
    h.update(kind.encode())
    h.update(np.asarray(facets, dtype=np.int64).tobytes())
    h.update(np.float64(delay).tobytes())
    return np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))


def _draw_phases_xpr(kind: str, facets: tuple[int, ...], delay: float):
    rng = _path_rng(kind, facets, delay)
    phases = tuple(float(p) for p in rng.uniform(0.0, 2.0 * math.pi, 4))
    if kind == "los":
        return phases, math.inf
    xpr = float(10.0 ** (rng.normal(XPR_MEAN_DB, XPR_STD_DB) / 10.0))
    return phases, xpr


# ---------------------------------------------------------------------------
# packed scene geometry

class _Geometry:
    def __init__(self, facets: tuple[Facet, ...]):
        count = len(facets)
        vmax = max((len(f.vertices) for f in facets), default=3)
        self.count = count
        self.normals = np.zeros((count, 3))
        self.offsets = np.zeros(count)
        self.verts = np.zeros((count, vmax, 3))
        self.edges = np.zeros((count, vmax, 3))
        self.edge_len = np.ones((count, vmax))
        self.eps_r = np.zeros(count)
        self.sigma = np.zeros(count)
        for i, f in enumerate(facets):
            m = len(f.vertices)
            self.normals[i] = f.normal
            self.offsets[i] = f.offset
            self.verts[i, :m] = f.vertices
            self.verts[i, m:] = f.vertices[-1]  # pad: repeated vertex, zero edge
            nxt = np.roll(f.vertices, -1, axis=0)
            self.edges[i, :m] = nxt - f.vertices
            lengths = np.linalg.norm(self.edges[i, :m], axis=1)
            self.edge_len[i, :m] = np.where(lengths > 0.0, lengths, 1.0)
            self.eps_r[i] = f.material.eps_r
            self.sigma[i] = f.material.sigma

    def mirror(self, points: np.ndarray, fi: np.ndarray) -> np.ndarray:
        n = self.normals[fi]
        d = self.offsets[fi]
        dist = np.einsum("mk,mk->m", points, n) - d
        return points - 2.0 * dist[:, None] * n

    def inside(self, points: np.ndarray, fi: np.ndarray) -> np.ndarray:
        """points (M,3) against the facet selected per row by fi (M,)."""
        verts = self.verts[fi]
        edges = self.edges[fi]
        rel = points[:, None, :] - verts
        cr = np.cross(edges, rel)
        s = np.einsum("mvk,mk->mv", cr, self.normals[fi]) / self.edge_len[fi]
        return (s >= -INTERSECT_TOL).all(axis=1)

    def blocked(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """True per row when any facet interior cuts the open segment a->b.

        Crossings within INTERSECT_TOL meters of either endpoint do not
        count, so segments that start or end on a reflecting facet are not
        blocked by it.
        """
        if self.count == 0:
            return np.zeros(len(a), dtype=bool)
        d = b - a
        seg_len = np.linalg.norm(d, axis=1, keepdims=True)
        na = a @ self.normals.T
        nd = d @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offsets[None, :] - na) / nd
        tol = INTERSECT_TOL / np.where(seg_len > 0.0, seg_len, 1.0)
        cand = np.isfinite(t) & (t > tol) & (t < 1.0 - tol)
        if not cand.any():
            return np.zeros(len(a), dtype=bool)
        hit = a[:, None, :] + t[:, :, None] * d[:, None, :]
        rel = hit[:, :, None, :] - self.verts[None, :, :, :]
        cr = np.cross(self.edges[None, :, :, :], rel)
        s = np.einsum("mfvk,fk->mfv", cr, self.normals) / self.edge_len[None, :, :]
        inside = (s >= -INTERSECT_TOL).all(axis=2)
        return (cand & inside).any(axis=1)


@lru_cache(maxsize=8)
def _geometry(facets: tuple[Facet, ...]) -> _Geometry:
    return _Geometry(facets)


# ---------------------------------------------------------------------------
# sequence enumeration: lexicographic, no consecutive repeats, fixed order k

def _decode_sequences(idx: np.ndarray, n_facets: int, order: int) -> np.ndarray:
    seq = np.empty((len(idx), order), dtype=np.int64)
    stride = (n_facets - 1) ** (order - 1)
    seq[:, 0] = idx // stride
    rem = idx % stride
    for j in range(1, order):
        stride //= (n_facets - 1)
        digit = rem // stride
        rem = rem % stride
        seq[:, j] = digit + (digit >= seq[:, j - 1])
    return seq


def _trace_order(geom: _Geometry, tx: np.ndarray, rx: np.ndarray, order: int):
    """Yield (seq, qs, last_image) arrays for every valid order-k sequence."""
    n = geom.count
    total = n * (n - 1) ** (order - 1)
    for start in range(0, total, _CHUNK_ROWS):
        idx = np.arange(start, min(start + _CHUNK_ROWS, total), dtype=np.int64)
        seq = _decode_sequences(idx, n, order)
        m = len(seq)
        imgs = np.empty((m, order, 3))
        cur = np.broadcast_to(tx, (m, 3))
        for j in range(order):
            cur = geom.mirror(cur, seq[:, j])
            imgs[:, j] = cur
        qs = np.empty((m, order, 3))
        seq_a, imgs_a, qs_a = seq, imgs, qs
        target_a = np.broadcast_to(rx, (m, 3))
        for j in range(order - 1, -1, -1):
            image = imgs_a[:, j]
            n_j = geom.normals[seq_a[:, j]]
            d_j = geom.offsets[seq_a[:, j]]
            denom = np.einsum("mk,mk->m", target_a - image, n_j)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (d_j - np.einsum("mk,mk->m", image, n_j)) / denom
            ok = np.isfinite(t) & (t > 1e-12) & (t < 1.0 - 1e-12)
            t = np.where(ok, t, 0.5)  # placeholder rows, masked out below
            q = image + t[:, None] * (target_a - image)
            ok &= geom.inside(q, seq_a[:, j])
            if not ok.any():
                break
            seq_a = seq_a[ok]
            imgs_a = imgs_a[ok]
            qs_a = qs_a[ok]
            qs_a[:, j] = q[ok]
            target_a = qs_a[:, j]
        else:
            if len(seq_a):
                yield seq_a, qs_a, imgs_a[:, order - 1]


def trace_static_mpcs(scene: Scene, tx, rx, max_order: int = 2,
                      frequency: float = DEFAULT_FREQUENCY) -> list[Mpc]:
    """All specular paths from tx to rx up to max_order reflections.

    Returns Mpcs sorted by delay.  Power is the free-space gain over the
    unfolded path length times the polarization-averaged reflection loss of
    each bounce.  Deterministic: equal inputs give equal outputs, including
    the per-path phases.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if tx.shape != (3,) or rx.shape != (3,):
        raise ValueError("tx and rx must be 3-vectors")
    if np.array_equal(tx, rx):
        raise ValueError("tx and rx coincide")
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    if frequency <= 0.0:
        raise ValueError(f"frequency must be > 0, got {frequency}")

    geom = _geometry(scene.facets)
    out: list[Mpc] = []

    if not geom.blocked(tx[None, :], rx[None, :])[0]:
        dist = float(np.linalg.norm(rx - tx))
        delay = dist / SPEED_OF_LIGHT
        phases, xpr = _draw_phases_xpr("los", (), delay)
        out.append(Mpc(
            delay=delay,
            power=10.0 ** (friis_path_gain(dist, frequency) / 10.0),
            aod=direction_angles(rx - tx),
            aoa=direction_angles(tx - rx),
            phases=phases, xpr=xpr, kind="los",
        ))

    for order in range(1, max_order + 1):
        if geom.count == 0 or (order > 1 and geom.count < 2):
            break
        for seq, qs, last_img in _trace_order(geom, tx, rx, order):
            points = np.concatenate(
                [np.broadcast_to(tx, (len(seq), 1, 3)), qs,
                 np.broadcast_to(rx, (len(seq), 1, 3))], axis=1)
            ok = np.ones(len(seq), dtype=bool)
            for leg in range(order + 1):
                ok &= ~geom.blocked(points[:, leg], points[:, leg + 1])
            if not ok.any():
                continue
            seq, qs, last_img, points = seq[ok], qs[ok], last_img[ok], points[ok]
            length = np.linalg.norm(last_img - rx, axis=1)
            gain = (SPEED_OF_LIGHT / (4.0 * np.pi * length * frequency)) ** 2
            for j in range(order):
                inc = points[:, j + 1] - points[:, j]
                inc /= np.linalg.norm(inc, axis=1, keepdims=True)
                cos_i = np.abs(np.einsum("mk,mk->m", inc, geom.normals[seq[:, j]]))
                g_perp, g_par = _fresnel_arrays(
                    geom.eps_r[seq[:, j]], geom.sigma[seq[:, j]],
                    np.clip(cos_i, 0.0, 1.0), frequency)
                gain *= 0.5 * (np.abs(g_perp) ** 2 + np.abs(g_par) ** 2)
            for i in range(len(seq)):
                fseq = tuple(int(f) for f in seq[i])
                delay = float(length[i]) / SPEED_OF_LIGHT
                kind = f"refl:{order}"
                phases, xpr = _draw_phases_xpr(kind, fseq, delay)
                out.append(Mpc(
                    delay=delay, power=float(gain[i]),
                    aod=direction_angles(qs[i, 0] - tx),
                    aoa=direction_angles(qs[i, order - 1] - rx),
                    phases=phases, xpr=xpr, kind=kind, facets=fseq,
                ))

    out.sort(key=lambda m: (m.delay, m.kind, m.facets))
    return out
