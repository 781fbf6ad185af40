"""Dynamic channel map: pre-built static paths plus fast online updates.

A map is built offline by ray tracing every receiver grid point against one
transmitter, and stores per point the static paths together with the two
power ratios that weight static against dynamic scattering.  Online, a
query returns the stored record and an update composes it with freshly
spawned dynamic clusters, which costs milliseconds instead of the full
trace.

Maps persist to a line-oriented text format (magic `DCMv1`).  All floats
are written with 17 significant digits, and records are canonicalized
through an encode/decode fixpoint at build time, so save, load and save
again produce byte-identical files.  Writes go to a temporary file that is
atomically renamed over the target.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .gbsm import AntennaArray, GbsmConfig
from .hybrid import ChannelModel, ChannelSnapshot, KFactors
from .raytrace import Mpc, trace_static_mpcs
from .scene import Scene
from .stats import Psd

MAGIC = "DCMv1"
DEFAULT_K_STATIC = 10.0 ** 0.3   # 3 dB
DEFAULT_K_DYNAMIC = 10.0         # 10 dB
MATCH_SCALES = (3.125e-9, math.radians(5.0))

_INT_FIELDS = {"n_clusters", "rays_per_cluster", "seed"}
_PAIR_FIELDS = {"anchor_range", "elevation_range", "azimuth_range"}


class DcmLookupError(LookupError):
    """No stored record close enough to the requested location."""


@dataclass(frozen=True)
class DcmRecord:
    """Static paths and mixing ratios for one receiver location."""

    tx: tuple[float, float, float]
    rx: tuple[float, float, float]
    k_s: float
    k_d: float
    mpcs: tuple[Mpc, ...]


@dataclass
class DcmMap:
    """Offline-traced channel map over a set of receiver locations."""

    frequency: float
    max_order: int
    scene_hash: str
    gbsm: GbsmConfig
    records: dict[tuple[float, float, float], DcmRecord]

    def locations(self) -> np.ndarray:
        return np.array(list(self.records), dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class MatchResult:
    """Greedy pairing between reference and simulated path lists."""

    pairs: tuple[tuple[int, int], ...]
    distances: tuple[float, ...]
    unmatched_ref: tuple[int, ...]
    unmatched_sim: tuple[int, ...]
    scales: tuple[float, float] = MATCH_SCALES
    threshold: float = 1.0


# ---------------------------------------------------------------------------
# path matching and ratio estimation

def _wrap_angle(x: float) -> float:
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def match_mpcs(reference, simulated, scales=MATCH_SCALES,
               threshold: float = 1.0) -> MatchResult:
    """Greedily pair paths that are close in (delay, arrival azimuth).

    Distance is the Euclidean norm of the scaled delay difference and the
    wrapped azimuth-of-arrival difference; pairs beyond `threshold` stay
    unmatched.  Ties resolve by reference index, then simulated index.
    """
    candidates = []
    for i, r in enumerate(reference):
        for j, s in enumerate(simulated):
            d_tau = (r.delay - s.delay) / scales[0]
            d_ang = _wrap_angle(r.aoa[1] - s.aoa[1]) / scales[1]
            d = math.hypot(d_tau, d_ang)
            if d <= threshold:
                candidates.append((d, i, j))
    candidates.sort()
    used_r: set[int] = set()
    used_s: set[int] = set()
    pairs = []
    dists = []
    for d, i, j in candidates:
        if i in used_r or j in used_s:
            continue
        used_r.add(i)
        used_s.add(j)
        pairs.append((i, j))
        dists.append(d)
    pairs_sorted = sorted(zip(pairs, dists))
    pairs = [p for p, _ in pairs_sorted]
    dists = [d for _, d in pairs_sorted]
    return MatchResult(
        pairs=tuple(pairs),
        distances=tuple(dists),
        unmatched_ref=tuple(i for i in range(len(reference)) if i not in used_r),
        unmatched_sim=tuple(j for j in range(len(simulated)) if j not in used_s),
        scales=(float(scales[0]), float(scales[1])),
        threshold=float(threshold),
    )


def estimate_k_split(match: MatchResult, reference) -> KFactors:
    """Estimate the static and dynamic power ratios from matched paths.

    The line-of-sight power is referenced against the summed power of the
    other reference paths: those matched by the simulation count as static,
    the rest as dynamic.  An empty group yields an infinite ratio; a
    reference set without line of sight is an error.
    """
    los_idx = [i for i, m in enumerate(reference) if m.is_los]
    if len(los_idx) != 1:
        raise ValueError("reference must contain exactly one line-of-sight path")
    p_los = reference[los_idx[0]].power
    matched = {i for i, _ in match.pairs}
    p_static = sum(m.power for i, m in enumerate(reference)
                   if i in matched and not m.is_los)
    p_dynamic = sum(m.power for i, m in enumerate(reference)
                    if i not in matched and not m.is_los)
    k_s = p_los / p_static if p_static > 0.0 else math.inf
    k_d = p_los / p_dynamic if p_dynamic > 0.0 else math.inf
    return KFactors.from_split(k_s, k_d)


def average_delay_psd(snapshots, grid, noise_floor_db: float = -30.0,
                      pair: tuple[int, int] = (0, 0)) -> Psd:
    """Coherently average snapshots on a delay grid, then square.

    Complex tap amplitudes are binned per snapshot, averaged across the
    ensemble, and only then converted to power, so components with random
    phase average toward zero while repeatable paths survive.  Bins quieter
    than `noise_floor_db` + 6 dB relative to the strongest bin are zeroed.
    Mass falling outside the grid is reported in `clipped`.
    """
    grid = np.asarray(grid, dtype=float)
    widths = np.gradient(grid)
    edges = np.concatenate([[grid[0] - widths[0] / 2.0],
                            (grid[:-1] + grid[1:]) / 2.0,
                            [grid[-1] + widths[-1] / 2.0]])
    amp = np.zeros(len(grid), dtype=complex)
    spilled = 0.0
    count = 0
    for snap in snapshots:
        taps = snap.pair(*pair)
        idx = np.searchsorted(edges, taps.delays, side="right") - 1
        inside = (idx >= 0) & (idx < len(grid))
        amp += (np.bincount(idx[inside], weights=taps.amps[inside].real,
                            minlength=len(grid))
                + 1j * np.bincount(idx[inside], weights=taps.amps[inside].imag,
                                   minlength=len(grid)))
        spilled += float((np.abs(taps.amps[~inside]) ** 2).sum())
        count += 1
    if count == 0:
        raise ValueError("need at least one snapshot")
    power = np.abs(amp / count) ** 2
    spilled /= count
    peak = power.max()
    if peak > 0.0:
        power[power < peak * 10.0 ** ((noise_floor_db + 6.0) / 10.0)] = 0.0
    return Psd(grid, power / widths, clipped=spilled)


# ---------------------------------------------------------------------------
# building

def grid_points(origin, shape, spacing) -> list[tuple[float, float, float]]:
    """Rectangular lattice of locations, x-major then y then z."""
    ox, oy, oz = (float(v) for v in origin)
    nx, ny, nz = (int(v) for v in shape)
    if min(nx, ny, nz) < 1:
        raise ValueError("shape counts must be >= 1")
    try:
        sx, sy, sz = (float(v) for v in spacing)
    except TypeError:
        sx = sy = sz = float(spacing)
    return [(ox + i * sx, oy + j * sy, oz + k * sz)
            for i in range(nx) for j in range(ny) for k in range(nz)]


def worker_count() -> int:
    """Worker processes for map building, from the DCM_THREADS variable.

    Unset or empty means single process; 0 means one per CPU; any other
    non-negative integer is taken literally.
    """
    raw = os.environ.get("DCM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DCM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("DCM_THREADS must be >= 0")
    if n == 0:
        return os.cpu_count() or 1
    return n


def _trace_record(args):
    scene, tx, point, max_order, frequency, k_s, k_d = args
    mpcs = trace_static_mpcs(scene, np.asarray(tx), np.asarray(point),
                             max_order=max_order, frequency=frequency)
    rec = DcmRecord(tx=tuple(tx), rx=tuple(point), k_s=k_s, k_d=k_d,
                    mpcs=tuple(mpcs))
    return _canonical_record(rec)


def build_map(scene: Scene, tx, points, max_order: int = 2,
              k_s: float = DEFAULT_K_STATIC, k_d: float = DEFAULT_K_DYNAMIC,
              gbsm: GbsmConfig | None = None) -> DcmMap:
    """Trace static paths for every receiver location and assemble a map.

    Tracing runs at the carrier frequency of the dynamic-scatter
    configuration so both halves of the model agree.  With DCM_THREADS set,
    locations are traced by a process pool; results are assembled in
    location order either way, so the output is identical.
    """
    if gbsm is None:
        gbsm = GbsmConfig()
    tx = tuple(float(v) for v in tx)
    pts = [tuple(float(v) for v in p) for p in points]
    if not pts:
        raise ValueError("need at least one receiver location")
    KFactors.from_split(k_s, k_d)  # validate early
    jobs = [(scene, tx, p, max_order, gbsm.carrier_frequency, k_s, k_d)
            for p in pts]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trace_record, jobs, chunksize=1))
    else:
        records = [_trace_record(j) for j in jobs]
    return DcmMap(
        frequency=gbsm.carrier_frequency,
        max_order=max_order,
        scene_hash=scene.source_hash,
        gbsm=gbsm,
        records={r.rx: r for r in records},
    )


# ---------------------------------------------------------------------------
# online use

def query(dcm: DcmMap, location, tolerance: float = 1e-6) -> DcmRecord:
    """Record at `location`, or the nearest within `tolerance` meters."""
    loc = np.asarray(location, dtype=float)
    key = tuple(float(v) for v in loc)
    rec = dcm.records.get(key)
    if rec is not None:
        return rec
    if not dcm.records:
        raise DcmLookupError("map holds no records")
    pts = dcm.locations()
    dists = np.linalg.norm(pts - loc[None, :], axis=1)
    best = int(np.argmin(dists))
    if dists[best] <= tolerance:
        return dcm.records[tuple(pts[best])]
    near = tuple(float(v) for v in pts[best])
    raise DcmLookupError(
        f"no record within {tolerance:g} m of {key}; "
        f"nearest is {near} at {dists[best]:.6g} m")


def model_from_map(dcm: DcmMap, location, seed: int | None = None,
                   overrides: dict | None = None,
                   tx_array: AntennaArray | None = None,
                   rx_array: AntennaArray | None = None,
                   tolerance: float = 1e-6) -> ChannelModel:
    """Hybrid channel model reconstructed from one stored record.

    `overrides` patches fields of the stored dynamic-scatter configuration;
    `seed` overrides its seed.
    """
    rec = query(dcm, location, tolerance=tolerance)
    cfg = dcm.gbsm
    patch = dict(overrides or {})
    if seed is not None:
        patch["seed"] = int(seed)
    if patch:
        cfg = cfg.with_overrides(**patch)
    return ChannelModel(
        static_mpcs=tuple(rec.mpcs),
        k=KFactors.from_split(rec.k_s, rec.k_d),
        gbsm=cfg,
        tx_array=tx_array if tx_array is not None else AntennaArray(),
        rx_array=rx_array if rx_array is not None else AntennaArray(),
        location=rec.rx,
    )


def update_snapshot(dcm: DcmMap, location, t: float, seed: int | None = None,
                    overrides: dict | None = None,
                    tx_array: AntennaArray | None = None,
                    rx_array: AntennaArray | None = None,
                    tolerance: float = 1e-6) -> ChannelSnapshot:
    """Fast online snapshot: stored static paths plus fresh dynamic clusters.

    The static side is reused exactly as stored, so the cost is one cluster
    spawn and one mixing pass.
    """
    model = model_from_map(dcm, location, seed=seed, overrides=overrides,
                           tx_array=tx_array, rx_array=rx_array,
                           tolerance=tolerance)
    return model.snapshot(t)


# ---------------------------------------------------------------------------
# persistence

def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _fmt_vec(vec) -> str:
    return ",".join(_fmt(v) for v in vec)


def _mpc_line(m: Mpc) -> str:
    power_db = 10.0 * math.log10(m.power)
    xpr_db = math.inf if math.isinf(m.xpr) else 10.0 * math.log10(m.xpr)
    return ("mpc kind=%s delay_ns=%s power_db=%s aod=%s aoa=%s "
            "phases=%s xpr_db=%s" % (
                m.kind,
                _fmt(m.delay * 1e9),
                _fmt(power_db),
                _fmt_vec((math.degrees(m.aod[0]), math.degrees(m.aod[1]))),
                _fmt_vec((math.degrees(m.aoa[0]), math.degrees(m.aoa[1]))),
                _fmt_vec(m.phases),
                _fmt(xpr_db),
            ))


def _record_lines(rec: DcmRecord) -> list[str]:
    lines = [
        "[record]",
        "tx=" + _fmt_vec(rec.tx),
        "rx=" + _fmt_vec(rec.rx),
        "ks=" + _fmt(rec.k_s),
        "kd=" + _fmt(rec.k_d),
    ]
    lines.extend(_mpc_line(m) for m in rec.mpcs)
    return lines


def _parse_floats(text: str, n: int, where: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise ValueError(f"{where}: expected {n} comma-separated values")
    return tuple(float(p) for p in parts)


def _clamped_angles(el_deg: float, az_deg: float) -> tuple[float, float]:
    el = math.radians(el_deg)
    az = math.radians(az_deg)
    el = min(max(el, -math.pi / 2.0), math.pi / 2.0)
    az = _wrap_angle(az)
    if az >= math.pi:
        az -= 2.0 * math.pi
    return el, az


def _parse_mpc(line: str, where: str) -> Mpc:
    fields_ = {}
    for token in line.split()[1:]:
        if "=" not in token:
            raise ValueError(f"{where}: malformed token {token!r}")
        key, val = token.split("=", 1)
        fields_[key] = val
    try:
        kind = fields_["kind"]
        delay = float(fields_["delay_ns"]) * 1e-9
        power = 10.0 ** (float(fields_["power_db"]) / 10.0)
        aod = _clamped_angles(*_parse_floats(fields_["aod"], 2, where))
        aoa = _clamped_angles(*_parse_floats(fields_["aoa"], 2, where))
        phases = _parse_floats(fields_["phases"], 4, where)
        xpr_db = float(fields_["xpr_db"])
        xpr = math.inf if math.isinf(xpr_db) else 10.0 ** (xpr_db / 10.0)
    except KeyError as exc:
        raise ValueError(f"{where}: missing field {exc.args[0]}") from None
    return Mpc(delay=delay, power=power, aod=aod, aoa=aoa,
               phases=phases, xpr=xpr, kind=kind)


def _canonical_record(rec: DcmRecord, limit: int = 32) -> DcmRecord:
    """Round the record through its text form until it is a fixpoint.

    Unit conversions (seconds to nanoseconds, linear power to dB, radians
    to degrees) round; one or two passes make the in-memory values exactly
    what a load returns, which is what keeps repeated saves byte-identical.
    """
    text = "\n".join(_record_lines(rec))
    for _ in range(limit):
        mpcs = tuple(_parse_mpc(line, "canonicalize")
                     for line in text.splitlines() if line.startswith("mpc "))
        rec = replace(rec, mpcs=mpcs)
        text2 = "\n".join(_record_lines(rec))
        if text2 == text:
            return rec
        text = text2
    raise RuntimeError("record failed to reach a formatting fixpoint")


def dumps_map(dcm: DcmMap) -> str:
    lines = [MAGIC, "[map]",
             "frequency=" + _fmt(dcm.frequency),
             "max_order=%d" % dcm.max_order,
             "scene=" + dcm.scene_hash,
             "[gbsm]"]
    for f in fields(GbsmConfig):
        value = getattr(dcm.gbsm, f.name)
        if f.name in _INT_FIELDS:
            lines.append("%s=%d" % (f.name, value))
        elif f.name in _PAIR_FIELDS:
            lines.append("%s=%s" % (f.name, _fmt_vec(value)))
        else:
            lines.append("%s=%s" % (f.name, _fmt(value)))
    for rec in dcm.records.values():
        lines.extend(_record_lines(rec))
    return "\n".join(lines) + "\n"


def loads_map(text: str) -> DcmMap:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"not a channel map file (missing {MAGIC} header)")
    header: dict[str, str] = {}
    gbsm_kw: dict = {}
    records: dict[tuple, DcmRecord] = {}
    section = None
    current: dict | None = None

    def finish():
        if current is None:
            return
        for need in ("tx", "rx", "ks", "kd"):
            if need not in current:
                raise ValueError(f"record missing {need}=")
        rec = DcmRecord(tx=current["tx"], rx=current["rx"],
                        k_s=current["ks"], k_d=current["kd"],
                        mpcs=tuple(current["mpcs"]))
        records[rec.rx] = rec

    for no, line in enumerate(lines[1:], start=2):
        where = f"line {no}"
        if not line.strip():
            continue
        if line == "[map]":
            section = "map"
            continue
        if line == "[gbsm]":
            section = "gbsm"
            continue
        if line == "[record]":
            finish()
            current = {"mpcs": []}
            section = "record"
            continue
        if section == "map":
            key, _, val = line.partition("=")
            header[key] = val
        elif section == "gbsm":
            key, _, val = line.partition("=")
            if key in _INT_FIELDS:
                gbsm_kw[key] = int(val)
            elif key in _PAIR_FIELDS:
                gbsm_kw[key] = _parse_floats(val, 2, where)
            else:
                gbsm_kw[key] = float(val)
        elif section == "record":
            assert current is not None
            if line.startswith("mpc "):
                current["mpcs"].append(_parse_mpc(line, where))
            else:
                key, _, val = line.partition("=")
                if key in ("tx", "rx"):
                    current[key] = _parse_floats(val, 3, where)
                elif key in ("ks", "kd"):
                    current[key] = float(val)
                else:
                    raise ValueError(f"{where}: unknown record field {key!r}")
        else:
            raise ValueError(f"{where}: content before any section header")
    finish()

    try:
        frequency = float(header["frequency"])
        max_order = int(header["max_order"])
        scene_hash = header["scene"]
    except KeyError as exc:
        raise ValueError(f"map header missing {exc.args[0]}=") from None
    return DcmMap(frequency=frequency, max_order=max_order,
                  scene_hash=scene_hash, gbsm=GbsmConfig(**gbsm_kw),
                  records=records)


def save_map(dcm: DcmMap, path) -> None:
    """Serialize atomically: write a sibling temp file, then rename over."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_map(dcm))
    os.replace(tmp, path)


def load_map(path) -> DcmMap:
    with open(path, "r", encoding="ascii") as fh:
        return loads_map(fh.read())
