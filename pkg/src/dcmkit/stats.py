"""Correlation functions, power spectra, spreads, and level crossing rates.

All second-order statistics descend from one correlation definition

    R(offsets) = E[ H*(base) H(base + offsets) ]

with offsets in transmit element spacing, receive element spacing, time,
frequency, and receiver location.  The line-of-sight and static-reflection
branches are evaluated in closed form (their only randomness, the frozen
initial phases, drops diagonal terms); the dynamic branch is averaged over
seeded cluster ensembles.  With these conventions the frequency correlation
of a tap set is sum_k P_k exp(-j 2 pi df tau_k), its delay spectrum is the
inverse transform with kernel exp(+j 2 pi tau df) peaking at the true
delays, and a cluster receding from both ends shows a negative mean
Doppler.

Spectra from finite lag windows are Hann-tapered and mass-rebinned onto the
requested support, so total mass equals the zero-lag correlation exactly;
a pure tone concentrates in the bin containing it up to the documented
resolution floor (about a third of a bin width in rms terms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import erf, roots_legendre

from .hybrid import (ChannelModel, KFactors, _flatten_clusters, mixing_weights,
                     rician_params, static_branch_split)
from .raytrace import unit_from_angles

DEFAULT_ENSEMBLE = 200


# ---------------------------------------------------------------------------
# containers

@dataclass(frozen=True)
class CorrelationQuery:
    """Offsets for one correlation evaluation.

    dr_t / dr_r displace the transmit / receive element along the array
    axis (meters), dt and df offset time and frequency, dloc displaces the
    receiver location.  `t` and `f` set the evaluation point (f = None means
    the carrier); `ensemble` sizes the Monte-Carlo average of the dynamic
    branch.
    """

    dr_t: float = 0.0
    dr_r: float = 0.0
    dt: float = 0.0
    df: float = 0.0
    dloc: tuple[float, float, float] = (0.0, 0.0, 0.0)
    t: float = 0.0
    f: float | None = None
    ensemble: int = DEFAULT_ENSEMBLE

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValueError("ensemble must be >= 1")
        if self.t < 0.0 or self.t + self.dt < 0.0:
            raise ValueError("evaluation times must be >= 0")


@dataclass(frozen=True)
class Psd:
    """Discrete one-dimensional power density on a strictly increasing grid.

    `clipped` reports mass that was discarded: negative estimation ripple
    and, for angular spectra, leakage outside the visible region.
    """

    support: np.ndarray
    density: np.ndarray
    clipped: float = 0.0

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if support.ndim != 1 or support.shape != density.shape or len(support) < 2:
            raise ValueError("support and density must be matching 1-D arrays")
        if np.any(np.diff(support) <= 0.0):
            raise ValueError("support must be strictly increasing")
        if np.any(density < 0.0):
            raise ValueError("density must be non-negative")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "density", density)

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * np.gradient(self.support)))


@dataclass(frozen=True)
class LcrInputs:
    """Envelope process summary feeding the crossing-rate formula.

    k is the coherent-to-diffuse power ratio (0 for pure diffuse).  b0, b1,
    b2 are the zeroth to second spectral moments of the diffuse correlation,
    differentiated against one lag variable; rates come out per unit of that
    variable.
    """

    k: float
    b0: float
    b1: float
    b2: float

    def __post_init__(self):
        if self.k < 0.0:
            raise ValueError("k must be >= 0")
        if not self.b0 > 0.0:
            raise ValueError("b0 must be > 0")
        if self.b2 < 0.0:
            raise ValueError("b2 must be >= 0")
        scale = max(self.b0 * self.b2, self.b1 * self.b1, 1e-300)
        if self.b0 * self.b2 - self.b1 * self.b1 < -1e-9 * scale:
            raise ValueError("b0*b2 - b1^2 must be >= 0")


# ---------------------------------------------------------------------------
# branch power coefficients

def branch_power_coefficients(k: KFactors, has_los: bool, has_nlos: bool
                              ) -> tuple[float, float, float]:
    """Power shares (LoS, static reflections, dynamic), summing to one.

    Matches the synthesis path exactly, including the degenerate
    normalization when a static sub-branch is absent.
    """
    w_s, w_d = mixing_weights(k.k_s, k.k_d)
    a_l, a_s = static_branch_split(k.k_s, has_los, has_nlos)
    return (w_s * a_l) ** 2, (w_s * a_s) ** 2, w_d ** 2


def _model_coefficients(model: ChannelModel) -> tuple[float, float, float]:
    has_los = any(m.is_los for m in model.static_mpcs)
    has_nlos = any(not m.is_los for m in model.static_mpcs)
    return branch_power_coefficients(model.k, has_los, has_nlos)


# ---------------------------------------------------------------------------
# branch correlations

def _ensemble_seed(base_seed: int, member: int) -> int:
    ss = np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, 0xC0FFEE, member])
    return int(ss.generate_state(1, np.uint64)[0])


def _as_grid(x, q: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.full(q, float(arr))
    if len(arr) != q:
        raise ValueError("offset grids must share one length")
    return arr


def _static_corr_grid(model: ChannelModel, dr_t, dr_r, df, dloc, f=None):
    """Closed-form (LoS, static) branch correlations over offset grids."""
    q = max(np.size(dr_t), np.size(dr_r), np.size(df),
            np.shape(np.atleast_2d(dloc))[0] if np.ndim(dloc) > 1 else 1)
    dr_t = _as_grid(dr_t, q)
    dr_r = _as_grid(dr_r, q)
    df = _as_grid(df, q)
    dloc = np.asarray(dloc, dtype=float)
    if dloc.ndim == 1:
        dloc = np.tile(dloc, (q, 1))
    fc = model.gbsm.carrier_frequency
    f_base = fc if f is None else f

    los = [m for m in model.static_mpcs if m.is_los]
    nlos = [m for m in model.static_mpcs if not m.is_los]
    axis_t = model.tx_array.axis
    axis_r = model.rx_array.axis

    def branch(mpcs, powers):
        if not mpcs:
            return np.zeros(q, dtype=complex)
        taus = np.array([m.delay for m in mpcs])
        s_t = np.stack([unit_from_angles(*m.aod) for m in mpcs])
        s_r = np.stack([unit_from_angles(*m.aoa) for m in mpcs])
        shift = (np.outer(s_t @ axis_t, dr_t) + np.outer(s_r @ axis_r, dr_r)
                 + s_r @ dloc.T) / SPEED_OF_LIGHT
        tau_off = taus[:, None] - shift
        phase = tau_off * (2.0 * fc - f_base - df)[None, :] \
            - taus[:, None] * (2.0 * fc - f_base)
        return powers @ np.exp(2j * math.pi * phase)

    p_nlos = np.array([m.power for m in nlos], dtype=float)
    if len(p_nlos):
        p_nlos = p_nlos / p_nlos.sum()
    r_los = branch(los, np.ones(len(los)))
    r_nlos = branch(nlos, p_nlos)
    return r_los, r_nlos


def _dynamic_corr_grid(model: ChannelModel, dr_t, dr_r, dt, df, dloc,
                       t: float = 0.0, f=None,
                       ensemble: int = DEFAULT_ENSEMBLE) -> np.ndarray:
    """Monte-Carlo dynamic branch correlation over offset grids.

    All offsets share one cluster ensemble, so differences across the grid
    (finite-difference derivatives, lag spectra) stay smooth.
    """
    q = max(np.size(dr_t), np.size(dr_r), np.size(dt), np.size(df),
            np.shape(np.atleast_2d(dloc))[0] if np.ndim(dloc) > 1 else 1)
    dr_t = _as_grid(dr_t, q)
    dr_r = _as_grid(dr_r, q)
    dt = _as_grid(dt, q)
    df = _as_grid(df, q)
    dloc = np.asarray(dloc, dtype=float)
    if dloc.ndim == 1:
        dloc = np.tile(dloc, (q, 1))
    fc = model.gbsm.carrier_frequency
    f_base = fc if f is None else f
    if model.gbsm.n_clusters == 0:
        return np.zeros(q, dtype=complex)

    axis_t = model.tx_array.axis
    axis_r = model.rx_array.axis
    acc = np.zeros(q, dtype=complex)
    for member in range(ensemble):
        clusters = model.spawn(_ensemble_seed(model.gbsm.seed, member))
        a_t, a_r, v_t, v_r, scale, virt, _ph, _xpr = _flatten_clusters(clusters)
        p = scale ** 2
        pos_t = a_t + v_t * t
        pos_r = a_r + v_r * t
        tau0 = (np.linalg.norm(pos_t, axis=1)
                + np.linalg.norm(pos_r, axis=1)) / SPEED_OF_LIGHT + virt
        # offset side: elements displaced along the axes, rx moved by dloc
        pt = pos_t[:, None, :] + v_t[:, None, :] * dt[None, :, None] \
            - axis_t[None, None, :] * dr_t[None, :, None]
        pr = pos_r[:, None, :] + v_r[:, None, :] * dt[None, :, None] \
            - axis_r[None, None, :] * dr_r[None, :, None] - dloc[None, :, :]
        tau1 = (np.linalg.norm(pt, axis=2)
                + np.linalg.norm(pr, axis=2)) / SPEED_OF_LIGHT + virt[:, None]
        phase = tau1 * (2.0 * fc - f_base - df)[None, :] \
            - tau0[:, None] * (2.0 * fc - f_base)
        acc += p @ np.exp(2j * math.pi * phase)
    return acc / ensemble


def stfcf(model: ChannelModel, query: CorrelationQuery) -> complex:
    """Space-time-frequency correlation at one offset tuple.

    Branch-weighted sum of the closed-form static correlations and the
    Monte-Carlo dynamic correlation.  All offsets zero gives 1 exactly.
    """
    c_l, c_s, c_d = _model_coefficients(model)
    r_los, r_nlos = _static_corr_grid(
        model, query.dr_t, query.dr_r, query.df,
        np.asarray([query.dloc]), f=query.f)
    out = c_l * r_los[0] + c_s * r_nlos[0]
    if c_d > 0.0:
        r_dyn = _dynamic_corr_grid(
            model, query.dr_t, query.dr_r, query.dt, query.df,
            np.asarray([query.dloc]), t=query.t, f=query.f,
            ensemble=query.ensemble)
        out += c_d * r_dyn[0]
    return complex(out)


def fcf_closed_form(model: ChannelModel, df_grid,
                    t: float = 0.0, ensemble: int = DEFAULT_ENSEMBLE
                    ) -> np.ndarray:
    """Frequency correlation over a grid of frequency offsets.

    Static parts are exact tap sums sum_k P_k exp(-j 2 pi df tau_k); the
    dynamic part averages the same expression over cluster ensembles.
    FCF(0) = 1 exactly.
    """
    df_grid = np.asarray(df_grid, dtype=float)
    c_l, c_s, c_d = _model_coefficients(model)
    r_los, r_nlos = _static_corr_grid(model, 0.0, 0.0, df_grid, (0.0, 0.0, 0.0))
    out = c_l * r_los + c_s * r_nlos
    if c_d > 0.0:
        out = out + c_d * _dynamic_corr_grid(
            model, 0.0, 0.0, 0.0, df_grid, (0.0, 0.0, 0.0),
            t=t, ensemble=ensemble)
    return out


# ---------------------------------------------------------------------------
# spectra

def delay_psd(fcf_values, df_grid) -> Psd:
    """Delay power density as the inverse transform of frequency correlation.

    The grid must be uniform and aligned to its spacing (it normally
    contains df = 0).  Delays come out on the conjugate grid
    tau_j = j / (N step); total mass equals the zero-offset correlation.
    """
    values = np.asarray(fcf_values, dtype=complex)
    df_grid = np.asarray(df_grid, dtype=float)
    if values.shape != df_grid.shape or values.ndim != 1 or len(values) < 2:
        raise ValueError("need matching 1-D fcf and offset arrays")
    steps = np.diff(df_grid)
    step = steps[0]
    if step <= 0.0 or np.any(np.abs(steps - step) > 1e-9 * step):
        raise ValueError("frequency offsets must be uniformly spaced ascending")
    ratio = df_grid[0] / step
    if abs(ratio - round(ratio)) > 1e-6:
        raise ValueError("frequency offset grid must be aligned to its spacing")
    n = len(values)
    taus = np.arange(n) / (n * step)
    spectrum = np.fft.ifft(values) * n * step
    density = np.real(spectrum * np.exp(2j * math.pi * taus * df_grid[0]))
    clipped = -float(np.sum(density[density < 0.0])) / (n * step)
    density = np.maximum(density, 0.0)
    return Psd(taus, density, clipped=clipped)


def rms_spread(psd: Psd, circular: bool = False) -> float:
    """Root second central moment of a density; circular mean for angles."""
    widths = np.gradient(psd.support)
    w = psd.density * widths
    total = w.sum()
    if total <= 0.0:
        raise ValueError("density carries no mass")
    x = psd.support
    if circular:
        mean = math.atan2(float(np.sum(w * np.sin(x))), float(np.sum(w * np.cos(x))))
        dev = np.mod(x - mean + math.pi, 2.0 * math.pi) - math.pi
        return float(np.sqrt(np.sum(w * dev ** 2) / total))
    mean = float(np.sum(w * x) / total)
    return float(np.sqrt(np.sum(w * (x - mean) ** 2) / total))


def _lag_spectrum_masses(lags: np.ndarray, oversample: int = 8):
    """Hann-windowed DTFT of a Hermitian lag sequence, as bin masses.

    `lags` holds R(0), R(1 step), ...  Returns (nu_centers, masses) on the
    normalized frequency circle [-1/2, 1/2); masses sum to R(0) exactly
    before any clamping (the window is 1 at lag zero).  Negative ripple is
    clamped and returned separately.
    """
    n = len(lags)
    if n < 2:
        raise ValueError("need at least two lags")
    window = 0.5 * (1.0 + np.cos(np.pi * np.arange(n) / n))
    weighted = lags * window
    m = oversample * (2 * n - 1)
    if m % 2:
        m += 1
    # place lags q = 0..n-1 and q = -(n-1)..-1 on the length-m circle, so
    # m * ifft evaluates sum_q w_q R_q exp(+j 2 pi nu q) per fine bin
    circle = np.zeros(m, dtype=complex)
    circle[:n] = weighted
    circle[m - (n - 1):] = np.conj(weighted[1:][::-1])
    density = np.real(np.fft.fftshift(np.fft.ifft(circle)))
    nu = (np.arange(m) - m // 2) / m
    masses = density  # already carries the 1/m bin measure
    clipped = -float(np.sum(masses[masses < 0.0]))
    masses = np.maximum(masses, 0.0)
    return nu, masses, clipped


def _rebin(positions: np.ndarray, masses: np.ndarray, grid: np.ndarray):
    """Accumulate masses into the grid bins containing each position.

    Returns (density, spilled) where spilled is mass outside the grid span.
    """
    width = np.diff(grid)
    if np.any(width <= 0.0):
        raise ValueError("grid must be strictly increasing")
    edges = np.concatenate([[grid[0] - width[0] / 2.0],
                            (grid[:-1] + grid[1:]) / 2.0,
                            [grid[-1] + width[-1] / 2.0]])
    idx = np.searchsorted(edges, positions, side="right") - 1
    inside = (idx >= 0) & (idx < len(grid))
    binned = np.bincount(idx[inside], weights=masses[inside], minlength=len(grid))
    spilled = float(masses[~inside].sum())
    bin_widths = np.gradient(grid)
    return binned / bin_widths, spilled


def angular_psd(model: ChannelModel, grid=None, rx_array=None,
                n_lags: int = 64, ensemble: int = 64, t: float = 0.0) -> Psd:
    """Arrival power density over the cone angle around the receive axis.

    Built from the spatial correlation sampled every quarter wavelength
    along the receive array axis, Hann-windowed, transformed to the
    direction-cosine domain and mass-rebinned onto the angle grid.  A linear
    aperture only resolves the cone angle theta in [0, pi]; grid values are
    that angle in radians.
    """
    rx = rx_array if rx_array is not None else model.rx_array
    if rx.n_elements < 2:
        raise ValueError("angular statistics need a receive array of >= 2 elements")
    if grid is None:
        grid = np.linspace(0.0, math.pi, 181)
    grid = np.asarray(grid, dtype=float)
    lam = SPEED_OF_LIGHT / model.gbsm.carrier_frequency
    dr = np.arange(n_lags) * lam / 4.0

    c_l, c_s, c_d = _model_coefficients(model)
    r_los, r_nlos = _static_corr_grid(model, 0.0, dr, 0.0, (0.0, 0.0, 0.0))
    lags = c_l * r_los + c_s * r_nlos
    if c_d > 0.0:
        lags = lags + c_d * _dynamic_corr_grid(
            model, 0.0, dr, 0.0, 0.0, (0.0, 0.0, 0.0), t=t, ensemble=ensemble)

    nu, masses, clipped = _lag_spectrum_masses(lags)
    # lag phase exp(-j 2 pi q cos/4) meets kernel exp(+j 2 pi q nu), so an
    # arrival at cone angle theta lands at direction cosine 4 nu = cos theta
    cosines = 4.0 * nu
    visible = np.abs(cosines) <= 1.0
    clipped += float(masses[~visible].sum())
    theta = np.arccos(cosines[visible])
    density, spilled = _rebin(theta, masses[visible], grid)
    return Psd(grid, density, clipped=clipped + spilled)


def doppler_psd(model: ChannelModel, duration: float = 0.512, dt: float = 1e-3,
                grid=None, ensemble: int = 64, t: float = 0.0) -> Psd:
    """Doppler power density from the windowed time correlation.

    Lag spacing dt bounds the support to [-1/(2 dt), 1/(2 dt)); the default
    grid uses bins of 4/(L dt) so a pure tone concentrates in one bin.  A
    receding cluster produces negative Doppler.
    """
    n = max(2, int(round(duration / dt)))
    lags_t = np.arange(n) * dt
    c_l, c_s, c_d = _model_coefficients(model)
    lags = np.full(n, c_l + c_s, dtype=complex)
    if c_d > 0.0:
        lags = lags + c_d * _dynamic_corr_grid(
            model, 0.0, 0.0, lags_t, 0.0, (0.0, 0.0, 0.0), t=t,
            ensemble=ensemble)
    return doppler_psd_from_lags(lags, dt, grid=grid)


def doppler_psd_from_lags(lags, dt: float, grid=None) -> Psd:
    """Doppler density from an explicit time-correlation lag sequence."""
    lags = np.asarray(lags, dtype=complex)
    n = len(lags)
    if grid is None:
        step = 4.0 / (n * dt)
        half = int(math.floor((0.5 / dt) / step))
        grid = np.arange(-half, half + 1) * step
    grid = np.asarray(grid, dtype=float)
    if np.all(lags == lags[0]):
        # constant correlation: the spectrum is a pure zero-shift line
        density, spilled = _rebin(np.zeros(1), np.array([lags[0].real]), grid)
        return Psd(grid, density, clipped=spilled)
    nu, masses, clipped = _lag_spectrum_masses(lags)
    density, spilled = _rebin(nu / dt, masses, grid)
    return Psd(grid, density, clipped=clipped + spilled)


def empirical_tacf(series, n_lags: int) -> np.ndarray:
    """Biased time-average autocorrelation of one complex series."""
    series = np.asarray(series, dtype=complex)
    if n_lags >= len(series):
        raise ValueError("need more samples than lags")
    out = np.empty(n_lags, dtype=complex)
    for m in range(n_lags):
        out[m] = np.mean(np.conj(series[:len(series) - m]) * series[m:])
    return out


# ---------------------------------------------------------------------------
# level crossings

def lcr_analytic(inputs: LcrInputs, levels, n_quad: int = 200) -> np.ndarray:
    """Mean upward crossing rate at each envelope level.

    Levels are relative to the rms envelope.  Rates are per unit of the lag
    variable behind the spectral moments (per meter for spatial lags, per
    second for time lags).  The K = 0 limit reduces to the Rayleigh closed
    form sqrt(2 pi) f R exp(-R^2) for isotropic moments.
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    if np.any(levels < 0.0):
        raise ValueError("levels must be >= 0")
    k = inputs.k
    b0, b1, b2 = inputs.b0, inputs.b1, inputs.b2
    det = b0 * b2 - b1 * b1
    spread2 = b2 / b0 - (b1 / b0) ** 2
    if spread2 < 0.0:
        raise ValueError("invalid moments: b2/b0 < (b1/b0)^2")
    chi_num = k * b1 * b1
    if chi_num > 0.0 and det <= 0.0:
        raise ValueError("degenerate moments: b0*b2 == b1^2 with k > 0")
    chi = math.sqrt(chi_num / det) if chi_num > 0.0 else 0.0

    nodes, weights = roots_legendre(n_quad)
    theta = 0.25 * math.pi * (nodes + 1.0)
    w = 0.25 * math.pi * weights
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    cross = np.exp(-(chi * sin_t) ** 2) \
        + math.sqrt(math.pi) * chi * sin_t * erf(chi * sin_t)

    r = levels[:, None]
    decay = k + (k + 1.0) * r ** 2
    arg = 2.0 * math.sqrt(k * (k + 1.0)) * r * cos_t[None, :]
    integrand = 0.5 * (np.exp(arg - decay) + np.exp(-arg - decay))
    integral = (integrand * cross[None, :]) @ w
    rate = (2.0 * levels * math.sqrt(k + 1.0) / math.pi ** 1.5) \
        * math.sqrt(spread2) * integral
    return rate


def lcr_empirical(envelope, level: float, duration: float) -> float:
    """Upward crossings of `level` per unit duration in a sampled envelope."""
    if duration <= 0.0:
        raise ValueError("duration must be > 0")
    env = np.asarray(envelope, dtype=float)
    if env.ndim != 1 or len(env) < 2:
        raise ValueError("envelope must be a 1-D series of >= 2 samples")
    crossings = int(np.count_nonzero((env[:-1] < level) & (env[1:] >= level)))
    return crossings / duration


def correlation_moments(model: ChannelModel, variable: str = "space",
                        step: float | None = None, t: float = 0.0,
                        ensemble: int = 256) -> tuple[float, float, float]:
    """Spectral moments (b0, b1, b2) of the diffuse correlation.

    variable = "space" differentiates against receive displacement
    (rates per meter); "time" against the time lag (rates per second).
    Central differences with one shared cluster ensemble keep the second
    derivative smooth.  The static-reflection branch only contributes for
    the spatial variable; frozen reflections do not move in time.
    """
    k = model.k
    if math.isinf(k.k):
        raise ValueError("no diffuse power: both component ratios infinite")
    kk_s = 0.0 if math.isinf(k.k_s) else k.k / k.k_s
    kk_d = 0.0 if math.isinf(k.k_d) else k.k / k.k_d
    lam = SPEED_OF_LIGHT / model.gbsm.carrier_frequency
    if step is None:
        if variable == "space":
            step = lam / 100.0
        else:
            speed = model.gbsm.cluster_speed
            if speed <= 0.0:
                raise ValueError("time moments need a positive cluster speed")
            step = lam / (100.0 * speed)

    if variable == "space":
        offsets = np.array([0.0, step])
        _r_los, r_nlos = _static_corr_grid(model, 0.0, offsets, 0.0, (0.0, 0.0, 0.0))
        r_dyn = _dynamic_corr_grid(model, 0.0, offsets, 0.0, 0.0,
                                   (0.0, 0.0, 0.0), t=t, ensemble=ensemble)
    elif variable == "time":
        offsets = np.array([0.0, step])
        r_nlos = np.ones(2, dtype=complex)  # frozen in time
        r_dyn = _dynamic_corr_grid(model, 0.0, 0.0, offsets, 0.0,
                                   (0.0, 0.0, 0.0), t=t, ensemble=ensemble)
    else:
        raise ValueError(f"unknown variable {variable!r}")

    weighted0 = kk_s * r_nlos[0] + kk_d * r_dyn[0]
    weighted1 = kk_s * r_nlos[1] + kk_d * r_dyn[1]
    b0 = float(np.real(weighted0))
    b1 = float(np.imag(weighted1)) / step
    b2 = 2.0 * (float(np.real(weighted0)) - float(np.real(weighted1))) / step ** 2
    return b0, b1, b2


def lcr_time_inputs(model: ChannelModel, step: float | None = None,
                    t: float = 0.0, ensemble: int = 256,
                    pair: tuple[int, int] = (0, 0)) -> LcrInputs:
    """Crossing-rate inputs for the narrowband envelope over time.

    In time, every static path is frozen, so the coherent amplitude is the
    full static phasor sum and only the dynamic branch is diffuse.  The
    moments are therefore taken from the dynamic correlation alone, and k
    is the realized coherent-to-diffuse power ratio, not the line-of-sight
    ratio.  Rates from these inputs are per second.
    """
    amp, sigma2 = rician_params(model.snapshot(0.0), pair=pair)
    if sigma2 <= 0.0:
        raise ValueError("no diffuse power: envelope never crosses")
    k = abs(amp) ** 2 / (2.0 * sigma2)
    if step is None:
        speed = model.gbsm.cluster_speed
        if speed <= 0.0:
            raise ValueError("time statistics need a positive cluster speed")
        lam = SPEED_OF_LIGHT / model.gbsm.carrier_frequency
        step = lam / (100.0 * speed)
    r = _dynamic_corr_grid(model, 0.0, 0.0, np.array([0.0, step]), 0.0,
                           (0.0, 0.0, 0.0), t=t, ensemble=ensemble)
    b0 = float(np.real(r[0]))
    b1 = float(np.imag(r[1])) / step
    b2 = 2.0 * (float(np.real(r[0])) - float(np.real(r[1]))) / step ** 2
    return LcrInputs(k=k, b0=b0, b1=b1, b2=max(b2, 0.0))


# ---------------------------------------------------------------------------
# empirical distribution

def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous empirical distribution as (values, probabilities)."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("need a non-empty 1-D sample array")
    values, counts = np.unique(arr, return_counts=True)
    return values, np.cumsum(counts) / len(arr)


def cdf_at(cdf: tuple[np.ndarray, np.ndarray], x: float) -> float:
    values, probs = cdf
    idx = int(np.searchsorted(values, x, side="right"))
    return 0.0 if idx == 0 else float(probs[idx - 1])
