"""Path loss, Rayleigh small-scale fading, and the Gamma law of the
equivalent channel gain used by the context solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .geometry import Hexagon, reflected_walk

# Default radio constants: noise density -165 dBm/Hz over 10 MHz gives a
# noise power of -95 dBm.
DEFAULT_NOISE_PSD = 10.0 ** (-165.0 / 10.0) * 1e-3  # W/Hz
DEFAULT_MAX_BANDWIDTH = 10e6  # Hz


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance path loss plus the radio constants it combines with."""

    intercept_db: float = 30.5
    slope_db_per_decade: float = 36.7
    noise_psd: float = DEFAULT_NOISE_PSD
    max_bandwidth: float = DEFAULT_MAX_BANDWIDTH

    def __post_init__(self):
        if self.slope_db_per_decade <= 0:
            raise ValueError("slope_db_per_decade must be > 0")
        if self.max_bandwidth <= 0:
            raise ValueError("max_bandwidth must be > 0")
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be > 0")

    @property
    def noise_power(self) -> float:
        """Total noise power over the full band, in watts."""
        return self.noise_psd * self.max_bandwidth


@dataclass(frozen=True)
class FadingSample:
    """One realization of the beamformed channel power ||h||^2 (unit mean per antenna)."""

    h_norm_sq: float

    def __post_init__(self):
        if self.h_norm_sq < 0:
            raise ValueError("h_norm_sq must be >= 0")


@dataclass(frozen=True)
class GammaChannelDist:
    """Distribution of the full-band equivalent gain: Gamma(shape, rate_scale)."""

    shape: int
    rate_scale: float  # 1/gain units: noise_power / large-scale gain

    def __post_init__(self):
        if self.shape < 1 or int(self.shape) != self.shape:
            raise ValueError("shape must be an integer >= 1")
        if self.rate_scale <= 0:
            raise ValueError("rate_scale must be > 0")

    @property
    def mean(self) -> float:
        return self.shape / self.rate_scale

    def ppf(self, q: float) -> float:
        return float(stats.gamma.ppf(q, self.shape, scale=1.0 / self.rate_scale))

    def cdf(self, g):
        return special.gammainc(self.shape, self.rate_scale * np.asarray(g))


@dataclass(frozen=True)
class Trajectory:
    """Straight-line walk at constant speed, reflected at the cell boundary."""

    start_position: np.ndarray
    direction: np.ndarray
    speed: float = 1.0
    min_sbs_distance: float = 5.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not (5.0 <= self.min_sbs_distance <= 40.0):
            raise ValueError("min_sbs_distance must be within [5, 40] m")
        object.__setattr__(self, "start_position", np.asarray(self.start_position, dtype=float))
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        object.__setattr__(self, "direction", d / n if n > 0 else d)


def path_loss_db(distance, params: PathLossParams | None = None):
    """Path loss in dB at a distance in meters; clamped below 1 m."""
    p = params if params is not None else PathLossParams()
    d = np.maximum(np.asarray(distance, dtype=float), 1.0)
    return p.intercept_db + p.slope_db_per_decade * np.log10(d)


def path_gain(distance, params: PathLossParams | None = None):
    """Linear large-scale gain alpha = 10^(-loss/10)."""
    return 10.0 ** (-path_loss_db(distance, params) / 10.0)


def sample_h_norm_sq(n_antennas: int, rng: np.random.Generator, size=None):
    """Draw ||h||^2: the sum of n_antennas unit-mean exponential variates."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    return rng.standard_gamma(n_antennas, size=size)


def equivalent_gain_tilde(alpha, h_norm_sq, params: PathLossParams):
    """Full-band equivalent gain g~ = alpha * ||h||^2 / (N0 * W_max), in 1/W."""
    return np.asarray(alpha) * np.asarray(h_norm_sq) / params.noise_power


def gain_at_bandwidth(g_tilde, w: float, w_max: float):
    """Actual-bandwidth gain g = (W_max / W) * g~; rejects an unusable slot."""
    if w <= 0:
        raise ValueError("slot bandwidth must be > 0 to carry a transmission")
    return (w_max / w) * np.asarray(g_tilde)


def gamma_pdf(g, dist: GammaChannelDist):
    """Normalized Gamma(shape, rate) density of the full-band gain."""
    g = np.asarray(g, dtype=float)
    r, n = dist.rate_scale, dist.shape
    out = np.zeros_like(g, dtype=float)
    pos = g > 0
    with np.errstate(divide="ignore", over="ignore"):
        logpdf = (
            n * math.log(r)
            + (n - 1) * np.log(np.where(pos, g, 1.0))
            - r * g
            - math.lgamma(n)
        )
    np.exp(logpdf, where=pos, out=out)
    if n == 1:
        out = np.where(g == 0, r, out)
    return out if out.ndim else float(out)


def channel_dist_for_gain(alpha: float, params: PathLossParams, n_antennas: int) -> GammaChannelDist:
    """Gamma law of the full-band equivalent gain at large-scale gain alpha."""
    return GammaChannelDist(shape=n_antennas, rate_scale=params.noise_power / alpha)


def position_at(trajectory: Trajectory, time: float, cell: Hexagon) -> np.ndarray:
    """User position after `time` seconds, reflected inside the cell hexagon."""
    if time < 0:
        raise ValueError("time must be >= 0")
    return reflected_walk(
        trajectory.start_position, trajectory.direction, trajectory.speed * time, cell
    )


def positions_at(trajectory: Trajectory, times: np.ndarray, cell: Hexagon) -> np.ndarray:
    """Positions at an increasing sequence of times (one reflected walk)."""
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), 2))
    pos = np.asarray(trajectory.start_position, dtype=float).copy()
    d = np.asarray(trajectory.direction, dtype=float).copy()
    prev_t = 0.0
    for i, t in enumerate(times):
        if t < prev_t:
            raise ValueError("times must be non-decreasing")
        seg = trajectory.speed * (t - prev_t)
        # advance with reflections, carrying the (possibly reflected) heading
        remaining = seg
        guard = 0
        while remaining > 1e-12:
            dist, k = cell.exit_distance(pos, d)
            if k < 0 or dist >= remaining:
                pos = pos + remaining * d
                break
            pos = pos + dist * d
            d = cell.reflect_direction(d, k)
            remaining -= dist
            guard += 1
            if guard > 10000:
                break
        out[i] = pos
        prev_t = t
    return out
