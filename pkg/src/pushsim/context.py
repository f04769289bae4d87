"""Network-level occupancy statistics and user-level per-frame channel
distributions consumed by the plan solver, plus the multi-user scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PathLossParams, channel_dist_for_gain, path_gain, positions_at
from .channel import GammaChannelDist, Trajectory
from .geometry import Hexagon
from .traffic import RTTrafficModel, step_rt_queue


@dataclass(frozen=True)
class NetworkContext:
    """Occupancy probabilities P[frame, level]: level l means a fraction
    l/L of the bandwidth is free of RT traffic."""

    occupancy_probs: np.ndarray  # (n_frames, L+1), rows sum to 1

    def __post_init__(self):
        probs = np.asarray(self.occupancy_probs, dtype=float)
        object.__setattr__(self, "occupancy_probs", probs)
        if probs.ndim != 2:
            raise ValueError("occupancy_probs must be 2-D (frames x levels)")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("occupancy probabilities must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("occupancy rows must each sum to 1")

    @property
    def n_frames(self) -> int:
        return self.occupancy_probs.shape[0]

    @property
    def n_levels(self) -> int:
        return self.occupancy_probs.shape[1]


@dataclass(frozen=True)
class ScaledContext:
    """Sub-stochastic occupancy after the multi-user 1/K scaling; the
    missing row mass is the probability the slot serves another user."""

    occupancy_probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.occupancy_probs, dtype=float)
        object.__setattr__(self, "occupancy_probs", probs)
        if np.any(probs < 0) or np.any(probs.sum(axis=1) > 1.0 + 1e-9):
            raise ValueError("scaled occupancy rows must be sub-stochastic")

    @property
    def n_frames(self) -> int:
        return self.occupancy_probs.shape[0]

    @property
    def n_levels(self) -> int:
        return self.occupancy_probs.shape[1]


@dataclass(frozen=True)
class UserContext:
    """Per-frame large-scale gains and full-band gain distributions."""

    frame_gains: np.ndarray  # (n_frames,) linear alpha
    channel_dists: tuple[GammaChannelDist, ...]

    def __post_init__(self):
        gains = np.asarray(self.frame_gains, dtype=float)
        object.__setattr__(self, "frame_gains", gains)
        if np.any(gains <= 0):
            raise ValueError("frame gains must be > 0")
        if len(self.channel_dists) != len(gains):
            raise ValueError("one channel distribution per frame is required")

    @property
    def n_frames(self) -> int:
        return len(self.frame_gains)

    @property
    def shape(self) -> int:
        return self.channel_dists[0].shape

    @property
    def rate_scales(self) -> np.ndarray:
        return np.array([d.rate_scale for d in self.channel_dists])


def estimate_occupancy(
    model: RTTrafficModel,
    n_frames: int,
    warmup_slots: int,
    rng: np.random.Generator,
) -> NetworkContext:
    """Empirical distribution of the availability level l = L - n from a
    long run of the RT chain, replicated over frames (the RT process is
    stationary here)."""
    if warmup_slots < 10_000:
        raise ValueError("warmup_slots must be >= 10_000 for a stable estimate")
    L = model.capacity
    counts = np.zeros(L + 1, dtype=np.int64)
    state = 0
    for _ in range(warmup_slots):
        state = step_rt_queue(state, model, rng)
        counts[L - state] += 1
    probs = counts / counts.sum()
    return NetworkContext(occupancy_probs=np.tile(probs, (n_frames, 1)))


def build_user_context(
    trajectory: Trajectory,
    cell: Hexagon,
    params: PathLossParams,
    n_antennas: int,
    n_frames: int,
    frame_duration: float,
) -> UserContext:
    """Large-scale gain at each frame start along the trajectory, relative
    to the serving (closest) SBS at the cell center, with the matching
    Gamma gain distributions."""
    times = np.arange(n_frames) * frame_duration
    pos = positions_at(trajectory, times, cell)
    dists = np.linalg.norm(pos - np.asarray(cell.center), axis=1)
    alphas = path_gain(dists, params)
    dists_g = tuple(channel_dist_for_gain(a, params, n_antennas) for a in alphas)
    return UserContext(frame_gains=alphas, channel_dists=dists_g)


def scale_for_multiuser(ctx: NetworkContext, users_per_cell_per_frame) -> ScaledContext:
    """Divide every probability in frame j by the user count K_j; the
    missing mass acts as a zero-bandwidth slot for this user."""
    counts = np.asarray(users_per_cell_per_frame, dtype=float)
    if counts.ndim == 0:
        counts = np.full(ctx.n_frames, float(counts))
    if counts.shape != (ctx.n_frames,):
        raise ValueError("need one user count per frame")
    if np.any(counts < 1):
        raise ValueError("user counts must be >= 1")
    return ScaledContext(occupancy_probs=ctx.occupancy_probs / counts[:, None])
