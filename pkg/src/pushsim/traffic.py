"""Real-time traffic occupancy, Zipf content catalog, per-user interest
profiles, and content-delivery request generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RTTrafficModel:
    """Slotted birth-death model of real-time (RT) service occupancy."""

    arrival_rate: float = 0.2  # requests per slot
    mean_service: float = 2.0  # slots
    capacity: int = 5
    bandwidth_fraction_per_request: float = 0.2
    power_fraction_per_request: float = 0.2

    def __post_init__(self):
        for name in ("bandwidth_fraction_per_request", "power_fraction_per_request"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")
        if self.capacity != int(1.0 / self.bandwidth_fraction_per_request):
            raise ValueError("capacity must equal floor(1 / bandwidth_fraction_per_request)")
        if self.arrival_rate < 0 or self.mean_service < 1:
            raise ValueError("arrival_rate must be >= 0 and mean_service >= 1")


@dataclass(frozen=True)
class ContentCatalog:
    """File catalog indexed 1..n_files by descending popularity."""

    n_files: int = 10000
    file_size_bits: float = 30 * 8e6  # 30 MBytes
    zipf_beta: float = 1.0

    def __post_init__(self):
        if self.n_files < 1:
            raise ValueError("n_files must be >= 1")
        if self.file_size_bits <= 0:
            raise ValueError("file_size_bits must be > 0")
        if not (0.0 <= self.zipf_beta <= 1.0):
            raise ValueError("zipf_beta must be within [0, 1]")

    def popularity_pmf(self) -> np.ndarray:
        return zipf_pmf(self.n_files, self.zipf_beta)


@dataclass(frozen=True)
class UserInterestProfile:
    """Ordered subset of the catalog a user may request, with its own Zipf law."""

    subset: np.ndarray  # 1-based file indices, ascending catalog rank
    zipf_beta: float

    def __post_init__(self):
        object.__setattr__(self, "subset", np.asarray(self.subset, dtype=np.int64))
        if len(np.unique(self.subset)) != len(self.subset):
            raise ValueError("subset elements must be distinct")
        if not (0.0 <= self.zipf_beta <= 1.0):
            raise ValueError("zipf_beta must be within [0, 1]")

    def request_pmf(self) -> np.ndarray:
        return zipf_pmf(len(self.subset), self.zipf_beta)


@dataclass(frozen=True)
class DeliveryProcess:
    """Content-delivery demand during the peak window."""

    mean_rate: float = 1.2e6  # offered load in bits/s per MS
    peak_duration: float = 60.0  # seconds

    def __post_init__(self):
        if self.mean_rate < 0:
            raise ValueError("mean_rate must be >= 0")
        if self.peak_duration <= 0:
            raise ValueError("peak_duration must be > 0")


def step_rt_queue(state, model: RTTrafficModel, rng: np.random.Generator):
    """One slot of the RT birth-death chain.

    Requests active at the slot start depart independently with probability
    1/mean_service; then Poisson(arrival_rate) new arrivals are admitted up
    to capacity (excess arrivals are blocked and dropped). Works on scalars
    or integer arrays of states.
    """
    state = np.asarray(state)
    departures = rng.binomial(state, 1.0 / model.mean_service)
    survivors = state - departures
    arrivals = rng.poisson(model.arrival_rate, size=state.shape if state.shape else None)
    new = np.minimum(survivors + arrivals, model.capacity)
    return new if new.shape else int(new)


def rt_reservation(active, model: RTTrafficModel, p_max: float, w_max: float):
    """Reserved RT power and residual bandwidth for a given active count."""
    active = np.asarray(active)
    p_rt = active * model.power_fraction_per_request * p_max
    w_avail = (1.0 - active * model.bandwidth_fraction_per_request) * w_max
    if p_rt.shape:
        return p_rt, np.maximum(w_avail, 0.0)
    return float(p_rt), max(float(w_avail), 0.0)


def zipf_pmf(n: int, beta: float) -> np.ndarray:
    """Zipf probabilities p(i) ~ i^(-beta) over ranks 1..n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= beta <= 1.0):
        raise ValueError("beta must be within [0, 1]")
    weights = np.arange(1, n + 1, dtype=float) ** (-beta)
    return weights / weights.sum()


def sample_user_subset(
    catalog: ContentCatalog, n_s: int, beta_s: float, rng: np.random.Generator
) -> UserInterestProfile:
    """Draw a user's interest subset.

    Inclusion is weighted by the catalog popularity law (without
    replacement), so personal subsets correlate with global popularity;
    the subset is then ordered by catalog rank.
    """
    if n_s > catalog.n_files:
        raise ValueError("n_s must not exceed the catalog size")
    picks = rng.choice(
        catalog.n_files, size=n_s, replace=False, p=catalog.popularity_pmf()
    )
    subset = np.sort(picks) + 1  # 1-based file indices
    return UserInterestProfile(subset=subset, zipf_beta=beta_s)


def generate_delivery_requests(
    profile: UserInterestProfile,
    process: DeliveryProcess,
    file_size_bits: float,
    slot_duration: float,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Poisson request arrivals over the peak window for one user.

    The request rate is mean_rate / file_size_bits per second, so the
    offered traffic in bits/s equals the configured mean rate. Returns
    (arrival_slot, file_index) pairs sorted by arrival.
    """
    lam = process.mean_rate / file_size_bits
    n = rng.poisson(lam * process.peak_duration)
    if n == 0:
        return []
    times = rng.uniform(0.0, process.peak_duration, size=n)
    slots = np.minimum(
        (times / slot_duration).astype(np.int64),
        int(round(process.peak_duration / slot_duration)) - 1,
    )
    files = rng.choice(profile.subset, size=n, p=profile.request_pmf())
    order = np.argsort(slots, kind="stable")
    return [(int(slots[i]), int(files[i])) for i in order]
