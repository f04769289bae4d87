"""End-to-end slotted Monte Carlo engine: hexagonal layout, per-slot state
evolution, the three strategies (unicast push / broadcast / baseline),
conflict-set random scheduling, and energy/throughput accounting."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import PathLossParams, Trajectory, path_gain, positions_at
from .context import NetworkContext, UserContext, build_user_context, estimate_occupancy, scale_for_multiuser
from .geometry import Hexagon, hex_grid_positions
from .traffic import (
    ContentCatalog,
    DeliveryProcess,
    RTTrafficModel,
    UserInterestProfile,
    generate_delivery_requests,
    sample_user_subset,
)
from .waterfill import (
    LN2,
    PowerModel,
    PushTarget,
    WaterfillPlan,
    solve_plan,
)

STRATEGIES = ("unicast", "broadcast", "baseline")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full simulation setup; defaults follow the reference small-cell
    scenario (19 cells, 10 users each, 120 s off-peak + 60 s peak)."""

    n_cells: int = 19
    cell_radius: float = 50.0
    macro_radius: float = 250.0
    n_antennas: int = 4
    users_per_cell: int = 10
    slot_duration: float = 0.01
    slots_per_frame: int = 100
    offpeak_duration: float = 120.0
    peak_duration: float = 60.0
    cache_files_broadcast: int = 10
    cache_files_unicast: int = 10
    beta_s: float = 1.0
    n_subset: int = 100
    n_trials: int = 200
    master_seed: int = 20240901
    occupancy_warmup_slots: int = 100_000
    path_loss: PathLossParams = field(default_factory=PathLossParams)
    power: PowerModel = field(default_factory=PowerModel)
    rt: RTTrafficModel = field(default_factory=RTTrafficModel)
    catalog: ContentCatalog = field(default_factory=ContentCatalog)
    delivery: DeliveryProcess = field(default_factory=DeliveryProcess)

    def __post_init__(self):
        for name in ("n_cells", "n_antennas", "users_per_cell", "slots_per_frame",
                     "cache_files_broadcast", "cache_files_unicast", "n_subset", "n_trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        n_slots = self.offpeak_duration / self.slot_duration
        if abs(n_slots - round(n_slots)) > 1e-9 or round(n_slots) % self.slots_per_frame:
            raise ValueError("offpeak_duration/slot_duration must be divisible by slots_per_frame")
        if not (0.0 <= self.beta_s <= 1.0):
            raise ValueError("beta_s must be within [0, 1]")
        if self.n_subset > self.catalog.n_files:
            raise ValueError("n_subset must not exceed catalog.n_files")

    @property
    def n_offpeak_slots(self) -> int:
        return int(round(self.offpeak_duration / self.slot_duration))

    @property
    def n_peak_slots(self) -> int:
        return int(round(self.peak_duration / self.slot_duration))

    @property
    def n_offpeak_frames(self) -> int:
        return self.n_offpeak_slots // self.slots_per_frame

    @property
    def n_total_frames(self) -> int:
        total = self.n_offpeak_slots + self.n_peak_slots
        return -(-total // self.slots_per_frame)

    @property
    def push_bits(self) -> float:
        return self.cache_files_unicast * self.catalog.file_size_bits


@dataclass(frozen=True)
class CellLayout:
    sbs_positions: np.ndarray  # (n_cells, 2)
    hexagons: tuple[Hexagon, ...]

    def nearest_sbs(self, points: np.ndarray) -> np.ndarray:
        """Index of the closest SBS per point; ties resolve to the lowest index."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(pts[:, None, :] - self.sbs_positions[None, :, :], axis=2)
        return d.argmin(axis=1)


@dataclass
class EnergyLedger:
    push_energy: float = 0.0
    delivery_energy: float = 0.0

    @property
    def total(self) -> float:
        return self.push_energy + self.delivery_energy


@dataclass(frozen=True)
class Metrics:
    delivered_bits: float
    throughput: float
    total_energy: float
    cache_hit_rate: float
    plan_feasible_fraction: float
    push_energy: float
    delivery_energy: float


def build_layout(config: ScenarioConfig) -> CellLayout:
    pos = hex_grid_positions(config.n_cells, config.cell_radius)
    radii = np.linalg.norm(pos, axis=1)
    if np.any(radii > config.macro_radius):
        raise ValueError("hexagonal cluster does not fit inside the macro radius")
    hexes = tuple(Hexagon(center=(x, y), circumradius=config.cell_radius) for x, y in pos)
    return CellLayout(sbs_positions=pos, hexagons=hexes)


@dataclass(frozen=True)
class UserSetup:
    cell: int
    index: int
    trajectory: Trajectory
    profile: UserInterestProfile
    context: UserContext
    plan: WaterfillPlan
    push_order: np.ndarray  # file ids, most likely first


@dataclass(frozen=True)
class Experiment:
    """Trial-invariant state: layout, trajectories, profiles, contexts and
    solved plans (trajectories stay fixed across trials; fading, RT traffic
    and requests are redrawn per trial)."""

    config: ScenarioConfig
    layout: CellLayout
    users: tuple[UserSetup, ...]
    occupancy: NetworkContext
    frame_alphas: np.ndarray  # (n_total_frames, n_cells, users_per_cell)
    stationary_n: np.ndarray  # stationary law of the RT active count


def _static_rng(config: ScenarioConfig, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.master_seed, 0, key]))


def build_experiment(config: ScenarioConfig) -> Experiment:
    layout = build_layout(config)
    c = config
    occ = estimate_occupancy(
        c.rt, c.n_offpeak_frames, c.occupancy_warmup_slots, _static_rng(c, 0)
    )
    scaled = scale_for_multiuser(occ, np.full(c.n_offpeak_frames, float(c.users_per_cell)))
    stationary_n = occ.occupancy_probs[0][::-1].copy()  # level l = L - n

    traj_rng = _static_rng(c, 1)
    prof_rng = _static_rng(c, 2)
    frame_times = np.arange(c.n_total_frames) * c.slots_per_frame * c.slot_duration
    target = PushTarget(
        bits=c.push_bits, n_slots=c.n_offpeak_slots, slot_duration=c.slot_duration
    )

    users = []
    alphas = np.empty((c.n_total_frames, c.n_cells, c.users_per_cell))
    for cell_idx in range(c.n_cells):
        hexagon = layout.hexagons[cell_idx]
        center = np.asarray(hexagon.center)
        for u in range(c.users_per_cell):
            min_d = traj_rng.uniform(5.0, 40.0)
            ang = traj_rng.uniform(0.0, 2.0 * math.pi)
            normal = np.array([math.cos(ang), math.sin(ang)])
            direction = np.array([-math.sin(ang), math.cos(ang)])
            traj = Trajectory(
                start_position=center + min_d * normal,
                direction=direction,
                speed=1.0,
                min_sbs_distance=min_d,
            )
            pos = positions_at(traj, frame_times, hexagon)
            dists = np.linalg.norm(pos - center, axis=1)
            alphas[:, cell_idx, u] = path_gain(dists, c.path_loss)
            context = build_user_context(
                traj, hexagon, c.path_loss, c.n_antennas,
                c.n_offpeak_frames, c.slots_per_frame * c.slot_duration,
            )
            profile = sample_user_subset(c.catalog, c.n_subset, c.beta_s, prof_rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                plan = solve_plan(
                    scaled, context, target, c.power, c.path_loss.max_bandwidth
                )
            users.append(
                UserSetup(
                    cell=cell_idx,
                    index=u,
                    trajectory=traj,
                    profile=profile,
                    context=context,
                    plan=plan,
                    push_order=profile.subset[: c.cache_files_unicast].copy(),
                )
            )
    return Experiment(
        config=c,
        layout=layout,
        users=tuple(users),
        occupancy=occ,
        frame_alphas=alphas,
        stationary_n=stationary_n,
    )


# ---------------------------------------------------------------------------
# per-trial machinery

def _trial_streams(config: ScenarioConfig, trial_seed: int) -> dict[str, np.random.Generator]:
    base = np.random.SeedSequence([config.master_seed, 1, trial_seed])
    names = ("rt_off", "fade_off", "sched", "requests", "rt_peak", "fade_peak")
    return {n: np.random.default_rng(s) for n, s in zip(names, base.spawn(len(names)))}


def _simulate_rt_levels(
    config: ScenarioConfig, n_slots: int, stationary_n: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Availability levels l (0..L) for every slot and cell; chains start
    from a stationary draw."""
    rt = config.rt
    L = rt.capacity
    states = rng.choice(L + 1, size=config.n_cells, p=stationary_n)
    out = np.empty((n_slots, config.n_cells), dtype=np.int8)
    p_dep = 1.0 / rt.mean_service
    for t in range(n_slots):
        states = states - rng.binomial(states, p_dep)
        states = np.minimum(states + rng.poisson(rt.arrival_rate, size=states.shape), L)
        out[t] = L - states
    return out


def run_offpeak_unicast(
    experiment: Experiment,
    rt_levels: np.ndarray,
    fade_rng: np.random.Generator,
    sched_rng: np.random.Generator,
    trace: list | None = None,
) -> tuple[list[set[int]], EnergyLedger, float]:
    """Slot-by-slot content pushing with conflict-set random scheduling.

    Every resident user's water-filling power is computed each slot; one
    user with positive power is drawn uniformly per cell and served. Users
    leave the conflict sets once their push target completes. Returns the
    per-user cache sets (fully transferred files only), the energy ledger,
    and the fraction of users that completed the full push.
    """
    c = experiment.config
    C, U = c.n_cells, c.users_per_cell
    L = c.rt.capacity
    dt = c.slot_duration
    w_max = c.path_loss.max_bandwidth
    noise = c.path_loss.noise_power
    p_max = c.power.p_max
    xi = c.power.amp_efficiency
    wake = c.power.wake_power

    nu = np.full((C, U), 1e-300)  # unfilled user slots never transmit
    gth = np.full((C, U), np.inf)
    for us in experiment.users:
        nu[us.cell, us.index] = us.plan.nu
        gth[us.cell, us.index] = us.plan.g_th

    goal = c.push_bits * LN2
    remaining = np.full((C, U), goal)
    push_energy = 0.0
    cells = np.arange(C)

    n_slots = c.n_offpeak_slots
    Ts = c.slots_per_frame
    for f0 in range(0, n_slots, Ts):
        frame = f0 // Ts
        alpha = experiment.frame_alphas[frame]  # (C, U)
        h2 = fade_rng.standard_gamma(c.n_antennas, size=(Ts, C, U))
        for ti in range(Ts):
            t = f0 + ti
            active = remaining > 0.0
            if not active.any():
                return _finalize_push(experiment, remaining, goal, push_energy)
            lev = rt_levels[t]  # (C,)
            wf = lev / L
            idle = lev == L
            gt = alpha * h2[ti] / noise
            aux = np.clip(nu - 1.0 / gt, 0.0, p_max)
            eligible = active & (aux > 0.0) & (wf[:, None] > 0.0)
            eligible &= ~idle[:, None] | (gt >= gth)
            keys = np.where(eligible, sched_rng.random((C, U)), -1.0)
            sel = keys.argmax(axis=1)
            served = keys[cells, sel] >= 0.0
            aux_s = np.where(served, aux[cells, sel], 0.0)
            gt_s = gt[cells, sel]
            p_s = wf * aux_s
            nats = wf * w_max * np.log1p(gt_s * aux_s) * dt
            remaining[cells[served], sel[served]] -= nats[served]
            slot_power = p_s.sum() / xi + wake * np.count_nonzero(idle & (p_s > 0.0))
            push_energy += slot_power * dt
            if trace is not None:
                trace.append((t, wf.copy(), idle.copy(), sel.copy(), served.copy(),
                              p_s.copy(), gt_s.copy(), nats.copy()))
    return _finalize_push(experiment, remaining, goal, push_energy)


def _finalize_push(experiment, remaining, goal, push_energy):
    c = experiment.config
    F = c.catalog.file_size_bits
    delivered_bits = np.maximum(goal - remaining, 0.0) / LN2
    files_done = np.floor(delivered_bits / F + 1e-9).astype(int)
    files_done = np.minimum(files_done, c.cache_files_unicast)
    caches: list[set[int]] = []
    complete = []
    for us in experiment.users:
        k = files_done[us.cell, us.index]
        caches.append(set(int(x) for x in us.push_order[:k]))
        complete.append(k == c.cache_files_unicast)
    feasible = float(np.mean(complete)) if complete else 1.0
    return caches, EnergyLedger(push_energy=push_energy), feasible


def run_offpeak_broadcast(config: ScenarioConfig, n_users: int) -> list[set[int]]:
    """Every user caches the globally most popular files; broadcast energy
    is not accrued."""
    top = set(range(1, config.cache_files_broadcast + 1))
    return [set(top) for _ in range(n_users)]


def generate_trial_requests(
    experiment: Experiment, rng: np.random.Generator
) -> list[list[tuple[int, int]]]:
    """Delivery requests per user, drawn in a fixed user order so the
    realization is identical across strategies under one trial seed."""
    c = experiment.config
    return [
        generate_delivery_requests(
            us.profile, c.delivery, c.catalog.file_size_bits, c.slot_duration, rng
        )
        for us in experiment.users
    ]


def run_peak_delivery(
    experiment: Experiment,
    caches: list[set[int]],
    requests: list[list[tuple[int, int]]],
    rt_levels: np.ndarray,
    fade_rng: np.random.Generator,
    trace: list | None = None,
) -> tuple[float, int, int, EnergyLedger]:
    """FIFO cache-miss delivery, one served user per SBS per slot at full
    residual power. Cache hits deliver instantly at zero radio energy.

    Returns (delivered_bits, n_requests, n_hits, ledger)."""
    c = experiment.config
    C, U = c.n_cells, c.users_per_cell
    L = c.rt.capacity
    dt = c.slot_duration
    w_max = c.path_loss.max_bandwidth
    noise = c.path_loss.noise_power
    p_max = c.power.p_max
    xi = c.power.amp_efficiency
    wake = c.power.wake_power
    F = c.catalog.file_size_bits

    n_requests = 0
    n_hits = 0
    delivered_bits = 0.0

    # build per-cell FIFO queues of misses, in arrival order
    queues: list[list[tuple[int, int]]] = [[] for _ in range(C)]  # (slot, user)
    for us, reqs in zip(experiment.users, requests):
        cache = caches[us.cell * U + us.index]
        for slot, fid in reqs:
            n_requests += 1
            if fid in cache:
                n_hits += 1
                delivered_bits += F
            else:
                queues[us.cell].append((slot, us.index))
    for q in queues:
        q.sort(key=lambda su: su[0])

    maxq = max((len(q) for q in queues), default=0)
    n_slots = c.n_peak_slots
    ledger = EnergyLedger()
    if maxq == 0:
        return delivered_bits, n_requests, n_hits, ledger

    arr = np.full((C, maxq), n_slots + 1, dtype=np.int64)
    uidx = np.zeros((C, maxq), dtype=np.int64)
    rem = np.zeros((C, maxq))
    qlen = np.zeros(C, dtype=np.int64)
    for ci, q in enumerate(queues):
        qlen[ci] = len(q)
        for k, (slot, ui) in enumerate(q):
            arr[ci, k], uidx[ci, k] = slot, ui
            rem[ci, k] = F * LN2
    heads = np.zeros(C, dtype=np.int64)
    cells = np.arange(C)

    h2 = fade_rng.standard_gamma(c.n_antennas, size=(n_slots, C))
    frame0 = c.n_offpeak_slots // c.slots_per_frame
    delivery_energy = 0.0
    for t in range(n_slots):
        if np.all(heads >= qlen):
            break
        lev = rt_levels[t]
        wf = lev / L
        idle = lev == L
        head_c = np.minimum(heads, maxq - 1)
        serving = (heads < qlen) & (arr[cells, head_c] <= t) & (wf > 0.0)
        if not serving.any():
            continue
        frame = frame0 + t // c.slots_per_frame
        alpha = experiment.frame_alphas[frame]  # (C, U)
        a_head = alpha[cells, uidx[cells, head_c]]
        gt = a_head * h2[t] / noise
        nats = np.where(serving, wf * w_max * np.log1p(gt * p_max) * dt, 0.0)
        take = np.minimum(nats, rem[cells, head_c])
        delivered_bits += take[serving].sum() / LN2
        rem[cells[serving], head_c[serving]] -= nats[serving]
        slot_power = np.where(serving, wf * p_max / xi + np.where(idle, wake, 0.0), 0.0)
        delivery_energy += slot_power.sum() * dt
        if trace is not None:
            trace.append((t, wf.copy(), idle.copy(), serving.copy(), gt.copy(), take.copy()))
        finished = serving & (rem[cells, head_c] <= 0.0)
        heads[finished] += 1
    ledger.delivery_energy = delivery_energy
    return delivered_bits, n_requests, n_hits, ledger


def run_trial(experiment: Experiment, strategy: str, trial_seed: int) -> Metrics:
    """One full trial: strategy-dependent off-peak placement, then peak
    delivery; deterministic given (config, strategy, trial_seed)."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    c = experiment.config
    streams = _trial_streams(c, trial_seed)
    n_users = c.n_cells * c.users_per_cell

    push_ledger = EnergyLedger()
    feasible = 0.0
    if strategy == "unicast":
        rt_off = _simulate_rt_levels(c, c.n_offpeak_slots, experiment.stationary_n, streams["rt_off"])
        caches, push_ledger, feasible = run_offpeak_unicast(
            experiment, rt_off, streams["fade_off"], streams["sched"]
        )
    elif strategy == "broadcast":
        caches = run_offpeak_broadcast(c, n_users)
        feasible = 1.0
    else:
        caches = [set() for _ in range(n_users)]
        feasible = 1.0

    requests = generate_trial_requests(experiment, streams["requests"])
    rt_peak = _simulate_rt_levels(c, c.n_peak_slots, experiment.stationary_n, streams["rt_peak"])
    delivered, n_req, n_hits, del_ledger = run_peak_delivery(
        experiment, caches, requests, rt_peak, streams["fade_peak"]
    )
    total_energy = push_ledger.push_energy + del_ledger.delivery_energy
    return Metrics(
        delivered_bits=delivered,
        throughput=delivered / c.peak_duration,
        total_energy=total_energy,
        cache_hit_rate=(n_hits / n_req) if n_req else 0.0,
        plan_feasible_fraction=feasible,
        push_energy=push_ledger.push_energy,
        delivery_energy=del_ledger.delivery_energy,
    )


# ---------------------------------------------------------------------------
# Monte Carlo aggregation

_METRIC_FIELDS = (
    "delivered_bits",
    "throughput",
    "total_energy",
    "cache_hit_rate",
    "plan_feasible_fraction",
    "push_energy",
    "delivery_energy",
)


@dataclass(frozen=True)
class Aggregate:
    """Mean, standard error and 95% normal confidence interval per metric."""

    n_trials: int
    mean: dict[str, float]
    se: dict[str, float]

    def ci95(self, name: str) -> tuple[float, float]:
        m, s = self.mean[name], self.se[name]
        return (m - 1.96 * s, m + 1.96 * s)


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    trials: tuple[Metrics, ...]
    aggregate: Aggregate


_WORKER_EXPERIMENT: Experiment | None = None


def _init_worker(experiment: Experiment):
    global _WORKER_EXPERIMENT
    _WORKER_EXPERIMENT = experiment


def _worker_trial(args: tuple[str, int]) -> Metrics:
    strategy, trial = args
    return run_trial(_WORKER_EXPERIMENT, strategy, trial)


def aggregate_metrics(trials: list[Metrics]) -> Aggregate:
    n = len(trials)
    mean, se = {}, {}
    for name in _METRIC_FIELDS:
        vals = np.array([getattr(m, name) for m in trials], dtype=float)
        mean[name] = float(vals.mean())
        se[name] = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Aggregate(n_trials=n, mean=mean, se=se)


def monte_carlo(
    experiment: Experiment,
    strategies=STRATEGIES,
    n_trials: int | None = None,
    jobs: int = 1,
) -> dict[str, StrategyResult]:
    """Independent seeded trials per strategy; results are invariant to the
    execution order and parallelism degree."""
    c = experiment.config
    n = n_trials if n_trials is not None else c.n_trials
    tasks = [(s, t) for s in strategies for t in range(n)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(experiment,)
        ) as ex:
            results = list(ex.map(_worker_trial, tasks, chunksize=8))
    else:
        results = [run_trial(experiment, s, t) for s, t in tasks]
    out = {}
    for i, s in enumerate(strategies):
        trials = tuple(results[i * n : (i + 1) * n])
        out[s] = StrategyResult(strategy=s, trials=trials, aggregate=aggregate_metrics(trials))
    return out
