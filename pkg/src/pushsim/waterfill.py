"""Water-filling core: per-slot power allocation, expected push-power and
push-rate functionals over the context statistics, the coupled
level/threshold equation, the two-tier bisection plan solver, and the
full-information offline oracle used for validation.

Conventions. The full-band equivalent gain g~ follows a Gamma law per
frame. A slot with availability fraction w = W/W_max carries the
actual-bandwidth gain g = g~ / w; the allocator's power simplifies to
p = w * clamp(nu - 1/g~, 0, p_max), and the slot rate to
w * W_max * ln(1 + g~ * clamp(nu - 1/g~, 0, p_max)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

LN2 = math.log(2.0)
_EULER = 0.5772156649015329


class InfeasibleTargetError(RuntimeError):
    """The push target cannot be met by any admissible allocation."""


@dataclass(frozen=True)
class PowerModel:
    """Amplifier efficiency and circuit power levels of one SBS."""

    amp_efficiency: float = 0.08
    p_active: float = 3.0
    p_sleep: float = 1.0
    p_max: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.amp_efficiency <= 1.0):
            raise ValueError("amp_efficiency must be in (0, 1]")
        if not (self.p_active >= self.p_sleep >= 0.0):
            raise ValueError("need p_active >= p_sleep >= 0")
        if self.p_max <= 0:
            raise ValueError("p_max must be > 0")

    @property
    def wake_power(self) -> float:
        """Extra circuit power for waking a sleeping SBS, in watts."""
        return self.p_active - self.p_sleep


@dataclass(frozen=True)
class WaterfillPlan:
    """Water level and idle-slot gain threshold controlling one user's
    online allocation. g_th may be +inf: idle slots are never worth waking
    the SBS for."""

    nu: float
    g_th: float

    def __post_init__(self):
        if not (self.nu > 0):
            raise ValueError("nu must be > 0")
        if not (self.g_th > 0):
            raise ValueError("g_th must be > 0")
        if math.isfinite(self.g_th) and self.nu * self.g_th < 1.0 - 1e-9:
            raise ValueError("plan must satisfy nu - 1/g_th >= 0")


@dataclass(frozen=True)
class SlotState:
    """Per-slot channel and reservation state for one user-SBS pair."""

    g: float  # equivalent gain at the actual bandwidth, 1/W
    w: float  # residual bandwidth, Hz
    p_rt: float  # reserved RT transmit power, W
    idle: bool  # no RT traffic in this slot
    w_max: float  # full band, Hz


@dataclass(frozen=True)
class PushTarget:
    """Bits to pre-download over a slotted horizon."""

    bits: float
    n_slots: int
    slot_duration: float

    def __post_init__(self):
        if self.bits <= 0 or self.n_slots < 1 or self.slot_duration <= 0:
            raise ValueError("bits, n_slots and slot_duration must be positive")

    @property
    def target_rate_nats(self) -> float:
        """Required average rate in nats/s: bits * ln2 / (n_slots * slot_duration)."""
        return self.bits * LN2 / (self.n_slots * self.slot_duration)


# ---------------------------------------------------------------------------
# per-slot operations

def allocate_slot_power(slot: SlotState, plan: WaterfillPlan, power: PowerModel) -> float:
    """Multi-level water-filling power for one slot.

    Idle slots below the gain threshold get zero; otherwise the
    bandwidth-scaled water level minus inverse gain, clipped to the
    residual power budget.
    """
    if slot.w <= 0 or slot.g <= 0:
        return 0.0
    if slot.idle and slot.g < plan.g_th:
        return 0.0
    p = (slot.w / slot.w_max) * plan.nu - 1.0 / slot.g
    cap = max(power.p_max - slot.p_rt, 0.0)
    return min(max(p, 0.0), cap)


def slot_rate(slot: SlotState, p: float) -> float:
    """Achievable rate in nats/s at transmit power p."""
    if p <= 0 or slot.w <= 0:
        return 0.0
    return slot.w * math.log1p(slot.g * p)


def slot_push_power_total(p: float, slot: SlotState, power: PowerModel) -> float:
    """Total SBS power drawn by a push transmission in this slot: amplifier
    input plus the wake cost when an otherwise-sleeping SBS transmits."""
    if p <= 0:
        return 0.0
    total = p / power.amp_efficiency
    if slot.idle:
        total += power.wake_power
    return total


# ---------------------------------------------------------------------------
# Gamma tail integrals (exact closed forms; validated against adaptive
# quadrature and Monte Carlo in the test suite)

def _tail_prob(shape: int, y):
    """P(G > x) for G ~ Gamma(shape, 1), y = rate * x."""
    return special.gammaincc(shape, np.asarray(y, dtype=float))


def _jhat(shape: int, y):
    """integral_y^inf ln(u) u^(shape-1) e^(-u) du, unnormalized, integer shape."""
    y = np.asarray(y, dtype=float)
    big = y > 700.0
    small = y < 1e-6
    ysafe = np.where(big | ~np.isfinite(y), 1.0, np.maximum(y, 1e-300))
    ylog = np.log(ysafe)
    base = np.where(
        small,
        -_EULER - np.where(y > 0, y * (ylog - 1.0), 0.0),
        np.exp(-np.where(big, 700.0, y)) * ylog + special.exp1(y),
    )
    base = np.where(big, 0.0, base)
    j = base
    for k in range(1, shape):
        gamma_up = special.gammaincc(k, y) * math.gamma(k)
        tail = np.where(big, 0.0, ysafe**k * ylog * np.exp(-np.where(big, 700.0, y)))
        tail = np.where(y > 0, tail, 0.0)
        j = gamma_up + k * j + tail
    return j


def _tail_log_moment(shape: int, y):
    """integral_x^inf ln(u) * Gamma(shape,1)-pdf(u) du with y = rate * x."""
    return _jhat(shape, y) / math.gamma(shape)


def _tail_inverse(shape: int, rate, y):
    """integral_x^inf (1/g) f(g) dg for f = Gamma(shape, rate) pdf, y = rate * x."""
    y = np.asarray(y, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if shape == 1:
        return rate * special.exp1(y)
    return rate * special.gammaincc(shape - 1, y) / (shape - 1)


# ---------------------------------------------------------------------------
# expected functionals under the context statistics

def _occupied_mass(probs: np.ndarray) -> np.ndarray:
    """Per-frame sum over partially-occupied levels of P_l * (l/L)."""
    L = probs.shape[1] - 1
    if L < 2:
        return np.zeros(probs.shape[0])
    lfrac = np.arange(1, L) / L
    return probs[:, 1:L] @ lfrac


def _expected_rate_raw(nu, g_th, probs, rate_scales, shape, w_max) -> float:
    m_occ = _occupied_mass(probs)
    p_idle = probs[:, -1]
    a = 1.0 / nu
    t = max(g_th, a)
    ya = rate_scales * a
    yt = rate_scales * t if math.isfinite(t) else np.full_like(rate_scales, np.inf)
    lognu_r = math.log(nu) - np.log(rate_scales)

    def iln(yx):
        return lognu_r * _tail_prob(shape, yx) + _tail_log_moment(shape, yx)

    return float(w_max * np.mean(m_occ * iln(ya) + p_idle * iln(yt)))


def _expected_push_power_raw(nu, g_th, probs, rate_scales, shape, power: PowerModel) -> float:
    m_occ = _occupied_mass(probs)
    p_idle = probs[:, -1]
    a = 1.0 / nu
    t = max(g_th, a)
    ya = rate_scales * a
    yt = rate_scales * t if math.isfinite(t) else np.full_like(rate_scales, np.inf)

    def ipw(yx):
        return nu * _tail_prob(shape, yx) - _tail_inverse(shape, rate_scales, yx)

    transmit = (m_occ * ipw(ya) + p_idle * ipw(yt)) / power.amp_efficiency
    wake = power.wake_power * p_idle * _tail_prob(shape, yt)
    return float(np.mean(transmit + wake))


def _check_plan_regime(plan: WaterfillPlan, power: PowerModel):
    if plan.nu > power.p_max:
        warnings.warn(
            "water level exceeds p_max; the uncapped expected-value model is "
            "only exact below p_max and the online allocator will clip",
            RuntimeWarning,
            stacklevel=3,
        )


def expected_push_power(plan: WaterfillPlan, net, user, power: PowerModel) -> float:
    """Expected per-slot SBS push power (watts) under the context statistics:
    occupied-slot and idle-slot amplifier input plus the idle wake cost."""
    _check_plan_regime(plan, power)
    return _expected_push_power_raw(
        plan.nu, plan.g_th, net.occupancy_probs, user.rate_scales, user.shape, power
    )


def expected_rate(plan: WaterfillPlan, net, user, w_max: float) -> float:
    """Expected push rate (nats/s) under the context statistics."""
    return _expected_rate_raw(
        plan.nu, plan.g_th, net.occupancy_probs, user.rate_scales, user.shape, w_max
    )


# ---------------------------------------------------------------------------
# the coupled level/threshold equation and the two-tier solver

def kkt_residual(nu: float, g_th: float, power: PowerModel) -> float:
    """Residual of the stationarity equation linking the water level and
    the idle threshold: (nu - 1/g_th) + xi*(p_act - p_sle) - nu*ln(nu*g_th)."""
    wake_term = power.amp_efficiency * power.wake_power
    log_prod = math.log(nu) + math.log(g_th)
    return (nu - 1.0 / g_th) + wake_term - nu * log_prod


def _solve_nu_log(y: float, power: PowerModel, tol: float = 1e-8, max_iter: int = 200) -> float:
    """Root nu of the stationarity equation for ln(g_th) = y.

    The residual is strictly decreasing in nu on nu > 1/g_th and equals the
    wake term at nu = 1/g_th, so the root is unique; with zero wake cost it
    sits exactly on the boundary.
    """
    c = power.amp_efficiency * power.wake_power
    invg = math.exp(min(-y, 700.0))
    if c == 0.0:
        return invg

    def phi(nu):
        return nu - invg + c - nu * (math.log(nu) + y)

    assert phi(max(invg, 1e-300)) >= 0.0 or invg == 0.0
    # expand the upper bracket geometrically from an asymptotics-guided step
    step = max(1e-320, invg * 1e-12, 0.125 * c / max(y, 1.0))
    hi = invg + step
    for _ in range(5000):
        if phi(hi) < 0.0:
            break
        step *= 2.0
        hi = invg + step
    else:
        raise RuntimeError("failed to bracket the water-level root")
    lo = max(invg, hi - step)
    m = 0.5 * (lo + hi)
    for _ in range(max_iter):
        m = 0.5 * (lo + hi)
        if phi(m) >= 0.0:
            lo = m
        else:
            hi = m
        if (hi - lo) <= tol * max(m, 1e-300):
            break
    return 0.5 * (lo + hi)


def solve_nu_given_gth(g_th: float, power: PowerModel, tol: float = 1e-8) -> float:
    """Water level solving the stationarity equation at a given threshold."""
    if not (g_th > 0) or not math.isfinite(g_th):
        raise ValueError("g_th must be positive and finite")
    return _solve_nu_log(math.log(g_th), power, tol=tol)


def solve_plan(
    net,
    user,
    target: PushTarget,
    power: PowerModel,
    w_max: float,
    tol: float = 1e-8,
) -> WaterfillPlan:
    """Two-tier bisection for the context-statistics problem.

    Outer tier bisects ln(g_th) on the rate equation (its left side is
    monotone decreasing in g_th); the inner tier solves the stationarity
    equation for nu at each threshold. Warns when the returned level
    exceeds p_max, outside the uncapped model's validity.
    """
    target_rate = target.target_rate_nats
    probs = net.occupancy_probs
    r = user.rate_scales
    shape = user.shape

    def rate_at(y: float) -> tuple[float, float]:
        nu = _solve_nu_log(y, power, tol=tol)
        g = math.exp(y) if y < 709.0 else math.inf
        return nu, _expected_rate_raw(nu, g, probs, r, shape, w_max)

    unit_lo = float(stats.gamma.ppf(0.001, shape))
    unit_hi = float(stats.gamma.ppf(0.999, shape))
    y_lo = math.log(unit_lo / float(np.max(r)))
    for _ in range(200):
        _, rate_lo = rate_at(y_lo)
        if rate_lo >= target_rate:
            break
        y_lo -= LN2
    else:
        raise InfeasibleTargetError(
            "expected rate below target even at the smallest bracketed threshold"
        )

    y_hi = math.log(2.0 * unit_hi / float(np.min(r)))
    y_hi = max(y_hi, y_lo + 1e-6)
    step = 1.0
    while True:
        _, rate_hi = rate_at(y_hi)
        if rate_hi <= target_rate:
            break
        y_hi += step
        step *= 2.0
        if y_hi > 1e7:
            raise RuntimeError("failed to bracket the threshold root")

    nu_m, y_m = None, 0.5 * (y_lo + y_hi)
    for _ in range(200):
        y_m = 0.5 * (y_lo + y_hi)
        nu_m, rate_m = rate_at(y_m)
        if abs(rate_m - target_rate) <= tol * target_rate:
            break
        if rate_m > target_rate:
            y_lo = y_m
        else:
            y_hi = y_m
        if (y_hi - y_lo) < 1e-15 * max(1.0, abs(y_m)):
            break
    g_th = math.exp(y_m) if y_m < 709.0 else math.inf
    plan = WaterfillPlan(nu=nu_m, g_th=g_th)
    if nu_m > power.p_max:
        warnings.warn(
            "solved water level exceeds p_max: target is beyond the uncapped "
            "regime, online allocation will clip",
            RuntimeWarning,
            stacklevel=2,
        )
    return plan


# ---------------------------------------------------------------------------
# full-information offline oracle

def _prefix(values: np.ndarray) -> np.ndarray:
    out = np.zeros(len(values) + 1)
    np.cumsum(values, out=out[1:])
    return out


class _SlotPool:
    """Sorted slot arrays with prefix sums for exact water-level solves.

    Rates are kept in unit form (sum of w * ln-terms); multiply by
    W_max * slot_duration for nats.
    """

    def __init__(self, w_frac, g_tilde, idle, p_max):
        usable = w_frac > 0
        occ = usable & ~idle
        idl = usable & idle
        self.p_max = p_max

        def build(mask, weights_are_one):
            g = g_tilde[mask]
            w = np.ones_like(g) if weights_are_one else w_frac[mask]
            order = np.argsort(1.0 / g, kind="stable")
            g, w = g[order], w[order]
            a = 1.0 / g
            return {
                "a": a,
                "g": g,
                "w": _prefix(w),
                "wln": _prefix(w * np.log(g)),
                "wa": _prefix(w * a),
                "wcap": _prefix(w * np.log1p(g * p_max)),
                "idx": np.flatnonzero(mask)[order],
            }

        self.occ = build(occ, weights_are_one=False)
        self.idl = build(idl, weights_are_one=True)
        self.n_idle = len(self.idl["a"])

    def _counts(self, tbl, nu, n_cap=None):
        m = int(np.searchsorted(tbl["a"], nu, side="left"))
        s = int(np.searchsorted(tbl["a"], nu - self.p_max, side="left"))
        if n_cap is not None:
            m, s = min(m, n_cap), min(s, n_cap)
        return m, s

    def rate(self, nu: float, n_idle: int) -> tuple[float, float]:
        """Unit rate and its ln(nu) slope at water level nu with the top
        n_idle idle slots admitted."""
        lognu = math.log(nu)
        total, slope = 0.0, 0.0
        for tbl, cap in ((self.occ, None), (self.idl, n_idle)):
            m, s = self._counts(tbl, nu, cap)
            w_act = tbl["w"][m] - tbl["w"][s]
            total += tbl["wcap"][s] + (tbl["wln"][m] - tbl["wln"][s]) + w_act * lognu
            slope += w_act
        return total, slope

    def transmit_power(self, nu: float, n_idle: int) -> float:
        total = 0.0
        for tbl, cap in ((self.occ, None), (self.idl, n_idle)):
            m, s = self._counts(tbl, nu, cap)
            active = (tbl["w"][m] - tbl["w"][s]) * nu - (tbl["wa"][m] - tbl["wa"][s])
            total += active + self.p_max * tbl["w"][s]
        return total

    def wake_count(self, nu: float, n_idle: int) -> int:
        m, _ = self._counts(self.idl, nu, n_idle)
        return m

    def max_rate(self, n_idle: int) -> float:
        return self.occ["wcap"][-1] + self.idl["wcap"][n_idle]

    def _bracket(self, n_idle: int) -> tuple[float, float] | None:
        lows = [
            t["a"][0]
            for t, c in ((self.occ, None), (self.idl, n_idle))
            if len(t["a"]) and (c is None or c > 0)
        ]
        if not lows:
            return None
        highs = []
        if len(self.occ["a"]):
            highs.append(self.occ["a"][-1])
        if n_idle > 0:
            highs.append(self.idl["a"][n_idle - 1])
        return min(lows), (max(highs) + self.p_max) * (1.0 + 1e-12)

    def solve_level(self, unit_target: float, n_idle: int, guess: float | None = None) -> float | None:
        """Exact water level meeting the unit rate target, or None if the
        admitted slots saturate below it.

        On each breakpoint-free interval the rate is A + B*ln(nu), so a
        candidate level follows in closed form from the counts at the
        current iterate; the fixed point is reached once the counts stop
        changing. Falls back to bisection if the iteration cycles.
        """
        if self.max_rate(n_idle) < unit_target * (1.0 - 1e-12):
            return None
        br = self._bracket(n_idle)
        if br is None:
            return None
        lo, hi = br

        nu = min(max(guess if guess is not None else math.sqrt(lo * hi), lo), hi)
        for _ in range(60):
            rate_m, slope = self.rate(nu, n_idle)
            if rate_m < unit_target:
                lo = max(lo, nu)
            else:
                hi = min(hi, nu)
            if slope > 0:
                cand = math.exp((unit_target - (rate_m - slope * math.log(nu))) / slope)
            else:
                cand = 0.5 * (lo + hi)
            if not (lo <= cand <= hi):
                cand = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
            if cand == nu:
                return nu
            rate_c, slope_c = self.rate(cand, n_idle)
            if slope_c == slope and abs(rate_c - unit_target) <= 1e-12 * unit_target:
                return cand
            nu = cand
        # cycling across a breakpoint: finish with plain bisection
        for _ in range(200):
            mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
            rate_m, slope = self.rate(mid, n_idle)
            if rate_m < unit_target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        rate_m, slope = self.rate(hi, n_idle)
        if slope > 0:
            nu = math.exp((unit_target - (rate_m - slope * math.log(hi))) / slope)
            return min(max(nu, lo), hi)
        return hi


def solve_offline_oracle(
    slots: list[SlotState], target: PushTarget, power: PowerModel
) -> tuple[WaterfillPlan, np.ndarray]:
    """Full-information optimum for one realized slot sequence.

    Scans idle-slot admission counts N = 0..#idle (threshold at the N-th
    best idle gain); for each candidate the water level meeting the bit
    target is solved exactly on the piecewise log-linear rate curve, and
    the total energy (amplifier input plus wake costs) is evaluated. The
    minimizer is returned with its per-slot powers.
    """
    if not slots:
        raise InfeasibleTargetError("no slots available")
    w_max = slots[0].w_max
    w_frac = np.array([s.w / s.w_max for s in slots])
    idle = np.array([s.idle for s in slots])
    g_tilde = np.array([s.g * (s.w / s.w_max) if s.w > 0 else 0.0 for s in slots])
    dt = target.slot_duration
    unit_target = target.bits * LN2 / (dt * w_max)

    pool = _SlotPool(w_frac, g_tilde, idle, power.p_max)
    best = None
    prev = None
    for n in range(pool.n_idle + 1):
        nu = pool.solve_level(unit_target, n, guess=prev)
        if nu is not None:
            prev = nu
            energy = dt * (
                pool.transmit_power(nu, n) / power.amp_efficiency
                + power.wake_power * pool.wake_count(nu, n)
            )
            if best is None or energy < best[0] - 1e-15 * abs(best[0]):
                best = (energy, n, nu)
        # once the next idle slot cannot activate at the current level it
        # never will (levels are non-increasing in N): nothing changes
        if nu is not None and n < pool.n_idle and pool.idl["a"][n] >= nu:
            break
    if best is None:
        raise InfeasibleTargetError("bit target exceeds the all-caps capacity")

    _, n_star, nu_star = best
    g_th = 1.0 / pool.idl["a"][n_star - 1] if n_star > 0 else math.inf
    plan = WaterfillPlan(nu=nu_star, g_th=g_th)

    powers = np.zeros(len(slots))
    occ_idx = pool.occ["idx"]
    powers[occ_idx] = w_frac[occ_idx] * np.clip(
        nu_star - pool.occ["a"], 0.0, power.p_max
    )
    if n_star > 0:
        sel = pool.idl["idx"][:n_star]
        powers[sel] = np.clip(nu_star - pool.idl["a"][:n_star], 0.0, power.p_max)
    return plan, powers


# ---------------------------------------------------------------------------
# Monte Carlo slot sampling and realized-policy simulation

@dataclass
class SlotBatch:
    """Array-of-slots form used by Monte Carlo estimates and the engine."""

    w_frac: np.ndarray
    idle: np.ndarray
    g_tilde: np.ndarray
    w_max: float
    p_max: float

    def __len__(self):
        return len(self.w_frac)

    def to_slot_states(self) -> list[SlotState]:
        out = []
        for wf, idl, gt in zip(self.w_frac, self.idle, self.g_tilde):
            g = gt / wf if wf > 0 else 0.0
            out.append(
                SlotState(
                    g=float(g),
                    w=float(wf * self.w_max),
                    p_rt=float((1.0 - wf) * self.p_max),
                    idle=bool(idl),
                    w_max=self.w_max,
                )
            )
        return out

    def allocate(self, plan: WaterfillPlan, power: PowerModel) -> np.ndarray:
        """Vectorized allocate_slot_power over the batch."""
        aux = np.clip(plan.nu - 1.0 / np.maximum(self.g_tilde, 1e-300), 0.0, power.p_max)
        gate = (self.w_frac > 0) & (self.g_tilde > 0)
        gate &= ~self.idle | (self.g_tilde >= plan.g_th)
        return np.where(gate, self.w_frac * aux, 0.0)

    def rates(self, plan: WaterfillPlan, power: PowerModel) -> np.ndarray:
        """Vectorized slot_rate at the allocated powers, nats/s."""
        aux = np.clip(plan.nu - 1.0 / np.maximum(self.g_tilde, 1e-300), 0.0, power.p_max)
        gate = (self.w_frac > 0) & (self.g_tilde > 0)
        gate &= ~self.idle | (self.g_tilde >= plan.g_th)
        return np.where(gate, self.w_frac * self.w_max * np.log1p(self.g_tilde * aux), 0.0)

    def push_powers(self, plan: WaterfillPlan, power: PowerModel) -> np.ndarray:
        """Vectorized slot_push_power_total at the allocated powers."""
        p = self.allocate(plan, power)
        total = p / power.amp_efficiency
        total += np.where(self.idle & (p > 0), power.wake_power, 0.0)
        return np.where(p > 0, total, 0.0)


def sample_slots(net, user, n: int, rng: np.random.Generator, power: PowerModel, w_max: float) -> SlotBatch:
    """Draw iid slots from the context statistics: a uniform frame, an
    availability level from that frame's occupancy row (missing mass of a
    scaled context becomes an unavailable slot), and a Gamma gain."""
    probs = net.occupancy_probs
    n_frames, n_levels = probs.shape
    L = n_levels - 1
    frames = rng.integers(0, n_frames, size=n)
    u = rng.random(n)
    cum = np.cumsum(probs, axis=1)
    lev = (u[:, None] >= cum[frames]).sum(axis=1)  # n_levels means unavailable
    available = lev < n_levels
    w_frac = np.where(available, lev / L, 0.0)
    idle = available & (lev == L)
    g_tilde = rng.standard_gamma(user.shape, size=n) / user.rate_scales[frames]
    return SlotBatch(w_frac=w_frac, idle=idle, g_tilde=g_tilde, w_max=w_max, p_max=power.p_max)


def simulate_push_realization(
    batch: SlotBatch, plan: WaterfillPlan, target: PushTarget, power: PowerModel
) -> tuple[float, float, bool]:
    """Run the online policy over a realized slot sequence, stopping once
    the bit target completes. Returns (energy_J, delivered_nats, completed)."""
    dt = target.slot_duration
    nats = batch.rates(plan, power) * dt
    powers = batch.push_powers(plan, power)
    cum = np.cumsum(nats)
    goal = target.bits * LN2
    k = int(np.searchsorted(cum, goal))
    if k >= len(nats):
        return float(np.sum(powers) * dt), float(cum[-1]) if len(cum) else 0.0, False
    energy = float(np.sum(powers[: k + 1]) * dt)
    return energy, float(cum[k]), True
