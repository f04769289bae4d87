import dataclasses
import math
import warnings

import numpy as np
import pytest

from pushsim import sim as S
from pushsim import waterfill as wf
from pushsim.channel import PathLossParams
from pushsim.traffic import ContentCatalog, DeliveryProcess, RTTrafficModel

warnings.filterwarnings("ignore", category=RuntimeWarning)


def small_config(**overrides):
    """Single-digit-second scenario in the calibrated desk regime."""
    defaults = dict(
        n_cells=1,
        users_per_cell=4,
        offpeak_duration=30.0,
        peak_duration=15.0,
        n_trials=4,
        master_seed=99,
        occupancy_warmup_slots=20_000,
        path_loss=PathLossParams(noise_psd=1e-16),
        catalog=ContentCatalog(n_files=2000, file_size_bits=5e5, zipf_beta=1.0),
        delivery=DeliveryProcess(mean_rate=1.2e6, peak_duration=15.0),
    )
    defaults.update(overrides)
    return S.ScenarioConfig(**defaults)


@pytest.fixture(scope="module")
def small_experiment():
    return S.build_experiment(small_config())


def test_build_layout_spacing_and_errors():
    cfg = small_config(n_cells=19)
    layout = S.build_layout(cfg)
    pos = layout.sbs_positions
    assert pos.shape == (19, 2)
    d = np.linalg.norm(pos[None, :, :] - pos[:, None, :], axis=2)
    d[d == 0] = np.inf
    assert d.min() == pytest.approx(math.sqrt(3) * 50.0, abs=1e-6)
    assert np.all(np.linalg.norm(pos, axis=1) <= cfg.macro_radius)
    with pytest.raises(ValueError):
        S.build_layout(small_config(n_cells=12))
    single = S.build_layout(small_config(n_cells=1))
    np.testing.assert_allclose(single.sbs_positions, [[0.0, 0.0]])


def test_nearest_sbs_partition_with_low_index_ties():
    layout = S.build_layout(small_config(n_cells=19))
    rng = np.random.default_rng(0)
    pts = rng.uniform(-150, 150, size=(500, 2))
    idx = layout.nearest_sbs(pts)
    d = np.linalg.norm(pts[:, None, :] - layout.sbs_positions[None, :, :], axis=2)
    for k in range(500):
        best = d[k].min()
        assert d[k, idx[k]] == best
        assert idx[k] == np.flatnonzero(d[k] == best)[0]
    # exact midpoint between cells 0 and 1 resolves to the lower index
    mid = layout.sbs_positions[:2].mean(axis=0)
    assert layout.nearest_sbs([mid])[0] == 0


def test_zero_users_zero_energy():
    cfg = small_config()
    exp = S.build_experiment(cfg)
    empty = dataclasses.replace(exp, users=())
    levels = S._simulate_rt_levels(cfg, cfg.n_offpeak_slots, exp.stationary_n, np.random.default_rng(1))
    caches, ledger, feas = S.run_offpeak_unicast(
        empty, levels, np.random.default_rng(2), np.random.default_rng(3)
    )
    assert caches == []
    assert ledger.push_energy == 0.0


def test_single_user_generous_window_fills_cache():
    cfg = small_config(
        users_per_cell=1,
        offpeak_duration=60.0,
        rt=RTTrafficModel(arrival_rate=0.0),
        catalog=ContentCatalog(n_files=2000, file_size_bits=2e5, zipf_beta=1.0),
    )
    exp = S.build_experiment(cfg)
    levels = S._simulate_rt_levels(cfg, cfg.n_offpeak_slots, exp.stationary_n, np.random.default_rng(1))
    assert np.all(levels == cfg.rt.capacity)  # no RT traffic ever
    caches, ledger, feas = S.run_offpeak_unicast(
        exp, levels, np.random.default_rng(2), np.random.default_rng(3)
    )
    assert feas == 1.0
    assert caches[0] == set(int(x) for x in exp.users[0].push_order)
    assert len(caches[0]) == cfg.cache_files_unicast


def test_broadcast_caches_are_top_files_and_beta_independent():
    cfg_a = small_config(beta_s=0.0)
    cfg_b = small_config(beta_s=1.0)
    n_users = cfg_a.n_cells * cfg_a.users_per_cell
    caches_a = S.run_offpeak_broadcast(cfg_a, n_users)
    caches_b = S.run_offpeak_broadcast(cfg_b, n_users)
    assert caches_a == caches_b
    assert all(c == set(range(1, 11)) for c in caches_a)


def test_run_trial_deterministic(small_experiment):
    m1 = S.run_trial(small_experiment, "unicast", 3)
    m2 = S.run_trial(small_experiment, "unicast", 3)
    assert m1 == m2
    m3 = S.run_trial(small_experiment, "unicast", 4)
    assert m1 != m3


def test_baseline_has_no_push_phase(small_experiment):
    m = S.run_trial(small_experiment, "baseline", 0)
    assert m.push_energy == 0.0
    assert m.cache_hit_rate == 0.0
    b = S.run_trial(small_experiment, "broadcast", 0)
    assert b.push_energy == 0.0


def test_delivered_bits_bounded_by_requests(small_experiment):
    cfg = small_experiment.config
    for trial in range(3):
        m = S.run_trial(small_experiment, "baseline", trial)
        streams = S._trial_streams(cfg, trial)
        for name in ("rt_off", "fade_off", "sched"):
            streams.pop(name)
        requests = S.generate_trial_requests(small_experiment, streams["requests"])
        n_req = sum(len(r) for r in requests)
        assert m.delivered_bits <= n_req * cfg.catalog.file_size_bits + 1e-6


def test_energy_ledger_identity_and_slot_feasibility(small_experiment):
    exp = small_experiment
    cfg = exp.config
    streams = S._trial_streams(cfg, 7)
    levels = S._simulate_rt_levels(cfg, cfg.n_offpeak_slots, exp.stationary_n, streams["rt_off"])
    trace = []
    caches, ledger, _ = S.run_offpeak_unicast(
        exp, levels, streams["fade_off"], streams["sched"], trace=trace
    )
    pm = cfg.power
    L = cfg.rt.capacity
    total = 0.0
    for t, wfrac, idle, sel, served, p_s, gt_s, nats in trace:
        for ci in range(cfg.n_cells):
            p = p_s[ci]
            cap = pm.p_max * wfrac[ci]  # p_max - p_rt under proportional reservation
            assert -1e-15 <= p <= cap + 1e-12
            if p > 0:
                total += (p / pm.amp_efficiency + (pm.wake_power if idle[ci] else 0.0)) * cfg.slot_duration
    assert total == pytest.approx(ledger.push_energy, rel=1e-9)

    requests = S.generate_trial_requests(exp, streams["requests"])
    rt_peak = S._simulate_rt_levels(cfg, cfg.n_peak_slots, exp.stationary_n, streams["rt_peak"])
    trace2 = []
    delivered, n_req, n_hits, led2 = S.run_peak_delivery(
        exp, caches, requests, rt_peak, streams["fade_peak"], trace=trace2
    )
    total2 = 0.0
    for t, wfrac, idle, serving, gt, take in trace2:
        for ci in range(cfg.n_cells):
            if serving[ci]:
                p = pm.p_max * wfrac[ci]
                total2 += (p / pm.amp_efficiency + (pm.wake_power if idle[ci] else 0.0)) * cfg.slot_duration
    assert total2 == pytest.approx(led2.delivery_energy, rel=1e-9)
    assert delivered <= n_req * cfg.catalog.file_size_bits + 1e-6


def test_all_hits_mean_zero_delivery_energy(small_experiment):
    exp = small_experiment
    cfg = exp.config
    full = [set(int(x) for x in us.profile.subset) for us in exp.users]
    streams = S._trial_streams(cfg, 11)
    requests = S.generate_trial_requests(exp, streams["requests"])
    rt_peak = S._simulate_rt_levels(cfg, cfg.n_peak_slots, exp.stationary_n, streams["rt_peak"])
    delivered, n_req, n_hits, ledger = S.run_peak_delivery(
        exp, full, requests, rt_peak, streams["fade_peak"]
    )
    assert n_hits == n_req
    assert ledger.delivery_energy == 0.0
    assert delivered == pytest.approx(n_req * cfg.catalog.file_size_bits)


def test_zero_delivery_rate(small_experiment):
    cfg = dataclasses.replace(
        small_experiment.config, delivery=DeliveryProcess(mean_rate=0.0, peak_duration=15.0)
    )
    exp = dataclasses.replace(small_experiment, config=cfg)
    m = S.run_trial(exp, "baseline", 0)
    assert m.delivered_bits == 0.0
    assert m.delivery_energy == 0.0


def test_unicast_hit_rate_dominates_broadcast_at_peaked_popularity():
    cfg = small_config(n_cells=7, users_per_cell=4, n_trials=1)
    exp = S.build_experiment(cfg)
    hits_u, hits_b = [], []
    for t in range(25):
        hits_u.append(S.run_trial(exp, "unicast", t).cache_hit_rate)
        hits_b.append(S.run_trial(exp, "broadcast", t).cache_hit_rate)
    assert np.mean(hits_u) >= np.mean(hits_b)


def test_monte_carlo_single_trial_and_parallel_invariance(small_experiment):
    res1 = S.monte_carlo(small_experiment, strategies=("baseline",), n_trials=1)
    single = res1["baseline"]
    assert single.aggregate.mean["throughput"] == single.trials[0].throughput

    serial = S.monte_carlo(small_experiment, strategies=("unicast", "baseline"), n_trials=4, jobs=1)
    parallel = S.monte_carlo(small_experiment, strategies=("unicast", "baseline"), n_trials=4, jobs=2)
    for s in ("unicast", "baseline"):
        assert serial[s].trials == parallel[s].trials
        assert serial[s].aggregate.mean == parallel[s].aggregate.mean


def test_monte_carlo_se_shrinks_with_trials():
    cfg = small_config(users_per_cell=2, offpeak_duration=10.0, peak_duration=10.0,
                       delivery=DeliveryProcess(mean_rate=1.2e6, peak_duration=10.0))
    exp = S.build_experiment(cfg)
    ses = []
    for n in (20, 80, 320):
        res = S.monte_carlo(exp, strategies=("baseline",), n_trials=n)
        ses.append(res["baseline"].aggregate.se["delivered_bits"])
    assert ses[0] > ses[1] > ses[2]
    assert ses[0] / ses[2] == pytest.approx(4.0, rel=0.6)


def test_push_energy_matches_expected_push_power_oracle():
    """Mean per-cell push energy vs the context-statistics prediction."""
    cfg = small_config(
        n_cells=1,
        users_per_cell=10,
        offpeak_duration=60.0,
        path_loss=PathLossParams(noise_psd=4e-16, max_bandwidth=1e6),
        catalog=ContentCatalog(n_files=2000, file_size_bits=1.2e6, zipf_beta=1.0),
    )
    exp = S.build_experiment(cfg)
    from pushsim.context import scale_for_multiuser

    scaled = scale_for_multiuser(
        exp.occupancy, np.full(cfg.n_offpeak_frames, float(cfg.users_per_cell))
    )
    predicted = sum(
        wf.expected_push_power(us.plan, scaled, us.context, cfg.power) for us in exp.users
    ) * cfg.offpeak_duration
    energies = []
    for t in range(200):
        streams = S._trial_streams(cfg, t)
        levels = S._simulate_rt_levels(cfg, cfg.n_offpeak_slots, exp.stationary_n, streams["rt_off"])
        _, ledger, _ = S.run_offpeak_unicast(exp, levels, streams["fade_off"], streams["sched"])
        energies.append(ledger.push_energy)
    assert np.mean(energies) == pytest.approx(predicted, rel=0.10)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(offpeak_duration=30.55)  # not divisible into frames
    with pytest.raises(ValueError):
        small_config(beta_s=1.2)
    with pytest.raises(ValueError):
        small_config(n_subset=5000, catalog=ContentCatalog(n_files=100, file_size_bits=1e6, zipf_beta=0.5))
