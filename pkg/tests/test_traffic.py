import math

import numpy as np
import pytest
from scipy.stats import chisquare

from pushsim import traffic as tr


def truncated_poisson(load: float, capacity: int) -> np.ndarray:
    """Erlang-B style stationary law of the active-request count."""
    pmf = np.array([load**n / math.factorial(n) for n in range(capacity + 1)])
    return pmf / pmf.sum()


def test_rt_queue_no_arrivals_stays_empty():
    model = tr.RTTrafficModel(arrival_rate=0.0)
    rng = np.random.default_rng(0)
    state = 0
    for _ in range(100):
        state = tr.step_rt_queue(state, model, rng)
        assert state == 0


def test_rt_queue_respects_capacity_and_matches_erlang_oracle():
    model = tr.RTTrafficModel()
    rng = np.random.default_rng(12)
    counts = np.zeros(model.capacity + 1)
    state = 0
    for _ in range(1_000_000):
        state = tr.step_rt_queue(state, model, rng)
        assert 0 <= state <= model.capacity
        counts[state] += 1
    emp = counts / counts.sum()
    oracle = truncated_poisson(model.arrival_rate * model.mean_service, model.capacity)
    assert emp[0] == pytest.approx(0.670, abs=0.01)
    assert 0.5 * np.abs(emp - oracle).sum() < 0.02  # total variation


def test_rt_reservation_examples():
    model = tr.RTTrafficModel()
    assert tr.rt_reservation(0, model, 0.2, 10e6) == (0.0, 10e6)
    p_rt, w = tr.rt_reservation(1, model, 0.2, 10e6)
    assert p_rt == pytest.approx(0.04)
    assert w == pytest.approx(8e6)
    p_rt, w = tr.rt_reservation(5, model, 0.2, 10e6)
    assert p_rt == pytest.approx(0.2)
    assert w == 0.0


def test_zipf_pmf_examples_and_properties():
    np.testing.assert_allclose(tr.zipf_pmf(7, 0.0), np.full(7, 1 / 7))
    np.testing.assert_allclose(tr.zipf_pmf(2, 1.0), [2 / 3, 1 / 3])
    for n, beta in [(10, 0.3), (1000, 1.0), (17, 0.77)]:
        p = tr.zipf_pmf(n, beta)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(np.diff(p) <= 0)


def test_zipf_sampling_goodness_of_fit():
    rng = np.random.default_rng(21)
    n, beta = 50, 0.8
    pmf = tr.zipf_pmf(n, beta)
    draws = rng.choice(n, size=1_000_000, p=pmf)
    observed = np.bincount(draws, minlength=n)
    _, pvalue = chisquare(observed, pmf * len(draws))
    assert pvalue > 0.01


def test_sample_user_subset_contract():
    rng = np.random.default_rng(5)
    catalog = tr.ContentCatalog(n_files=500, file_size_bits=1e6, zipf_beta=1.0)
    prof = tr.sample_user_subset(catalog, 100, 0.5, rng)
    assert len(prof.subset) == 100
    assert len(np.unique(prof.subset)) == 100
    assert prof.subset.min() >= 1 and prof.subset.max() <= 500
    assert np.all(np.diff(prof.subset) > 0)  # ordered by catalog rank

    whole = tr.sample_user_subset(catalog, 500, 0.5, rng)
    np.testing.assert_array_equal(whole.subset, np.arange(1, 501))


def test_subset_inclusion_is_popularity_biased():
    rng = np.random.default_rng(6)
    catalog = tr.ContentCatalog(n_files=1000, file_size_bits=1e6, zipf_beta=1.0)
    top_hits = 0
    for _ in range(200):
        prof = tr.sample_user_subset(catalog, 50, 1.0, rng)
        top_hits += np.intersect1d(prof.subset, np.arange(1, 11)).size
    # under uniform inclusion the expectation would be 0.5 per subset
    assert top_hits / 200 > 2.0


def test_generate_delivery_requests_contract():
    rng = np.random.default_rng(9)
    catalog_bits = 2.4e8
    process = tr.DeliveryProcess(mean_rate=1.2e6, peak_duration=60.0)
    prof = tr.UserInterestProfile(subset=np.arange(1, 101), zipf_beta=1.0)
    n_slots = int(60.0 / 0.01)
    counts = []
    for _ in range(3000):
        reqs = tr.generate_delivery_requests(prof, process, catalog_bits, 0.01, rng)
        counts.append(len(reqs))
        for slot, fid in reqs:
            assert 0 <= slot < n_slots
            assert fid in prof.subset
        assert [s for s, _ in reqs] == sorted(s for s, _ in reqs)
    # 60 s * 1.2 Mbps / 2.4e8 bits = 0.3 expected requests per user
    assert np.mean(counts) == pytest.approx(0.3, abs=0.03)


def test_generate_delivery_requests_zero_rate():
    rng = np.random.default_rng(9)
    process = tr.DeliveryProcess(mean_rate=0.0, peak_duration=60.0)
    prof = tr.UserInterestProfile(subset=np.arange(1, 11), zipf_beta=0.0)
    assert tr.generate_delivery_requests(prof, process, 1e6, 0.01, rng) == []


def test_model_validation():
    with pytest.raises(ValueError):
        tr.RTTrafficModel(capacity=4)  # inconsistent with 0.2 bandwidth fraction
    with pytest.raises(ValueError):
        tr.ContentCatalog(zipf_beta=1.5)
    with pytest.raises(ValueError):
        tr.zipf_pmf(10, -0.1)
