import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from pushsim import channel as ch
from pushsim.geometry import Hexagon, hex_grid_positions


def test_path_loss_reference_points():
    assert ch.path_loss_db(1.0) == pytest.approx(30.5)
    assert ch.path_loss_db(10.0) == pytest.approx(67.2)
    assert ch.path_loss_db(50.0) == pytest.approx(92.852, abs=0.01)


def test_path_loss_clamped_below_one_meter():
    assert ch.path_loss_db(0.0) == ch.path_loss_db(1.0)
    assert ch.path_loss_db(0.5) == ch.path_loss_db(1.0)


def test_path_gain_strictly_decreasing():
    d = np.linspace(1.0, 300.0, 500)
    a = ch.path_gain(d)
    assert np.all(np.diff(a) < 0)


def test_fading_single_antenna_is_exponential():
    rng = np.random.default_rng(3)
    x = ch.sample_h_norm_sq(1, rng, size=200_000)
    assert np.all(x >= 0)
    # exponential(1): mean 1, var 1
    assert x.mean() == pytest.approx(1.0, rel=0.01)
    assert x.var() == pytest.approx(1.0, rel=0.03)


def test_fading_mean_matches_antenna_count():
    rng = np.random.default_rng(4)
    x = ch.sample_h_norm_sq(4, rng, size=1_000_000)
    assert x.mean() == pytest.approx(4.0, rel=0.01)


def test_equivalent_gain_examples():
    params = ch.PathLossParams(noise_psd=1e-19, max_bandwidth=1e7)  # N0*W = 1e-12
    assert ch.equivalent_gain_tilde(1.0, 1.0, params) == pytest.approx(1e12)
    g1 = ch.equivalent_gain_tilde(2e-9, 1.3, params)
    assert g1 == pytest.approx(2 * ch.equivalent_gain_tilde(1e-9, 1.3, params))
    gt = 5.0e3
    assert ch.gain_at_bandwidth(gt, 0.5e7, 1e7) == pytest.approx(2 * gt)
    with pytest.raises(ValueError):
        ch.gain_at_bandwidth(gt, 0.0, 1e7)


def test_gamma_pdf_shape_one_is_exponential():
    d = ch.GammaChannelDist(shape=1, rate_scale=2.5)
    g = np.linspace(0, 5, 50)
    np.testing.assert_allclose(ch.gamma_pdf(g, d), 2.5 * np.exp(-2.5 * g), rtol=1e-12)


@pytest.mark.parametrize("shape", [1, 2, 4, 8])
@pytest.mark.parametrize("loss_db", [60.0, 80.0, 100.0])
def test_gamma_pdf_normalization_and_mean(shape, loss_db):
    params = ch.PathLossParams()
    alpha = 10 ** (-loss_db / 10.0)
    d = ch.channel_dist_for_gain(alpha, params, shape)
    scale = d.mean
    def split_quad(f):
        head, _ = quad(f, 0, 20 * scale, limit=300, epsabs=0.0, epsrel=1e-12)
        tail, _ = quad(f, 20 * scale, np.inf, limit=300, epsabs=1e-14, epsrel=1e-12)
        return head + tail
    assert split_quad(lambda g: ch.gamma_pdf(g, d)) == pytest.approx(1.0, abs=1e-8)
    mean = split_quad(lambda g: g * ch.gamma_pdf(g, d))
    assert mean == pytest.approx(d.mean, rel=1e-6)


def test_equivalent_gain_matches_gamma_distribution():
    rng = np.random.default_rng(11)
    params = ch.PathLossParams()
    alpha = ch.path_gain(25.0, params)
    n_t = 4
    h2 = ch.sample_h_norm_sq(n_t, rng, size=100_000)
    samples = ch.equivalent_gain_tilde(alpha, h2, params)
    dist = ch.channel_dist_for_gain(alpha, params, n_t)
    stat = kstest(samples, lambda g: np.asarray(dist.cdf(g))).statistic
    assert stat < 0.01


def test_position_at_basics():
    cell = Hexagon(center=(0.0, 0.0), circumradius=50.0)
    traj = ch.Trajectory(
        start_position=(5.0, 0.0), direction=(0.0, 1.0), speed=1.0, min_sbs_distance=5.0
    )
    np.testing.assert_allclose(ch.position_at(traj, 0.0, cell), [5.0, 0.0])
    still = ch.Trajectory(
        start_position=(5.0, 0.0), direction=(0.0, 1.0), speed=0.0, min_sbs_distance=5.0
    )
    np.testing.assert_allclose(ch.position_at(still, 1e4, cell), [5.0, 0.0])


def test_straight_segment_covers_expected_path_length():
    cell = Hexagon(center=(0.0, 0.0), circumradius=1e6)  # no reflections
    traj = ch.Trajectory(
        start_position=(10.0, 0.0), direction=(1.0, 1.0), speed=1.0, min_sbs_distance=10.0
    )
    p = ch.position_at(traj, 120.0, cell)
    assert np.linalg.norm(p - traj.start_position) == pytest.approx(120.0)


def test_reflected_walk_stays_inside_cell():
    cell = Hexagon(center=(3.0, -2.0), circumradius=50.0)
    rng = np.random.default_rng(5)
    for _ in range(25):
        ang = rng.uniform(0, 2 * math.pi)
        traj = ch.Trajectory(
            start_position=np.asarray(cell.center) + [20.0, 0.0],
            direction=(math.cos(ang), math.sin(ang)),
            speed=1.0,
            min_sbs_distance=20.0,
        )
        pos = ch.positions_at(traj, np.arange(0.0, 300.0, 1.0), cell)
        for p in pos:
            assert cell.contains(p, tol=1e-6)


def test_hex_grid_spacing_and_rejection():
    pos = hex_grid_positions(19, 50.0)
    assert len(pos) == 19
    np.testing.assert_allclose(pos[0], [0.0, 0.0])
    d = np.linalg.norm(pos[None, :, :] - pos[:, None, :], axis=2)
    d[d == 0] = np.inf
    assert d.min() == pytest.approx(math.sqrt(3) * 50.0, abs=1e-6)
    with pytest.raises(ValueError):
        hex_grid_positions(10, 50.0)
    assert len(hex_grid_positions(1, 50.0)) == 1
