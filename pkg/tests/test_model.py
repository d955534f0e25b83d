import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiband_toa import (
    AliasingError,
    BandPlan,
    ClusteredChannel,
    cluster_approx,
    exact_frequency_response,
    first_order_response,
    noise_power_for_snr,
    steering_derivative,
    steering_vector,
    synthesize_snapshots,
)
from multiband_toa.model import check_channel


def test_band_plan_offsets(plan):
    assert plan.band_offsets == (0, 40, 70, 140)
    assert plan.num_bands == 4
    assert plan.subcarrier_spacing == pytest.approx(2 * np.pi * 1e6)
    assert plan.bandwidth == pytest.approx(2 * np.pi * 12e6)


@pytest.mark.parametrize("centers", [[10.5], [10, 50.5, 80]])
def test_band_plan_rejects_off_grid_center(centers):
    with pytest.raises(ValueError, match="grid"):
        BandPlan.from_mhz(centers, 12, 12)


def test_band_plan_rejects_unsorted_offsets():
    with pytest.raises(ValueError):
        BandPlan(12, 1.0, (0, 70, 40))


def test_steering_zero_phase_is_ones(plan):
    np.testing.assert_allclose(steering_vector(0.0, plan), np.ones(48))


def test_steering_known_entries(plan):
    phi = 0.01
    a = steering_vector(phi, plan)
    assert a[0] == pytest.approx(1.0)
    # band 2, subcarrier 3 -> exponent 70 + 3
    assert a[2 * 12 + 3] == pytest.approx(np.exp(-1j * phi * 73))
    np.testing.assert_allclose(np.abs(a), 1.0)


def test_steering_vandermonde_recurrence(plan):
    phi = 0.37
    a = steering_vector(phi, plan).reshape(4, 12)
    np.testing.assert_allclose(a[:, 1:], a[:, :-1] * np.exp(-1j * phi), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2 * np.pi - 1e-3))
def test_steering_derivative_matches_central_difference(phi):
    plan = BandPlan.from_mhz([10, 50, 80, 150], 12, 12)
    h = 1e-6
    fd = (steering_vector(phi + h, plan) - steering_vector(phi - h, plan)) / (2 * h)
    np.testing.assert_allclose(steering_derivative(phi, plan), fd, rtol=0, atol=1e-5)


def test_frequency_response_is_linear_in_gains(plan, rng, scenario1_channel):
    g1 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    g2 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    c = 0.3 - 1.2j
    h = lambda g: exact_frequency_response(scenario1_channel.with_gains(g), plan)
    np.testing.assert_allclose(h(g1 + c * g2), h(g1) + c * h(g2), atol=1e-12)


def test_cluster_approx_values(plan):
    ch = ClusteredChannel.from_powers([[1.0, 0.5], [1.0]], [[5.0, 6.0], [40.0]])
    ap = cluster_approx(ch, plan)
    dphi = 2 * np.pi * 1e6 * 1e-9
    alpha = 1 + np.sqrt(0.5)
    np.testing.assert_allclose(ap.cluster_powers, [1.5, 1.0])
    np.testing.assert_allclose(ap.e_vector, [0.5 * dphi, 0.0])
    np.testing.assert_allclose(ap.lumped_gains, [alpha, 1.0])
    np.testing.assert_allclose(ap.gamma, [np.sqrt(0.5) * dphi / alpha, 0.0])
    np.testing.assert_allclose(ap.anchor_phases, [5 * dphi, 40 * dphi])


def test_first_order_residual_is_quadratic(plan):
    def residual(spread_ns):
        ch = ClusteredChannel.from_powers([[1.0, 0.6], [0.7]], [[5.0, 5.0 + spread_ns], [60.0]])
        exact = exact_frequency_response(ch, plan)
        approx = first_order_response(cluster_approx(ch, plan), plan)
        return np.linalg.norm(exact - approx)

    ratio = residual(0.02) / residual(0.01)
    assert 3.0 <= ratio <= 5.5


def test_aliasing_raises(plan):
    ch = ClusteredChannel.from_powers([[1.0]], [[1001.0]])
    with pytest.raises(AliasingError):
        check_channel(ch, plan)


def test_close_clusters_warn(plan):
    ch = ClusteredChannel.from_powers([[1.0], [1.0]], [[5.0], [6.0]])
    with pytest.warns(UserWarning):
        check_channel(ch, plan)


def test_scenario1_clusters_do_not_warn(plan, scenario1_channel):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_channel(scenario1_channel, plan)


def test_unsorted_cluster_delays_rejected():
    with pytest.raises(ValueError):
        ClusteredChannel.from_powers([[1.0, 0.5]], [[6.0, 5.0]])


def test_noise_power_for_snr(scenario1_channel):
    assert noise_power_for_snr(scenario1_channel, 10.0) == pytest.approx(0.15)


def test_synthesis_is_deterministic(plan, scenario1_channel):
    a = synthesize_snapshots(scenario1_channel, plan, 8, 0.1, seed=7, random_phases=True)
    b = synthesize_snapshots(scenario1_channel, plan, 8, 0.1, seed=7, random_phases=True)
    c = synthesize_snapshots(scenario1_channel, plan, 8, 0.1, seed=8, random_phases=True)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.allclose(a.data, c.data)
    assert a.data.shape == (48, 8)
    assert a.band(1).shape == (12, 8)


def test_synthesis_noise_variance(plan, scenario1_channel):
    s = synthesize_snapshots(scenario1_channel, plan, 4000, 0.3, seed=1)
    clean = exact_frequency_response(scenario1_channel, plan)
    noise = s.data - clean[:, None]
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.3, rel=0.02)
    assert abs(np.mean(noise.real * noise.imag)) < 0.01


def test_noiseless_fixed_phase_snapshots_are_exact(plan, scenario1_channel):
    s = synthesize_snapshots(scenario1_channel, plan, 3, 0.0, seed=0)
    clean = exact_frequency_response(scenario1_channel, plan)
    np.testing.assert_allclose(s.data, np.repeat(clean[:, None], 3, axis=1))


def test_small_plan_exponent_table():
    plan = BandPlan(3, 1.0, (0, 4))
    np.testing.assert_array_equal(plan.exponents(), [0, 1, 2, 4, 5, 6])
    np.testing.assert_allclose(steering_vector(0.3, plan), np.exp(-0.3j * np.array([0, 1, 2, 4, 5, 6])))


def test_frequency_response_scalar_loop(plan, scenario1_channel):
    ws = plan.subcarrier_spacing
    expected = []
    for n_i in plan.band_offsets:
        for n in range(plan.num_subcarriers):
            total = 0j
            for g, d in zip(scenario1_channel.gains, scenario1_channel.delays):
                for k in range(g.size):
                    total += g[k] * np.exp(-1j * ws * d[k] * (n + n_i))
            expected.append(total)
    np.testing.assert_allclose(exact_frequency_response(scenario1_channel, plan), expected, atol=1e-12)


def test_scenario2_first_cluster_loop(plan):
    powers, delays = [1.0, 0.5, 0.37], [5.0, 5.5, 8.0]
    ch = ClusteredChannel.from_powers([powers], [delays])
    ap = cluster_approx(ch, plan)
    ws = 2 * np.pi * 1e6
    e = 0.0
    spread = 0.0
    for p, d in zip(powers[1:], delays[1:]):
        e += p * ws * (d - delays[0]) * 1e-9
        spread += np.sqrt(p) * ws * (d - delays[0]) * 1e-9
    alpha = sum(np.sqrt(p) for p in powers)
    assert ap.e_vector[0] == pytest.approx(e)
    assert ap.cluster_powers[0] == pytest.approx(1.87)
    assert ap.gamma[0] == pytest.approx(spread / alpha)


def test_steering_parity_examples():
    plan = BandPlan(2, 1.0, (0, 5))
    np.testing.assert_allclose(steering_vector(np.pi, plan), [1, -1, -1, 1], atol=1e-12)
    np.testing.assert_allclose(steering_derivative(0.0, BandPlan(2, 1.0, (0,))), [0, -1j])
    ch = ClusteredChannel((np.array([1.0 + 0j]),), (np.array([np.pi]),))
    np.testing.assert_allclose(exact_frequency_response(ch, BandPlan(2, 1.0, (0,))), [1, -1], atol=1e-12)
    zero = ClusteredChannel.from_powers([[1.0]], [[0.0]])
    np.testing.assert_allclose(exact_frequency_response(zero, BandPlan(3, 1.0, (0, 4))), np.ones(6))
