import numpy as np
import pytest
from hypothesis import given, strategies as st

from oran_offload import radio
from oran_offload.errors import InvalidNoise, ZeroRateWithOffload


@pytest.mark.parametrize("snr, gamma", [(1.0, 1.0), (0.0, 0.0), (3.0, 2.0)])
def test_spectral_efficiency_examples(snr, gamma):
    assert radio.snr_spectral_efficiency(snr) == pytest.approx(gamma, abs=1e-15)


def test_params_snr_uses_linear_power():
    p = radio.RadioParams(tx_power_dbm=30.0, channel_gain_sq=3.0, noise_power=1.0, bandwidth=25e6)
    assert p.snr == pytest.approx(3.0)
    assert radio.spectral_efficiency(p) == pytest.approx(2.0)


def test_invalid_noise():
    with pytest.raises(InvalidNoise):
        radio.RadioParams(27.0, 1.0, 0.0, 25e6)


def test_rate_examples():
    assert radio.instantaneous_rate(1, 0.5, 25e6, 2.0) == pytest.approx(25e6)
    assert radio.instantaneous_rate(0, 0.5, 25e6, 2.0) == 0.0
    assert radio.instantaneous_rate(1, 1.0, 32e6, 1.0) == pytest.approx(32e6)
    with pytest.raises(ValueError):
        radio.instantaneous_rate(1, 1.5, 32e6, 1.0)


def test_uplink_examples():
    assert radio.uplink_delay(2e6, 25e6) == pytest.approx(0.08)
    assert radio.uplink_delay(2e6, 25e6, x=0) == 0.0
    assert radio.uplink_delay(8e6, 32e6) == pytest.approx(0.25)
    assert radio.uplink_delay(8e6, 0.0, x=0) == 0.0
    with pytest.raises(ZeroRateWithOffload):
        radio.uplink_delay(8e6, 0.0, x=1)


def test_budget_examples():
    ok, slack = radio.bandwidth_budget_ok([0.4, 0.6], [1, 1])
    assert ok and slack == pytest.approx(0.0, abs=1e-15)
    ok, slack = radio.bandwidth_budget_ok([0.7, 0.5], [1, 1])
    assert not ok and slack == pytest.approx(-0.2)
    assert radio.bandwidth_budget_ok([0.7, 0.5], [0, 0]) == (True, 1.0)


def test_equal_split_respects_budget():
    x = np.array([1, 1, 0, 1, 1, 1])
    groups = np.array([0, 0, 0, 1, 1, 2])
    b = radio.equal_split(x, groups, 4)
    np.testing.assert_allclose(b, [0.5, 0.5, 0, 0.5, 0.5, 1.0])
    for m in range(4):
        assert radio.bandwidth_budget_ok(b[groups == m], x[groups == m])[0]


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_gamma_monotone(a, b):
    lo, hi = sorted((a, b))
    assert radio.snr_spectral_efficiency(lo) <= radio.snr_spectral_efficiency(hi)


@given(st.floats(0.01, 1), st.floats(1e6, 1e8), st.floats(0.1, 20), st.floats(1.5, 4))
def test_rate_linear_in_fraction_and_bandwidth(b, w, g, k):
    base = radio.instantaneous_rate(1, b / k, w, g)
    assert radio.instantaneous_rate(1, b, w, g) == pytest.approx(k * base, rel=1e-12)
    assert radio.instantaneous_rate(1, b / k, k * w, g) == pytest.approx(k * base, rel=1e-12)


@given(st.floats(1, 1e8), st.floats(1e3, 1e9))
def test_uplink_roundtrip(d, rate):
    assert radio.uplink_delay(d, rate) * rate == pytest.approx(d, rel=1e-12)
