import numpy as np
import pytest

from oran_offload.traffic import TrafficMatrix, read_traffic_csv, synth_domain_traffic, write_traffic_csv


def test_synthetic_traffic_shape_and_sign():
    cap = np.full(12, 6000.0)
    x = synth_domain_traffic(cap, 3, 500, np.random.default_rng(0))
    assert x.shape == (3, 12, 500)
    assert np.all(x >= 0)
    total = x.sum(axis=0)
    # mean utilization sits inside the configured band (with some slack for the wave)
    assert 0.3 < total.mean() / 6000 < 1.0


def test_synthetic_traffic_is_seeded():
    cap = np.full(4, 100.0)
    a = synth_domain_traffic(cap, 2, 50, np.random.default_rng(5))
    b = synth_domain_traffic(cap, 2, 50, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_csv_roundtrip(tmp_path):
    m = TrafficMatrix(np.random.default_rng(1).random((3, 20)) * 100, domain=2, path_ids=("a", "b", "c"))
    write_traffic_csv(tmp_path / "t.csv", m)
    back = read_traffic_csv(tmp_path / "t.csv", domain=2)
    assert back.path_ids == ("a", "b", "c")
    np.testing.assert_allclose(back.series, m.series, atol=1e-6)


def test_matrix_validation_and_normalization():
    with pytest.raises(ValueError):
        TrafficMatrix(np.array([[1.0, -1.0]]))
    m = TrafficMatrix(np.array([[2.0, 4.0, 6.0]]))
    assert m.bounds == (2.0, 6.0)
    np.testing.assert_allclose(m.normalized(), [[0.0, 0.5, 1.0]])
