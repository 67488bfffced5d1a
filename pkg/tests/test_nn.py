import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oran_offload.errors import ShapeMismatch
from oran_offload.nn import (
    ModelParams, load_params, mlp_backward, mlp_forward, mlp_init, n_params, save_params,
)
from oracles import central_difference, mlp_forward_loops, relative_error


def test_zero_weights_give_zero_output():
    p = ModelParams(np.zeros(n_params((4, 5, 3))), (4, 5, 3))
    np.testing.assert_array_equal(mlp_forward(p, np.ones(4)), 0.0)


def test_affine_one_by_one():
    p = ModelParams(np.array([2.0, 1.0]), (1, 1))
    assert mlp_forward(p, [3.0])[0] == 7.0


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.lists(st.integers(1, 7), min_size=2, max_size=4))
def test_forward_matches_scalar_loops(seed, sizes):
    rng = np.random.default_rng(seed)
    p = mlp_init(sizes, rng)
    p.vector[:] += rng.normal(0, 0.1, size=p.vector.size)  # nonzero biases too
    x = rng.normal(size=sizes[0])
    ref = mlp_forward_loops(p.vector, p.shape, x)
    np.testing.assert_allclose(mlp_forward(p, x), ref, rtol=1e-10, atol=1e-12)


def test_batch_rows_equal_single_calls():
    rng = np.random.default_rng(1)
    p = mlp_init((5, 8, 8, 2), rng)
    X = rng.normal(size=(7, 5))
    batch = mlp_forward(p, X)
    for i in range(7):
        np.testing.assert_allclose(batch[i], mlp_forward(p, X[i]), rtol=1e-13)


def test_wrong_input_width():
    p = mlp_init((5, 4, 2), np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        mlp_forward(p, np.ones(6))
    with pytest.raises(ShapeMismatch):
        ModelParams(np.ones(3), (5, 4, 2))


def _loss(p, X, y, actions=None):
    def f(theta):
        q = mlp_forward(ModelParams(theta, p.shape), X)
        if actions is not None:
            q = q[np.arange(len(X)), actions]
            return np.mean((q - y) ** 2)
        return np.mean(np.sum((q - y) ** 2, axis=1))
    return f


@pytest.mark.parametrize("selected", [False, True])
def test_backward_matches_finite_differences(selected):
    rng = np.random.default_rng(7)
    p = mlp_init((4, 6, 5, 3), rng)
    p.vector[:] += rng.normal(0, 0.05, size=p.vector.size)
    X = rng.normal(size=(5, 4))
    if selected:
        a = rng.integers(0, 3, size=5)
        y = rng.normal(size=5)
        g, loss = mlp_backward(p, X, y, a)
        fd = central_difference(_loss(p, X, y, a), p.vector)
        assert loss == pytest.approx(_loss(p, X, y, a)(p.vector), rel=1e-12)
    else:
        y = rng.normal(size=(5, 3))
        g, loss = mlp_backward(p, X, y)
        fd = central_difference(_loss(p, X, y), p.vector)
    assert relative_error(g, fd) < 1e-6


def test_zero_loss_zero_gradient_and_scaling():
    rng = np.random.default_rng(3)
    p = mlp_init((3, 4, 2), rng)
    X = rng.normal(size=(6, 3))
    g, loss = mlp_backward(p, X, mlp_forward(p, X))
    assert loss == 0.0 and not g.any()
    y = rng.normal(size=(6, 2))
    g1, l1 = mlp_backward(p, X, y)
    # duplicating every row leaves the mean loss unchanged; doubling the error doubles the gradient
    q = mlp_forward(p, X)
    g2, l2 = mlp_backward(p, X, q + 2 * (y - q))
    assert l2 == pytest.approx(4 * l1)
    np.testing.assert_allclose(g2, 2 * g1, rtol=1e-10, atol=1e-14)


def test_out_of_range_action():
    p = mlp_init((3, 4, 2), np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        mlp_backward(p, np.ones((1, 3)), [0.0], [2])


def test_checkpoint_roundtrip(tmp_path):
    p = mlp_init((11, 64, 64, 2), np.random.default_rng(9))
    save_params(p, tmp_path / "q.bin")
    raw = (tmp_path / "q.bin").read_bytes()
    assert raw[:8] == b"ORANPRM\x00"
    q = load_params(tmp_path / "q.bin")
    assert q.shape == p.shape and q.kind == "mlp"
    np.testing.assert_array_equal(q.vector, p.vector)
    (tmp_path / "bad.bin").write_bytes(b"nonsense" + raw[8:])
    with pytest.raises(ValueError):
        load_params(tmp_path / "bad.bin")
