import numpy as np
import pytest

from ressmooth.errors import FormatError, InputError, ShapeError
from ressmooth.nn import (DenseLayer, Network, backward, backward_batch, build_network,
                          forward, forward_batch, he_init, load_checkpoint,
                          load_parameters, save_checkpoint)


def random_net(dims, output_activation="softmax", seed=0):
    return he_init(build_network(dims, output_activation=output_activation),
                   np.random.default_rng(seed))


# --- initialization -------------------------------------------------------------

def test_he_init_std_and_biases():
    net = random_net([100, 50], seed=1)
    draws = net.layers[0].weights.ravel()  # 5000 draws
    target = np.sqrt(2.0 / 100.0)
    assert abs(np.std(draws) - target) < 0.1 * target
    assert np.array_equal(net.layers[0].bias, np.zeros(50))


def test_he_init_deterministic_per_seed():
    a = random_net([20, 10, 5], seed=7)
    b = random_net([20, 10, 5], seed=7)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weights, lb.weights)


# --- forward -------------------------------------------------------------------

def test_forward_identity_layer():
    net = Network([DenseLayer(np.eye(3), np.zeros(3))], ["identity"])
    x = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(forward(net, x).prediction, x)


def test_forward_relu():
    net = Network([DenseLayer(np.eye(2), np.zeros(2))], ["relu"])
    assert forward(net, np.array([-1.0, 2.0])).prediction.tolist() == [0.0, 2.0]


def test_forward_softmax_symmetry():
    net = Network([DenseLayer(np.eye(2), np.zeros(2))], ["softmax"])
    assert forward(net, np.array([0.0, 0.0])).prediction.tolist() == [0.5, 0.5]


def test_softmax_normalization_and_range():
    rng = np.random.default_rng(2)
    net = random_net([6, 10])
    for _ in range(10):
        p = forward(net, rng.normal(size=6)).prediction
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p > 0.0) and np.all(p < 1.0)


def test_softmax_shift_invariance():
    w = np.random.default_rng(3).normal(size=(5, 4))
    net_plain = Network([DenseLayer(w, np.zeros(5))], ["softmax"])
    net_shifted = Network([DenseLayer(w, np.full(5, 123.0))], ["softmax"])
    x = np.array([0.1, -0.4, 0.9, 0.2])
    a = forward(net_plain, x).prediction
    b = forward(net_shifted, x).prediction
    assert np.allclose(a, b, atol=1e-12)


def test_forward_is_deterministic():
    net = random_net([8, 6, 4], seed=5)
    x = np.random.default_rng(6).random(8)
    assert np.array_equal(forward(net, x).prediction, forward(net, x).prediction)


def test_forward_input_validation():
    net = random_net([4, 2])
    with pytest.raises(InputError):
        forward(net, np.array([1.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ShapeError):
        forward(net, np.zeros(5))


# --- backward ------------------------------------------------------------------

def test_backward_zero_gradient():
    net = random_net([5, 3])
    cache = forward(net, np.random.default_rng(8).random(5))
    grads = backward(net, cache, np.zeros(3))
    assert all(np.array_equal(g, np.zeros_like(g)) for g in grads.weights + grads.biases)


def test_backward_linear_sum_loss():
    # identity net, loss = sum(h): dL/dW = outer(1, x), dL/db = 1
    net = Network([DenseLayer(np.eye(3), np.zeros(3))], ["identity"])
    x = np.array([0.2, -0.6, 1.5])
    grads = backward(net, forward(net, x), np.ones(3))
    assert np.allclose(grads.weights[0], np.outer(np.ones(3), x), atol=1e-15)
    assert grads.biases[0].tolist() == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("output_activation", ["identity", "softmax"])
def test_backward_matches_finite_differences(fd_grad, output_activation):
    rng = np.random.default_rng(9)
    net = random_net([7, 6, 4], output_activation=output_activation, seed=10)
    x = rng.random(7)
    direction = rng.normal(size=4)  # random linear functional of the output

    def loss():
        return float(direction @ forward(net, x).prediction)

    analytic = backward(net, forward(net, x), direction)
    params = [p for layer in net.layers for p in (layer.weights, layer.bias)]
    fd = fd_grad(loss, params)
    got = [g for pair in zip(analytic.weights, analytic.biases) for g in pair]
    for a, b in zip(got, fd):
        assert np.allclose(a, b, rtol=1e-5, atol=1e-8)


def test_backward_shape_validation():
    net = random_net([4, 2])
    cache = forward(net, np.zeros(4))
    with pytest.raises(ShapeError):
        backward(net, cache, np.zeros(3))


# --- batch path ------------------------------------------------------------------

def test_forward_batch_matches_per_sample():
    net = random_net([9, 7, 5], seed=11)
    xb = np.random.default_rng(12).random((6, 9))
    batch = forward_batch(net, xb).prediction
    for i in range(6):
        single = forward(net, xb[i]).prediction
        assert np.allclose(batch[i], single, rtol=1e-12, atol=1e-14)


def test_backward_batch_sums_per_sample_gradients():
    net = random_net([9, 7, 5], seed=13)
    rng = np.random.default_rng(14)
    xb = rng.random((6, 9))
    gb = rng.normal(size=(6, 5))
    batch = backward_batch(net, forward_batch(net, xb), gb)
    acc_w = [np.zeros_like(l.weights) for l in net.layers]
    acc_b = [np.zeros_like(l.bias) for l in net.layers]
    for i in range(6):
        single = backward(net, forward(net, xb[i]), gb[i])
        for j in range(len(net.layers)):
            acc_w[j] += single.weights[j]
            acc_b[j] += single.biases[j]
    for j in range(len(net.layers)):
        assert np.allclose(batch.weights[j], acc_w[j], rtol=1e-10, atol=1e-12)
        assert np.allclose(batch.biases[j], acc_b[j], rtol=1e-10, atol=1e-12)


# --- architecture validation ------------------------------------------------------

def test_network_chain_validation():
    good = DenseLayer(np.zeros((3, 4)), np.zeros(3))
    bad = DenseLayer(np.zeros((2, 5)), np.zeros(2))
    with pytest.raises(ShapeError):
        Network([good, bad], ["relu", "softmax"])
    with pytest.raises(ShapeError):
        Network([good], ["sigmoid"])


# --- checkpoints -------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    net = random_net([12, 8, 3], seed=15)
    path = tmp_path / "net.rsm"
    save_checkpoint(net, path)
    restored = load_parameters(build_network([12, 8, 3]), load_checkpoint(path))
    for orig, back in zip(net.layers, restored.layers):
        assert np.array_equal(orig.weights, back.weights)
        assert np.array_equal(orig.bias, back.bias)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bogus.rsm"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    net = random_net([4, 2], seed=16)
    path = tmp_path / "net.rsm"
    save_checkpoint(net, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_load_parameters_shape_mismatch(tmp_path):
    net = random_net([4, 2], seed=17)
    path = tmp_path / "net.rsm"
    save_checkpoint(net, path)
    with pytest.raises(ShapeError):
        load_parameters(build_network([4, 3]), load_checkpoint(path))
