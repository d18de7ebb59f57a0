import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsorf.neural import (MlpNetwork, MlpSpec, TemperatureSchedule, adam_step, backward_mse,
                          boltzmann_probs, boltzmann_sample, load_weights, masked_mse, save_weights, sgd_step,
                          softmax)

import gradcheck


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(0, 2)
    with pytest.raises(ValueError):
        MlpSpec(3, 2, (4, 0))
    with pytest.raises(ValueError):
        MlpSpec(3, 2, dtype="float16")
    assert MlpSpec(32, 2).dims == (32, 300, 200, 100, 2)
    assert MlpSpec(2, 1, (3,)).n_params == 2 * 3 + 3 + 3 * 1 + 1


def test_layer_views_share_the_flat_vector(rng):
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    net.weights[0][0, 0] = 42.0
    assert net.params[0] == 42.0
    net.params[:] = 0
    assert np.all(net.biases[1] == 0)


def test_xavier_bounds_and_zero_biases(rng):
    net = MlpNetwork(MlpSpec(32, 2), rng)
    for w in net.weights:
        bound = 1 / math.sqrt(w.shape[0])
        assert np.abs(w).max() <= bound
        assert np.abs(w).max() > 0.9 * bound
    assert all(np.all(b == 0) for b in net.biases)


def test_zero_net_outputs_zero():
    net = MlpNetwork(MlpSpec(4, 3, (5, 6)))
    out, feats = net.forward(np.ones(4))
    assert np.all(out == 0) and feats.shape == (6,)


def test_relu_clamps_negatives():
    net = MlpNetwork(MlpSpec(2, 2, (2,)))
    net.weights[0][...] = np.eye(2)
    net.weights[1][...] = np.eye(2)
    out, feats = net.forward(np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(feats, [0.0, 2.0])
    np.testing.assert_array_equal(out, [0.0, 2.0])


def test_forward_is_pure_and_batch_consistent(rng):
    net = MlpNetwork(MlpSpec(6, 2, (8, 5)), rng)
    x = rng.normal(size=(4, 6))
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    np.testing.assert_array_equal(a, b)
    for i in range(4):
        np.testing.assert_allclose(net.predict(x[i]), a[i], rtol=1e-12)


def test_shape_mismatch_and_order_errors(rng):
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    with pytest.raises(ValueError):
        net.forward(np.ones(4))
    with pytest.raises(RuntimeError):
        net.backward(np.ones(2))
    net.forward(np.ones((2, 3)))
    with pytest.raises(ValueError):
        net.backward(np.ones((3, 2)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 25:
        case = gradcheck.random_case(rng)
        if not gradcheck.kink_free(case[0], case[1]):
            continue
        assert gradcheck.max_rel_error(*case) < 1e-4
        checked += 1


def test_zero_error_gives_zero_gradient(rng):
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    x = rng.normal(size=(5, 3))
    out = net.predict(x)
    actions = np.array([0, 1, 1, 0, 1])
    loss, g = backward_mse(net, x, out[np.arange(5), actions], actions)
    assert loss == 0 and np.all(g == 0)


def test_masked_loss_ignores_other_action():
    out = np.array([[1.0, 5.0], [2.0, -3.0]])
    loss, g = masked_mse(out, [0.0, 0.0], [0, 1])
    assert loss == pytest.approx((1 + 9) / 2)
    np.testing.assert_array_equal(g, [[1.0, 0.0], [0.0, -3.0]])


def test_first_adam_step_has_magnitude_lr(rng):
    # m1 = 0.1 g, v1 = 0.001 g^2; bias correction turns the step into lr * g / (|g| + eps/...)
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    before = net.params.copy()
    g = rng.normal(size=net.params.size) * 10 ** rng.uniform(-3, 3, net.params.size)
    adam_step(net, g, 1e-3)
    expected = -1e-3 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(net.params - before, expected, rtol=1e-6, atol=1e-12)
    assert net.adam.step == 1


def test_zero_grads_leave_weights(rng):
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    before = net.params.copy()
    adam_step(net, np.zeros_like(net.params), 1e-3)
    np.testing.assert_array_equal(net.params, before)
    assert net.adam.step == 1


def test_adam_matches_reference_loop(rng):
    net = MlpNetwork(MlpSpec(3, 2, (4,)), rng)
    p = net.params.copy()
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t in range(1, 20):
        g = rng.normal(size=p.size)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p = p - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        adam_step(net, g, 1e-2)
    np.testing.assert_allclose(net.params, p, rtol=1e-10, atol=1e-13)


def test_adam_deterministic():
    nets = [MlpNetwork(MlpSpec(5, 2, (6,)), np.random.default_rng(3)) for _ in range(2)]
    grads = np.random.default_rng(4).normal(size=(10, nets[0].params.size))
    for net in nets:
        for g in grads:
            adam_step(net, g, 1e-3)
    np.testing.assert_array_equal(nets[0].params, nets[1].params)


def test_sgd_step(rng):
    net = MlpNetwork(MlpSpec(2, 1, (2,)), rng)
    before = net.params.copy()
    g = np.ones_like(before)
    sgd_step(net, g, 0.5)
    np.testing.assert_allclose(net.params, before - 0.5)


def test_float32_network_runs(rng):
    net = MlpNetwork(MlpSpec(32, 2, dtype="float32"), rng)
    out, _ = net.forward(rng.normal(size=(8, 32)))
    assert out.dtype == np.float32
    g = net.backward(np.ones((8, 2), np.float32))
    adam_step(net, g, 1e-4)
    assert net.params.dtype == np.float32 and np.all(np.isfinite(net.params))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_large_inputs_stay_finite(seed):
    r = np.random.default_rng(seed)
    net = MlpNetwork(MlpSpec(8, 2, (8, 8)), r)
    x = r.uniform(-1e3, 1e3, (4, 8))
    out, _ = net.forward(x)
    g = net.backward(np.ones_like(out))
    assert np.all(np.isfinite(out)) and np.all(np.isfinite(g))


def test_boltzmann_uniform_for_equal_q():
    r = np.random.default_rng(0)
    draws = np.array([boltzmann_sample([0.3, 0.3], 0.7, r) for _ in range(100_000)])
    assert abs(draws.mean() - 0.5) < 0.02 * 0.5


def test_boltzmann_closed_form():
    r = np.random.default_rng(1)
    q = [0.0, math.log(3)]
    np.testing.assert_allclose(boltzmann_probs(q, 1.0), [0.25, 0.75], rtol=1e-12)
    draws = np.array([boltzmann_sample(q, 1.0, r) for _ in range(100_000)])
    assert draws.mean() == pytest.approx(0.75, rel=0.02)


def test_boltzmann_cold_limit_is_argmax():
    r = np.random.default_rng(2)
    assert all(boltzmann_sample([0.1, 0.2, 0.15], 1e-6, r) == 1 for _ in range(1000))
    assert all(boltzmann_sample([1e6, -1e6], 1e-6, r) == 0 for _ in range(100))


def test_boltzmann_rejects_bad_temperature():
    with pytest.raises(ValueError):
        boltzmann_probs([0, 1], 0.0)


def test_softmax_stable_for_huge_logits():
    p = softmax(np.array([1e308, 0.0]))
    np.testing.assert_array_equal(p, [1.0, 0.0])


def test_temperature_schedule():
    s = TemperatureSchedule(1.0, 0.1, 100)
    assert s(0) == 1.0
    assert s(50) == pytest.approx(math.sqrt(0.1))
    assert s(100) == pytest.approx(0.1)
    assert s(10**6) == pytest.approx(0.1)


@pytest.mark.parametrize("dtype", ["float64", "float32"])
def test_weight_snapshot_round_trip(tmp_path, rng, dtype):
    net = MlpNetwork(MlpSpec(5, 2, (7, 3), dtype), rng)
    path = tmp_path / "w.bin"
    save_weights(net, path)
    back = load_weights(path)
    assert back.spec == net.spec
    np.testing.assert_array_equal(back.params, net.params)
    raw = path.read_bytes()
    assert raw.startswith(b"FSORF-MLP v1\n")
    assert len(raw) - raw.index(b"\n", 13) - 1 == 8 * net.params.size


def test_weight_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"hello")
    with pytest.raises(ValueError):
        load_weights(p)
