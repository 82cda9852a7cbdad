"""Unit and gradient tests for the neural-network building blocks.

Hand-computed constants come from evaluating the defining formulas with
the standard math library, independent of the layer implementations.
"""
import numpy as np
import pytest

from tcpid.models import (
    Adam,
    Dense,
    DenseClassifier,
    Lstm,
    LstmClassifier,
    PRelu,
    check_model_gradients,
    cross_entropy,
    lr_at_epoch,
    sigmoid,
    softmax,
)

RNG = np.random.default_rng


def test_sigmoid_values():
    x = np.array([0.0, 0.5, -0.5, 30.0, -30.0])
    out = sigmoid(x)
    assert out[0] == pytest.approx(0.5)
    assert out[1] == pytest.approx(0.6224593312018546, rel=1e-12)
    assert out[2] == pytest.approx(1.0 - 0.6224593312018546, rel=1e-12)
    assert out[3] == pytest.approx(1.0, abs=1e-12)
    assert out[4] == pytest.approx(0.0, abs=1e-12)


def test_dense_forward_backward_by_hand():
    layer = Dense(2, 2, RNG(0), dtype=np.float64)
    layer.w[...] = [[1.0, 2.0], [3.0, 4.0]]
    layer.b[...] = [0.5, -0.5]
    x = np.array([[1.0, 1.0], [2.0, 0.0]])
    out = layer.forward(x)
    assert np.allclose(out, [[4.5, 5.5], [2.5, 3.5]])
    dout = np.array([[1.0, 0.0], [0.0, 1.0]])
    dx = layer.backward(dout)
    # dW[i, j] = sum_n x[n, i] * dout[n, j]
    assert np.allclose(layer.dw, [[1.0, 2.0], [1.0, 0.0]])
    assert np.allclose(layer.db, [1.0, 1.0])
    assert np.allclose(dx, [[1.0, 3.0], [2.0, 4.0]])


def test_prelu_forward_backward_by_hand():
    layer = PRelu(dtype=np.float64)
    assert layer.a == pytest.approx(0.25)
    x = np.array([[-2.0, 3.0]])
    out = layer.forward(x)
    assert np.allclose(out, [[-0.5, 3.0]])
    dx = layer.backward(np.array([[1.0, 1.0]]))
    assert np.allclose(dx, [[0.25, 1.0]])
    assert layer.da == pytest.approx(-2.0)


def test_softmax_cross_entropy_oracle():
    logits = np.array([[1.0, 2.0, 3.0]])
    probs = softmax(logits)
    assert np.allclose(probs, [[0.09003057317038046, 0.24472847105479764,
                                0.6652409557748218]], rtol=1e-12)
    loss, grad = cross_entropy(logits, np.array([2]))
    assert loss == pytest.approx(0.4076059644443804, rel=1e-12)
    assert np.allclose(grad, [[0.09003057317038046, 0.24472847105479764,
                               -0.3347590442251782]], rtol=1e-10)


def test_cross_entropy_mean_over_batch():
    logits = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    loss, grad = cross_entropy(logits, np.array([2, 0]))
    assert loss == pytest.approx(0.7531091265562451, rel=1e-12)
    # uniform row: grad = (1/3 - onehot) / batch
    assert np.allclose(grad[1], [(1 / 3 - 1) / 2, 1 / 6, 1 / 6], rtol=1e-10)


def test_cross_entropy_shift_invariant_and_stable():
    logits = np.array([[1000.0, 1001.0, 1002.0]])
    loss, _ = cross_entropy(logits, np.array([2]))
    assert np.isfinite(loss)
    assert loss == pytest.approx(0.4076059644443804, rel=1e-9)


def test_lstm_forget_bias_and_gate_layout():
    layer = Lstm(3, 4, RNG(0), dtype=np.float64)
    assert layer.w.shape == (3, 16)
    assert layer.u.shape == (4, 16)
    assert np.allclose(layer.b[4:8], 1.0)
    assert np.allclose(layer.b[:4], 0.0)
    assert np.allclose(layer.b[8:], 0.0)


def test_lstm_two_steps_by_hand():
    layer = Lstm(1, 1, RNG(0), dtype=np.float64)
    layer.w[...] = 0.5
    layer.u[...] = 0.5
    layer.b[...] = 0.0
    x = np.ones((1, 2, 1))
    hs = layer.forward(x)
    assert hs[0, 0, 0] == pytest.approx(0.17426971865610508, rel=1e-12)
    assert hs[0, 1, 0] == pytest.approx(0.3090589306416473, rel=1e-12)


def test_lstm_batch_rows_independent():
    layer = Lstm(2, 3, RNG(1), dtype=np.float64)
    x = RNG(2).normal(size=(4, 5, 2))
    full = layer.forward(x, train=False)
    one = layer.forward(x[2:3], train=False)
    assert np.allclose(full[2], one[0], atol=1e-12)


def test_adam_first_step_magnitude_is_lr():
    p = {"w": np.array([1.0, -2.0, 0.5])}
    opt = Adam(p, lr=1e-3)
    opt.step({"w": np.array([0.5, -3.0, 1e-4])})
    moved = p["w"] - np.array([1.0, -2.0, 0.5])
    assert np.allclose(np.abs(moved), 1e-3, rtol=1e-4)
    assert moved[0] < 0 and moved[1] > 0 and moved[2] < 0


def test_adam_zero_grad_no_move():
    p = {"w": np.array([1.0, 2.0])}
    opt = Adam(p, lr=1e-2)
    opt.step({"w": np.zeros(2)})
    assert np.allclose(p["w"], [1.0, 2.0])


def test_adam_updates_in_place_through_model_params():
    model = DenseClassifier(4, 3, hidden=(5,), seed=0, dtype=np.float64)
    before = model.out.w.copy()
    opt = Adam(model.params(), lr=1e-2)
    grads = {k: np.ones_like(v) for k, v in model.params().items()}
    opt.step(grads)
    assert not np.allclose(model.out.w, before)


def test_lr_schedule_breakpoints():
    # 60 epochs: /10 at epoch 30, /10 again at epoch 42
    assert lr_at_epoch(1e-4, 1, 60) == pytest.approx(1e-4)
    assert lr_at_epoch(1e-4, 29, 60) == pytest.approx(1e-4)
    assert lr_at_epoch(1e-4, 30, 60) == pytest.approx(1e-5)
    assert lr_at_epoch(1e-4, 41, 60) == pytest.approx(1e-5)
    assert lr_at_epoch(1e-4, 42, 60) == pytest.approx(1e-6)
    assert lr_at_epoch(1e-4, 60, 60) == pytest.approx(1e-6)
    # 10 epochs: breaks at 5 and 7
    assert lr_at_epoch(1e-4, 4, 10) == pytest.approx(1e-4)
    assert lr_at_epoch(1e-4, 5, 10) == pytest.approx(1e-5)
    assert lr_at_epoch(1e-4, 7, 10) == pytest.approx(1e-6)


def test_untrained_loss_near_log_n_classes():
    model = LstmClassifier(30, 6, lstm_units=(64, 64), dense_units=(32,), seed=7)
    x = RNG(3).normal(size=(48, 20, 30)).astype(np.float32)
    y = np.arange(48) % 6
    logits = model.forward(x, train=False)
    loss, _ = cross_entropy(logits, y)
    assert loss == pytest.approx(1.791759469228055, abs=0.05)


def test_untrained_dense_loss_near_log_n_classes():
    model = DenseClassifier(600, 6, hidden=(64, 32), seed=7)
    x = RNG(4).normal(size=(48, 600)).astype(np.float32)
    y = np.arange(48) % 6
    loss, _ = cross_entropy(model.forward(x, train=False), y)
    assert loss == pytest.approx(1.791759469228055, abs=0.05)


def test_init_deterministic_per_seed():
    a = LstmClassifier(8, 6, lstm_units=(8,), dense_units=(5,), seed=11)
    b = LstmClassifier(8, 6, lstm_units=(8,), dense_units=(5,), seed=11)
    c = LstmClassifier(8, 6, lstm_units=(8,), dense_units=(5,), seed=12)
    for k, v in a.params().items():
        assert np.array_equal(v, b.params()[k])
    assert any(not np.array_equal(v, c.params()[k]) for k, v in a.params().items())


def _assert_grad_results(results, lstm_tol, other_tol):
    assert len(results) >= 20
    for name, idx, analytic, numeric, rel in results:
        tol = lstm_tol if name.startswith("lstm") else other_tol
        assert rel < tol, (
            f"{name}[{idx}]: analytic {analytic:.3e} numeric {numeric:.3e} rel {rel:.3e}")


def test_gradients_recurrent_classifier():
    model = LstmClassifier(6, 4, lstm_units=(8, 6), dense_units=(5,),
                           seed=3, dtype=np.float64)
    x = RNG(5).normal(size=(3, 7, 6))
    y = np.array([0, 2, 3])
    results = check_model_gradients(model, x, y, entries_per_param=4, seed=9)
    _assert_grad_results(results, lstm_tol=1e-4, other_tol=1e-6)


def test_gradients_dense_classifier():
    model = DenseClassifier(20, 5, hidden=(16, 8), seed=4, dtype=np.float64)
    x = RNG(6).normal(size=(4, 20))
    y = np.array([0, 1, 3, 4])
    results = check_model_gradients(model, x, y, entries_per_param=4, seed=10)
    _assert_grad_results(results, lstm_tol=1e-4, other_tol=1e-6)


def test_gradients_cross_entropy_direct():
    rng = RNG(7)
    logits = rng.normal(size=(5, 6))
    y = rng.integers(0, 6, size=5)
    _, grad = cross_entropy(logits, y)
    eps = 1e-6
    for _ in range(10):
        i = rng.integers(0, 5)
        j = rng.integers(0, 6)
        probe = logits.copy()
        probe[i, j] += eps
        hi, _ = cross_entropy(probe, y)
        probe[i, j] -= 2 * eps
        lo, _ = cross_entropy(probe, y)
        numeric = (hi - lo) / (2 * eps)
        assert abs(numeric - grad[i, j]) < 1e-8


def test_backward_shapes_match_inputs():
    model = LstmClassifier(5, 6, lstm_units=(7,), dense_units=(4,),
                           seed=0, dtype=np.float64)
    x = RNG(8).normal(size=(2, 6, 5))
    logits = model.forward(x, train=True)
    assert logits.shape == (2, 6)
    loss, dlogits = cross_entropy(logits, np.array([1, 5]))
    model.backward(dlogits)
    for k, g in model.grads().items():
        assert g.shape == model.params()[k].shape
        assert np.all(np.isfinite(g))
