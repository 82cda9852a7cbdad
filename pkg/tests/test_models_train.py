"""Tests for the minibatch trainer: splits, schedule, convergence, restore."""
import numpy as np
import pytest

from tcpid.models import (
    LstmClassifier,
    TrainConfig,
    load_checkpoint,
    predict,
    reinit_output,
    save_checkpoint,
    split_validation,
    train_model,
)


def toy_sequences(n_per_class=40, t=6, d=3, seed=0):
    """Three classes with distinct channel means, several windows per trace."""
    rng = np.random.default_rng(seed)
    xs, ys, traces = [], [], []
    trace = 0
    for cls in range(3):
        for _ in range(n_per_class // 4):
            base = np.zeros(d)
            base[cls % d] = 1.5
            base -= 0.5
            for _ in range(4):
                xs.append(rng.normal(loc=base, scale=0.5, size=(t, d)))
                ys.append(cls)
                traces.append(trace)
            trace += 1
    x = np.asarray(xs, dtype=np.float32)
    return x, np.asarray(ys, dtype=np.int64), np.asarray(traces, dtype=np.int64)


def small_model(seed=0):
    return LstmClassifier(3, 3, lstm_units=(8,), dense_units=(6,), seed=seed)


def test_split_validation_no_trace_overlap():
    _, y, traces = toy_sequences()
    rng = np.random.default_rng(0)
    train_mask, val_mask = split_validation(traces, y, 0.2, rng)
    assert not np.any(train_mask & val_mask)
    assert np.all(train_mask | val_mask)
    assert val_mask.sum() > 0
    overlap = set(traces[train_mask]) & set(traces[val_mask])
    assert overlap == set()
    # every class keeps at least one training trace and gains one val trace
    for cls in range(3):
        assert len(set(traces[val_mask & (y == cls)])) >= 1
        assert len(set(traces[train_mask & (y == cls)])) >= 1


def test_split_validation_zero_fraction_empty():
    _, y, traces = toy_sequences()
    train_mask, val_mask = split_validation(traces, y, 0.0, np.random.default_rng(0))
    assert val_mask.sum() == 0
    assert train_mask.all()


def test_training_learns_separable_problem():
    x, y, traces = toy_sequences()
    model = small_model()
    cfg = TrainConfig(epochs=20, batch_size=16, lr=1e-2, val_fraction=0.2, seed=5)
    result = train_model(model, x, y, traces, cfg)
    assert result.history["train_loss"][-1] < result.history["train_loss"][0]
    assert result.best_val_accuracy >= 0.9
    preds = predict(model, x)
    assert (preds == y).mean() >= 0.85


def test_history_lr_follows_schedule():
    x, y, traces = toy_sequences(n_per_class=16)
    model = small_model()
    cfg = TrainConfig(epochs=10, batch_size=16, lr=1e-3, val_fraction=0.0, seed=1)
    result = train_model(model, x, y, traces, cfg)
    lrs = result.history["lr"]
    assert lrs[0] == pytest.approx(1e-3)
    assert lrs[4] == pytest.approx(1e-4)   # epoch 5
    assert lrs[6] == pytest.approx(1e-5)   # epoch 7
    assert len(result.history["epoch"]) == 10


def test_best_epoch_params_restored():
    x, y, traces = toy_sequences()
    model = small_model()
    cfg = TrainConfig(epochs=12, batch_size=16, lr=3e-3, val_fraction=0.25, seed=2)
    result = train_model(model, x, y, traces, cfg)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=2, spawn_key=(4,)))
    _, val_mask = split_validation(traces, y, 0.25, rng)
    preds = predict(model, x[val_mask])
    acc = (preds == y[val_mask]).mean()
    assert acc == pytest.approx(result.best_val_accuracy, abs=1e-9)
    assert result.best_epoch >= 1
    assert result.history["val_accuracy"][result.best_epoch - 1] == pytest.approx(
        result.best_val_accuracy)


def test_training_deterministic():
    x, y, traces = toy_sequences()
    runs = []
    for _ in range(2):
        model = small_model(seed=3)
        cfg = TrainConfig(epochs=4, batch_size=16, lr=1e-3, val_fraction=0.2, seed=7)
        result = train_model(model, x, y, traces, cfg)
        runs.append((result.history["train_loss"],
                     {k: v.copy() for k, v in model.params().items()}))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert np.array_equal(runs[0][1][k], runs[1][1][k])


def test_reinit_output_touches_only_final_layer():
    model = small_model(seed=4)
    before = {k: v.copy() for k, v in model.params().items()}
    reinit_output(model, seed=99)
    after = model.params()
    for k in before:
        if k.startswith("out."):
            continue
        assert np.array_equal(before[k], after[k]), k
    assert not np.array_equal(before["out.w"], after["out.w"])


def test_checkpoint_roundtrip(tmp_path):
    x, y, traces = toy_sequences(n_per_class=16)
    model = small_model(seed=6)
    cfg = TrainConfig(epochs=2, batch_size=16, lr=1e-3, val_fraction=0.0, seed=0)
    train_model(model, x, y, traces, cfg)
    path = tmp_path / "model.bin"
    save_checkpoint(path, model, norm_mean=[1.0, 2.0, 3.0], norm_std=[4.0, 5.0, 6.0],
                    channels=["a", "b", "c"], label_names=["x", "y", "z"],
                    extra_meta={"note": "test"})
    loaded, meta, extras = load_checkpoint(path)
    assert meta["model"] == model.config()
    assert meta["channels"] == ["a", "b", "c"]
    assert meta["label_names"] == ["x", "y", "z"]
    assert meta["note"] == "test"
    assert np.allclose(extras["norm_mean"], [1.0, 2.0, 3.0])
    for k, v in model.params().items():
        assert np.array_equal(v, loaded.params()[k])
    assert np.array_equal(predict(loaded, x), predict(model, x))


def test_checkpoint_rejects_wrong_shape(tmp_path):
    model = small_model(seed=0)
    path = tmp_path / "model.bin"
    save_checkpoint(path, model)
    other = LstmClassifier(3, 3, lstm_units=(9,), dense_units=(6,), seed=0)
    import tcpid.container as container
    arrays, meta = container.load_arrays(path)
    meta["model"] = other.config()
    container.save_arrays(path, arrays, meta)
    with pytest.raises(ValueError):
        load_checkpoint(path)
