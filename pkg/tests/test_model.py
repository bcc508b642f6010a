import numpy as np
import pytest

from timepred.cpd_core import best_split_gain
from timepred.errors import ConfigError, FormatError, ShapeMismatchError, TrainingDivergedError
from timepred.model import (
    TimePredictor,
    TrainConfig,
    fit,
    linear_head_fit,
    load_model,
    loss_and_gradients,
    normalized_targets,
    predict,
    save_model,
)


def make_step_series(T=1000, d=5, delta=5.0, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, d))
    X[T // 2 :, 2] += delta
    return X


# --------------------------------------------------------------- targets

def test_normalized_targets_small():
    assert np.allclose(normalized_targets(4), [0.25, 0.5, 0.75, 1.0])
    assert np.allclose(normalized_targets(1), [1.0])


def test_normalized_targets_mean_near_half():
    # mean of (t+1)/T over t=0..T-1 is (T+1)/(2T)
    targets = normalized_targets(10_000)
    assert targets.mean() == pytest.approx(0.50005, abs=1e-12)
    assert targets.min() > 0.0 and targets.max() == 1.0


def test_normalized_targets_rejects_zero():
    with pytest.raises(ConfigError):
        normalized_targets(0)


# --------------------------------------------------------------- forward

def test_forward_hand_computed_single_unit():
    model = TimePredictor(
        layer_sizes=(1, 1, 1),
        weights=[np.array([[2.0]]), np.array([[3.0]])],
        biases=[np.array([-1.0]), np.array([0.5])],
        input_mean=np.zeros(1),
        input_std=np.ones(1),
    )
    # rectifier(2*1 - 1) = 1 -> 3*1 + 0.5
    assert predict(model, np.array([[1.0]]))[0] == pytest.approx(3.5, abs=1e-15)


def test_zero_weight_network_predicts_bias():
    model = TimePredictor(
        layer_sizes=(3, 1),
        weights=[np.zeros((3, 1))],
        biases=[np.array([0.42])],
        input_mean=np.zeros(3),
        input_std=np.ones(3),
    )
    y = predict(model, np.random.default_rng(0).standard_normal((7, 3)))
    assert np.allclose(y, 0.42)


def test_predict_matches_manual_forward_after_fit():
    X = make_step_series(T=300, d=3)
    model = fit(X, TrainConfig(epochs=5, batch_size=64, seed=1))
    got = predict(model, X)
    a = (X - model.input_mean) / model.input_std
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        a = np.maximum(z, 0.0) if l < len(model.weights) - 1 else z
    assert np.array_equal(got, a[:, 0])


def test_predict_dimension_mismatch_raises():
    X = make_step_series(T=200, d=4)
    model = fit(X, TrainConfig(epochs=2, batch_size=50, seed=0))
    with pytest.raises(ShapeMismatchError):
        predict(model, np.zeros((10, 3)))


# --------------------------------------------------------------- training

def test_fit_is_deterministic_given_seed():
    X = make_step_series(T=400, d=4, seed=3)
    cfg = TrainConfig(epochs=8, batch_size=128, seed=11)
    a = fit(X, cfg)
    b = fit(X, cfg)
    assert all(np.array_equal(w1, w2) for w1, w2 in zip(a.weights, b.weights))
    assert all(np.array_equal(b1, b2) for b1, b2 in zip(a.biases, b.biases))
    assert np.array_equal(predict(a, X), predict(b, X))
    c = fit(X, TrainConfig(epochs=8, batch_size=128, seed=12))
    assert not np.array_equal(predict(a, X), predict(c, X))


def test_training_loss_decreases():
    X = make_step_series()
    model = fit(X, TrainConfig(seed=0, epochs=20, batch_size=256))
    assert model.loss_curve[-1] <= model.loss_curve[0]


def test_step_series_creates_mean_shift_in_predictions():
    X = make_step_series(T=1000, d=5)
    model = fit(X, TrainConfig(seed=0))
    y = predict(model, X)
    gap = y[500:].mean() - y[:500].mean()
    assert gap >= 0.2


def test_pure_noise_with_strong_regularization_predicts_the_mean():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((1000, 10))
    model = fit(X, TrainConfig(l1_weight=1e-2, l2_weight=1e-1, seed=0))
    y = predict(model, X)
    assert abs(y.mean() - 0.5) < 0.02
    assert y.std() < 0.1


def test_increasing_l1_never_increases_weight_mass():
    X = make_step_series(T=400, d=4, seed=7)
    masses = []
    for l1 in (1e-4, 1e-2, 1e-1):
        model = fit(X, TrainConfig(l1_weight=l1, epochs=40, batch_size=128, seed=2))
        masses.append(sum(float(np.abs(W).sum()) for W in model.weights))
    assert masses[1] <= masses[0] + 1e-6
    assert masses[2] <= masses[1] + 1e-6


def test_shuffled_series_has_weaker_change_signal():
    X = make_step_series(T=800, d=5, delta=3.0, seed=9)
    rng = np.random.default_rng(13)
    shuffled = X[rng.permutation(X.shape[0])]
    cfg = TrainConfig(seed=4)
    gap_original = best_split_gain(predict(fit(X, cfg), X))
    gap_shuffled = best_split_gain(predict(fit(shuffled, cfg), shuffled))
    assert gap_shuffled < gap_original


def test_fit_validates_config_and_architecture():
    X = make_step_series(T=100, d=3)
    with pytest.raises(ConfigError):
        fit(X, TrainConfig(batch_size=101))
    with pytest.raises(ConfigError):
        fit(X, TrainConfig(batch_size=32), hidden_sizes=(0, 4))
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)


def test_fit_divergence_is_reported_with_epoch():
    X = make_step_series(T=200, d=3)
    with pytest.raises(TrainingDivergedError) as err:
        fit(X, TrainConfig(learning_rate=1e9, epochs=5, batch_size=64, seed=0))
    assert "epoch" in str(err.value)


# --------------------------------------------------------------- gradients

def test_gradients_match_central_finite_differences():
    rng = np.random.default_rng(17)
    d, h = 3, 4
    X = rng.standard_normal((12, d))
    targets = rng.uniform(0.1, 1.0, size=12)
    weights = [rng.uniform(0.2, 0.8, size=(d, h)) * np.sign(rng.standard_normal((d, h))),
               rng.uniform(0.2, 0.8, size=(h, 1)) * np.sign(rng.standard_normal((h, 1)))]
    biases = [rng.standard_normal(h) * 0.3, rng.standard_normal(1) * 0.3]
    l1, l2 = 1e-3, 1e-2
    _, dWs, dbs = loss_and_gradients(weights, biases, X, targets, l1, l2)

    step = 1e-5

    def loss_at(params_w, params_b):
        value, _, _ = loss_and_gradients(params_w, params_b, X, targets, l1, l2)
        return value

    worst = 0.0
    for l in range(2):
        for index in np.ndindex(weights[l].shape):
            w_plus = [w.copy() for w in weights]
            w_minus = [w.copy() for w in weights]
            w_plus[l][index] += step
            w_minus[l][index] -= step
            fd = (loss_at(w_plus, biases) - loss_at(w_minus, biases)) / (2 * step)
            rel = abs(dWs[l][index] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
        for index in np.ndindex(biases[l].shape):
            b_plus = [b.copy() for b in biases]
            b_minus = [b.copy() for b in biases]
            b_plus[l][index] += step
            b_minus[l][index] -= step
            fd = (loss_at(weights, b_plus) - loss_at(weights, b_minus)) / (2 * step)
            rel = abs(dbs[l][index] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
    assert worst < 1e-4


# --------------------------------------------------------------- linear head

def test_linear_head_fits_identity_feature():
    T = 512
    x = normalized_targets(T).reshape(-1, 1)
    cfg = TrainConfig(l1_weight=0.0, l2_weight=0.0, learning_rate=5e-2,
                      epochs=200, batch_size=128, seed=0)
    model = linear_head_fit(x, cfg)
    y = predict(model, x)
    assert float(np.mean((y - normalized_targets(T)) ** 2)) < 1e-6


def test_linear_head_huge_l1_collapses_to_mean():
    # penalty-dominated limit: the subgradient step bounces weights inside a
    # band of width ~ lr * l1 around zero, so shrink the step accordingly
    X = make_step_series(T=400, d=6, seed=21)
    cfg = TrainConfig(l1_weight=1.0, l2_weight=0.0, learning_rate=1e-2,
                      momentum=0.0, epochs=60, batch_size=128, seed=0)
    model = linear_head_fit(X, cfg)
    assert max(float(np.abs(W).max()) for W in model.weights) < 0.05
    y = predict(model, X)
    assert abs(y.mean() - 0.5) < 0.02
    assert y.std() < 0.1


def test_linear_head_detects_step_features_across_seeds():
    from timepred.cpd_core import L2Cost, SegmentationConfig, segment_dynp

    hits = 0
    for seed in range(20):
        X = make_step_series(T=600, d=5, delta=2.0, seed=100 + seed)
        cfg = TrainConfig(l1_weight=1e-3, l2_weight=1e-3, epochs=30,
                          batch_size=128, seed=seed)
        y = predict(linear_head_fit(X, cfg), X)
        seg = segment_dynp(y, L2Cost(), SegmentationConfig(1))
        if abs(seg.breakpoints[0] - 300) <= 15:
            hits += 1
    assert hits >= 18  # >= 90% of replications


# --------------------------------------------------------------- persistence

def test_save_load_round_trip_is_bitwise(tmp_path):
    X = make_step_series(T=300, d=4, seed=2)
    model = fit(X, TrainConfig(epochs=4, batch_size=64, seed=5))
    path = tmp_path / "model.tpm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.layer_sizes == model.layer_sizes
    assert np.array_equal(loaded.input_mean, model.input_mean)
    assert np.array_equal(loaded.input_std, model.input_std)
    for a, b in zip(model.weights, loaded.weights):
        assert np.array_equal(a, b)
    for a, b in zip(model.biases, loaded.biases):
        assert np.array_equal(a, b)
    assert np.array_equal(predict(model, X), predict(loaded, X))


def test_load_model_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.tpm"
    bad.write_bytes(b"NOPE1234")
    with pytest.raises(FormatError):
        load_model(bad)
    X = make_step_series(T=120, d=3)
    model = fit(X, TrainConfig(epochs=2, batch_size=32, seed=0))
    good = tmp_path / "good.tpm"
    save_model(model, good)
    truncated = tmp_path / "trunc.tpm"
    truncated.write_bytes(good.read_bytes()[:-16])
    with pytest.raises(FormatError):
        load_model(truncated)
