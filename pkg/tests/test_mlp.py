import numpy as np
import pytest

from backend.model_file import MODEL_MAGIC, load_model, model_from_bytes, model_to_bytes, save_model
from codec.mlp import (
    LAYER_SIZES,
    MlpNetwork,
    TrainingSample,
    forward,
    glorot_network,
    gradient_check,
    mean_squared_error,
    train,
)
from dsp.mfcc import FeatureVector
from exceptions import FormatError, PreconditionError, UnsupportedVersionError


def _features(rng):
    return FeatureVector(rng.standard_normal(16), float(rng.uniform(0, 1)), float(rng.uniform(20, 160)))


def _samples(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        f = _features(rng)
        x = f.as_array()
        targets = np.array([2 * x[0] + 0.05 * (x[17] - 90), -x[1] + 3 * (x[16] - 0.5)])
        out.append(TrainingSample(f, targets))
    return out


def test_constant_network_ignores_features():
    zeros = [np.zeros((o, i)) for i, o in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:])]
    biases = [np.zeros(10), np.zeros(10), np.array([1.0, 2.0])]
    net = MlpNetwork(tuple(zeros), tuple(biases), np.zeros(18), np.ones(18))
    rng = np.random.default_rng(0)
    np.testing.assert_allclose(forward(net, _features(rng)), [1.0, 2.0])
    batch = forward(net, np.stack([_features(rng).as_array() for _ in range(4)]))
    assert batch.shape == (4, 2)


def test_forward_rejects_non_finite_features():
    net = glorot_network(np.random.default_rng(0))
    x = np.zeros(18)
    x[3] = np.nan
    with pytest.raises(PreconditionError):
        forward(net, x)


def test_network_validates_shapes():
    net = glorot_network(np.random.default_rng(0))
    with pytest.raises(PreconditionError):
        MlpNetwork(net.weights[:2], net.biases[:2], net.feature_means, net.feature_stds)
    with pytest.raises(PreconditionError):
        MlpNetwork(net.weights, net.biases, net.feature_means, np.zeros(18))


def test_gradient_check_over_random_networks():
    rng = np.random.default_rng(42)
    for _ in range(20):
        means = np.concatenate([rng.standard_normal(16), [0.5, 90.0]])
        stds = np.concatenate([rng.uniform(0.5, 2.0, 16), [0.3, 40.0]])
        net = glorot_network(rng, means, stds)
        params = [p + 0.1 * rng.standard_normal(p.shape) for p in net.parameters()]
        net = net.with_parameters(params)
        sample = TrainingSample(_features(rng), rng.standard_normal(2))
        assert gradient_check(net, sample) < 1e-4


def test_gradient_check_at_exact_fit():
    rng = np.random.default_rng(1)
    net = glorot_network(rng)
    f = _features(rng)
    assert gradient_check(net, TrainingSample(f, forward(net, f))) == 0.0


def test_single_sample_is_memorized():
    sample = _samples(1)
    sample = [TrainingSample(sample[0].features, sample[0].targets - 25.0)]
    result = train(sample, learning_rate=1e-2, epochs=2000, batch_size=1)
    assert result.mse < 1e-4
    assert mean_squared_error(result.network, sample) == pytest.approx(result.mse)


def test_training_is_deterministic_per_seed():
    samples = _samples(64)
    a = train(samples, epochs=5, seed=3)
    b = train(samples, epochs=5, seed=3)
    c = train(samples, epochs=5, seed=4)
    for pa, pb in zip(a.network.parameters(), b.network.parameters()):
        np.testing.assert_array_equal(pa, pb)
    assert a.history == b.history
    assert a.history != c.history


def test_full_batch_descent_without_momentum_is_monotone():
    samples = _samples(50)
    result = train(samples, learning_rate=5e-4, epochs=60, batch_size=50, momentum=0.0)
    assert len(result.history) == 60
    assert np.all(np.diff(result.history) <= 1e-12)
    assert result.history[-1] < result.history[0]


def test_training_beats_the_mean_predictor():
    samples = _samples(200, seed=9)
    result = train(samples, learning_rate=1e-2, epochs=150)
    targets = np.stack([s.targets for s in samples])
    baseline = float(np.mean((targets - targets.mean(axis=0)) ** 2))
    assert result.mse < 0.5 * baseline


def test_training_rejects_bad_input():
    with pytest.raises(PreconditionError):
        train([])
    with pytest.raises(PreconditionError):
        train(_samples(2), momentum=1.0)


def test_model_file_round_trip(tmp_path):
    result = train(_samples(32), epochs=3, mfcc_tag="mfcc-c1")
    save_model(result.network, tmp_path / "m.bwxmlp")
    back = load_model(tmp_path / "m.bwxmlp")
    assert back.mfcc_tag == "mfcc-c1"
    x = np.stack([s.features.as_array() for s in _samples(5, seed=1)])
    np.testing.assert_array_equal(forward(back, x), forward(result.network, x))


def test_model_file_errors():
    data = model_to_bytes(glorot_network(np.random.default_rng(0)))
    with pytest.raises(FormatError):
        model_from_bytes(data[:-8])
    with pytest.raises(FormatError):
        model_from_bytes(b"NOTMODEL" + data[len(MODEL_MAGIC):])
    with pytest.raises(FormatError):
        model_from_bytes(data + b"\0")
    bumped = data[: len(MODEL_MAGIC)] + (99).to_bytes(4, "little") + data[len(MODEL_MAGIC) + 4 :]
    with pytest.raises(UnsupportedVersionError):
        model_from_bytes(bumped)
