import numpy as np
import pytest

from wii.errors import ConfigError, DataError, LabelError, ShapeError
from wii.kernels import adam_update
from wii.network import (
    ArchSpec,
    TrainConfig,
    baseline_arch,
    build_model,
    cross_entropy,
    cross_entropy_batch,
    grad_check,
    predict,
    proposed_arch,
    softmax,
    train,
)


# ---------------------------------------------------------------- shapes


def test_proposed_arch_shape_walk():
    arch = proposed_arch(128, 15)
    shapes, flat = arch.shape_walk()
    assert shapes == [(126, 2, 256), (124, 1, 256)]
    assert flat == 31744


def test_baseline_arch_shape_walk():
    arch = baseline_arch(128, 15)
    shapes, flat = arch.shape_walk()
    assert shapes == [(126, 2, 64), (124, 1, 1024)]
    assert flat == 126976


def test_band_variant_shapes():
    assert proposed_arch(26, 7).flatten_dim == 5632
    assert proposed_arch(52, 10).flatten_dim == 12288
    two_mhz = proposed_arch(26, 7, dropout_after_conv1=True)
    shapes, _ = two_mhz.shape_walk()
    assert shapes == [(24, 2, 256), (22, 1, 256)]


def test_parameter_counts():
    model = build_model(proposed_arch(128, 15), seed=0)
    # maps*(kh*kw*cin)+maps per conv; din*dout+dout per dense
    assert model.param_count == 1024 + 393472 + 32506880 + 15375 == 32916751
    base = build_model(baseline_arch(128, 15), seed=0)
    assert base.param_count == (
        64 * 3 + 64 + 1024 * (3 * 2 * 64) + 1024 + 126976 * 128 + 128 + 128 * 15 + 15
    )


def test_kernel_larger_than_input_rejected():
    with pytest.raises(ShapeError):
        build_model(
            ArchSpec((2, 2, 1), 3, convs=((4, 3, 1),), dense=(4,), dropout_p=0.0)
        )


def test_dropout_placement_in_layer_plan():
    plan = proposed_arch(128, 15).layer_plan()
    kinds = [step[0] for step in plan]
    assert kinds == [
        "conv", "relu",                 # no dropout after conv1
        "conv", "relu", "dropout",
        "flatten",
        "dense", "relu", "dropout",
        "dense", "softmax",             # no dropout after the final dense
    ]
    plan2 = proposed_arch(26, 7, dropout_after_conv1=True).layer_plan()
    assert [s[0] for s in plan2][:3] == ["conv", "relu", "dropout"]


# ------------------------------------------------------------ primitives


def test_softmax_uniform_and_stability():
    probs = softmax(np.zeros((1, 15)))
    assert np.allclose(probs, 1.0 / 15)
    big = softmax(np.array([[1e4, -1e4, 0.0]]))
    assert np.isfinite(big).all()
    assert big.sum() == pytest.approx(1.0, abs=1e-6)
    rng = np.random.default_rng(0)
    rows = softmax(rng.standard_normal((10, 15)))
    assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-6)


def test_relu_values():
    from wii.network import ReLU

    layer = ReLU()
    out = layer.forward(np.array([-3.0, 2.0, 0.0]), train=False, rng=None)
    assert np.array_equal(out, [0.0, 2.0, 0.0])


def test_cross_entropy_examples():
    perfect = np.zeros(15)
    perfect[4] = 1.0
    assert cross_entropy(perfect, 4) == pytest.approx(0.0, abs=1e-9)
    uniform = np.full(15, 1.0 / 15)
    assert cross_entropy(uniform, 7) == pytest.approx(np.log(15), rel=1e-9)
    with pytest.raises(LabelError):
        cross_entropy(uniform, 15)


def test_cross_entropy_gradient_at_uniform():
    probs = np.full((1, 15), 1.0 / 15)
    loss, dlogits = cross_entropy_batch(probs, np.array([3]))
    assert loss == pytest.approx(np.log(15), rel=1e-9)
    want = np.full(15, 1.0 / 15)
    want[3] -= 1.0
    assert np.allclose(dlogits[0], want, atol=1e-12)


def test_dropout_eval_identity_and_train_expectation():
    from wii.network import Dropout
    from wii.seeding import rng_for

    layer = Dropout(0.6)
    x = np.linspace(-2, 2, 32).astype(np.float32).reshape(4, 8)
    assert layer.forward(x, train=False, rng=None) is x
    rng = rng_for(123, "dropout-test")
    acc = np.zeros_like(x, dtype=np.float64)
    n = 10_000
    for _ in range(n):
        acc += layer.forward(x, train=True, rng=rng)
    mean = acc / n
    # inverted scaling keeps the expectation at x within ~2%
    assert np.abs(mean - x).max() <= 0.02 * np.abs(x).max() + 1e-3


def test_dropout_bad_probability():
    from wii.network import Dropout

    with pytest.raises(ConfigError):
        Dropout(1.0)


# ------------------------------------------------------------------ adam


def test_adam_zero_gradient_keeps_parameters():
    # fresh state: zero gradient moves nothing
    p = np.array([1.0, -2.0])
    m = np.zeros(2)
    v = np.zeros(2)
    adam_update(p, np.zeros(2), m, v, 1, 0.1)
    assert np.array_equal(p, [1.0, -2.0])
    assert np.array_equal(m, np.zeros(2))
    # nonzero moments decay by beta factors on a zero gradient
    m = np.array([0.5, 0.5])
    v = np.array([0.25, 0.25])
    adam_update(p, np.zeros(2), m, v, 2, 0.0)  # lr 0 isolates the decay
    assert np.allclose(m, [0.45, 0.45])
    assert np.allclose(v, [0.24975, 0.24975])


def test_adam_first_step_magnitude():
    for g0 in (0.7, -3.0, 1e-4):
        p = np.array([0.0])
        m = np.zeros(1)
        v = np.zeros(1)
        adam_update(p, np.array([g0]), m, v, 1, 0.01)
        want = 0.01 * abs(g0) / (abs(g0) + 1e-8)
        assert abs(p[0]) == pytest.approx(want, rel=1e-9)
        assert np.sign(p[0]) == -np.sign(g0)


def test_adam_trace_matches_scalar_oracle():
    # independent scalar Adam on f(w) = w^2 from w=1, lr=0.1
    w = np.array([1.0])
    m = np.zeros(1)
    v = np.zeros(1)
    w_ref, m_ref, v_ref = 1.0, 0.0, 0.0
    for t in range(1, 101):
        adam_update(w, np.array([2 * w[0]]), m, v, t, 0.1)
        g = 2 * w_ref
        m_ref = 0.9 * m_ref + 0.1 * g
        v_ref = 0.999 * v_ref + 0.001 * g * g
        mh = m_ref / (1 - 0.9**t)
        vh = v_ref / (1 - 0.999**t)
        w_ref -= 0.1 * mh / (np.sqrt(vh) + 1e-8)
        assert abs(w[0] - w_ref) < 1e-10


# ------------------------------------------------------------ grad check


def tiny_cnn():
    return ArchSpec(
        input_shape=(8, 2, 1),
        num_classes=3,
        convs=((2, 3, 1), (2, 3, 2)),
        dense=(4,),
        dropout_p=0.0,
    )


def test_grad_check_tiny_cnn():
    model = build_model(tiny_cnn(), seed=11, wide=True)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((3, 8, 2, 1))
    y = np.array([0, 2, 1])
    assert grad_check(model, x, y, epsilon=1e-5) < 1e-4


def test_grad_check_dense_only():
    arch = ArchSpec((6, 2, 1), 3, convs=(), dense=(5,), dropout_p=0.0)
    model = build_model(arch, seed=12, wide=True)
    rng = np.random.default_rng(8)
    x = rng.standard_normal((4, 6, 2, 1))
    y = np.array([1, 0, 2, 2])
    assert grad_check(model, x, y, epsilon=1e-6) < 1e-6


def test_grad_check_requires_wide_and_no_dropout():
    model = build_model(tiny_cnn(), seed=1)
    with pytest.raises(ConfigError):
        grad_check(model, np.zeros((1, 8, 2, 1), np.float32), np.array([0]))
    lossy = ArchSpec((8, 2, 1), 3, ((2, 3, 1),), (4,), dropout_p=0.5)
    wide = build_model(lossy, seed=1, wide=True)
    with pytest.raises(ConfigError):
        grad_check(wide, np.zeros((1, 8, 2, 1)), np.array([0]))


# -------------------------------------------------------------- training


def blobs(n_per_class=150, seed=9):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_per_class, 4, 2, 1)) * 0.4 + 1.5
    b = rng.standard_normal((n_per_class, 4, 2, 1)) * 0.4 - 1.5
    x = np.concatenate([a, b]).astype(np.float32)
    y = np.concatenate([np.zeros(n_per_class, int), np.ones(n_per_class, int)])
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def toy_arch():
    return ArchSpec((4, 2, 1), 2, convs=(), dense=(8,), dropout_p=0.0)


def test_training_reaches_separable_accuracy():
    x, y = blobs()
    model = build_model(toy_arch(), seed=2)
    cfg = TrainConfig(lr=0.01, batch_size=32, dropout_p=0.0, max_epochs=50, seed=3)
    report = train(model, x[:200], y[:200], x[200:], y[200:], cfg)
    probs = predict(model, x[:200])
    assert (probs.argmax(axis=1) == y[:200]).mean() == 1.0
    assert report.epochs_run <= 50
    # held-out blob points classify correctly too
    held = predict(model, x[200:])
    assert (held.argmax(axis=1) == y[200:]).mean() > 0.95


def test_loss_decreases_over_epochs():
    x, y = blobs(seed=10)
    model = build_model(toy_arch(), seed=4)
    cfg = TrainConfig(lr=0.005, batch_size=32, dropout_p=0.0, max_epochs=10,
                      patience=10, seed=5)
    report = train(model, x[:200], y[:200], x[200:], y[200:], cfg)
    assert report.history[-1][0] < report.history[0][0]


def test_training_is_deterministic_given_seed():
    x, y = blobs(seed=11)
    cfg = TrainConfig(lr=0.01, batch_size=32, dropout_p=0.3, max_epochs=5,
                      patience=5, seed=6)
    r1 = train(build_model(toy_arch(), seed=7), x[:200], y[:200], x[200:], y[200:], cfg)
    r2 = train(build_model(toy_arch(), seed=7), x[:200], y[:200], x[200:], y[200:], cfg)
    assert r1.history == r2.history


def test_distinct_seeds_give_distinct_histories():
    x, y = blobs(seed=12)
    cfg_a = TrainConfig(lr=0.01, batch_size=32, dropout_p=0.3, max_epochs=3,
                        patience=3, seed=8)
    cfg_b = TrainConfig(lr=0.01, batch_size=32, dropout_p=0.3, max_epochs=3,
                        patience=3, seed=9)
    r1 = train(build_model(toy_arch(), seed=1), x[:200], y[:200], x[200:], y[200:], cfg_a)
    r2 = train(build_model(toy_arch(), seed=2), x[:200], y[:200], x[200:], y[200:], cfg_b)
    assert r1.history != r2.history


def test_early_stopping_restores_best_weights():
    x, y = blobs(seed=13)
    model = build_model(toy_arch(), seed=3)
    # aggressive lr so validation loss goes up after converging
    cfg = TrainConfig(lr=0.05, batch_size=16, dropout_p=0.0, max_epochs=40,
                      patience=2, seed=10)
    report = train(model, x[:200], y[:200], x[200:], y[200:], cfg)
    from wii.network import evaluate_loss

    val_loss, _ = evaluate_loss(model, x[200:], y[200:])
    best = min(h[1] for h in report.history)
    assert val_loss == pytest.approx(best, rel=1e-5)
    assert report.best_epoch <= report.epochs_run


def test_partial_final_batch_is_used():
    x, y = blobs(seed=14)
    model = build_model(toy_arch(), seed=5)
    cfg = TrainConfig(lr=0.01, batch_size=150, dropout_p=0.0, max_epochs=1,
                      patience=1, seed=11)
    # 200 train records -> one full batch of 150 plus a partial of 50;
    # the optimizer must see both (2 steps)
    report = train(model, x[:200], y[:200], x[200:], y[200:], cfg)
    assert report.epochs_run == 1


def test_empty_sets_rejected():
    x, y = blobs(seed=15)
    model = build_model(toy_arch(), seed=6)
    cfg = TrainConfig(max_epochs=1)
    with pytest.raises(DataError):
        train(model, x[:0], y[:0], x[:10], y[:10], cfg)


def test_predict_rows_sum_to_one_and_shape_errors():
    model = build_model(toy_arch(), seed=8)
    rng = np.random.default_rng(16)
    probs = predict(model, rng.standard_normal((6, 4, 2, 1)).astype(np.float32))
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    with pytest.raises(ShapeError):
        predict(model, rng.standard_normal((2, 5, 2, 1)).astype(np.float32))
