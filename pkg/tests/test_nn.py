"""Engine tests: units, losses, layers, optimizers, builders, training."""

import numpy as np
import numpy.testing as npt
import pytest

from panorad.errors import ConfigError, DataError
from panorad.image_io import AugmentConfig
from panorad.nn import (
    AdaDelta,
    Conv2d,
    Dense,
    Flatten,
    InitSpec,
    MaxPool2d,
    Network,
    ReLU,
    RmsProp,
    Sigmoid,
    Softmax,
    TrainHistory,
    build_4layer,
    build_16layer,
    cross_entropy,
    cross_entropy_grad,
    evaluate_accuracy,
    gradient_check,
    hebbian_weights,
    perceptron_output,
    shape_walk,
    sigmoid,
    train,
    vgg16_plan,
)


class TestUnits:
    def test_sigmoid_values(self):
        assert sigmoid(0.0) == pytest.approx(0.5)
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_sigmoid_symmetry(self):
        for t in (-30.0, -3.2, -0.1, 0.7, 4.0, 30.0):
            assert sigmoid(t) + sigmoid(-t) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < sigmoid(-30.0) < sigmoid(30.0) < 1.0
        assert np.isfinite(sigmoid(-500.0)) and np.isfinite(sigmoid(500.0))

    def test_perceptron_basic(self):
        assert perceptron_output([1.0, 1.0], [0.5, 0.5], 0.9) == 1
        for x in ([0.0, 0.0], [1.0, -2.0], [5.0, 5.0]):
            assert perceptron_output(x, [0.0, 0.0], 0.0) == 0

    def test_perceptron_dim_mismatch(self):
        with pytest.raises(DataError):
            perceptron_output([1.0], [1.0, 2.0], 0.0)

    def test_no_perceptron_solves_xor(self):
        vals = np.round(np.arange(-20, 21)) / 10.0
        w1, w2, th = np.meshgrid(vals, vals, vals, indexing="ij")
        feasible = np.ones(w1.shape, dtype=bool)
        for (x1, x2), want in (((0, 0), 0), ((0, 1), 1), ((1, 0), 1), ((1, 1), 0)):
            out = (w1 * x1 + w2 * x2) > th
            feasible &= out == bool(want)
        assert not feasible.any()
        # The vectorized sweep agrees with the scalar unit.
        assert perceptron_output([0.0, 1.0], [1.2, -0.7], 0.3) == int(
            (1.2 * 0.0 + -0.7 * 1.0) > 0.3
        )

    def test_hebbian_all_ones(self):
        npt.assert_allclose(hebbian_weights(np.ones((1, 4))), np.ones((4, 4)))

    def test_hebbian_matches_double_loop(self):
        rng = np.random.default_rng(80)
        pats = rng.choice([-1.0, 1.0], size=(3, 4))
        got = hebbian_weights(pats)
        ref = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                for k in range(3):
                    ref[i, j] += pats[k, i] * pats[k, j]
        ref /= 3
        npt.assert_allclose(got, ref, atol=1e-15)
        npt.assert_allclose(got, got.T)


class TestLosses:
    def test_binary_known_values(self):
        assert cross_entropy([1.0], [0.5], "binary") == pytest.approx(np.log(2), abs=1e-12)
        assert cross_entropy([1.0], [1.0], "binary") <= 1e-6
        assert cross_entropy([0.0], [0.0], "binary") <= 1e-6

    def test_binary_matches_scalar_oracle(self):
        rng = np.random.default_rng(81)
        t = rng.random((4, 3))
        o = rng.uniform(0.01, 0.99, (4, 3))
        total = 0.0
        for ti, oi in zip(t.ravel(), o.ravel()):
            total += -(ti * np.log(oi) + (1 - ti) * np.log(1 - oi))
        assert cross_entropy(t, o, "binary") == pytest.approx(total / 12, abs=1e-6)

    def test_categorical_matches_scalar_oracle(self):
        rng = np.random.default_rng(82)
        o = rng.uniform(0.05, 0.9, (5, 4))
        o /= o.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 4, 5)
        t = np.eye(4)[labels]
        ref = np.mean([-np.log(o[i, labels[i]]) for i in range(5)])
        assert cross_entropy(t, o, "categorical") == pytest.approx(ref, abs=1e-9)

    def test_non_negative(self):
        rng = np.random.default_rng(83)
        for _ in range(20):
            t = rng.random((3, 2))
            o = rng.random((3, 2))
            assert cross_entropy(t, o, "binary") >= 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(84)
        t = rng.random((3, 4))
        o = rng.uniform(0.1, 0.9, (3, 4))
        for kind in ("binary", "categorical"):
            g = cross_entropy_grad(t, o, kind)
            eps = 1e-6
            for i in range(3):
                for j in range(4):
                    op = o.copy()
                    om = o.copy()
                    op[i, j] += eps
                    om[i, j] -= eps
                    num = (cross_entropy(t, op, kind) - cross_entropy(t, om, kind)) / (2 * eps)
                    assert g[i, j] == pytest.approx(num, rel=1e-5, abs=1e-9)

    def test_clamped_region_zero_gradient(self):
        g = cross_entropy_grad(np.array([1.0, 0.0]), np.array([1e-9, 1.0 - 1e-9]), "binary")
        npt.assert_allclose(g, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            cross_entropy(np.ones(3), np.ones(4), "binary")


def loss_and_grads(net, x, t, kind):
    out, caches = net.forward(x)
    return out, net.backward(caches, cross_entropy_grad(t, out, kind))


class TestLayerForward:
    def test_identity_conv(self):
        net = Network([Conv2d(1, 1, 1)], (1, 5, 5), dtype=np.float64)
        net.params[0]["w"][:] = 1.0
        net.params[0]["b"][:] = 0.0
        rng = np.random.default_rng(85)
        x = rng.random((2, 1, 5, 5))
        npt.assert_allclose(net.predict(x), x, atol=1e-12)

    def test_hand_convolution(self):
        net = Network([Conv2d(1, 3, 3, pad="valid")], (1, 4, 4), dtype=np.float64)
        kernel = np.array([[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]])
        net.params[0]["w"][0, 0] = kernel
        net.params[0]["b"][:] = 0.5
        x = (np.arange(16, dtype=np.float64) / 15.0).reshape(1, 1, 4, 4)
        ref = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                ref[i, j] = (kernel * x[0, 0, i:i + 3, j:j + 3]).sum() + 0.5
        npt.assert_allclose(net.predict(x)[0, 0], ref, atol=1e-12)

    def test_same_padding_keeps_size(self):
        shapes = shape_walk([Conv2d(4, 3, 3, pad="same")], (2, 7, 9))
        assert shapes == [(4, 7, 9)]
        shapes = shape_walk([Conv2d(4, 3, 3, pad="valid")], (2, 7, 9))
        assert shapes == [(4, 5, 7)]

    def test_strided_conv_shape(self):
        assert shape_walk([Conv2d(4, 3, 3, stride=2, pad="valid")], (1, 9, 9)) == [(4, 4, 4)]

    def test_softmax_rows_sum_to_one(self):
        net = Network([Dense(6), Softmax()], (4,), dtype=np.float32)
        rng = np.random.default_rng(86)
        out = net.predict(rng.normal(size=(8, 4)).astype(np.float32))
        npt.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)
        assert (out > 0).all()

    def test_sigmoid_open_interval(self):
        net = Network([Dense(3), Sigmoid()], (2,), dtype=np.float32)
        rng = np.random.default_rng(87)
        out = net.predict(rng.normal(size=(5, 2)).astype(np.float32) * 50)
        assert (out > 0).all() and (out < 1).all()

    def test_maxpool_forward(self):
        net = Network([MaxPool2d(2)], (1, 4, 4), dtype=np.float64)
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        npt.assert_allclose(net.predict(x)[0, 0], [[5, 7], [13, 15]])

    def test_batch_consistency(self):
        net = build_4layer((1, 8, 8), 4, dtype=np.float32)
        rng = np.random.default_rng(88)
        x = rng.random((5, 1, 8, 8), dtype=np.float32)
        full = net.predict(x)
        single = np.concatenate([net.predict(x[i:i + 1]) for i in range(5)])
        npt.assert_allclose(full, single, atol=1e-5)

    def test_bad_batch_shape(self):
        net = build_4layer((1, 8, 8), 4)
        with pytest.raises(ConfigError):
            net.predict(np.zeros((2, 1, 9, 9), dtype=np.float32))


class TestLayerBackward:
    def test_zero_loss_gradient_gives_zero_param_gradients(self):
        net = build_4layer((1, 8, 8), 3, dtype=np.float64)
        rng = np.random.default_rng(89)
        x = rng.random((2, 1, 8, 8))
        out, caches = net.forward(x)
        grads = net.backward(caches, np.zeros_like(out))
        for layer in grads:
            for g in layer.values():
                npt.assert_allclose(g, 0.0)

    def test_relu_blocks_negative_preactivation(self):
        relu = ReLU()
        x = np.array([[-1.0, 0.0, 2.0]])
        y, cache = relu.forward(x, {})
        gx, _ = relu.backward(np.ones_like(x), cache, {})
        npt.assert_allclose(y, [[0.0, 0.0, 2.0]])
        npt.assert_allclose(gx, [[0.0, 0.0, 1.0]])

    def test_maxpool_tie_routes_to_first_index(self):
        pool = MaxPool2d(2)
        x = np.zeros((1, 1, 2, 2))
        y, cache = pool.forward(x, {})
        gx, _ = pool.backward(np.full((1, 1, 1, 1), 3.0), cache, {})
        npt.assert_allclose(gx[0, 0], [[3.0, 0.0], [0.0, 0.0]])

    def test_maxpool_gradient_partitions(self):
        pool = MaxPool2d(2)
        rng = np.random.default_rng(90)
        x = rng.random((3, 2, 6, 8))
        y, cache = pool.forward(x, {})
        gy = rng.random(y.shape)
        gx, _ = pool.backward(gy, cache, {})
        # Exactly one nonzero per block, and block sums reproduce gy.
        blocks = gx.reshape(3, 2, 3, 2, 4, 2)
        npt.assert_allclose(blocks.sum(axis=(3, 5)), gy, atol=1e-12)
        assert ((blocks != 0).sum(axis=(3, 5)) <= 1).all()


class TestGradientChecks:
    def check(self, layers, in_shape, n_out, kind="categorical", batch=3, seed=0):
        net = Network(layers, in_shape, init=InitSpec(seed=seed), dtype=np.float64)
        rng = np.random.default_rng(seed + 1000)
        x = rng.random((batch,) + in_shape)
        if kind == "categorical":
            t = np.eye(n_out)[rng.integers(0, n_out, batch)]
        else:
            t = rng.integers(0, 2, (batch, n_out)).astype(float)
        err = gradient_check(net, x, t, kind)
        assert err < 1e-4, f"gradient error {err}"

    def test_conv_same(self):
        self.check(
            [Conv2d(3, 3, 3), ReLU(), Conv2d(2, 3, 3), Flatten(), Dense(4), Softmax()],
            (2, 6, 5), 4,
        )

    def test_conv_valid_strided(self):
        self.check(
            [Conv2d(3, 3, 3, pad="valid"), ReLU(), Conv2d(2, 3, 3, stride=2, pad="valid"),
             Flatten(), Dense(3), Softmax()],
            (1, 9, 9), 3,
        )

    def test_maxpool_path(self):
        self.check(
            [Conv2d(2, 3, 3), MaxPool2d(2), Flatten(), Dense(3), Softmax()],
            (1, 6, 6), 3,
        )

    def test_dense_relu_softmax(self):
        self.check([Dense(8), ReLU(), Dense(5), Softmax()], (6,), 5)

    def test_sigmoid_binary_loss(self):
        self.check([Dense(7), ReLU(), Dense(4), Sigmoid()], (5,), 4, kind="binary")

    def test_sigmoid_midstack(self):
        self.check([Dense(6), Sigmoid(), Dense(3), Softmax()], (4,), 3)

    def test_full_4layer_network(self):
        net = build_4layer((1, 8, 8), 3, init=InitSpec(seed=5), dtype=np.float64)
        rng = np.random.default_rng(91)
        x = rng.random((2, 1, 8, 8))
        t = np.eye(3)[rng.integers(0, 3, 2)]
        err = gradient_check(net, x, t, "categorical", samples_per_tensor=30)
        assert err < 1e-4

    def test_full_4layer_sigmoid_binary(self):
        net = build_4layer((1, 8, 8), 1, head="sigmoid", init=InitSpec(seed=6), dtype=np.float64)
        rng = np.random.default_rng(92)
        x = rng.random((2, 1, 8, 8))
        t = rng.integers(0, 2, (2, 1)).astype(float)
        err = gradient_check(net, x, t, "binary", samples_per_tensor=30)
        assert err < 1e-4


class TestOptimizers:
    def params_of(self, v):
        return [{"w": np.array([v], dtype=np.float64)}]

    def test_zero_gradient_no_change(self):
        for opt in (AdaDelta(), RmsProp()):
            params = self.params_of(0.7)
            opt.step(params, [{"w": np.zeros(1)}])
            assert params[0]["w"][0] == pytest.approx(0.7, abs=1e-12)

    def test_rmsprop_first_step_formula(self):
        lr, rho, eps, g = 0.001, 0.9, 1e-8, 0.4
        opt = RmsProp(lr=lr, rho=rho, eps=eps)
        params = self.params_of(1.0)
        opt.step(params, [{"w": np.array([g])}])
        want = 1.0 - lr * g / np.sqrt((1 - rho) * g * g + eps)
        assert params[0]["w"][0] == pytest.approx(want, abs=1e-12)

    def test_adadelta_first_step_formula(self):
        rho, eps, g = 0.95, 1e-6, -0.8
        opt = AdaDelta(rho=rho, eps=eps)
        params = self.params_of(0.2)
        opt.step(params, [{"w": np.array([g])}])
        want = 0.2 - np.sqrt(eps) / np.sqrt((1 - rho) * g * g + eps) * g
        assert params[0]["w"][0] == pytest.approx(want, abs=1e-12)

    def test_rmsprop_descends_quadratic(self):
        opt = RmsProp()
        params = self.params_of(1.0)
        seen = [1.0]
        for _ in range(20):
            w = params[0]["w"][0]
            opt.step(params, [{"w": np.array([2.0 * w])}])
            seen.append(abs(params[0]["w"][0]))
        assert all(b < a for a, b in zip(seen, seen[1:]))


class TestBuilders:
    def test_4layer_output_shape(self):
        net = build_4layer((1, 128, 128), 28)
        assert net.output_shapes()[-1] == (28,)
        small = build_4layer((1, 16, 16), 5)
        rng = np.random.default_rng(93)
        out = small.predict(rng.random((3, 1, 16, 16), dtype=np.float32))
        assert out.shape == (3, 5)

    def test_4layer_param_count(self):
        net = build_4layer((1, 16, 16), 5)
        conv1 = 32 * 1 * 9 + 32
        conv2 = 32 * 32 * 9 + 32
        dense1 = (32 * 8 * 8) * 128 + 128
        dense2 = 128 * 5 + 5
        assert net.param_count() == conv1 + conv2 + dense1 + dense2

    def test_init_range_and_mean(self):
        net = build_4layer((1, 16, 16), 5, init=InitSpec(seed=11))
        flat = np.concatenate([p.ravel() for lp in net.params for p in lp.values()])
        assert flat.size > 10_000
        assert flat.min() >= -0.05 and flat.max() <= 0.05
        assert abs(flat.mean()) < 0.005

    def test_4layer_input_too_small(self):
        with pytest.raises(ConfigError):
            build_4layer((1, 4, 4), 3)

    def test_16layer_shape_plan(self):
        plan = vgg16_plan(1000, width_scale=1.0)
        shapes = shape_walk(plan, (3, 224, 224))
        convs = [s for layer, s in zip(plan, shapes) if isinstance(layer, Conv2d)]
        assert convs[:2] == [(64, 224, 224)] * 2
        assert convs[2:4] == [(128, 112, 112)] * 2
        assert convs[4:7] == [(256, 56, 56)] * 3
        assert convs[7:10] == [(512, 28, 28)] * 3
        assert convs[10:13] == [(512, 14, 14)] * 3
        pools = [s for layer, s in zip(plan, shapes) if isinstance(layer, MaxPool2d)]
        assert len(pools) == 5
        assert pools[-1] == (512, 7, 7)
        denses = [s for layer, s in zip(plan, shapes) if isinstance(layer, Dense)]
        assert denses == [(4096,), (4096,), (1000,)]

    def test_16layer_divisibility(self):
        with pytest.raises(ConfigError):
            build_16layer((1, 60, 60), 10)

    def test_16layer_small_scale_forward_backward(self):
        net = build_16layer((1, 32, 32), 4, width_scale=0.0625, dtype=np.float32)
        rng = np.random.default_rng(94)
        x = rng.random((2, 1, 32, 32), dtype=np.float32)
        out, caches = net.forward(x)
        assert out.shape == (2, 4)
        t = np.eye(4)[[0, 1]]
        grads = net.backward(caches, cross_entropy_grad(t, out, "categorical"))
        assert sum(len(g) for g in grads) > 0


def assert_history_equal(a, b):
    assert a.loss == b.loss
    assert a.train_acc == b.train_acc
    npt.assert_array_equal(np.isnan(a.eval_acc), np.isnan(b.eval_acc))
    npt.assert_allclose(a.eval_acc, b.eval_acc, equal_nan=True, atol=0)


def blob_dataset(rng, per_class=30, size=8):
    xs, ys = [], []
    for cls in (0, 1):
        for _ in range(per_class):
            img = rng.uniform(0.0, 0.2, (1, size, size)).astype(np.float32)
            half = slice(0, size // 2) if cls == 0 else slice(size // 2, size)
            img[0, half, :] += 0.7
            xs.append(img)
            ys.append(cls)
    x = np.clip(np.stack(xs), 0.0, 1.0)
    y = np.array(ys)
    order = rng.permutation(len(y))
    return x[order], y[order]


class TestTraining:
    def test_separable_blobs_learned(self):
        rng = np.random.default_rng(95)
        x, y = blob_dataset(rng)
        net = build_4layer((1, 8, 8), 2, init=InitSpec(seed=1))
        hist = train(net, x, y, loss_kind="categorical", opt_kind="rmsprop",
                     epochs=30, batch_size=8, seed=2)
        assert max(hist.train_acc) >= 0.99

    def test_same_seed_identical_history(self):
        rng = np.random.default_rng(96)
        x, y = blob_dataset(rng, per_class=10)
        runs = []
        for _ in range(2):
            net = build_4layer((1, 8, 8), 2, init=InitSpec(seed=3))
            runs.append(train(net, x, y, loss_kind="categorical", epochs=3,
                              batch_size=4, seed=7))
        assert_history_equal(runs[0], runs[1])

    def test_zero_gradient_history_flat(self):
        net = build_4layer((1, 8, 8), 1, head="sigmoid", dtype=np.float64)
        for lp in net.params:
            for p in lp.values():
                p[:] = 0.0
        rng = np.random.default_rng(97)
        x = rng.random((10, 1, 8, 8))
        targets = np.full((10, 1), 0.5)
        hist = train(net, x, targets, loss_kind="binary", epochs=4, batch_size=5, seed=0)
        npt.assert_allclose(hist.loss, np.log(2), atol=1e-12)
        assert len(set(hist.train_acc)) == 1
        for lp in net.params:
            for p in lp.values():
                npt.assert_allclose(p, 0.0)

    def test_label_out_of_range(self):
        net = build_4layer((1, 8, 8), 2)
        x = np.zeros((4, 1, 8, 8), dtype=np.float32)
        with pytest.raises(DataError):
            train(net, x, np.array([0, 1, 2, 0]), loss_kind="categorical", epochs=1)

    def test_eval_accuracy_recorded(self):
        rng = np.random.default_rng(98)
        x, y = blob_dataset(rng, per_class=8)
        net = build_4layer((1, 8, 8), 2, init=InitSpec(seed=4))
        hist = train(net, x, y, loss_kind="categorical", epochs=2, batch_size=4,
                     seed=1, eval_x=x, eval_y=y)
        assert len(hist.eval_acc) == 2
        assert all(0.0 <= a <= 1.0 for a in hist.eval_acc)
        acc = evaluate_accuracy(net, x, y)
        assert hist.eval_acc[-1] == pytest.approx(acc)

    def test_unit_zoom_augment_matches_plain(self):
        rng = np.random.default_rng(99)
        x, y = blob_dataset(rng, per_class=6)
        hists = []
        for cfg in (None, AugmentConfig(mode="zoom", zoom_range=(1.0, 1.0), seed=1)):
            net = build_4layer((1, 8, 8), 2, init=InitSpec(seed=8))
            hists.append(train(net, x, y, loss_kind="categorical", epochs=2,
                               batch_size=4, seed=3, augment_cfg=cfg))
        assert_history_equal(hists[0], hists[1])

    def test_history_csv(self, tmp_path):
        hist = TrainHistory((0.5, 0.4), (0.6, 0.7), (float("nan"), 0.8))
        p = tmp_path / "hist.csv"
        hist.write_csv(p)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "iteration,loss,train_acc,eval_acc"
        assert lines[1].startswith("1,0.500000,0.600000,")
        assert lines[2] == "2,0.400000,0.700000,0.800000"
