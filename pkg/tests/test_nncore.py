import numpy as np
import pytest

from pathflow.core.exceptions import (
    BatchSizeError, ConfigurationError, ModelFileError, NonFiniteError, ShapeError,
)
from pathflow.heads.binary import BinaryBatch, bce_loss
from pathflow.nncore import layers
from pathflow.nncore.gradcheck import grad_check, relative_error
from pathflow.nncore.layer_spec import LayerKind, LayerSpec, compose_output_shape, default_architecture
from pathflow.nncore.network import ResidualNetwork
from pathflow.nncore.optim import SGDOptimizer, sgd_step
from pathflow.nncore.params import NetworkParams, ParamBlock
from pathflow.nncore.residual import residual_block, residual_block_backward, residual_block_forward
from pathflow.nncore.serialization import decode_model, encode_model, load_model, save_model
from pathflow.nncore.tensor import Mode

TOL = 1e-4


def bce_head(labels):
    return lambda outputs: bce_loss(BinaryBatch(outputs, labels))


class TestConvolution:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((2, 1, 5, 5))
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        np.testing.assert_allclose(layers.conv2d(x, w, padding=1), x, rtol=0, atol=1e-15)

    def test_sum_kernel(self):
        assert layers.conv2d(np.ones((1, 1, 2, 2)), np.ones((1, 1, 2, 2))).item() == 4.0

    def test_output_shape(self, rng):
        y = layers.conv2d(rng.standard_normal((2, 3, 9, 9)), rng.standard_normal((4, 3, 3, 3)),
                          stride=2, padding=1)
        assert y.shape == (2, 4, 5, 5)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            layers.conv2d(rng.standard_normal((1, 2, 4, 4)), rng.standard_normal((1, 3, 3, 3)))

    @pytest.mark.parametrize("stride,padding,bias", [(1, 1, True), (2, 1, False), (2, 0, True)])
    def test_backward_matches_differences(self, numeric_grad, rel_error, stride, padding, bias):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 3, 6, 6))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4) if bias else None
        y, cache = layers.conv2d_forward(x, w, b, stride, padding)
        g = rng.standard_normal(y.shape)
        dx, dw, db = layers.conv2d_backward(g, cache)

        loss = lambda: float(np.sum(layers.conv2d_forward(x, w, b, stride, padding)[0] * g))
        assert rel_error(dx, numeric_grad(loss, x, 1e-5)) <= TOL
        assert rel_error(dw, numeric_grad(loss, w, 1e-5)) <= TOL
        if bias:
            assert rel_error(db, numeric_grad(loss, b, 1e-5)) <= TOL
        else:
            assert db is None


class TestPooling:
    def test_max(self):
        assert layers.maxpool2(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])).item() == 4.0

    def test_tie_goes_to_first(self):
        x = np.full((1, 1, 4, 4), 3.0)
        y, cache = layers.maxpool2_forward(x)
        np.testing.assert_array_equal(y, np.full((1, 1, 2, 2), 3.0))
        dx = layers.maxpool2_backward(np.ones((1, 1, 2, 2)), cache)
        expected = np.zeros((4, 4))
        expected[::2, ::2] = 1.0
        np.testing.assert_array_equal(dx[0, 0], expected)

    def test_odd_dims(self):
        with pytest.raises(ShapeError):
            layers.maxpool2(np.ones((1, 1, 3, 4)))

    def test_backward_matches_differences(self, rng, numeric_grad, rel_error):
        x = rng.standard_normal((2, 2, 4, 6))
        g = rng.standard_normal((2, 2, 2, 3))
        _, cache = layers.maxpool2_forward(x)
        dx = layers.maxpool2_backward(g, cache)
        loss = lambda: float(np.sum(layers.maxpool2_forward(x)[0] * g))
        assert rel_error(dx, numeric_grad(loss, x, 1e-6)) <= TOL

    def test_relu_idempotent(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            x = rng.standard_normal((2, 3, 4, 4)) * 10.0
            once = layers.relu(x)
            assert np.array_equal(layers.relu(once), once)
            assert np.all(once >= 0.0)

    def test_global_average(self, rng, numeric_grad, rel_error):
        x = rng.standard_normal((2, 3, 4, 4))
        y, cache = layers.global_avg_pool_forward(x)
        np.testing.assert_allclose(y[:, :, 0, 0], x.mean(axis=(2, 3)))
        g = rng.standard_normal(y.shape)
        loss = lambda: float(np.sum(layers.global_avg_pool_forward(x)[0] * g))
        assert rel_error(layers.global_avg_pool_backward(g, cache), numeric_grad(loss, x)) <= TOL


class TestBatchNorm:
    def test_fixed_point(self):
        x = np.array([-1.0, 1.0] * 8).reshape(4, 1, 2, 2)
        y = layers.batchnorm(x, np.ones(1), np.zeros(1))
        np.testing.assert_allclose(y, x, atol=1e-5)

    def test_constant_channel_gives_shift(self):
        y = layers.batchnorm(np.full((3, 1, 2, 2), 5.0), np.ones(1), np.array([0.7]))
        np.testing.assert_allclose(y, 0.7)

    def test_batch_of_one(self):
        with pytest.raises(BatchSizeError):
            layers.batchnorm(np.ones((1, 2, 2, 2)), np.ones(2), np.zeros(2))

    def test_running_update_and_eval(self, rng):
        x = rng.standard_normal((4, 2, 3, 3)) * 2.0 + 1.0
        _, _, (mean, var) = layers.batchnorm_forward(x, np.ones(2), np.zeros(2), np.zeros(2),
                                                     np.ones(2), Mode.TRAIN)
        np.testing.assert_allclose(mean, 0.1 * x.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(var, 0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1))

        y, _, running = layers.batchnorm_forward(x, np.ones(2), np.zeros(2), mean, var, Mode.EVAL)
        assert running is None
        expected = (x - mean[None, :, None, None]) / np.sqrt(var[None, :, None, None] + layers.BN_EPS)
        np.testing.assert_allclose(y, expected)

    @pytest.mark.parametrize("mode", [Mode.TRAIN, Mode.EVAL])
    def test_backward_matches_differences(self, rng, numeric_grad, rel_error, mode):
        x = rng.standard_normal((4, 3, 3, 3))
        gamma = rng.uniform(0.5, 1.5, 3)
        beta = rng.standard_normal(3)
        rm, rv = rng.standard_normal(3), rng.uniform(0.5, 2.0, 3)
        y, cache, _ = layers.batchnorm_forward(x, gamma, beta, rm, rv, mode)
        g = rng.standard_normal(y.shape)
        dx, dgamma, dbeta = layers.batchnorm_backward(g, cache)

        loss = lambda: float(np.sum(layers.batchnorm_forward(x, gamma, beta, rm, rv, mode)[0] * g))
        assert rel_error(dx, numeric_grad(loss, x, 1e-5)) <= TOL
        assert rel_error(dgamma, numeric_grad(loss, gamma, 1e-5)) <= TOL
        assert rel_error(dbeta, numeric_grad(loss, beta, 1e-5)) <= TOL


class TestDense:
    def test_backward_matches_differences(self, rng, numeric_grad, rel_error):
        x = rng.standard_normal((3, 2, 2, 2))
        w = rng.standard_normal((8, 5))
        b = rng.standard_normal(5)
        y, cache = layers.dense_forward(x, w, b)
        assert y.shape == (3, 5, 1, 1)
        g = rng.standard_normal(y.shape)
        dx, dw, db = layers.dense_backward(g, cache)
        loss = lambda: float(np.sum(layers.dense_forward(x, w, b)[0] * g))
        for analytic, array in ((dx, x), (dw, w), (db, b)):
            assert rel_error(analytic, numeric_grad(loss, array)) <= TOL

    def test_feature_mismatch(self):
        with pytest.raises(ShapeError):
            layers.dense_forward(np.ones((1, 3, 1, 1)), np.ones((4, 1)), np.zeros(1))


def block_params(spec: LayerSpec, seed: int = 0) -> ParamBlock:
    return NetworkParams.initialize([spec], np.random.default_rng(seed))[0]


class TestResidualBlock:
    def test_zero_branch_is_relu_of_input(self, rng):
        spec = LayerSpec(LayerKind.RESIDUAL_BLOCK, 4, 4)
        block = block_params(spec)
        for name in ("conv1.w", "conv2.w"):
            block.arrays[name][:] = 0.0
        x = rng.standard_normal((2, 4, 6, 6))
        np.testing.assert_allclose(residual_block(x, block, spec), np.maximum(x, 0.0))

    def test_stride_two_projects(self, rng):
        spec = LayerSpec(LayerKind.RESIDUAL_BLOCK, 16, 32, stride=2)
        assert spec.needs_projection
        block = block_params(spec)
        assert block.arrays["proj.w"].shape == (32, 16, 1, 1)
        y = residual_block(rng.standard_normal((1, 16, 32, 32)), block, spec, Mode.EVAL)
        assert y.shape == (1, 32, 16, 16)

    def test_running_statistics_reported(self, rng):
        spec = LayerSpec(LayerKind.RESIDUAL_BLOCK, 3, 3)
        _, _, running = residual_block_forward(rng.standard_normal((2, 3, 4, 4)), block_params(spec), spec)
        assert set(running) == {"bn1.running_mean", "bn1.running_var",
                                "bn2.running_mean", "bn2.running_var"}

    def test_backward_matches_differences(self, rng, numeric_grad, rel_error):
        spec = LayerSpec(LayerKind.RESIDUAL_BLOCK, 2, 3, stride=2)
        block = block_params(spec, seed=4)
        x = rng.standard_normal((3, 2, 6, 6))
        y, cache, _ = residual_block_forward(x, block, spec)
        g = rng.standard_normal(y.shape)
        dx, grads = residual_block_backward(g, cache)

        loss = lambda: float(np.sum(residual_block_forward(x, block, spec)[0] * g))
        assert rel_error(dx, numeric_grad(loss, x, 1e-5)) <= TOL
        for name, array in block.arrays.items():
            assert rel_error(grads[name], numeric_grad(loss, array, 1e-5)) <= TOL, name


def random_chain(rng):
    """Random valid layer stack ending in GAP + Dense, with its input shape"""
    c, h = int(rng.integers(1, 5)), int(rng.integers(6, 21))
    shape = (2, c, h, h)
    specs = []
    for _ in range(int(rng.integers(1, 7))):
        choice = int(rng.integers(0, 5))
        if choice == 0:
            kernel = int(rng.choice([1, 3, 5]))
            padding = "same" if rng.random() < 0.5 else int(rng.integers(0, 3))
            pad = kernel // 2 if padding == "same" else padding
            if h + 2 * pad < kernel:
                continue
            stride, out = int(rng.integers(1, 3)), int(rng.integers(1, 6))
            specs.append(LayerSpec(LayerKind.CONV, c, out, kernel, stride, padding, bias=bool(rng.random() < 0.5)))
            c, h = out, (h + 2 * pad - kernel) // stride + 1
        elif choice == 1:
            specs.append(LayerSpec(LayerKind.BATCHNORM, c))
        elif choice == 2:
            specs.append(LayerSpec(LayerKind.RELU))
        elif choice == 3 and h % 2 == 0:
            specs.append(LayerSpec(LayerKind.MAXPOOL))
            h //= 2
        elif choice == 4:
            stride, out = int(rng.integers(1, 3)), int(rng.integers(1, 6))
            specs.append(LayerSpec(LayerKind.RESIDUAL_BLOCK, c, out, stride=stride))
            c, h = out, (h - 1) // stride + 1
    specs += [LayerSpec(LayerKind.GLOBAL_AVG_POOL),
              LayerSpec(LayerKind.DENSE, in_channels=c, units=int(rng.integers(1, 4)))]
    return specs, shape


def run_layer(spec: LayerSpec, block: ParamBlock, x: np.ndarray) -> np.ndarray:
    kind = spec.kind
    if kind is LayerKind.CONV:
        return layers.conv2d(x, block.arrays["w"], block.arrays.get("b"), spec.stride, spec.pad)
    if kind is LayerKind.BATCHNORM:
        return layers.batchnorm(x, block.arrays["gamma"], block.arrays["beta"], Mode.EVAL,
                                block.buffers["running_mean"], block.buffers["running_var"])
    if kind is LayerKind.RELU:
        return layers.relu(x)
    if kind is LayerKind.MAXPOOL:
        return layers.maxpool2(x)
    if kind is LayerKind.RESIDUAL_BLOCK:
        return residual_block(x, block, spec, Mode.EVAL)
    if kind is LayerKind.GLOBAL_AVG_POOL:
        return layers.global_avg_pool_forward(x)[0]
    return layers.dense_forward(x, block.arrays["w"], block.arrays["b"])[0]


class TestLayerSpec:
    def test_shape_algebra_matches_layers(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            specs, shape = random_chain(rng)
            params = NetworkParams.initialize(specs, rng)
            x = rng.standard_normal(shape)
            for spec, block in zip(specs, params.blocks):
                expected = spec.output_shape(x.shape)
                x = run_layer(spec, block, x)
                assert x.shape == expected
            assert compose_output_shape(specs, shape) == x.shape == (2, specs[-1].units, 1, 1)

    def test_default_architecture_shape(self):
        specs = default_architecture()
        assert compose_output_shape(specs, (5, 3, 64, 64)) == (5, 1, 1, 1)
        assert compose_output_shape(specs, (8, 3, 16, 16)) == (8, 1, 1, 1)
        strides = [s.stride for s in specs if s.kind is LayerKind.RESIDUAL_BLOCK]
        assert strides == [1, 1, 2, 1, 2, 1]

    def test_hidden_units(self):
        specs = default_architecture(hidden_units=(8,))
        assert [s.kind for s in specs[-3:]] == [LayerKind.DENSE, LayerKind.RELU, LayerKind.DENSE]

    def test_bad_geometry(self):
        with pytest.raises(ShapeError):
            compose_output_shape(default_architecture(), (1, 3, 9, 9))
        with pytest.raises(ShapeError):
            compose_output_shape([LayerSpec(LayerKind.CONV, 4, 2)], (1, 3, 8, 8))

    def test_spec_validation(self):
        with pytest.raises(ConfigurationError):
            LayerSpec(LayerKind.CONV, 3, 4, kernel=2, padding="same")
        with pytest.raises(ConfigurationError):
            default_architecture(blocks_per_stage=0)

    def test_dict_round_trip(self):
        spec = LayerSpec(LayerKind.CONV, 3, 8, 3, 1, "same", bias=False)
        assert LayerSpec.from_dict(spec.to_dict()) == spec


def tiny_network(seed: int = 0, input_size: int = 8) -> ResidualNetwork:
    specs = default_architecture(3, 4, (4, 6), 1)
    return ResidualNetwork.initialize(specs, seed, input_size)


class TestNetwork:
    def test_zero_dense_head(self):
        specs = [LayerSpec(LayerKind.GLOBAL_AVG_POOL), LayerSpec(LayerKind.DENSE, in_channels=3, units=1)]
        net = ResidualNetwork(specs, NetworkParams.initialize(specs, np.random.default_rng(0)), 4)
        net.params[1].arrays["w"][:] = 0.0
        result = net.forward(np.zeros((2, 3, 4, 4)))
        np.testing.assert_array_equal(result.outputs, np.zeros(2))
        assert result.embedding.shape == (2, 1, 1, 3)

    def test_embedding_dim(self):
        net = tiny_network()
        assert net.embedding_dim == 6
        assert net.forward(np.zeros((2, 3, 8, 8))).embedding.shape == (2, 1, 1, 6)

    def test_wrong_input(self):
        with pytest.raises(ShapeError):
            tiny_network().forward(np.zeros((2, 3, 10, 10)))

    def test_nan_names_layer(self):
        x = np.zeros((2, 3, 8, 8))
        x[0, 0, 0, 0] = np.nan
        with pytest.raises(NonFiniteError) as info:
            tiny_network().forward(x)
        assert info.value.layer == 0

    def test_eval_is_pure(self, rng):
        net = tiny_network()
        x = rng.standard_normal((6, 3, 8, 8))
        before = [b.copy() for _, _, b in net.params.named_buffers()]
        a = net.predict(x).outputs
        np.testing.assert_array_equal(net.predict(x).outputs, a)
        for old, (_, _, new) in zip(before, net.params.named_buffers()):
            np.testing.assert_array_equal(old, new)

    def test_eval_ignores_batch_composition(self, rng):
        net = tiny_network()
        x = rng.standard_normal((7, 3, 8, 8))
        batched = net.predict(x)
        for i in range(7):
            single = net.predict(x[i:i + 1])
            assert np.array_equal(single.outputs, batched.outputs[i:i + 1])
            assert np.array_equal(single.embedding, batched.embedding[i:i + 1])
        other = np.concatenate([rng.standard_normal((3, 3, 8, 8)), x[2:4]])
        assert np.array_equal(net.predict(other).outputs[3:], batched.outputs[2:4])

    def test_eval_permutation_permutes_outputs(self, rng):
        net = tiny_network()
        x = rng.standard_normal((9, 3, 8, 8))
        outputs = net.predict(x).outputs
        for _ in range(5):
            order = rng.permutation(9)
            assert np.array_equal(net.predict(x[order]).outputs, outputs[order])

    def test_train_updates_running_stats(self, rng):
        net = tiny_network()
        net.forward(rng.standard_normal((4, 3, 8, 8)), Mode.TRAIN)
        assert not np.allclose(net.params[1].buffers["running_mean"], 0.0)

    def test_initialization_is_seeded(self):
        a, b, c = tiny_network(1), tiny_network(1), tiny_network(2)
        np.testing.assert_array_equal(a.params[0].arrays["w"], b.params[0].arrays["w"])
        assert not np.array_equal(a.params[0].arrays["w"], c.params[0].arrays["w"])


class TestGradCheck:
    def test_linear_network_is_exact(self, rng):
        specs = [LayerSpec(LayerKind.DENSE, in_channels=4, units=1)]
        net = ResidualNetwork.initialize(specs, 0, 2, 1)
        target = rng.standard_normal(5)
        squared = lambda out: (0.5 * float(np.sum((out - target) ** 2)), out - target)
        report = grad_check(net, rng.standard_normal((5, 1, 2, 2)), squared, epsilon=1e-3,
                            check_input=True)
        assert report.global_max <= 1e-8

    def test_default_network(self, rng):
        net = ResidualNetwork.initialize(default_architecture(), 0, 16)
        x = rng.standard_normal((8, 3, 16, 16))
        report = grad_check(net, x, bce_head(np.arange(8) % 2), epsilon=1e-5, check_input=True)
        assert report.passed(TOL), report.block_errors

    def test_residual_block_end_to_end(self, rng):
        specs = [LayerSpec(LayerKind.RESIDUAL_BLOCK, 3, 4, stride=2), LayerSpec(LayerKind.GLOBAL_AVG_POOL),
                 LayerSpec(LayerKind.DENSE, in_channels=4, units=1)]
        net = ResidualNetwork.initialize(specs, 3, 8)
        report = grad_check(net, rng.standard_normal((4, 3, 8, 8)), bce_head([0, 1, 1, 0]))
        assert report.global_max <= TOL

    def test_corrupted_conv_backward_is_caught(self, rng, monkeypatch):
        original = layers.conv2d_backward

        def doubled(dy, cache):
            dx, dw, db = original(dy, cache)
            return dx, 2.0 * dw, db

        monkeypatch.setattr(layers, "conv2d_backward", doubled)
        net = tiny_network(0, 8)
        report = grad_check(net, rng.standard_normal((4, 3, 8, 8)), bce_head([0, 1, 0, 1]))
        assert report.global_max > 0.3
        assert not report.passed(TOL)

    def test_parameters_restored(self, rng):
        net = tiny_network()
        before = net.params.copy()
        grad_check(net, rng.standard_normal((4, 3, 8, 8)), bce_head([0, 1, 0, 1]))
        for (_, _, a), (_, _, b) in zip(before.named_arrays(), net.params.named_arrays()):
            np.testing.assert_array_equal(a, b)

    def test_epsilon_range(self, rng):
        with pytest.raises(ConfigurationError):
            grad_check(tiny_network(), rng.standard_normal((2, 3, 8, 8)), bce_head([0, 1]), epsilon=1e-2)

    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)


class TestSGD:
    def _single(self, w: float):
        specs = [LayerSpec(LayerKind.DENSE, in_channels=1, units=1)]
        params = NetworkParams.initialize(specs, np.random.default_rng(0))
        params[0].arrays["w"][:] = w
        params[0].arrays["b"][:] = 0.0
        return params

    def test_plain_step(self):
        params = self._single(1.0)
        sgd_step(params, [{"w": np.array([[2.0]]), "b": np.zeros(1)}], lr=0.1)
        assert params[0].arrays["w"].item() == pytest.approx(0.8)

    def test_zero_gradient_is_fixed_point(self):
        params = self._single(1.5)
        sgd_step(params, [{"w": np.zeros((1, 1)), "b": np.zeros(1)}], lr=0.1, momentum=0.9)
        assert params[0].arrays["w"].item() == 1.5

    def test_momentum_and_decay(self):
        params = self._single(1.0)
        optimizer = SGDOptimizer(params, lr=0.1, momentum=0.5, weight_decay=0.1)
        grads = [{"w": np.array([[1.0]]), "b": np.zeros(1)}]
        optimizer.step(grads)
        # v1 = 1 + 0.1*1 = 1.1 ; w = 0.89
        assert params[0].arrays["w"].item() == pytest.approx(0.89)
        optimizer.step(grads)
        # v2 = 0.55 + 1 + 0.089 = 1.639 ; w = 0.89 - 0.1639
        assert params[0].arrays["w"].item() == pytest.approx(0.7261)
        assert optimizer.steps == 2

    def test_non_finite_aborts_without_change(self):
        params = self._single(1.0)
        with pytest.raises(NonFiniteError):
            sgd_step(params, [{"w": np.array([[np.inf]]), "b": np.zeros(1)}], lr=0.1)
        assert params[0].arrays["w"].item() == 1.0

    def test_buffers_untouched(self, rng):
        net = tiny_network()
        result = net.forward(rng.standard_normal((4, 3, 8, 8)), Mode.TRAIN)
        grads, _ = net.backward(np.ones(4), result)
        buffers = [b.copy() for _, _, b in net.params.named_buffers()]
        sgd_step(net.params, grads, lr=0.1, momentum=0.9, weight_decay=1e-4)
        for old, (_, _, new) in zip(buffers, net.params.named_buffers()):
            np.testing.assert_array_equal(old, new)

    def test_invalid_hyperparameters(self):
        params = self._single(1.0)
        grads = [{"w": np.zeros((1, 1)), "b": np.zeros(1)}]
        with pytest.raises(ConfigurationError):
            sgd_step(params, grads, lr=0.0)
        with pytest.raises(ConfigurationError):
            sgd_step(params, grads, lr=0.1, momentum=1.0)


class TestSerialization:
    def test_round_trip(self, rng, tmp_path):
        net = tiny_network(5)
        net.forward(rng.standard_normal((4, 3, 8, 8)), Mode.TRAIN)
        path = save_model(net, tmp_path / "m.pfnn", {"task": "idh", "head": "binary"})
        loaded, meta = load_model(path)
        assert meta == {"task": "idh", "head": "binary"}
        x = rng.standard_normal((3, 3, 8, 8))
        np.testing.assert_array_equal(loaded.predict(x).outputs, net.predict(x).outputs)
        assert loaded.specs == net.specs

    def test_corrupt_files(self):
        payload = encode_model(tiny_network())
        with pytest.raises(ModelFileError):
            decode_model(b"XXXX" + payload[4:])
        with pytest.raises(ModelFileError):
            decode_model(payload[:-8])
        with pytest.raises(ModelFileError):
            decode_model(payload + b"\x00" * 8)
        with pytest.raises(ModelFileError):
            decode_model(payload[:6])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / "absent.pfnn")
