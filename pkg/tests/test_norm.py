import itertools

import numpy as np
import pytest

from normlab.autograd import Tensor, ops
from normlab.errors import ConfigError, ShapeError, StatisticsError
from normlab.norm import NormLayerConfig, make_norm
from normlab.norm.config import ACTIVATIONS, OPERATORS, POSITIONS
from normlab.norm.identities import rescaling_form_check
from normlab.norm.layers import BatchNorm2d, BNPlusSE, IEBN2d, InstanceNorm2d, SEModule, param_count
from normlab.oracles import gradcheck, oracle_iebn

SIG_M1 = 1.0 / (1.0 + np.e)


def t64(x):
    return Tensor(np.asarray(x, dtype=np.float64))


def set_affine(layer, gamma, beta):
    layer.gamma.data = np.array(gamma, dtype=np.float64)
    layer.beta.data = np.array(beta, dtype=np.float64)


class TestBatchNorm:
    def test_two_values(self, f64):
        bn = BatchNorm2d(1, eps=1e-12)
        out = bn(t64(np.array([1.0, 3.0]).reshape(2, 1, 1, 1)))
        np.testing.assert_allclose(out.data.ravel(), [-1.0, 1.0], atol=1e-10)

    def test_two_values_affine(self, f64):
        bn = BatchNorm2d(1, eps=1e-12)
        set_affine(bn, [2.0], [0.5])
        out = bn(t64(np.array([1.0, 3.0]).reshape(2, 1, 1, 1)))
        np.testing.assert_allclose(out.data.ravel(), [-1.5, 2.5], atol=1e-10)

    def test_constant_channel_gives_beta(self, f64):
        bn = BatchNorm2d(2)
        set_affine(bn, [3.0, -1.0], [0.25, 4.0])
        out = bn(t64(np.full((3, 2, 2, 2), 5.0)))
        np.testing.assert_allclose(out.data[:, 0], 0.25)
        np.testing.assert_allclose(out.data[:, 1], 4.0)

    def test_normalized_statistics(self, rng, f64):
        x = rng.normal(2.0, 3.0, size=(4, 3, 5, 5))
        bn = BatchNorm2d(3)
        xhat = bn.normalized(t64(x)).data
        var = x.var(axis=(0, 2, 3))
        assert np.abs(xhat.mean(axis=(0, 2, 3))).max() < 1e-6
        np.testing.assert_allclose(xhat.std(axis=(0, 2, 3)), np.sqrt(var / (var + 1e-5)), atol=1e-4)

    def test_running_statistics_ema(self, rng, f64):
        x = rng.normal(1.0, 2.0, size=(4, 2, 3, 3))
        bn = BatchNorm2d(2, momentum=0.1)
        bn(t64(x))
        np.testing.assert_allclose(bn.running_mean, 0.1 * x.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(bn.running_var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))
        assert (bn.running_var >= 0).all()

    def test_eval_uses_running_statistics(self, rng, f64):
        bn = BatchNorm2d(2)
        bn.running_mean = np.array([1.0, -1.0])
        bn.running_var = np.array([4.0, 0.25])
        bn.eval()
        x = rng.normal(size=(3, 2, 2, 2))
        expected = (x - bn.running_mean[None, :, None, None]) / np.sqrt(
            bn.running_var[None, :, None, None] + 1e-5)
        np.testing.assert_allclose(bn(t64(x)).data, expected, atol=1e-12)

    def test_eval_is_fixed_affine(self, rng, f64):
        bn = BatchNorm2d(3)
        bn(t64(rng.normal(size=(4, 3, 3, 3))))
        bn.eval()
        x = rng.normal(size=(2, 3, 3, 3))
        first = bn(t64(x)).data
        np.testing.assert_array_equal(bn(t64(x)).data, first)
        alpha, kappa = 2.5, -0.75
        scale = 1.0 / np.sqrt(bn.running_var + 1e-5)
        shifted = bn(t64(alpha * x + kappa)).data
        expected = alpha * first + (kappa + (alpha - 1) * bn.running_mean * 0)[None] * 0 \
            + ((1 - alpha) * (-bn.running_mean) * scale + kappa * scale)[None, :, None, None]
        np.testing.assert_allclose(shifted, expected, atol=1e-12)

    def test_too_few_values(self, f64):
        with pytest.raises(StatisticsError):
            BatchNorm2d(2)(t64(np.ones((1, 2, 1, 1))))

    def test_single_value_allowed_in_eval(self, f64):
        bn = BatchNorm2d(2).eval()
        assert bn(t64(np.ones((1, 2, 1, 1)))).shape == (1, 2, 1, 1)

    def test_channel_mismatch(self, f64):
        with pytest.raises(ShapeError):
            BatchNorm2d(3)(t64(np.ones((2, 2, 2, 2))))

    def test_eps_positive(self):
        with pytest.raises(ConfigError):
            BatchNorm2d(2, eps=0.0)


class TestInstanceNorm:
    def test_hand_example(self, f64):
        layer = InstanceNorm2d(1, eps=1e-12)
        out = layer(t64(np.array([[[[1.0, 3.0], [1.0, 3.0]]]])))
        np.testing.assert_allclose(out.data[0, 0], [[-1, 1], [-1, 1]], atol=1e-10)

    def test_single_instance_equals_bn(self, rng, f64):
        x = t64(rng.normal(size=(1, 3, 4, 4)))
        np.testing.assert_allclose(InstanceNorm2d(3)(x).data, BatchNorm2d(3)(x).data, atol=1e-6)

    def test_shift_invariance(self, rng, f64):
        x = rng.normal(size=(2, 3, 4, 4))
        y = x.copy()
        y[1] += 7.5
        layer = InstanceNorm2d(3)
        np.testing.assert_allclose(layer(t64(x)).data, layer(t64(y)).data, atol=1e-12)

    def test_needs_two_pixels(self, f64):
        with pytest.raises(StatisticsError):
            InstanceNorm2d(2)(t64(np.ones((4, 2, 1, 1))))


class TestSE:
    def test_zero_weights_halve(self, rng, f64):
        se = SEModule(4, reduction=2)
        se.fc1_weight.data[:] = 0.0
        se.fc2_weight.data[:] = 0.0
        x = rng.normal(size=(2, 4, 3, 3))
        np.testing.assert_allclose(se(t64(x)).data, x / 2, atol=1e-15)

    def test_squeeze_is_linear_in_uniform_scaling(self, rng, f64):
        x = rng.normal(size=(2, 3, 4, 4))
        s = np.array([2.0, -1.0, 0.5])[None, :, None, None]
        m = ops.avgpool_channel(t64(x)).data
        ms = ops.avgpool_channel(t64(x * s)).data
        np.testing.assert_allclose(ms, m * s[:, :, 0, 0], atol=1e-14)

    def test_hidden_units_and_param_count(self):
        se = SEModule(64, reduction=16)
        assert se.fc1_weight.shape == (4, 64)
        assert param_count(BatchNorm2d(64)) + param_count(se) == 640
        assert SEModule(8, reduction=16).fc1_weight.shape == (1, 8)

    def test_shape_mismatch(self, f64):
        with pytest.raises(ShapeError):
            SEModule(4)(t64(np.ones((2, 3, 2, 2))))


class TestIEBN:
    def test_default_gate_value(self, rng, f64):
        layer = IEBN2d(3)
        layer(t64(rng.normal(size=(2, 3, 4, 4))))
        np.testing.assert_allclose(layer.last_delta, SIG_M1, rtol=0, atol=1e-16)
        assert SIG_M1 == pytest.approx(0.2689414, abs=1e-7)

    @pytest.mark.parametrize("mode", ["train", "eval"])
    def test_init_equals_scaled_bn(self, rng, f64, mode):
        gamma, beta = rng.normal(size=4), rng.normal(size=4)
        iebn, bn = IEBN2d(4), BatchNorm2d(4)
        set_affine(iebn, gamma, beta)
        set_affine(bn, gamma * SIG_M1, beta)
        x = t64(rng.normal(size=(3, 4, 5, 5)))
        iebn(x), bn(x)
        if mode == "eval":
            iebn.eval(), bn.eval()
        np.testing.assert_allclose(iebn(x).data, bn(x).data, rtol=0, atol=1e-12)

    def test_identity_operator_on_zero_mean_instances(self, rng, f64):
        x = rng.normal(size=(2, 3, 4, 4))
        x -= x.mean(axis=(2, 3), keepdims=True)
        iebn = IEBN2d(3, operator="identity")
        bn = BatchNorm2d(3)
        set_affine(bn, [0.5] * 3, [0.0] * 3)
        np.testing.assert_allclose(iebn(t64(x)).data, bn(t64(x)).data, atol=1e-12)

    def test_gate_uses_pre_normalization_input(self, rng, f64):
        x = rng.normal(3.0, 1.0, size=(2, 2, 3, 3))
        layer = IEBN2d(2, gamma_hat_init=1.0, beta_hat_init=0.0)
        layer(t64(x))
        np.testing.assert_allclose(layer.last_delta, 1 / (1 + np.exp(-x.mean(axis=(2, 3)))),
                                   atol=1e-15)

    def test_gate_is_per_instance(self, rng, f64):
        x = rng.normal(size=(3, 4, 3, 3))
        layer = IEBN2d(4, gamma_hat_init=0.7, beta_hat_init=0.1)
        layer(t64(x))
        before = layer.last_delta.copy()
        x[2] += rng.normal(size=(4, 3, 3))
        layer(t64(x))
        np.testing.assert_array_equal(layer.last_delta[:2], before[:2])
        assert np.all((layer.last_delta > 0) & (layer.last_delta < 1))

    def test_gate_computed_in_eval(self, rng, f64):
        layer = IEBN2d(2, gamma_hat_init=1.0, beta_hat_init=0.0).eval()
        x = rng.normal(size=(2, 2, 3, 3))
        layer(t64(x))
        np.testing.assert_allclose(layer.last_delta, 1 / (1 + np.exp(-x.mean(axis=(2, 3)))))

    @pytest.mark.parametrize("operator, position, activation",
                             list(itertools.product(OPERATORS, POSITIONS, ACTIVATIONS)))
    def test_matches_loop_reference(self, rng, f64, operator, position, activation):
        x = rng.normal(size=(3, 4, 5, 5))
        layer = IEBN2d(4, operator=operator, position=position, activation=activation,
                       reduction=2, rng=rng)
        set_affine(layer, rng.normal(size=4), rng.normal(size=4))
        kwargs = {}
        if operator == "linear":
            layer.gamma_hat.data = rng.normal(size=4)
            layer.beta_hat.data = rng.normal(size=4)
            kwargs = {"gamma_hat": layer.gamma_hat.data, "beta_hat": layer.beta_hat.data}
        elif operator == "fc":
            kwargs = {"fc1": layer.fc1_weight.data, "fc2": layer.fc2_weight.data}
        expected = oracle_iebn(x, layer.gamma.data, layer.beta.data, operator=operator,
                               position=position, activation=activation, **kwargs)
        np.testing.assert_allclose(layer(t64(x)).data, expected, rtol=0, atol=1e-12)

    def test_fc_without_weights(self, f64):
        layer = IEBN2d(2, operator="fc")
        layer.fc1_weight = None
        with pytest.raises(ConfigError):
            layer(t64(np.ones((2, 2, 2, 2))))

    @pytest.mark.parametrize("channels", [1, 16, 64, 100])
    def test_param_increment(self, channels):
        assert param_count(IEBN2d(channels)) - param_count(BatchNorm2d(channels)) == 2 * channels

    def test_param_counts(self):
        assert param_count(BatchNorm2d(64)) == 128
        assert param_count(IEBN2d(64)) == 256
        assert param_count(IEBN2d(64, operator="identity")) == 128

    @pytest.mark.parametrize("position", POSITIONS)
    def test_gradcheck_positions(self, rng, f64, position):
        layer = IEBN2d(3, position=position)
        layer.gamma_hat.data = rng.normal(size=3)
        weights = rng.normal(size=(2, 3, 4, 4))
        x = t64(rng.normal(size=(2, 3, 4, 4)))
        report = gradcheck(lambda x_, *_: ops.sum(ops.mul(layer(x_), weights)),
                           [x, layer.gamma, layer.beta, layer.gamma_hat, layer.beta_hat])
        assert report.passed, report


class TestConfig:
    def test_defaults(self):
        c = NormLayerConfig()
        assert (c.kind, c.eps, c.momentum, c.gamma_hat_init, c.beta_hat_init) == ("bn", 1e-5, 0.1, 0.0, -1.0)

    @pytest.mark.parametrize("changes", [{"kind": "gn"}, {"operator": "conv"}, {"position": "all"},
                                         {"activation": "gelu"}, {"eps": -1.0}, {"momentum": 2.0},
                                         {"reduction": 0}, {"gamma_hat_init": "zero"},
                                         {"noise_at_eval": "yes"}])
    def test_invalid_values(self, changes):
        with pytest.raises(ConfigError):
            NormLayerConfig(**changes)

    def test_irrelevant_knobs_still_checked(self):
        with pytest.raises(ConfigError):
            NormLayerConfig(kind="bn", activation="bogus")

    def test_noise_dict_converted(self):
        c = NormLayerConfig(noise={"n_a": 0.5, "n_b": 0.2})
        assert (c.noise.n_a, c.noise.n_b) == (0.5, 0.2)

    @pytest.mark.parametrize("kind, cls", [("bn", BatchNorm2d), ("in", InstanceNorm2d),
                                           ("iebn", IEBN2d), ("bn_plus_se", BNPlusSE)])
    def test_make_norm(self, kind, cls):
        assert type(make_norm(NormLayerConfig(kind=kind), 8)) is cls


class TestRescalingForm:
    @pytest.mark.parametrize("kind", ["bn", "in", "iebn", "bn_plus_se"])
    def test_default_layers(self, rng, kind):
        assert rescaling_form_check(rng.normal(size=(2, 2, 3, 3)), kind) < 1e-10

    @pytest.mark.parametrize("position", POSITIONS)
    def test_random_iebn(self, rng, f64, position):
        layer = IEBN2d(3, position=position)
        for p in (layer.gamma, layer.beta, layer.gamma_hat, layer.beta_hat):
            p.data = rng.normal(size=3)
        assert rescaling_form_check(rng.normal(size=(4, 3, 3, 3)), layer) < 1e-10

    def test_bn_plus_se_gates_both(self, rng, f64):
        layer = BNPlusSE(4, reduction=2, rng=rng)
        set_affine(layer.bn, rng.normal(size=4), rng.normal(size=4))
        x = t64(rng.normal(size=(2, 4, 3, 3)))
        out = layer(x).data
        plain = layer.bn.eval()(x)  # eval only to reuse running stats; compare in train below
        layer.bn.train()
        bn_out = layer.bn(x).data
        np.testing.assert_allclose(out, bn_out * layer.se.last_delta[:, :, None, None], atol=1e-12)
        assert plain.shape == out.shape
