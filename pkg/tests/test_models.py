import math

import numpy as np
import pytest

from normlab.autograd import Tensor, ops
from normlab.autograd.optim import SGD
from normlab.autograd.tensor import backward, no_grad
from normlab.errors import ConfigError
from normlab.models import ModelSpec, build_model, count_params, norm_channel_total, norm_sites
from normlab.norm import NormLayerConfig
from normlab.norm.layers import BatchNorm2d, IEBN2d


def spec_for(kind, **kw):
    return ModelSpec(norm=NormLayerConfig(kind=kind), **kw)


def tiny(kind="bn", **kw):
    return ModelSpec(widths=(4, 8), blocks_per_stage=1, norm=NormLayerConfig(kind=kind), **kw)


class TestParameterAccounting:
    def test_resnet20_bn(self):
        total, breakdown = count_params(build_model(spec_for("bn")))
        assert total == 272474
        assert breakdown["norm"] == 2 * norm_channel_total(build_model(spec_for("bn")))

    def test_resnet20_iebn_increment(self):
        bn = build_model(spec_for("bn"))
        iebn = build_model(spec_for("iebn"))
        channels = norm_channel_total(bn)
        assert channels == 784
        assert count_params(iebn)[0] == 274042
        assert count_params(iebn)[0] - count_params(bn)[0] == 2 * channels

    def test_resnet20_bn_plus_se(self):
        assert count_params(build_model(spec_for("bn_plus_se")))[0] == 274490

    def test_instance_norm_matches_bn(self):
        assert count_params(build_model(spec_for("in")))[0] == 272474

    def test_site_count(self):
        sites = norm_sites(build_model(spec_for("iebn")))
        assert len(sites) == 21
        assert all(isinstance(m, IEBN2d) for _, m in sites)

    def test_bn_plus_se_sites_are_bn(self):
        sites = norm_sites(build_model(spec_for("bn_plus_se")))
        assert len(sites) == 21
        assert all(isinstance(m, BatchNorm2d) for _, m in sites)


class TestForward:
    def test_output_shape(self, rng, f64):
        model = build_model(tiny("iebn", num_classes=10))
        out = model(Tensor(rng.normal(size=(8, 3, 32, 32))))
        assert out.shape == (8, 10)

    @pytest.mark.parametrize("kind", ["bn", "in", "iebn", "bn_plus_se"])
    def test_initial_loss_is_log_classes(self, rng, f64, kind):
        model = build_model(tiny(kind, num_classes=7))
        logits = model(Tensor(rng.normal(size=(6, 3, 16, 16))))
        loss = ops.cross_entropy(logits, rng.integers(0, 7, 6)).item()
        assert loss == pytest.approx(math.log(7), abs=1e-12)

    def test_same_seed_same_weights(self):
        a = build_model(tiny("iebn"), seed=3).state_dict()
        b = build_model(tiny("iebn"), seed=3).state_dict()
        c = build_model(tiny("iebn"), seed=4).state_dict()
        assert a.keys() == b.keys()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert any(not np.array_equal(a[k], c[k]) for k in a)

    def test_eval_is_deterministic_per_sample(self, rng, f64):
        model = build_model(tiny("iebn"))
        x = rng.normal(size=(4, 3, 16, 16))
        model(Tensor(x))
        model.eval()
        with no_grad():
            full = model(Tensor(x)).data
            single = model(Tensor(x[1:2])).data
        np.testing.assert_allclose(single, full[1:2], atol=1e-12)

    @pytest.mark.parametrize("kind", ["bn", "iebn", "bn_plus_se"])
    def test_preactivation_block(self, rng, f64, kind):
        model = build_model(tiny(kind, block="preact_residual"))
        assert model(Tensor(rng.normal(size=(3, 3, 16, 16)))).shape == (3, 10)
        assert len(norm_sites(model)) == 5

    @pytest.mark.parametrize("kind", ["bn", "iebn"])
    @pytest.mark.parametrize("lr", [1e-3, 1e-4])
    def test_small_step_decreases_loss(self, rng, f64, kind, lr):
        model = build_model(tiny(kind, head_init="uniform"))
        model.eval()  # fixed statistics make a single-sample batch well defined
        x = Tensor(rng.normal(size=(1, 3, 16, 16)))
        y = np.array([3])
        opt = SGD(model.parameters(), lr=lr)
        before = ops.cross_entropy(model(x), y)
        opt.zero_grad()
        backward(before)
        opt.step()
        with no_grad():
            after = ops.cross_entropy(model(x), y).item()
        assert after < before.item()


class TestValidation:
    @pytest.mark.parametrize("changes", [
        {"widths": ()}, {"widths": (4, 0)}, {"blocks_per_stage": (1,)},
        {"blocks_per_stage": 0}, {"num_classes": 1}, {"block": "bottleneck"},
        {"head_init": "normal"},
    ])
    def test_invalid_spec(self, changes):
        values = {"widths": (4, 8), "blocks_per_stage": 1, **changes}
        with pytest.raises(ConfigError):
            build_model(ModelSpec(**values))

    def test_norm_from_dict(self):
        assert ModelSpec(norm={"kind": "iebn"}).norm.kind == "iebn"
