"""Seeded batteries of oracle, gradient and identity checks."""
from __future__ import annotations

import itertools

import numpy as np

from ..attacks.neutralize import neutralization_discrepancies
from ..attacks.noise import REFERENCE_NOISE_PAIRS, ConstantNoiseSpec
from ..autograd import ops
from ..autograd.tensor import Tensor, precision
from ..norm.config import ACTIVATIONS, OPERATORS, POSITIONS
from ..norm.identities import rescaling_form_check
from ..norm.layers import BatchNorm2d, BNPlusSE, IEBN2d, InstanceNorm2d, SEModule
from . import reference as ref
from .gradcheck import gradcheck
from .report import OracleReport, compare

EQUIVALENCE_TOL = 1e-12
IDENTITY_TOL = 1e-10
GRADCHECK_TOL = 1e-4
SIGMOID_MINUS_ONE = 1.0 / (1.0 + np.exp(1.0))

IEBN_KNOBS = list(itertools.product(OPERATORS, POSITIONS, ACTIVATIONS))


def _fp(seed: int, shape) -> str:
    return f"seed={seed} shape={'x'.join(map(str, shape))}"


def _random_shape(rng: np.random.Generator, max_dims=(4, 8, 8, 8)) -> tuple[int, ...]:
    B = int(rng.integers(2, max_dims[0] + 1))
    C = int(rng.integers(1, max_dims[1] + 1))
    H = int(rng.integers(2, max_dims[2] + 1))
    W = int(rng.integers(2, max_dims[3] + 1))
    return B, C, H, W


def _assign(layer, **arrays) -> None:
    for name, value in arrays.items():
        getattr(layer, name).data = np.array(value, dtype=np.float64)


def _iebn_case(rng, x, operator, position, activation):
    """Build an IEBN layer with random parameters plus the matching oracle kwargs."""
    C = x.shape[1]
    layer = IEBN2d(C, operator=operator, position=position, activation=activation,
                   rng=np.random.default_rng(int(rng.integers(1 << 31))))
    params = {"gamma": rng.normal(size=C), "beta": rng.normal(size=C)}
    if operator == "linear":
        params.update(gamma_hat=rng.normal(size=C), beta_hat=rng.normal(size=C))
    elif operator == "fc":
        params.update(fc1_weight=rng.normal(size=layer.fc1_weight.shape),
                      fc2_weight=rng.normal(size=layer.fc2_weight.shape))
    _assign(layer, **params)
    kwargs = dict(gamma=params["gamma"], beta=params["beta"], operator=operator,
                  position=position, activation=activation,
                  gamma_hat=params.get("gamma_hat"), beta_hat=params.get("beta_hat"),
                  fc1=params.get("fc1_weight"), fc2=params.get("fc2_weight"))
    return layer, kwargs


def oracle_equivalence_suite(count: int = 50, seed: int = 0) -> list[OracleReport]:
    """Engine forward passes against the loop oracles, ``count`` inputs per layer kind."""
    reports = []
    with precision(np.float64):
        for kind in ("bn", "in", "se", "iebn"):
            for n in range(count):
                case_seed = seed * 100003 + n
                rng = np.random.default_rng([case_seed, hash(kind) % 1000])
                shape = _random_shape(rng)
                x = rng.normal(loc=rng.normal(), scale=rng.uniform(0.5, 3.0), size=shape)
                C = shape[1]
                xt = Tensor(x)
                if kind == "bn":
                    layer = BatchNorm2d(C)
                    g, b = rng.normal(size=C), rng.normal(size=C)
                    _assign(layer, gamma=g, beta=b)
                    got, want = layer(xt).data, ref.oracle_bn(x, g, b)
                elif kind == "in":
                    layer = InstanceNorm2d(C)
                    g, b = rng.normal(size=C), rng.normal(size=C)
                    _assign(layer, gamma=g, beta=b)
                    got, want = layer(xt).data, ref.oracle_in(x, g, b)
                elif kind == "se":
                    layer = SEModule(C, reduction=int(rng.choice([1, 2, 16])))
                    w1 = rng.normal(size=layer.fc1_weight.shape)
                    w2 = rng.normal(size=layer.fc2_weight.shape)
                    _assign(layer, fc1_weight=w1, fc2_weight=w2)
                    got, want = layer(xt).data, ref.oracle_se(x, w1, w2)
                else:
                    operator, position, activation = IEBN_KNOBS[n % len(IEBN_KNOBS)]
                    layer, kw = _iebn_case(rng, x, operator, position, activation)
                    got, want = layer(xt).data, ref.oracle_iebn(x, **kw)
                    kind_name = f"iebn[{operator},{position},{activation}]"
                reports.append(compare(f"oracle:{kind_name if kind == 'iebn' else kind}", got,
                                       want, EQUIVALENCE_TOL, _fp(case_seed, shape)))
    return reports


def eval_equivalence_suite(count: int = 10, seed: int = 0) -> list[OracleReport]:
    """Eval-mode BN and IEBN (running statistics) against the oracles."""
    reports = []
    with precision(np.float64):
        for n in range(count):
            rng = np.random.default_rng([seed, n, 17])
            shape = _random_shape(rng)
            C = shape[1]
            x = rng.normal(size=shape)
            rm, rv = rng.normal(size=C), rng.uniform(0.2, 2.0, size=C)
            g, b = rng.normal(size=C), rng.normal(size=C)
            bn = BatchNorm2d(C)
            _assign(bn, gamma=g, beta=b)
            bn.running_mean, bn.running_var = rm.copy(), rv.copy()
            bn.eval()
            reports.append(compare("oracle:bn-eval", bn(Tensor(x)).data,
                                   ref.oracle_bn(x, g, b, running_mean=rm, running_var=rv),
                                   EQUIVALENCE_TOL, _fp(n, shape)))
            layer, kw = _iebn_case(rng, x, "linear", "both", "sigmoid")
            layer.running_mean, layer.running_var = rm.copy(), rv.copy()
            layer.eval()
            reports.append(compare("oracle:iebn-eval", layer(Tensor(x)).data,
                                   ref.oracle_iebn(x, running_mean=rm, running_var=rv, **kw),
                                   EQUIVALENCE_TOL, _fp(n, shape)))
    return reports


def conv_equivalence_suite(count: int = 5, seed: int = 0) -> list[OracleReport]:
    """im2col convolution against the direct loop."""
    reports = []
    with precision(np.float64):
        for n in range(count):
            rng = np.random.default_rng([seed, n, 23])
            k = int(rng.choice([1, 3]))
            stride, pad = int(rng.integers(1, 3)), int(rng.integers(0, 2))
            x = rng.normal(size=(2, 3, 6, 6))
            w = rng.normal(size=(4, 3, k, k))
            got = ops.conv2d(Tensor(x), Tensor(w), stride, pad).data
            reports.append(compare(f"oracle:conv2d[k={k},s={stride},p={pad}]", got,
                                   ref.oracle_conv2d(x, w, stride, pad), EQUIVALENCE_TOL,
                                   _fp(n, x.shape)))
    return reports


def init_equivalence_reports(seed: int = 0, shape=(4, 6, 5, 5)) -> list[OracleReport]:
    """IEBN at its initial gate parameters equals BN with gamma scaled by sigmoid(-1)."""
    reports = []
    with precision(np.float64):
        rng = np.random.default_rng(seed)
        C = shape[1]
        g, b = rng.normal(size=C), rng.normal(size=C)
        iebn, bn = IEBN2d(C), BatchNorm2d(C)
        _assign(iebn, gamma=g, beta=b)
        _assign(bn, gamma=g * SIGMOID_MINUS_ONE, beta=b)
        for step in range(3):
            x = Tensor(rng.normal(loc=0.3, scale=2.0, size=shape))
            reports.append(compare(f"init-equivalence:train[{step}]", iebn(x).data, bn(x).data,
                                   EQUIVALENCE_TOL, _fp(seed, shape)))
        iebn.eval()
        bn.eval()
        x = Tensor(rng.normal(size=shape))
        reports.append(compare("init-equivalence:eval", iebn(x).data, bn(x).data,
                               EQUIVALENCE_TOL, _fp(seed, shape)))
    return reports


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    return ops.sum(ops.mul(out, weights))


def gradcheck_suite(seed: int = 0, shape=(2, 3, 4, 4)) -> list[OracleReport]:
    """Finite-difference checks for every layer and every IEBN knob combination."""
    reports = []
    with precision(np.float64):
        rng = np.random.default_rng(seed)
        C = shape[1]

        def run(name, layer, params):
            x = Tensor(rng.normal(size=shape))
            weights = rng.normal(size=shape)
            for pname, value in params.items():
                getattr(layer, pname).data = np.array(value, dtype=np.float64)
            tensors = [x] + [getattr(layer, p) for p in params]
            reports.append(gradcheck(lambda x_, *_: _weighted_sum(layer(x_), weights), tensors,
                                     tolerance=GRADCHECK_TOL, check=f"gradcheck:{name}",
                                     fingerprint=_fp(seed, shape)))

        affine = lambda: {"gamma": rng.normal(size=C), "beta": rng.normal(size=C)}  # noqa: E731
        run("bn", BatchNorm2d(C), affine())
        run("in", InstanceNorm2d(C), affine())
        se = SEModule(C, reduction=1)
        run("se", se, {"fc1_weight": rng.normal(size=se.fc1_weight.shape),
                       "fc2_weight": rng.normal(size=se.fc2_weight.shape)})
        bnse = BNPlusSE(C, reduction=1)
        x = Tensor(rng.normal(size=shape))
        weights = rng.normal(size=shape)
        reports.append(gradcheck(lambda x_, *_: _weighted_sum(bnse(x_), weights),
                                 [x, bnse.bn.gamma, bnse.bn.beta, bnse.se.fc1_weight,
                                  bnse.se.fc2_weight], tolerance=GRADCHECK_TOL,
                                 check="gradcheck:bn_plus_se", fingerprint=_fp(seed, shape)))
        for operator, position, activation in IEBN_KNOBS:
            layer = IEBN2d(C, operator=operator, position=position, activation=activation,
                           reduction=1, rng=np.random.default_rng(seed))
            params = affine()
            if operator == "linear":
                params.update(gamma_hat=rng.normal(size=C), beta_hat=rng.normal(size=C))
            elif operator == "fc":
                params.update(fc1_weight=rng.normal(size=layer.fc1_weight.shape),
                              fc2_weight=rng.normal(size=layer.fc2_weight.shape))
            run(f"iebn[{operator},{position},{activation}]", layer, params)

        # random gate parameters: at the initial gate d mean / dx is exactly zero
        mean_layer = IEBN2d(C)
        _assign(mean_layer, gamma_hat=rng.normal(size=C), beta_hat=rng.normal(size=C))
        x = Tensor(rng.normal(size=shape))
        reports.append(gradcheck(lambda x_, *_: ops.mean(mean_layer(x_)),
                                 [x, mean_layer.gamma, mean_layer.beta, mean_layer.gamma_hat,
                                  mean_layer.beta_hat], tolerance=GRADCHECK_TOL,
                                 check="gradcheck:iebn-mean", fingerprint=_fp(seed, shape)))

        w = Tensor(rng.normal(size=(4, C, 3, 3)))
        x = Tensor(rng.normal(size=shape))
        cw = rng.normal(size=(2, 4, 2, 2))
        reports.append(gradcheck(lambda x_, w_: _weighted_sum(ops.conv2d(x_, w_, 2, 1), cw),
                                 [x, w], tolerance=GRADCHECK_TOL, check="gradcheck:conv2d",
                                 fingerprint=_fp(seed, shape)))
        logits = Tensor(rng.normal(size=(5, 4)))
        labels = np.array([0, 3, 1, -1, 2])
        mask = labels >= 0
        reports.append(gradcheck(lambda z: ops.cross_entropy(z, labels, mask), [logits],
                                 tolerance=GRADCHECK_TOL, check="gradcheck:masked-cross-entropy",
                                 fingerprint=_fp(seed, (5, 4))))
    return reports


def _noise_pairs():
    return [ConstantNoiseSpec(a, b) for a, b in REFERENCE_NOISE_PAIRS] + [ConstantNoiseSpec(1.0, 0.0)]


def identity_suite(seeds=range(10)) -> list[OracleReport]:
    """Rescaling forms and constant-noise algebra over a seeded grid."""
    reports = []
    shapes = [(2, 3, 4, 4), (4, 8, 5, 3)]
    for seed in seeds:
        for shape in shapes:
            rng = np.random.default_rng([seed, *shape])
            C = shape[1]
            x = rng.normal(loc=rng.normal(), scale=rng.uniform(0.5, 2.0), size=shape)
            fp = _fp(seed, shape)
            with precision(np.float64):
                layers = {"bn": BatchNorm2d(C), "in": InstanceNorm2d(C),
                          "bn_plus_se": BNPlusSE(C, rng=np.random.default_rng(seed))}
                for position in POSITIONS:
                    layers[f"iebn[{position}]"] = IEBN2d(C, position=position)
                for spec in _noise_pairs():
                    layers[f"bn+noise({spec.n_a},{spec.n_b})"] = BatchNorm2d(C, noise=spec)
                    layers[f"iebn+noise({spec.n_a},{spec.n_b})"] = IEBN2d(C, position="both",
                                                                          noise=spec)
            for name, layer in layers.items():
                affine = layer.bn if isinstance(layer, BNPlusSE) else layer
                _assign(affine, gamma=rng.normal(size=C), beta=rng.normal(size=C))
                if isinstance(layer, IEBN2d):
                    _assign(layer, gamma_hat=rng.normal(size=C), beta_hat=rng.normal(size=C))
                d = rescaling_form_check(x, layer)
                reports.append(OracleReport(f"rescaling:{name}", d, d, IDENTITY_TOL, fp))
            for spec in _noise_pairs():
                g, b = rng.normal(size=C), rng.normal(size=C)
                for hat_name, hats in (("init", (None, None)),
                                       ("random", (rng.normal(size=C), rng.normal(size=C)))):
                    disc = neutralization_discrepancies(x, spec, g, b, *hats)
                    for ident, d in disc.items():
                        reports.append(OracleReport(
                            f"noise-identity:{ident}[{spec.n_a},{spec.n_b},{hat_name}]",
                            d, d, IDENTITY_TOL, fp))
            reports.extend(_degenerate_reports(x, rng, fp))
    return reports


def _degenerate_reports(x: np.ndarray, rng: np.random.Generator, fp: str) -> list[OracleReport]:
    C = x.shape[1]
    g, b = rng.normal(size=C), rng.normal(size=C)
    xt = Tensor(x, dtype=np.float64)
    with precision(np.float64):
        # a gate saturated at exactly 1 turns IEBN into plain BN
        open_gate = IEBN2d(C, position="both", beta_hat_init=40.0)
        bn = BatchNorm2d(C)
        # unit noise leaves attacked IEBN equal to clean IEBN
        noisy = IEBN2d(C, noise=ConstantNoiseSpec(1.0, 0.0))
        clean = IEBN2d(C)
        # with the gate open, beta-only IEBN under noise is the attacked BN
        open_beta = IEBN2d(C, position="beta_only", beta_hat_init=40.0,
                           noise=ConstantNoiseSpec(0.8, 0.5))
        attacked_bn = BatchNorm2d(C, noise=ConstantNoiseSpec(0.8, 0.5))
    for layer in (open_gate, bn, noisy, clean, open_beta, attacked_bn):
        _assign(layer, gamma=g, beta=b)
    out = []
    for name, left, right in (("open-gate-is-bn", open_gate, bn),
                              ("unit-noise-is-clean", noisy, clean),
                              ("open-gate-beta-is-attacked-bn", open_beta, attacked_bn)):
        r = compare(f"degenerate:{name}", left(xt).data, right(xt).data, IDENTITY_TOL, fp)
        out.append(r)
    return out


def run_all(quick: bool = False) -> list[OracleReport]:
    """Every suite; ``quick`` shrinks the seeded grids."""
    count, seeds = (5, range(2)) if quick else (50, range(10))
    return (oracle_equivalence_suite(count) + eval_equivalence_suite() + conv_equivalence_suite()
            + init_equivalence_reports() + gradcheck_suite() + identity_suite(seeds))
