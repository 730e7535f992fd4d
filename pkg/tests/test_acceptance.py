"""Acceptance criteria 1-10.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated in
the "acceptance criteria" section at the end of the pytest report.

Criteria 7-9 train the reference ResNet-20 on real CIFAR-10 (and MNIST for 9).
Point ``NORMLAB_DATA`` at a directory holding ``cifar-10-batches-bin/`` and
``mnist/`` with the standard file names; without it these criteria fail.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from normlab.autograd import Tensor
from normlab.autograd.tensor import precision
from normlab.experiment import build_config, run_experiment, run_sweep
from normlab.experiment.sweep import GRIDS
from normlab.models import ModelSpec, build_model, count_params, norm_channel_total
from normlab.norm import NormLayerConfig
from normlab.norm.layers import BatchNorm2d, IEBN2d
from normlab.oracles import (gradcheck_suite, identity_suite, init_equivalence_reports,
                             oracle_equivalence_suite)

from conftest import tiny_overrides

ROOT = Path(__file__).resolve().parents[1]
SEEDS = (0, 1, 2)


def failures(reports):
    return [f"{r.check} ({r.fingerprint}): {r.discrepancy:.2e} > {r.tolerance:.0e} {r.message}"
            for r in reports if not r.passed]


def worst(reports):
    return max(r.discrepancy for r in reports)


def test_criterion_01_oracle_equivalence(criterion):
    with criterion(1, "oracle equivalence, 50 inputs per layer kind, < 1e-12 in < 30 s") as c:
        start = time.perf_counter()
        reports = oracle_equivalence_suite(count=50)
        elapsed = time.perf_counter() - start
        kinds = {r.check.split(":")[1].split("[")[0] for r in reports}
        per_kind = {k: sum(r.check.split(":")[1].startswith(k) for r in reports) for k in kinds}
        c.detail = f"{len(reports)} checks, max {worst(reports):.2e}, {elapsed:.1f}s"
        assert {"bn", "in", "se", "iebn"} <= kinds, kinds
        assert min(per_kind[k] for k in ("bn", "in", "se", "iebn")) >= 50, per_kind
        assert not failures(reports), failures(reports)[:5]
        assert elapsed < 30.0


def test_criterion_02_gradcheck(criterion):
    with criterion(2, "gradcheck, all layers and 36 IEBN knob settings, rel < 1e-4") as c:
        start = time.perf_counter()
        reports = gradcheck_suite()
        elapsed = time.perf_counter() - start
        c.detail = f"{len(reports)} checks, max rel {worst(reports):.2e}, {elapsed:.1f}s"
        assert sum(r.check.startswith("gradcheck:iebn[") for r in reports) == 36
        assert not failures(reports), failures(reports)[:5]
        assert elapsed < 300.0


def test_criterion_03_identities(criterion):
    with criterion(3, "rescaling forms and noise neutralization, < 1e-10") as c:
        start = time.perf_counter()
        reports = identity_suite(seeds=range(10))
        elapsed = time.perf_counter() - start
        c.detail = f"{len(reports)} checks, max {worst(reports):.2e}, {elapsed:.1f}s"
        for pair in ("0.8,0.8", "0.8,0.5", "0.5,0.5", "0.5,0.2"):
            assert any(f"[{pair}," in r.check for r in reports), pair
        assert not failures(reports), failures(reports)[:5]
        assert elapsed < 60.0


def test_criterion_04_init_equivalence(criterion):
    with criterion(4, "IEBN at init equals BN with gamma * sigmoid(-1), < 1e-12") as c:
        reports = init_equivalence_reports()
        rng = np.random.default_rng(4)
        with precision(np.float64):
            iebn, bn = IEBN2d(16), BatchNorm2d(16)
        gamma, beta = rng.normal(size=16), rng.normal(size=16)
        iebn.gamma.data, iebn.beta.data = gamma.copy(), beta.copy()
        bn.gamma.data, bn.beta.data = gamma / (1.0 + np.e), beta.copy()
        x = Tensor(rng.normal(2.0, 3.0, size=(8, 16, 6, 6)), dtype=np.float64)
        direct = [np.abs(iebn(x).data - bn(x).data).max()]
        iebn.eval(), bn.eval()
        direct.append(np.abs(iebn(x).data - bn(x).data).max())
        c.detail = f"max {max(worst(reports), *direct):.2e} (train and eval)"
        assert not failures(reports), failures(reports)
        assert max(direct) <= 1e-12


def test_criterion_05_parameter_accounting(criterion):
    with criterion(5, "param_count(IEBN) - param_count(BN) = 2 x norm channels") as c:
        bn = build_model(ModelSpec(norm=NormLayerConfig(kind="bn")))
        iebn = build_model(ModelSpec(norm=NormLayerConfig(kind="iebn")))
        channels = norm_channel_total(bn)
        diff = count_params(iebn)[0] - count_params(bn)[0]
        c.detail = f"BN {count_params(bn)[0]}, IEBN {count_params(iebn)[0]}, diff {diff}, channels {channels}"
        assert diff == 2 * channels


def test_criterion_06_determinism(criterion, tmp_path):
    with criterion(6, "same config and seed give identical CSV and checkpoint hash") as c:
        extra = {"norm.kind": "iebn", "model.widths": [16, 32, 64], "model.blocks_per_stage": 3,
                 "attack": "constant:0.8,0.5"}
        runs = [run_experiment(build_config(overrides=tiny_overrides(tmp_path / name, **extra)), 2)
                for name in ("first", "second")]
        csvs = [(r.out_dir / "metrics.csv").read_bytes() for r in runs]
        hashes = [r.summary["checkpoint_hash"] for r in runs]
        c.detail = f"checkpoint {hashes[0][:12]}"
        assert csvs[0] == csvs[1]
        assert hashes[0] == hashes[1]


# -- desk-scale training trends -------------------------------------------------

def data_root() -> Path:
    root = os.environ.get("NORMLAB_DATA")
    if not root or not Path(root).is_dir():
        pytest.fail("CIFAR-10 data not available: set NORMLAB_DATA to a directory with "
                    "cifar-10-batches-bin/ (and mnist/ for the mix attack)", pytrace=False)
    return Path(root)


def desk_runs(out: Path, norm: str, **extra) -> list[float]:
    """Final test accuracy per seed for the reference model on the 5k CIFAR-10 subset."""
    overrides = {"data.data_dir": str(data_root()), "norm.kind": norm, "out": str(out / norm)}
    overrides.update(extra)
    config = build_config(ROOT / "configs" / "desk_cifar10.yaml", overrides)
    return [run_experiment(config, seed).final_test_acc for seed in SEEDS]


@pytest.mark.slow
def test_criterion_07_clean_trend(criterion, tmp_path):
    with criterion(7, "clean 5k CIFAR-10: IEBN >= BN - 0.5 pp, and >= BN in 2 of 3 seeds") as c:
        bn = desk_runs(tmp_path, "bn")
        iebn = desk_runs(tmp_path, "iebn")
        wins = sum(i >= b for i, b in zip(iebn, bn))
        c.detail = f"BN {np.mean(bn):.2f} {bn}, IEBN {np.mean(iebn):.2f} {iebn}"
        assert np.mean(iebn) >= np.mean(bn) - 0.5
        assert wins >= 2


@pytest.mark.slow
def test_criterion_08_constant_noise_trend(criterion, tmp_path):
    with criterion(8, "noise (0.5,0.5): mean IEBN > mean BN and std BN >= std IEBN") as c:
        bn = desk_runs(tmp_path, "bn", attack="constant:0.5,0.5")
        iebn = desk_runs(tmp_path, "iebn", attack="constant:0.5,0.5")
        c.detail = (f"BN {np.mean(bn):.2f}+-{np.std(bn, ddof=1):.2f}, "
                    f"IEBN {np.mean(iebn):.2f}+-{np.std(iebn, ddof=1):.2f}")
        assert np.mean(iebn) > np.mean(bn)
        assert np.std(bn, ddof=1) >= np.std(iebn, ddof=1)


@pytest.mark.slow
def test_criterion_09_mix_trend(criterion, tmp_path):
    with criterion(9, "MNIST mix k=2: IEBN accuracy drop <= BN accuracy drop") as c:
        root = data_root()
        mix = {"attack": "mix:mnist,k=2", "data.contaminant_dir": str(root / "mnist")}
        drops = {}
        for norm in ("bn", "iebn"):
            clean = desk_runs(tmp_path / "clean", norm)
            attacked = desk_runs(tmp_path / "mix", norm, **mix)
            drops[norm] = float(np.mean(clean) - np.mean(attacked))
        c.detail = f"drop BN {drops['bn']:.2f} pp, IEBN {drops['iebn']:.2f} pp"
        assert drops["iebn"] <= drops["bn"]


@pytest.mark.slow
def test_criterion_10_ablation_smoke(criterion, tmp_path):
    with criterion(10, "ablation grid (9 init, 3 operator, 3 position, 4 activation) completes") as c:
        base = build_config(ROOT / "configs" / "ablation_smoke.yaml", {"out": str(tmp_path)})
        assert base.schedule.epochs == 10
        grid = GRIDS["init"] + GRIDS["operator"] + GRIDS["position"] + GRIDS["activation"]
        results = run_sweep(base, grid)
        failed = [f"{r.cell}: {r.error}" for r in results if r.status != "completed"]
        summary = (tmp_path / "sweep_summary.csv").read_text().splitlines()
        means = [r.row()["mean_test_acc"] for r in results]
        c.detail = f"{len(results) - len(failed)}/{len(results)} cells completed"
        assert len(results) == 19 and not failed, failed
        assert len(summary) == 20
        assert all(np.isfinite(float(m)) for m in means)
