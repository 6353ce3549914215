"""Secondary acceptance: generator sanity and the augmentation direction.

These train real (toy-scale) conditional GANs, so the module takes several
minutes; run with `pytest tests/test_acceptance.py -s` for the PASS/FAIL
lines. Everything is seeded.
"""

import numpy as np
import pytest

from augtrainer import evaluate, train, wire
from augtrainer.train import TrainConfig
from conftest import make_export

SEEDS = [0, 1, 2, 3, 4]


def _report(name: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"{tag}: {name}{suffix}")
    assert ok, f"{name}{suffix}"


@pytest.fixture(scope="module")
def trained(export_dir):
    """Five collection seeds per compression setting, one training each."""
    out = {}
    for rho in (0.0, 0.15):
        runs = []
        for k, seed in enumerate(SEEDS):
            export = wire.load_export(str(make_export(export_dir, rho=rho, seed=40 + k)))
            cfg = TrainConfig(seed=seed)
            result = train.train_cgan(export, cfg)
            precision, recall, f1 = evaluate.generator_quality(result, cfg)
            runs.append(
                {
                    "export": export,
                    "cfg": cfg,
                    "result": result,
                    "precision": precision,
                    "recall": recall,
                    "f1": f1,
                }
            )
        out[rho] = runs
    return out


def test_generator_oracle_accuracy_and_f1_ordering(trained):
    accs = [float(np.mean(list(r["precision"].values()))) for r in trained[0.0]]
    mean_acc = float(np.mean(accs))
    _report(
        "oracle-classifier accuracy on generated samples >= 0.6 at rho=0",
        mean_acc >= 0.6,
        f"per-seed={[round(a, 2) for a in accs]}, mean={mean_acc:.2f}",
    )

    f1_clean = float(np.mean([r["f1"] for r in trained[0.0]]))
    f1_squeezed = float(np.mean([r["f1"] for r in trained[0.15]]))
    _report(
        "mean generator F1 at rho=0 exceeds F1 at rho=0.15 over 5 seeds",
        f1_clean > f1_squeezed,
        f"f1(0)={f1_clean:.3f}, f1(0.15)={f1_squeezed:.3f}",
    )


def test_augmentation_direction(trained):
    befores, afters = [], []
    gen_counts = []
    for run in trained[0.0]:
        sidecar = run["export"].sidecar
        spec = sidecar["devices"][0]
        report = evaluate.augment_and_eval(
            run["result"],
            [spec],
            run["cfg"],
            target_count=sidecar["target_count"],
            full_count=sidecar["full_count"],
        )
        (dev,) = report.devices
        befores.append(dev.accuracy_before)
        afters.append(dev.accuracy_after)
        gen_counts.append(dev.generated_per_target)
    _report(
        "each device generates full_count - target_count samples per target label",
        all(g == 196 for g in gen_counts),
        f"counts={gen_counts}",
    )
    mean_before, mean_after = float(np.mean(befores)), float(np.mean(afters))
    _report(
        "mean test accuracy after augmentation >= before over 5 seeds",
        mean_after >= mean_before,
        f"before={mean_before:.3f}, after={mean_after:.3f}",
    )
