"""Generator quality scoring and per-device augmentation evaluation.

The oracle classifier is trained on pristine locally rendered glyphs and never
sees generator output, so precision/recall of the generator are measured
against an independent judge. Device-side evaluation rebuilds each device's
non-IID stock from the export sidecar, then compares a small CNN trained on
the raw stock against one trained with generated samples topping up the
target labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .models import EvalClassifier, NUM_LABELS, OracleClassifier
from .synth import render_device_dataset, render_digits
from .train import TrainConfig, TrainResult, generate

GENERABLE_THRESHOLD = 0.5  # oracle accuracy at which a label counts as generable


@dataclass
class DeviceEval:
    device_id: int
    target_labels: list[int]
    accuracy_before: float
    accuracy_after: float
    generated_per_target: int


@dataclass
class QualityReport:
    schema: str
    per_label_precision: dict[int, float]
    recall: float
    f1: float
    condition_labels: list[int]
    skipped_labels: list[int]
    devices: list[DeviceEval] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "schema": self.schema,
            "per_label_precision": {str(k): v for k, v in self.per_label_precision.items()},
            "recall": self.recall,
            "f1": self.f1,
            "condition_labels": self.condition_labels,
            "skipped_labels": self.skipped_labels,
            "devices": [
                {
                    "device_id": d.device_id,
                    "target_labels": d.target_labels,
                    "accuracy_before": d.accuracy_before,
                    "accuracy_after": d.accuracy_after,
                    "generated_per_target": d.generated_per_target,
                }
                for d in self.devices
            ],
        }


def fit_classifier(
    model: torch.nn.Module,
    images: np.ndarray,
    labels: np.ndarray,
    epochs: int = 5,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
) -> torch.nn.Module:
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    data = torch.from_numpy(images).float() / 255.0
    targets = torch.from_numpy(np.asarray(labels)).long()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = torch.nn.CrossEntropyLoss()
    n = len(data)
    for _ in range(epochs):
        order = torch.from_numpy(rng.permutation(n))
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(data[idx]), targets[idx])
            loss.backward()
            opt.step()
    model.eval()
    return model


def classify(model: torch.nn.Module, images: np.ndarray) -> np.ndarray:
    data = torch.from_numpy(images).float() / 255.0
    with torch.no_grad():
        logits = model(data)
    return logits.argmax(dim=1).numpy()


def accuracy(model: torch.nn.Module, images: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(classify(model, images) == np.asarray(labels)))


_ORACLE_CACHE: dict[int, torch.nn.Module] = {}


def oracle_classifier(seed: int = 911, per_label: int = 300) -> torch.nn.Module:
    """CNN judge trained on pristine glyphs; cached per process."""
    if seed not in _ORACLE_CACHE:
        images, labels = render_digits(np.random.default_rng(seed), per_label)
        model = fit_classifier(OracleClassifier(), images, labels, epochs=4, seed=seed)
        _ORACLE_CACHE[seed] = model
    return _ORACLE_CACHE[seed]


def generator_quality(
    result: TrainResult, cfg: TrainConfig, samples_per_label: int = 50
) -> tuple[dict[int, float], float, float]:
    """Per-label precision, recall over the ten labels, and their harmonic mean.

    Precision of a label: fraction of samples generated under that condition
    which the oracle assigns back to it. A label is generable when its
    precision reaches GENERABLE_THRESHOLD; recall is the generable fraction of
    the full label alphabet (labels the generator never saw cannot succeed).
    """
    oracle = oracle_classifier()
    precision: dict[int, float] = {}
    for label in result.condition_labels:
        fake = generate(result, label, samples_per_label, cfg)
        assigned = classify(oracle, fake)
        precision[label] = float(np.mean(assigned == label))
    generable = sum(1 for p in precision.values() if p >= GENERABLE_THRESHOLD)
    recall = generable / NUM_LABELS
    macro_precision = float(np.mean(list(precision.values()))) if precision else 0.0
    f1 = (
        2 * macro_precision * recall / (macro_precision + recall)
        if macro_precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def augment_and_eval(
    result: TrainResult,
    device_specs: list[dict],
    cfg: TrainConfig,
    target_count: int,
    full_count: int,
    eval_per_label: int = 50,
    classifier_epochs: int = 5,
) -> QualityReport:
    """Score the generator, then each requested device before/after augmentation.

    `device_specs` entries need `device_id` and `target_labels` (the export
    sidecar's device list has exactly this shape). Each device tops every
    target label up to full_count with generated samples, trains the same
    classifier on the raw and augmented stocks, and reports held-out accuracy.
    """
    precision, recall, f1 = generator_quality(result, cfg)
    report = QualityReport(
        schema="augtrainer-quality-v1",
        per_label_precision=precision,
        recall=recall,
        f1=f1,
        condition_labels=result.condition_labels,
        skipped_labels=result.skipped_labels,
    )

    test_images, test_labels = render_digits(
        np.random.default_rng(cfg.seed + 104729), eval_per_label
    )
    need = full_count - target_count
    for spec in device_specs:
        dev_id = int(spec["device_id"])
        targets = [int(t) for t in spec["target_labels"]]
        rng = np.random.default_rng((cfg.seed, dev_id))
        raw_images, raw_labels = render_device_dataset(rng, targets, target_count, full_count)

        before = fit_classifier(
            EvalClassifier(), raw_images, raw_labels,
            epochs=classifier_epochs, seed=cfg.seed + dev_id,
        )
        acc_before = accuracy(before, test_images, test_labels)

        if need > 0:
            extra_images = [raw_images]
            extra_labels = [raw_labels]
            for t in targets:
                extra_images.append(generate(result, t, need, cfg, seed=cfg.seed + dev_id))
                extra_labels.append(np.full(need, t, dtype=np.int64))
            aug_images = np.concatenate(extra_images)
            aug_labels = np.concatenate(extra_labels)
            after = fit_classifier(
                EvalClassifier(), aug_images, aug_labels,
                epochs=classifier_epochs, seed=cfg.seed + dev_id,
            )
            acc_after = accuracy(after, test_images, test_labels)
        else:
            acc_after = acc_before

        report.devices.append(
            DeviceEval(
                device_id=dev_id,
                target_labels=targets,
                accuracy_before=acc_before,
                accuracy_after=acc_after,
                generated_per_target=max(0, need),
            )
        )
    return report
