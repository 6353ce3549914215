"""Conditional-GAN training on an exported seed set.

The export is oversampled with pixel jitter, then generator and discriminator
alternate updates: the discriminator scores real conditioned samples against
generated ones, the generator descends log(1 - D(G(z|c))) with conditions
drawn only from the labels the server actually received. A fixed epoch budget
stands in for convergence.

The discriminator's fake side also includes real images paired with wrong
labels (a matching-aware discriminator); without those negatives nothing ties
the generator's output to its condition at this data scale and training
collapses onto a single glyph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .models import Discriminator, Generator
from .wire import NUM_LABELS, SeedExport


class EmptyExportError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    noise_dim: int = 32
    oversample_factor: int = 10
    lr_generator: float = 2e-4
    lr_discriminator: float = 1e-4
    generator_steps: int = 2  # generator updates per discriminator update
    eval_split: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        for name in ("epochs", "batch_size", "noise_dim", "oversample_factor", "generator_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 < self.eval_split < 1.0:
            raise ValueError("eval_split must lie in (0, 1)")


@dataclass
class TrainResult:
    generator: Generator
    condition_labels: list[int]  # labels the generator was conditioned on
    skipped_labels: list[int]  # in the SDI but without any delivered sample
    loss_trajectory: list[tuple[float, float]] = field(repr=False)  # (d_loss, g_loss)


def oversample_jitter(
    images: np.ndarray, labels: np.ndarray, factor: int, rng: np.random.Generator,
    max_shift: int = 1, noise_sigma: float = 8.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Replicate every sample `factor` times with shift + intensity jitter."""
    reps = np.repeat(images, factor, axis=0).astype(np.float64)
    out_labels = np.repeat(labels, factor)
    if max_shift > 0:
        shifts = rng.integers(-max_shift, max_shift + 1, size=(len(reps), 2))
        for k in range(len(reps)):
            reps[k] = np.roll(reps[k], tuple(shifts[k]), axis=(0, 1))
    if noise_sigma > 0:
        reps += rng.normal(0.0, noise_sigma, size=reps.shape)
    return np.clip(np.rint(reps), 0, 255).astype(np.uint8), out_labels


def train_cgan(export: SeedExport, cfg: TrainConfig) -> TrainResult:
    """Train the generator on the delivered seed set; deterministic given cfg.seed."""
    cfg.validate()
    if len(export) == 0:
        raise EmptyExportError("seed export holds no samples")

    present = sorted(set(int(lab) for lab in export.labels))
    skipped = [lab for lab in export.sdi_labels if lab not in present]

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)

    images, labels = oversample_jitter(export.images, export.labels, cfg.oversample_factor, rng)
    data = torch.from_numpy(images).float() / 255.0
    targets = torch.from_numpy(labels).long()

    gen = Generator(cfg.noise_dim)
    disc = Discriminator()
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_generator, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_discriminator, betas=(0.5, 0.999))
    eps = 1e-7

    condition_pool = torch.tensor(present, dtype=torch.long)
    n = len(data)
    trajectory: list[tuple[float, float]] = []
    for _ in range(cfg.epochs):
        order = torch.from_numpy(rng.permutation(n))
        d_losses, g_losses = [], []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            real = data[idx]
            real_labels = targets[idx]
            batch = len(idx)

            # Discriminator: real conditioned samples up; generated samples
            # and label-mismatched real pairs down.
            z = torch.from_numpy(rng.standard_normal((batch, cfg.noise_dim))).float()
            cond = condition_pool[
                torch.from_numpy(rng.integers(0, len(condition_pool), size=batch))
            ]
            with torch.no_grad():
                fake = gen(z, cond)
            mismatched = (
                real_labels + torch.from_numpy(rng.integers(1, NUM_LABELS, size=batch))
            ) % NUM_LABELS
            d_real = disc(real, real_labels)
            d_fake = disc(fake, cond)
            d_wrong = disc(real, mismatched)
            d_loss = -(
                torch.log(d_real + eps).mean()
                + torch.log(1 - d_fake + eps).mean()
                + torch.log(1 - d_wrong + eps).mean()
            )
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            # Generator: descend log(1 - D(G(z|c))), conditions from the SDI.
            for _ in range(cfg.generator_steps):
                z = torch.from_numpy(rng.standard_normal((batch, cfg.noise_dim))).float()
                cond = condition_pool[
                    torch.from_numpy(rng.integers(0, len(condition_pool), size=batch))
                ]
                g_out = disc(gen(z, cond), cond)
                g_loss = torch.log(1 - g_out + eps).mean()
                opt_g.zero_grad()
                g_loss.backward()
                opt_g.step()

            d_losses.append(float(d_loss.detach()))
            g_losses.append(float(g_loss.detach()))
        trajectory.append((float(np.mean(d_losses)), float(np.mean(g_losses))))

    gen.eval()
    return TrainResult(
        generator=gen,
        condition_labels=present,
        skipped_labels=skipped,
        loss_trajectory=trajectory,
    )


def generate(
    result: TrainResult, label: int, count: int, cfg: TrainConfig, seed: int | None = None
) -> np.ndarray:
    """Sample `count` images (uint8) from the trained generator for one label."""
    gen_seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng((gen_seed, label))
    z = torch.from_numpy(rng.standard_normal((count, cfg.noise_dim))).float()
    labels = torch.full((count,), label, dtype=torch.long)
    with torch.no_grad():
        out = result.generator(z, labels).numpy()
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)
