"""Network definitions: conditional generator/discriminator and classifiers."""

from __future__ import annotations

import torch
from torch import nn

IMAGE_SIDE = 28
NUM_LABELS = 10
PIXELS = IMAGE_SIDE * IMAGE_SIDE


def one_hot(labels: torch.Tensor) -> torch.Tensor:
    return torch.nn.functional.one_hot(labels.long(), NUM_LABELS).float()


class Generator(nn.Module):
    """Noise + label one-hot -> image in [0, 1]."""

    def __init__(self, noise_dim: int = 32):
        super().__init__()
        self.noise_dim = noise_dim
        self.net = nn.Sequential(
            nn.Linear(noise_dim + NUM_LABELS, 256),
            nn.BatchNorm1d(256),
            nn.LeakyReLU(0.2),
            nn.Linear(256, 512),
            nn.BatchNorm1d(512),
            nn.LeakyReLU(0.2),
            nn.Linear(512, PIXELS),
            nn.Sigmoid(),
        )

    def forward(self, z: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        out = self.net(torch.cat([z, one_hot(labels)], dim=1))
        return out.view(-1, IMAGE_SIDE, IMAGE_SIDE)


class Discriminator(nn.Module):
    """Image + label one-hot -> probability the sample is real."""

    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(PIXELS + NUM_LABELS, 512),
            nn.LeakyReLU(0.2),
            nn.Dropout(0.3),
            nn.Linear(512, 256),
            nn.LeakyReLU(0.2),
            nn.Dropout(0.3),
            nn.Linear(256, 1),
            nn.Sigmoid(),
        )

    def forward(self, images: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        flat = images.view(len(images), -1)
        return self.net(torch.cat([flat, one_hot(labels)], dim=1)).squeeze(1)


class EvalClassifier(nn.Module):
    """Per-device classifier: 2 conv, 1 max-pool, flatten, 2 dense."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 16, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Flatten(),
        )
        self.head = nn.Sequential(
            nn.Linear(32 * 14 * 14, 128),
            nn.ReLU(),
            nn.Linear(128, NUM_LABELS),
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(images.unsqueeze(1)))


class OracleClassifier(nn.Module):
    """Independent digit classifier trained on pristine glyphs only."""

    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(1, 8, 5, stride=2, padding=2),
            nn.ReLU(),
            nn.Conv2d(8, 16, 5, stride=2, padding=2),
            nn.ReLU(),
            nn.Flatten(),
            nn.Linear(16 * 7 * 7, 64),
            nn.ReLU(),
            nn.Linear(64, NUM_LABELS),
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images.unsqueeze(1))
