"""augtrainer: train a conditional generator from an exported seed-sample file.

Reads the delivered seed set written by the collection simulator (wire format
plus JSON sidecar), oversamples it, trains a small conditional GAN, and
evaluates both the generator (oracle-classifier F1) and the downstream effect
of augmentation on per-device classifiers. Everything runs at desk scale on
CPU.
"""

__version__ = "0.1.0"

from .train import TrainConfig, train_cgan
from .evaluate import QualityReport, augment_and_eval

__all__ = ["TrainConfig", "train_cgan", "QualityReport", "augment_and_eval"]
