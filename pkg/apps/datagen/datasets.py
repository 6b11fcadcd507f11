"""
Dataset containers and the synthetic Gaussian-mixture generator.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .exceptions import DatasetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    Feature matrix with integer class labels in [0, n_classes).
    """
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DatasetError(f"Features must be a 2-D matrix, got shape {features.shape}")
        if features.shape[0] != labels.shape[0]:
            raise DatasetError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        if features.shape[0] < 1:
            raise DatasetError("A dataset needs at least one sample")
        if np.isnan(features).any():
            raise DatasetError("Features contain NaN")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise DatasetError(f"Labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class ShardAssignment:
    """
    Per-agent train/test shards. `groups` holds each agent's label set (label
    skew) or writer ids (feature skew); the index arrays point into the source
    dataset.
    """
    regime: str
    train: List[Dataset]
    test: List[Dataset]
    groups: List[Tuple[int, ...]]
    train_indices: List[np.ndarray] = field(repr=False)
    test_indices: List[np.ndarray] = field(repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.train)

    def summary(self) -> List[dict]:
        return [
            {
                'agent': i,
                'group': list(self.groups[i]),
                'n_train': len(self.train[i]),
                'n_test': len(self.test[i]),
            }
            for i in range(self.n_agents)
        ]


def gen_gaussian_mixture(n_classes: int, n_features: int, per_class: int,
                         separation: float, seed: int) -> Dataset:
    """
    Balanced Gaussian mixture: class means on a sphere of radius `separation`,
    unit-variance isotropic noise. When n_classes <= n_features the means are
    mutually orthogonal directions of a random rotation.
    """
    if n_classes < 2:
        raise DatasetError(f"Need at least 2 classes, got {n_classes}")
    if n_features < 2:
        raise DatasetError(f"Need at least 2 feature dimensions, got {n_features}")
    if separation <= 0:
        raise DatasetError(f"Separation must be positive, got {separation}")
    if per_class < 1:
        raise DatasetError(f"Need at least one sample per class, got {per_class}")

    rng = np.random.default_rng(seed)
    if n_classes <= n_features:
        q, r = np.linalg.qr(rng.standard_normal((n_features, n_features)))
        q = q * np.sign(np.diag(r))
        directions = q[:, :n_classes].T
    else:
        directions = rng.standard_normal((n_classes, n_features))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = separation * directions

    labels = np.repeat(np.arange(n_classes), per_class)
    features = means[labels] + rng.standard_normal((labels.size, n_features))
    logger.debug(f"Gaussian mixture: {n_classes} classes x {per_class} samples in {n_features} dims")
    return Dataset(features, labels, n_classes)
