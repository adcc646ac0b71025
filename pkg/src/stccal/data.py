"""Multi-view dataset container and synthetic generators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class MultiViewDataset:
    """
    ``m`` views of the same ``N`` samples plus integer labels.

    ``views[p]`` has shape ``(d_p, N)`` (features along rows, samples along
    columns). Labels are integers in ``[0, n_classes)``.
    """

    views: tuple
    labels: np.ndarray
    names: tuple = field(default=())
    n_classes: int | None = None

    def __post_init__(self):
        views = tuple(np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in self.views)
        labels = np.asarray(self.labels)
        if len(views) < 1:
            raise DatasetError("dataset needs at least one view")
        if labels.ndim != 1:
            raise DatasetError(f"labels must be one-dimensional, got shape {labels.shape}")
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise DatasetError("labels must be integers")
        labels = labels.astype(np.int64)
        n = labels.size
        for p, v in enumerate(views):
            if v.shape[1] != n:
                raise DatasetError(f"view {p} has {v.shape[1]} samples, labels have {n}")
        if n and labels.min() < 0:
            raise DatasetError("labels must be nonnegative")
        n_classes = self.n_classes
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if n else 0
        elif n and labels.max() >= n_classes:
            raise DatasetError(f"label {labels.max()} outside [0, {n_classes})")
        names = tuple(self.names) if self.names else tuple(f"view{p}" for p in range(len(views)))
        if len(names) != len(views):
            raise DatasetError(f"{len(names)} view names for {len(views)} views")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "n_classes", int(n_classes))

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [v.shape[0] for v in self.views]

    def subset(self, idx) -> "MultiViewDataset":
        idx = np.asarray(idx)
        return MultiViewDataset(tuple(v[:, idx] for v in self.views), self.labels[idx],
                                self.names, self.n_classes)

    def with_views(self, views: Sequence) -> "MultiViewDataset":
        return MultiViewDataset(tuple(views), self.labels, self.names, self.n_classes)


def _balanced_labels(n_samples: int, n_classes: int) -> np.ndarray:
    return np.arange(n_samples) % n_classes


def _center(views):
    return [v - v.mean(axis=1, keepdims=True) for v in views]


def make_latent_blobs(n_samples: int = 300, dims: Sequence[int] = (10, 10, 10), n_classes: int = 3,
                      latent_dim: int = 3, separation: float = 3.0, noise: float = 1.0,
                      seed=0, center: bool = True) -> MultiViewDataset:
    """
    Gaussian blobs in a shared latent space, mapped linearly into every view.

    Sample n has latent ``z_n = mu_{y_n} + e_n``, ``e_n ~ N(0, I)``; view p is
    ``A_p z_n + noise * eps``. When ``n_classes <= latent_dim`` the class means
    sit on random orthonormal directions at mutual distance exactly
    ``separation``; otherwise they are Gaussian with that expected spacing.
    """
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n_samples, n_classes)
    if n_classes <= latent_dim:
        q, _ = np.linalg.qr(rng.standard_normal((latent_dim, n_classes)))
        means = q.T * (separation / np.sqrt(2.0))
    else:
        means = rng.standard_normal((n_classes, latent_dim)) * (separation / np.sqrt(2.0 * latent_dim))
    z = means[labels] + rng.standard_normal((n_samples, latent_dim))
    views = []
    for d in dims:
        a = rng.standard_normal((d, latent_dim)) / np.sqrt(latent_dim)
        views.append(a @ z.T + noise * rng.standard_normal((d, n_samples)))
    if center:
        views = _center(views)
    return MultiViewDataset(tuple(views), labels, n_classes=n_classes)


def make_manifold_clusters(n_samples: int = 300, dims: Sequence[int] = (12, 12, 12), n_classes: int = 3,
                           noise_dims: int = 6, noise: float = 0.15, nuisance: float = 1.5,
                           seed=0, center: bool = True) -> MultiViewDataset:
    """
    Classes on separate one-dimensional arcs, shared across views.

    Every class traces an arc of a circle in a 3-D latent space; each view
    embeds the latent arcs through a random linear map into its first
    ``d - noise_dims`` features and fills the remaining ``noise_dims``
    features with high-variance nuisance noise unrelated to the classes.
    """
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n_samples, n_classes)
    theta = rng.uniform(0.0, 1.5 * np.pi, n_samples)
    centers = 2.5 * rng.standard_normal((n_classes, 3))
    radius = 1.5
    latent = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), 0.3 * theta])
    latent += centers[labels]
    views = []
    for d in dims:
        informative = d - noise_dims
        if informative < 1:
            raise DatasetError(f"view dimension {d} leaves no informative features")
        a = rng.standard_normal((informative, 3)) / np.sqrt(3.0)
        sig = a @ latent.T + noise * rng.standard_normal((informative, n_samples))
        junk = nuisance * rng.standard_normal((noise_dims, n_samples))
        views.append(np.vstack([sig, junk]))
    if center:
        views = _center(views)
    return MultiViewDataset(tuple(views), labels, n_classes=n_classes)
