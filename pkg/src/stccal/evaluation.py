"""
Evaluation protocol: per-view PCA, projection, k-NN classification,
accuracy / macro-F1 over repeated stratified splits, noise injection and
runtime-vs-N measurement.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.model_selection import train_test_split

from .data import MultiViewDataset
from .errors import DatasetError, DimensionError, ParameterError
from .solver import ProblemConfig, fit

log = logging.getLogger(__name__)

METHODS = ("stccal", "pca_knn")


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows are principal directions
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def transform(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.components @ (x - self.mean[:, None])

    def inverse_transform(self, z) -> np.ndarray:
        return self.components.T @ np.asarray(z) + self.mean[:, None]


def pca_fit(x, target_dim: int) -> PCAModel:
    """
    Principal directions of a ``(d, N)`` view, descending variance.

    Each direction's largest-magnitude loading is made positive.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d, n = x.shape
    if not 1 <= target_dim <= min(d, n):
        raise ParameterError(f"target_dim={target_dim} must lie in [1, {min(d, n)}]")
    mean = x.mean(axis=1)
    xc = x - mean[:, None]
    # SVD of the centered data: left singular vectors are the directions
    u, s, _ = np.linalg.svd(xc, full_matrices=False)
    comps = u[:, :target_dim].T.copy()
    idx = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(target_dim), idx])[:, None]
    var = s**2 / max(n - 1, 1)
    total = var.sum()
    ratio = var / total if total > 0 else np.zeros_like(var)
    return PCAModel(mean, comps, var[:target_dim], ratio[:target_dim])


def pca_reduce(x, target_dim: int) -> np.ndarray:
    """Fit PCA on ``x`` and return its ``(target_dim, N)`` scores."""
    return pca_fit(x, target_dim).transform(x)


def _pca_dims(dataset: MultiViewDataset, cap: int, n_train: int) -> list[int]:
    return [max(1, min(cap, d, n_train)) for d in dataset.dims]


def reduce_views(train: MultiViewDataset, test: MultiViewDataset | None, pca_dim: int):
    """Per-view PCA fitted on ``train`` only and applied to both splits."""
    dims = _pca_dims(train, pca_dim, train.n_samples)
    models = [pca_fit(x, k) for x, k in zip(train.views, dims)]
    tr = train.with_views([mdl.transform(x) for mdl, x in zip(models, train.views)])
    te = None
    if test is not None:
        te = test.with_views([mdl.transform(x) for mdl, x in zip(models, test.views)])
    return tr, te, models


def project(data, projections: Sequence) -> np.ndarray:
    """Concatenated embeddings ``[X_1^T H_1, ..., X_m^T H_m]``, shape ``(N, m r)``."""
    views = data.views if isinstance(data, MultiViewDataset) else data
    if len(views) != len(projections):
        raise DimensionError(f"{len(projections)} projections for {len(views)} views")
    blocks = []
    for p, (x, h) in enumerate(zip(views, projections)):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = np.atleast_2d(np.asarray(h, dtype=np.float64))
        if x.shape[0] != h.shape[0]:
            raise DimensionError(f"view {p} has {x.shape[0]} features, projection has {h.shape[0]} rows")
        blocks.append(x.T @ h)
    return np.hstack(blocks)


def knn_classify(train_z, train_labels, test_z, k: int = 5) -> np.ndarray:
    """
    Euclidean k-NN majority vote.

    Ties in the vote go to the label with the smallest summed distance over
    its voters, then to the smallest label.
    """
    train_z = np.atleast_2d(np.asarray(train_z, dtype=np.float64))
    test_z = np.atleast_2d(np.asarray(test_z, dtype=np.float64))
    train_labels = np.asarray(train_labels)
    n_train = train_z.shape[0]
    if n_train == 0:
        raise DatasetError("k-NN needs a nonempty training set")
    if not 1 <= k <= n_train:
        raise ParameterError(f"k={k} must lie in [1, {n_train}]")
    d2 = (np.sum(test_z**2, axis=1)[:, None] + np.sum(train_z**2, axis=1)[None, :]
          - 2.0 * test_z @ train_z.T)
    dist = np.sqrt(np.maximum(d2, 0.0))
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    preds = np.empty(test_z.shape[0], dtype=train_labels.dtype)
    for i, row in enumerate(nbrs):
        labs = train_labels[row]
        ds = dist[i, row]
        uniq = np.unique(labs)
        votes = np.array([np.sum(labs == c) for c in uniq])
        totals = np.array([ds[labs == c].sum() for c in uniq])
        best = np.lexsort((uniq, totals, -votes))[0]
        preds[i] = uniq[best]
    return preds


def _check_pair(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction length {pred.shape} differs from truth {truth.shape}")
    return pred, truth


def accuracy(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        return 1.0
    return float(np.mean(pred == truth))


def f1_macro(pred, truth, n_classes: int | None = None) -> float:
    """
    Unweighted mean over classes of ``2TP / (2TP + FP + FN)``.

    Classes run over ``range(n_classes)`` (default: every label seen in
    either array); a class absent from both counts as 1.
    """
    pred, truth = _check_pair(pred, truth)
    if n_classes is None:
        classes = np.union1d(np.unique(pred), np.unique(truth))
    else:
        classes = np.arange(n_classes)
    if classes.size == 0:
        return 1.0
    scores = []
    for c in classes:
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        denom = 2 * tp + fp + fn
        scores.append(1.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


def stratified_split(labels, test_ratio: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train and test index arrays with per-class proportions preserved."""
    labels = np.asarray(labels)
    if not 0 < test_ratio < 1:
        raise ParameterError(f"test_ratio must lie in (0, 1), got {test_ratio}")
    counts = np.bincount(labels)
    present = counts[counts > 0]
    if present.size and present.min() < 2:
        raise DatasetError("every class needs at least 2 samples for a stratified split")
    idx = np.arange(labels.size)
    try:
        tr, te = train_test_split(idx, test_size=test_ratio, stratify=labels, random_state=seed)
    except ValueError as exc:
        raise DatasetError(f"stratified split failed: {exc}") from exc
    return np.sort(tr), np.sort(te)


@dataclass(frozen=True)
class EvalConfig:
    repeats: int = 10
    test_ratio: float = 0.3
    knn_k: int = 5
    pca_dim: int = 20
    method: str = "stccal"

    def __post_init__(self):
        if self.repeats < 1:
            raise ParameterError(f"repeats must be >= 1, got {self.repeats}")
        if not 0 < self.test_ratio < 1:
            raise ParameterError(f"test_ratio must lie in (0, 1), got {self.test_ratio}")
        if self.knn_k < 1:
            raise ParameterError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.pca_dim < 1:
            raise ParameterError(f"pca_dim must be >= 1, got {self.pca_dim}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass
class Report:
    accuracies: list
    f1_scores: list
    config: dict
    wall_times: list = field(default_factory=list)
    fit_iterations: list = field(default_factory=list)

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1_scores))

    @property
    def f1_std(self) -> float:
        return float(np.std(self.f1_scores))

    def summary(self) -> dict:
        """Deterministic, JSON-ready record (wall times excluded)."""
        return {
            "accuracy": {"mean": self.accuracy_mean, "std": self.accuracy_std,
                         "per_repeat": [float(a) for a in self.accuracies]},
            "f1_macro": {"mean": self.f1_mean, "std": self.f1_std,
                         "per_repeat": [float(f) for f in self.f1_scores]},
            "fit_iterations": [int(i) for i in self.fit_iterations],
            "config": self.config,
        }


def _repeat_seeds(seed: int, repeats: int) -> list[tuple[int, int]]:
    out = []
    for child in np.random.SeedSequence(seed).spawn(repeats):
        a, b = child.generate_state(2)
        out.append((int(a), int(b)))
    return out


def run_split(dataset: MultiViewDataset, train_idx, test_idx, cfg: ProblemConfig,
              eval_cfg: EvalConfig):
    """One train/test evaluation; returns ``(accuracy, f1, fit_iterations)``."""
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    tr, te, _ = reduce_views(train, test, eval_cfg.pca_dim)
    if eval_cfg.method == "pca_knn":
        z_tr = np.hstack([x.T for x in tr.views])
        z_te = np.hstack([x.T for x in te.views])
        iters = 0
    else:
        res = fit(tr, cfg)
        z_tr, z_te = project(tr, res.projections), project(te, res.projections)
        iters = res.iterations
    pred = knn_classify(z_tr, tr.labels, z_te, min(eval_cfg.knn_k, tr.n_samples))
    return accuracy(pred, te.labels), f1_macro(pred, te.labels, dataset.n_classes), iters


def benchmark(dataset: MultiViewDataset, cfg: ProblemConfig | None = None,
              eval_cfg: EvalConfig | None = None, seed: int = 0) -> Report:
    """Repeated stratified-split evaluation; each repeat fits on its train split only."""
    cfg = cfg or ProblemConfig()
    eval_cfg = eval_cfg or EvalConfig()
    accs, f1s, times, iters = [], [], [], []
    for rep, (split_seed, fit_seed) in enumerate(_repeat_seeds(seed, eval_cfg.repeats)):
        t0 = time.perf_counter()
        tr_idx, te_idx = stratified_split(dataset.labels, eval_cfg.test_ratio, split_seed)
        acc, f1, n_it = run_split(dataset, tr_idx, te_idx, cfg.replace(seed=fit_seed), eval_cfg)
        accs.append(acc)
        f1s.append(f1)
        iters.append(n_it)
        times.append(time.perf_counter() - t0)
        log.info("repeat %d: accuracy %.4f f1 %.4f", rep, acc, f1)
    config = {"problem": cfg.to_dict(), "eval": {
        "repeats": eval_cfg.repeats, "test_ratio": eval_cfg.test_ratio, "knn_k": eval_cfg.knn_k,
        "pca_dim": eval_cfg.pca_dim, "method": eval_cfg.method}, "seed": int(seed)}
    return Report(accs, f1s, config, times, iters)


def inject_noise(dataset: MultiViewDataset, fraction: float, sigma: float = 1.0,
                 seed=0) -> MultiViewDataset:
    """
    Corrupt a random ``fraction`` of the entries of every view.

    Selected entries of feature i receive additive ``N(0, (sigma * std_i)^2)``
    noise, ``std_i`` the standard deviation of that feature.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"noise fraction must lie in [0, 1], got {fraction}")
    if not sigma > 0:
        raise ParameterError(f"noise sigma must be positive, got {sigma}")
    if fraction == 0.0:
        return dataset
    rng = np.random.default_rng(seed)
    noisy = []
    for x in dataset.views:
        n_total = x.size
        n_hit = int(round(fraction * n_total))
        flat = rng.choice(n_total, size=n_hit, replace=False)
        std = x.std(axis=1)
        std = np.where(std > 0, std, 1.0)
        out = x.copy()
        rows, cols = np.unravel_index(flat, x.shape)
        out[rows, cols] += sigma * std[rows] * rng.standard_normal(n_hit)
        noisy.append(out)
    return dataset.with_views(noisy)


def stratified_subsample(labels, ratio: float, seed) -> np.ndarray:
    """Sorted indices of a class-stratified subsample of size ``round(ratio * N)``."""
    labels = np.asarray(labels)
    if not 0 < ratio <= 1:
        raise ParameterError(f"subsample ratio must lie in (0, 1], got {ratio}")
    if ratio == 1:
        return np.arange(labels.size)
    idx, _ = train_test_split(np.arange(labels.size), train_size=ratio, stratify=labels,
                              random_state=seed)
    return np.sort(idx)


def runtime_scaling(dataset: MultiViewDataset, cfg: ProblemConfig | None = None,
                    ratios: Sequence[float] = (0.25, 0.5, 1.0), seed: int = 0,
                    timing_repeats: int = 1) -> list[tuple[int, float]]:
    """
    Wall time of :func:`fit` on stratified subsamples.

    Each ratio is timed ``timing_repeats`` times (serially) and the minimum kept.
    Returns ``[(n_samples, seconds), ...]`` in the order of ``ratios``.
    """
    cfg = cfg or ProblemConfig()
    rows = []
    for ratio in ratios:
        sub = dataset.subset(stratified_subsample(dataset.labels, ratio, seed))
        best = np.inf
        for _ in range(timing_repeats):
            t0 = time.perf_counter()
            fit(sub, cfg)
            best = min(best, time.perf_counter() - t0)
        rows.append((sub.n_samples, float(best)))
    return rows
