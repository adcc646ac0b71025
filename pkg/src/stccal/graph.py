"""
Per-view affinity graphs, multi-order graphs and their Laplacians.

First-order graphs are sparse (k-NN supported) symmetric matrices with a
zero diagonal. Before powering, a graph is symmetrically normalized,
``D^{-1/2} W D^{-1/2}``, so that powers stay bounded. The multi-order graph
is ``sum_i q_i W^i`` and its Laplacian ``S - W`` with ``S`` the degree matrix.

For the solver only ``X L X^T`` is needed; :func:`laplacian_quadratic` gets
it from repeated sparse products without materializing an N x N matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import ConfigError, ParameterError

GRAPH_METHODS = ("adaptive", "gaussian", "knn", "cosine")


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric nonnegative N x N weights with zero diagonal (CSR)."""

    weights: sparse.csr_matrix

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def toarray(self) -> np.ndarray:
        return self.weights.toarray()


@dataclass(frozen=True)
class MultiOrderConfig:
    """Maximum order ``l`` and order weights ``q_1..q_l`` summing to one."""

    order: int
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(q) for q in self.weights))
        if self.order < 1:
            raise ConfigError(f"graph order must be >= 1, got {self.order}")
        if len(self.weights) != self.order:
            raise ConfigError(f"need {self.order} order weights, got {len(self.weights)}")
        if any(not 0.0 <= q <= 1.0 for q in self.weights):
            raise ConfigError(f"order weights must lie in [0, 1], got {self.weights}")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ConfigError(f"order weights must sum to 1, got {sum(self.weights)!r}")

    @classmethod
    def geometric(cls, order: int, ratio: float = 0.5) -> "MultiOrderConfig":
        """Weights proportional to ``ratio**(i-1)``, normalized to sum to one."""
        if order < 1:
            raise ConfigError(f"graph order must be >= 1, got {order}")
        raw = np.power(float(ratio), np.arange(order))
        q = raw / raw.sum()
        # absorb rounding into the first weight so the sum is exactly 1 to 1e-15
        q[0] = 1.0 - q[1:].sum()
        return cls(order, tuple(q))


@dataclass(frozen=True)
class MultiOrderLaplacian:
    w_multi: np.ndarray
    laplacian: np.ndarray


def _samples(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.ascontiguousarray(x.T)


def _neighbors(pts: np.ndarray, count: int):
    """Indices and squared distances of the ``count`` nearest other samples."""
    n = pts.shape[0]
    kk = min(count + 1, n)
    dist, idx = cKDTree(pts).query(pts, k=kk)
    dist = np.atleast_2d(dist)
    idx = np.atleast_2d(idx)
    out_idx = np.empty((n, count), dtype=np.int64)
    out_d = np.empty((n, count))
    for i in range(n):
        keep = idx[i] != i
        ii, dd = idx[i][keep][:count], dist[i][keep][:count]
        out_idx[i], out_d[i] = ii, dd
    return out_idx, out_d**2


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n - 1:
        raise ParameterError(f"neighbor count k={k} must lie in [1, {n - 1}]")


def _from_rows(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n: int) -> AffinityGraph:
    w = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    w = (w + w.T) * 0.5
    w.setdiag(0.0)
    w.eliminate_zeros()
    w.sort_indices()
    return AffinityGraph(w.tocsr())


def adaptive_weights(x, k: int) -> sparse.csr_matrix:
    """
    Row-stochastic adaptive-neighbor weights before symmetrization.

    With sorted squared distances ``d_(1) <= ... <= d_(k+1)`` of sample i to the
    others, ``w_ij = (d_(k+1) - d_ij) / (k d_(k+1) - sum_{h<=k} d_(h))`` on the k
    nearest. A zero denominator, or ``k = N - 1`` (no (k+1)-th neighbor), gives
    uniform weights ``1/k``.
    """
    pts = _samples(x)
    n = pts.shape[0]
    _check_k(k, n)
    has_next = k + 1 <= n - 1
    idx, d2 = _neighbors(pts, k + 1 if has_next else k)
    vals = np.full((n, k), 1.0 / k)
    if has_next:
        far = d2[:, k]
        denom = k * far - d2[:, :k].sum(axis=1)
        scale = np.maximum(np.abs(far), 1e-300)
        ok = denom > 1e-12 * scale
        vals[ok] = (far[ok, None] - d2[ok, :k]) / denom[ok, None]
    rows = np.repeat(np.arange(n), k)
    return sparse.csr_matrix((vals.ravel(), (rows, idx[:, :k].ravel())), shape=(n, n))


def adaptive_neighbor_graph(x, k: int) -> AffinityGraph:
    """Symmetrized adaptive-neighbor graph of a ``(d, N)`` view."""
    a = adaptive_weights(x, k).tocoo()
    return _from_rows(a.row, a.col, a.data, a.shape[0])


def baseline_graph(x, method: str, k: int = 5, sigma: float | None = None) -> AffinityGraph:
    """
    k-NN masked baseline graphs.

    gaussian : ``exp(-|x_i - x_j|^2 / (2 sigma^2))``; ``sigma`` defaults to the mean
        distance to the k-th neighbor
    knn : binary weights
    cosine : ``max(0, cos(x_i, x_j))``
    """
    pts = _samples(x)
    n = pts.shape[0]
    _check_k(k, n)
    idx, d2 = _neighbors(pts, k)
    rows = np.repeat(np.arange(n), k)
    cols = idx.ravel()
    if method == "gaussian":
        if sigma is None:
            sigma = float(np.mean(np.sqrt(d2[:, -1]))) or 1.0
        if not sigma > 0:
            raise ParameterError(f"gaussian bandwidth must be positive, got {sigma}")
        vals = np.exp(-d2.ravel() / (2.0 * sigma**2))
    elif method == "knn":
        vals = np.ones(n * k)
    elif method == "cosine":
        norms = np.linalg.norm(pts, axis=1)
        dots = np.einsum("ij,ij->i", pts[rows], pts[cols])
        denom = norms[rows] * norms[cols]
        cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        vals = np.maximum(0.0, cos)
    else:
        raise ParameterError(f"unknown baseline graph method {method!r}")
    return _from_rows(rows, cols, vals, n)


def build_graph(x, method: str = "adaptive", k: int = 5, sigma: float | None = None) -> AffinityGraph:
    if method == "adaptive":
        return adaptive_neighbor_graph(x, k)
    if method in GRAPH_METHODS:
        return baseline_graph(x, method, k=k, sigma=sigma)
    raise ParameterError(f"unknown graph method {method!r}; choose from {GRAPH_METHODS}")


def normalize_affinity(w):
    """``D^{-1/2} W D^{-1/2}``; rows of zero degree stay zero. Keeps sparsity."""
    if isinstance(w, AffinityGraph):
        w = w.weights
    deg = np.asarray(w.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    pos = deg > 0
    inv[pos] = 1.0 / np.sqrt(deg[pos])
    if sparse.issparse(w):
        dm = sparse.diags(inv)
        return (dm @ w @ dm).tocsr()
    w = np.asarray(w, dtype=np.float64)
    return inv[:, None] * w * inv[None, :]


def _dense(w) -> np.ndarray:
    if isinstance(w, AffinityGraph):
        return w.toarray()
    if sparse.issparse(w):
        return w.toarray()
    return np.asarray(w, dtype=np.float64)


def high_order(w, h: int) -> np.ndarray:
    """h-th order graph ``W^h`` (``W^1 = W``) by repeated multiplication."""
    if h < 1:
        raise ParameterError(f"graph order must be >= 1, got {h}")
    base = _dense(w)
    out = base
    for _ in range(h - 1):
        out = out @ base
    return out


def multi_order(w, cfg: MultiOrderConfig, normalize: bool = True) -> MultiOrderLaplacian:
    """
    Dense multi-order graph ``sum_i q_i W^i`` and its Laplacian.

    ``W`` is symmetrically normalized first unless ``normalize=False``.
    """
    if not isinstance(cfg, MultiOrderConfig):
        raise ConfigError("multi_order needs a MultiOrderConfig")
    base = _dense(normalize_affinity(w) if normalize else w)
    acc = cfg.weights[0] * base
    power = base
    for q in cfg.weights[1:]:
        power = power @ base
        acc = acc + q * power
    acc = 0.5 * (acc + acc.T)
    lap = np.diag(acc.sum(axis=1)) - acc
    return MultiOrderLaplacian(w_multi=acc, laplacian=lap)


def laplacian_quadratic(x, w, cfg: MultiOrderConfig, normalize: bool = True) -> np.ndarray:
    """
    ``X L X^T`` for the multi-order Laplacian of ``w``, ``x`` of shape ``(d, N)``.

    Uses ``W^i X^T = W (W^{i-1} X^T)`` and ``S = diag(W^l 1)``; cost is
    O(l * nnz(W) * d) instead of O(N^3).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    base = normalize_affinity(w) if normalize else (w.weights if isinstance(w, AffinityGraph) else w)
    if not sparse.issparse(base):
        base = sparse.csr_matrix(np.asarray(base, dtype=np.float64))
    n = x.shape[1]
    if base.shape != (n, n):
        raise ParameterError(f"graph is {base.shape}, view has {n} samples")
    # stack X^T and the ones vector so one product chain yields both W^l X^T and W^l 1
    cur = np.column_stack([x.T, np.ones(n)])
    acc = np.zeros_like(cur)
    for q in cfg.weights:
        cur = base @ cur
        acc += q * cur
    wx, deg = acc[:, :-1], acc[:, -1]
    out = (x * deg) @ x.T - x @ wx
    return 0.5 * (out + out.T)


def multi_order_laplacians(views: Sequence, cfg: MultiOrderConfig, method: str = "adaptive",
                           k: int = 5, sigma: float | None = None):
    """Dense multi-order Laplacians of every view (small N only)."""
    return [multi_order(build_graph(x, method, k, sigma), cfg) for x in views]
