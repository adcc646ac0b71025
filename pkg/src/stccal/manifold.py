"""
Generalized Stiefel geometry for the feasible set ``{H : H^T M H = I_r}``.

``M = X X^T + eps I`` is the (ridge-regularized) scatter matrix of one view.
Points are plain ``(d, r)`` arrays; :func:`feasibility_residual` measures how
far one is from the set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DataError, ParameterError, RankError

INIT_STRATEGIES = ("random", "svd", "identity", "orthogonal")


@dataclass(frozen=True)
class ViewMetric:
    """SPD metric ``M = X X^T + eps I`` with its cached upper Cholesky factor."""

    m_matrix: np.ndarray
    epsilon: float
    chol: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.m_matrix.shape[0]


def make_metric(x) -> ViewMetric:
    """
    Build the metric of a ``(d, N)`` view.

    The ridge is ``eps = 1e-8 * trace(X X^T) / d`` (``1e-8`` for an all-zero view),
    small enough not to disturb feasibility while keeping ``M`` positive definite
    when ``d > N`` or features are collinear.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.size == 0:
        raise ParameterError("view must have d >= 1 and N >= 1")
    if not np.all(np.isfinite(x)):
        raise DataError("view contains non-finite values")
    d = x.shape[0]
    scatter = x @ x.T
    scatter = 0.5 * (scatter + scatter.T)
    tr = float(np.trace(scatter))
    eps = 1e-8 * tr / d if tr > 0 else 1e-8
    m = scatter + eps * np.eye(d)
    chol = linalg.cholesky(m, lower=False)
    return ViewMetric(m_matrix=m, epsilon=eps, chol=chol)


def feasibility_residual(h, metric: ViewMetric) -> float:
    """``||H^T M H - I||_F``."""
    h = np.asarray(h, dtype=np.float64)
    g = h.T @ metric.m_matrix @ h
    return float(np.linalg.norm(g - np.eye(h.shape[1])))


def m_orthonormalize(a, metric: ViewMetric) -> np.ndarray:
    """
    Return ``A R^{-1}`` where ``R`` is the upper Cholesky factor of ``A^T M A``.

    This is the M-metric analog of taking the Q factor of a QR factorization;
    ``R`` has a positive diagonal, so the result is unique.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    gram = a.T @ metric.m_matrix @ a
    gram = 0.5 * (gram + gram.T)
    try:
        r = linalg.cholesky(gram, lower=False)
    except linalg.LinAlgError as exc:
        raise RankError("matrix is rank deficient in the view metric") from exc
    diag = np.abs(np.diag(r))
    if not np.all(np.isfinite(r)) or diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise RankError("matrix is numerically rank deficient in the view metric")
    # H = A R^{-1}  <=>  R^T H^T = A^T
    h = linalg.solve_triangular(r, a.T, trans="T", lower=False).T
    # one refinement pass when M is ill conditioned (e.g. d > N, ridge-dominated directions)
    gram = h.T @ metric.m_matrix @ h
    gram = 0.5 * (gram + gram.T)
    if np.linalg.norm(gram - np.eye(gram.shape[0])) > 1e-12:
        try:
            r2 = linalg.cholesky(gram, lower=False)
        except linalg.LinAlgError as exc:
            raise RankError("matrix is rank deficient in the view metric") from exc
        h = linalg.solve_triangular(r2, h.T, trans="T", lower=False).T
    return h


def retract(h, step, metric: ViewMetric) -> np.ndarray:
    """Retraction ``Retr_H(step)``: M-orthonormalize ``H + step``."""
    h = np.asarray(h, dtype=np.float64)
    return m_orthonormalize(h + np.asarray(step, dtype=np.float64), metric)


def tangent_violation(h, d, metric: ViewMetric) -> float:
    """``||D^T M H + H^T M D||_F``; zero exactly on the tangent space at ``H``."""
    mh = metric.m_matrix @ np.asarray(h, dtype=np.float64)
    s = np.asarray(d, dtype=np.float64).T @ mh
    return float(np.linalg.norm(s + s.T))


def random_point(d: int, r: int, metric: ViewMetric, seed=None, strategy: str = "random",
                 x=None) -> np.ndarray:
    """
    Feasible starting point for one view.

    Strategies
    ----------
    random : standard normal ``(d, r)`` matrix
    orthogonal : Q factor of a standard normal matrix
    identity : first ``r`` columns of the identity
    svd : leading ``r`` left singular vectors of ``x`` (eigenvectors of ``M`` if
        ``x`` is not given)

    Every candidate is M-orthonormalized; randomized strategies are
    deterministic given ``seed``.
    """
    if r > d:
        raise ParameterError(f"embedding dimension r={r} exceeds view dimension d={d}")
    if r < 1:
        raise ParameterError(f"embedding dimension must be >= 1, got {r}")
    if metric.dim != d:
        raise ParameterError(f"metric has dimension {metric.dim}, expected {d}")
    rng = np.random.default_rng(seed)
    if strategy == "random":
        a = rng.standard_normal((d, r))
    elif strategy == "orthogonal":
        a, _ = np.linalg.qr(rng.standard_normal((d, r)))
    elif strategy == "identity":
        a = np.eye(d, r)
    elif strategy == "svd":
        if x is not None:
            u, _, _ = np.linalg.svd(np.asarray(x, dtype=np.float64), full_matrices=False)
            a = u[:, :r]
        else:
            _, vecs = np.linalg.eigh(metric.m_matrix)
            a = vecs[:, ::-1][:, :r]
        # deterministic signs: largest-magnitude entry of each column positive
        idx = np.argmax(np.abs(a), axis=0)
        a = a * np.sign(a[idx, np.arange(a.shape[1])])
    else:
        raise ParameterError(f"unknown init strategy {strategy!r}; choose from {INIT_STRATEGIES}")
    return m_orthonormalize(a, metric)
