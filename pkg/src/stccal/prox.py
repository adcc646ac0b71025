"""Row-sparsity (l2,1) norm and its proximal operator."""
import numpy as np

from .errors import ParameterError


def l21_norm(x) -> float:
    """Sum of the Euclidean norms of the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return float(np.sum(np.linalg.norm(x, axis=1)))


def _shrink_factors(norms: np.ndarray, beta: float) -> np.ndarray:
    # 0/0 on a zero row is taken as 0: the zero row is the unique minimizer.
    factors = np.zeros_like(norms)
    alive = norms > beta
    factors[alive] = 1.0 - beta / norms[alive]
    return factors


def prox_l21(x, beta: float) -> np.ndarray:
    """
    Proximal map of ``beta * ||.||_{2,1}``.

    Each row is shrunk toward zero by ``beta`` in Euclidean length; rows no
    longer than ``beta`` become exactly zero.
    """
    if not beta > 0:
        raise ParameterError(f"prox threshold must be positive, got {beta}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    norms = np.linalg.norm(x, axis=1)
    return x * _shrink_factors(norms, beta)[:, None]


def row_shrink(x, threshold: float) -> np.ndarray:
    """:func:`prox_l21` that also accepts ``threshold == 0`` (identity)."""
    if threshold == 0:
        return np.array(x, dtype=np.float64, copy=True)
    return prox_l21(x, threshold)


def prox_optimality_check(x, y, beta: float, tol: float = 1e-8) -> bool:
    """
    Verify that ``y`` satisfies the optimality conditions of the l2,1 prox at ``x``.

    A nonzero row must satisfy ``y_i + beta y_i/||y_i|| = x_i``; a zero row
    requires ``||x_i|| <= beta``.
    """
    if not beta > 0:
        raise ParameterError(f"prox threshold must be positive, got {beta}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        return False
    for xi, yi in zip(x, y):
        ny = np.linalg.norm(yi)
        if ny > 0:
            if np.linalg.norm(yi + beta * yi / ny - xi) > tol:
                return False
        elif np.linalg.norm(xi) > beta + tol:
            return False
    return True
