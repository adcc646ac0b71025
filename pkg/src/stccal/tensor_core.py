"""
Dense multi-way array algebra.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Modes are
0-based axes, as everywhere in numpy.

Unfolding convention
--------------------
The mode-p unfolding places axis p along the rows. Columns enumerate the
remaining indices with the *first* remaining axis varying fastest, so that

    unfold(T x_0 V_0 ... x_{N-1} V_{N-1}, p)
        = V_p unfold(T, p) (V_{N-1} kron ... kron V_{p+1} kron V_{p-1} kron ... kron V_0)^T

holds with the ordinary Kronecker product. This is a Fortran-order reshape
of the array with axis p moved to the front.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DatasetError, DimensionError, ParameterError


def as_tensor(data) -> np.ndarray:
    """Return ``data`` as a float64 array with every extent >= 1."""
    t = np.asarray(data, dtype=np.float64)
    if t.ndim == 0 or any(s < 1 for s in t.shape):
        raise DimensionError(f"tensor extents must all be >= 1, got {t.shape}")
    return t


def _check_mode(t: np.ndarray, n: int) -> None:
    if not 0 <= n < t.ndim:
        raise IndexError(f"mode {n} out of range for a tensor of order {t.ndim}")


def inner(a, b) -> float:
    """Sum of elementwise products of two tensors of identical shape."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch in inner product: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))


def frobenius_sq(t) -> float:
    return inner(t, t)


def outer_product(vectors: Sequence) -> np.ndarray:
    """Outer product v_0 o v_1 o ... of at least two nonempty vectors."""
    if len(vectors) < 2:
        raise ParameterError(f"outer product needs at least 2 vectors, got {len(vectors)}")
    vs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if any(v.size == 0 for v in vs):
        raise DimensionError("outer product factors must be nonempty")
    out = vs[0]
    for v in vs[1:]:
        out = np.multiply.outer(out, v)
    return out


def mode_product(t, mat, n: int) -> np.ndarray:
    """
    n-mode product ``t x_n mat``.

    Parameters
    ----------
    t : ndarray
        Tensor of order N.
    mat : ndarray, shape (r, I_n)
        Matrix whose column count equals the extent of mode ``n``.
    n : int
        0-based mode.

    Returns
    -------
    ndarray
        Tensor with extent ``I_n`` replaced by ``r``.
    """
    t = np.asarray(t, dtype=np.float64)
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    _check_mode(t, n)
    if mat.shape[1] != t.shape[n]:
        raise DimensionError(
            f"mode-{n} product needs {t.shape[n]} matrix columns, got {mat.shape[1]}"
        )
    return np.moveaxis(np.tensordot(mat, t, axes=(1, n)), 0, n)


def unfold(t, p: int) -> np.ndarray:
    """Mode-p unfolding, shape ``(I_p, prod of the other extents)``."""
    t = np.asarray(t, dtype=np.float64)
    _check_mode(t, p)
    return np.reshape(np.moveaxis(t, p, 0), (t.shape[p], -1), order="F")


def refold(mat, p: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given full shape."""
    shape = tuple(int(s) for s in shape)
    if not 0 <= p < len(shape):
        raise IndexError(f"mode {p} out of range for a tensor of order {len(shape)}")
    moved = (shape[p],) + shape[:p] + shape[p + 1:]
    mat = np.asarray(mat, dtype=np.float64)
    if mat.size != int(np.prod(shape)) or mat.shape[0] != shape[p]:
        raise DimensionError(f"cannot refold a {mat.shape} matrix into {shape} at mode {p}")
    return np.moveaxis(np.reshape(mat, moved, order="F"), 0, p)


def covariance_tensor(views: Sequence) -> np.ndarray:
    """
    Multi-view covariance tensor ``(1/N) sum_n x_{0n} o x_{1n} o ... o x_{m-1,n}``.

    ``views[p]`` has shape ``(d_p, N)``; the result has shape ``(d_0, ..., d_{m-1})``.
    Built as ``X_0 (X_{m-1} khatri-rao ... khatri-rao X_1)^T / N`` and refolded,
    which costs O(N prod d_p).
    """
    xs = [np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in views]
    if len(xs) < 2:
        raise DimensionError("covariance tensor needs at least two views")
    n = xs[0].shape[1]
    if n < 1 or any(x.shape[1] != n for x in xs):
        raise DatasetError(
            f"all views must share the sample count, got {[x.shape[1] for x in xs]}"
        )
    # Khatri-Rao of views 1..m-1 with view 1 varying fastest (matches unfold order).
    kr = xs[1]
    for x in xs[2:]:
        kr = (x[:, None, :] * kr[None, :, :]).reshape(-1, n)
    c0 = xs[0] @ kr.T / n
    return refold(c0, 0, [x.shape[0] for x in xs])


def multi_mode_product(t, mats: Sequence, skip: int | None = None, transpose: bool = False):
    """
    Apply ``mats[q]`` along every mode q (ascending), skipping mode ``skip``.

    With ``transpose=True`` each factor enters as ``mats[q].T``, which is the
    form used to contract a covariance tensor with projection matrices.
    """
    out = np.asarray(t, dtype=np.float64)
    if len(mats) != out.ndim:
        raise DimensionError(f"need {out.ndim} matrices, got {len(mats)}")
    for q, m in enumerate(mats):
        if q == skip:
            continue
        m = np.asarray(m, dtype=np.float64)
        out = mode_product(out, m.T if transpose else m, q)
    return out


def contract_all_but(c, projections: Sequence, p: int) -> np.ndarray:
    """
    ``c x_q H_q^T`` over every mode q != p, leaving mode p untouched.

    All ``projections[q]`` must share the column count r and match the
    extents of ``c``. Returns a tensor of shape (r, ..., d_p, ..., r).
    """
    c = np.asarray(c, dtype=np.float64)
    hs = [np.atleast_2d(np.asarray(h, dtype=np.float64)) for h in projections]
    if len(hs) != c.ndim:
        raise DimensionError(f"need {c.ndim} projections, got {len(hs)}")
    ranks = {h.shape[1] for h in hs}
    if len(ranks) != 1:
        raise DimensionError(f"projections must share a column count, got {sorted(ranks)}")
    for q, h in enumerate(hs):
        if h.shape[0] != c.shape[q]:
            raise DimensionError(f"projection {q} has {h.shape[0]} rows, mode extent is {c.shape[q]}")
    _check_mode(c, p)
    return multi_mode_product(c, hs, skip=p, transpose=True)


def correlation_tensor(c, projections: Sequence) -> np.ndarray:
    """Fully contracted tensor ``c x_0 H_0^T ... x_{m-1} H_{m-1}^T``, shape (r,)*m."""
    t = contract_all_but(c, projections, 0)
    return mode_product(t, np.asarray(projections[0], dtype=np.float64).T, 0)
