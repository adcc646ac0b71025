"""
Semi-smooth Newton solver for the tangent-space proximal subproblem

    min_D  <grad, D> + ||D||_F^2 / (2t) + lam * ||H + D||_{2,1}
    s.t.   D^T M H + H^T M D = 0.

The KKT conditions give ``D(Lam) = prox(B(Lam), t*lam) - H`` with
``B(Lam) = H - t (grad - 2 M H Lam)`` and a symmetric multiplier ``Lam``
solving ``Q(Lam) = D^T M H + H^T M D = 0``. ``Q`` is monotone, so Newton
steps use ``(V + eta I) d = -Q`` with ``V`` a generalized Jacobian.

Symmetric r x r matrices are identified with vectors of length r(r+1)/2 via
the isometric half-vectorization :func:`svec` (off-diagonal entries scaled by
sqrt 2), which keeps the reduced Jacobian symmetric positive semidefinite.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericError, ParameterError
from .manifold import ViewMetric
from .prox import row_shrink

log = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)


def _tril_indices(r: int):
    # column-major lower triangle: (0,0),(1,0),...,(r-1,0),(1,1),...
    cols, rows = np.triu_indices(r)
    return rows, cols


def svec(s) -> np.ndarray:
    """Isometric half-vectorization of a symmetric matrix."""
    s = np.asarray(s, dtype=np.float64)
    rows, cols = _tril_indices(s.shape[0])
    return s[rows, cols] * np.where(rows == cols, 1.0, _SQRT2)


def smat(v, r: int | None = None) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=np.float64)
    if r is None:
        r = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    rows, cols = _tril_indices(r)
    vals = v / np.where(rows == cols, 1.0, _SQRT2)
    out = np.zeros((r, r))
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


@dataclass(frozen=True)
class SubproblemSpec:
    """Data of one subproblem: point ``h``, Euclidean gradient, metric, ``t``, ``lam``."""

    h: np.ndarray
    grad: np.ndarray
    metric: ViewMetric
    t: float
    lam: float
    mh: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        g = np.atleast_2d(np.asarray(self.grad, dtype=np.float64))
        if g.shape != h.shape:
            raise ParameterError(f"gradient shape {g.shape} differs from point shape {h.shape}")
        if h.shape[0] != self.metric.dim:
            raise ParameterError(f"point has {h.shape[0]} rows, metric dimension is {self.metric.dim}")
        if not self.t > 0:
            raise ParameterError(f"step parameter t must be positive, got {self.t}")
        if not self.lam >= 0:
            raise ParameterError(f"sparsity weight must be nonnegative, got {self.lam}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "mh", self.metric.m_matrix @ h)

    @property
    def r(self) -> int:
        return self.h.shape[1]

    @property
    def threshold(self) -> float:
        return self.t * self.lam


@dataclass
class SubproblemResult:
    direction: np.ndarray
    multiplier: np.ndarray
    residual: float
    converged: bool
    iterations: int


def _b_matrix(lam, spec: SubproblemSpec) -> np.ndarray:
    return spec.h - spec.t * (spec.grad - 2.0 * spec.mh @ lam)


def direction_from_multiplier(lam, spec: SubproblemSpec) -> np.ndarray:
    """``D = prox(B(Lam), t*lam) - H``."""
    lam = np.asarray(lam, dtype=np.float64)
    return row_shrink(_b_matrix(lam, spec), spec.threshold) - spec.h


def _residual_from_direction(d, spec: SubproblemSpec) -> np.ndarray:
    s = d.T @ spec.mh
    return s + s.T


def kkt_residual(lam, spec: SubproblemSpec) -> np.ndarray:
    """``Q(Lam) = D^T M H + H^T M D`` for ``D = D(Lam)``."""
    return _residual_from_direction(direction_from_multiplier(lam, spec), spec)


def jacobian_blocks(b, t: float, lam: float) -> np.ndarray:
    """
    Generalized Jacobian of the row-wise prox, one ``r x r`` block per row of ``b``.

    For ``tau = t*lam`` and row ``b_j``: ``I - (tau/|b_j|)(I - b_j b_j^T/|b_j|^2)``
    when ``|b_j| > tau``, otherwise zero (the boundary case takes the zero element).
    """
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    n, r = b.shape
    tau = t * lam
    eye = np.eye(r)
    if tau == 0:
        return np.broadcast_to(eye, (n, r, r)).copy()
    blocks = np.zeros((n, r, r))
    norms = np.linalg.norm(b, axis=1)
    for j in np.flatnonzero(norms - tau > 1e-14 * max(tau, 1.0)):
        u = b[j] / norms[j]
        blocks[j] = eye - (tau / norms[j]) * (eye - np.outer(u, u))
    return blocks


def _prox_jacobian_apply(b, tau: float, v) -> np.ndarray:
    # Row-wise action of jacobian_blocks(b) on v without forming the blocks.
    if tau == 0:
        return v.copy()
    norms = np.linalg.norm(b, axis=1)
    alive = norms - tau > 1e-14 * max(tau, 1.0)
    out = np.zeros_like(v)
    if np.any(alive):
        ba, va, na = b[alive], v[alive], norms[alive][:, None]
        proj = ba * (np.sum(ba * va, axis=1, keepdims=True) / na**2)
        out[alive] = va - (tau / na) * (va - proj)
    return out


def reduced_jacobian(lam, spec: SubproblemSpec) -> np.ndarray:
    """
    Generalized Jacobian of ``svec(Q)`` with respect to ``svec(Lam)``.

    Column k is ``svec(V(E_k))`` where ``E_k = smat(e_k)`` and
    ``V(Delta) = 2 sym-part of H^T M J[2t M H Delta]``, J the prox Jacobian at ``B(Lam)``.
    """
    r = spec.r
    n = r * (r + 1) // 2
    b = _b_matrix(np.asarray(lam, dtype=np.float64), spec)
    tau = spec.threshold
    cols = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        delta = smat(e, r)
        dd = _prox_jacobian_apply(b, tau, 2.0 * spec.t * spec.mh @ delta)
        cols[:, k] = svec(_residual_from_direction(dd, spec))
    return 0.5 * (cols + cols.T)


def newton_step(lam, spec: SubproblemSpec, eta: float) -> np.ndarray:
    """Solve ``(V + eta I) d = -svec(Q(Lam))``; ``d`` is in svec coordinates."""
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    q = svec(kkt_residual(lam, spec))
    if not np.any(q):
        return np.zeros_like(q)
    v = reduced_jacobian(lam, spec)
    a = v + eta * np.eye(v.shape[0])
    try:
        d = linalg.solve(a, -q, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"Newton system solve failed: {exc}") from exc
    if not np.all(np.isfinite(d)):
        raise NumericError("Newton system produced a non-finite direction")
    return d


def solve_subproblem(spec: SubproblemSpec, tol: float | None = None, max_iter: int = 50,
                     lam0=None) -> SubproblemResult:
    """
    Damped semi-smooth Newton iteration on ``Q(Lam) = 0`` from ``Lam = 0``.

    Each Newton step is backtracked (halving up to 20 times) until ``||Q||_F``
    decreases; if no halving helps, ``eta`` grows tenfold and the step is
    recomputed. Stops at ``||Q||_F <= tol`` (default ``1e-8 max(1, ||H||_F)``)
    or after ``max_iter`` iterations, returning the best iterate with
    ``converged=False`` in the latter case.
    """
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.linalg.norm(spec.h)))
    r = spec.r
    lam = np.zeros((r, r)) if lam0 is None else 0.5 * (lam0 + lam0.T)
    d = direction_from_multiplier(lam, spec)
    q = _residual_from_direction(d, spec)
    res = float(np.linalg.norm(q))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        eta = 1e-4 * max(1.0, float(np.linalg.norm(svec(q))))
        accepted = False
        for _ in range(6):
            try:
                step_dir = smat(newton_step(lam, spec, eta), r)
            except NumericError:
                eta *= 10.0
                continue
            alpha = 1.0
            for _ in range(21):
                lam_try = lam + alpha * step_dir
                lam_try = 0.5 * (lam_try + lam_try.T)
                d_try = direction_from_multiplier(lam_try, spec)
                q_try = _residual_from_direction(d_try, spec)
                res_try = float(np.linalg.norm(q_try))
                if res_try <= (1.0 - 1e-4 * alpha) * res:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            eta *= 10.0
        if not accepted:
            log.debug("SSN stalled at residual %.3e after %d iterations", res, it)
            break
        lam, d, q, res = lam_try, d_try, q_try, res_try
    converged = res <= tol
    return SubproblemResult(direction=d, multiplier=lam, residual=res,
                            converged=converged, iterations=it)
