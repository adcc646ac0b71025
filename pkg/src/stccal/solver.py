"""
Alternating manifold proximal-gradient solver.

Minimizes, over projections ``H_p`` with ``H_p^T M_p H_p = I_r``,

    G = -1/2 ||C x_1 H_1^T ... x_m H_m^T||_F^2
        + sum_p lam_p ||H_p||_{2,1} + sum_p Tr(H_p^T X_p L_p X_p^T H_p)

one view at a time: a semi-smooth Newton solve of the tangent-space
proximal subproblem gives a direction, an Armijo backtracking search along
the retraction picks the step, and the next view sees the updated point.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import graph as graphs
from .data import MultiViewDataset
from .errors import ConfigError, DimensionError, RankError
from .manifold import INIT_STRATEGIES, ViewMetric, feasibility_residual, make_metric, random_point, retract
from .prox import l21_norm, row_shrink
from .ssn import SubproblemSpec, solve_subproblem
from .tensor_core import contract_all_but, correlation_tensor, covariance_tensor, unfold

log = logging.getLogger(__name__)

_ROUNDOFF = 64.0 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class ProblemConfig:
    """Model and solver settings. ``lam`` is a scalar or one weight per view."""

    r: int = 2
    lam: float | tuple = 1e-3
    graph_method: str = "adaptive"
    graph_k: int = 5
    graph_sigma: float | None = None
    order: int = 2
    order_weights: tuple | None = None
    t: float = 1e-2
    gamma: float = 0.5
    max_iter: int = 100
    tol: float = 1e-6
    seed: int = 0
    init: str = "random"
    sparsity_on: bool = True
    laplacian_on: bool = True
    orthogonality_on: bool = True
    line_search_on: str = "G"
    ssn_max_iter: int = 50

    def __post_init__(self):
        if isinstance(self.lam, (list, tuple)):
            object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if self.order_weights is not None:
            object.__setattr__(self, "order_weights", tuple(float(v) for v in self.order_weights))
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.t > 0:
            raise ConfigError(f"t must be positive, got {self.t}")
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError(f"r must be a positive integer, got {self.r}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ConfigError(f"max_iter must be >= 0, got {self.max_iter}")
        if self.init not in INIT_STRATEGIES:
            raise ConfigError(f"init must be one of {INIT_STRATEGIES}, got {self.init!r}")
        if self.graph_method not in graphs.GRAPH_METHODS:
            raise ConfigError(f"graph_method must be one of {graphs.GRAPH_METHODS}, got {self.graph_method!r}")
        if self.line_search_on not in ("G", "F"):
            raise ConfigError(f"line_search_on must be 'G' or 'F', got {self.line_search_on!r}")
        lams = self.lam if isinstance(self.lam, tuple) else (self.lam,)
        if any(not v >= 0 for v in lams):
            raise ConfigError(f"sparsity weights must be nonnegative, got {self.lam}")
        self.graph_config()

    def lambdas(self, m: int) -> list[float]:
        """Effective per-view sparsity weights (zero when sparsity is off)."""
        if isinstance(self.lam, tuple):
            if len(self.lam) != m:
                raise ConfigError(f"{len(self.lam)} sparsity weights for {m} views")
            lams = list(self.lam)
        else:
            lams = [float(self.lam)] * m
        return lams if self.sparsity_on else [0.0] * m

    def graph_config(self) -> graphs.MultiOrderConfig:
        if self.order_weights is None:
            return graphs.MultiOrderConfig.geometric(self.order)
        return graphs.MultiOrderConfig(self.order, self.order_weights)

    def replace(self, **changes) -> "ProblemConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ProblemConfig(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("lam", "order_weights"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d


ABLATIONS = {
    "full": {},
    "case1": {"orthogonality_on": False},
    "case2": {"sparsity_on": False},
    "case3": {"laplacian_on": False},
    "tcca_o": {"sparsity_on": False, "laplacian_on": False},
}


@dataclass
class Problem:
    """Quantities built once per fit: covariance tensor, metrics, Laplacian quadratics."""

    views: list
    cov: np.ndarray
    metrics: list
    quads: list
    lambdas: list

    @property
    def m(self) -> int:
        return len(self.views)


def _as_views(data) -> list:
    if isinstance(data, MultiViewDataset):
        return list(data.views)
    return [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in data]


def build_problem(data, cfg: ProblemConfig) -> Problem:
    """Covariance tensor, per-view metrics and ``X_p L_p X_p^T`` (zero when off)."""
    views = _as_views(data)
    if len(views) < 2:
        raise DimensionError("need at least two views")
    for p, x in enumerate(views):
        if cfg.r > x.shape[0]:
            raise ConfigError(f"r={cfg.r} exceeds dimension {x.shape[0]} of view {p}")
    cov = covariance_tensor(views)
    metrics = [make_metric(x) for x in views]
    if cfg.laplacian_on:
        gcfg = cfg.graph_config()
        quads = [graphs.laplacian_quadratic(
            x, graphs.build_graph(x, cfg.graph_method, cfg.graph_k, cfg.graph_sigma), gcfg)
            for x in views]
    else:
        quads = [np.zeros((x.shape[0], x.shape[0])) for x in views]
    return Problem(views, cov, metrics, quads, cfg.lambdas(len(views)))


def problem_from_laplacians(views, laplacians: Sequence, cfg: ProblemConfig) -> Problem:
    """Problem with explicitly supplied dense N x N Laplacians."""
    views = _as_views(views)
    quads = [x @ np.asarray(lap, dtype=np.float64) @ x.T for x, lap in zip(views, laplacians)]
    quads = [0.5 * (q + q.T) for q in quads]
    if not cfg.laplacian_on:
        quads = [np.zeros_like(q) for q in quads]
    return Problem(views, covariance_tensor(views), [make_metric(x) for x in views], quads,
                   cfg.lambdas(len(views)))


def _check_projections(hs, problem: Problem) -> list:
    hs = [np.atleast_2d(np.asarray(h, dtype=np.float64)) for h in hs]
    if len(hs) != problem.m:
        raise DimensionError(f"{len(hs)} projections for {problem.m} views")
    for p, (h, x) in enumerate(zip(hs, problem.views)):
        if h.shape[0] != x.shape[0]:
            raise DimensionError(f"projection {p} has {h.shape[0]} rows, view has {x.shape[0]} features")
    return hs


def objective_terms(projections, problem: Problem) -> dict:
    """The three parts of G: ``tensor`` (-1/2 ||P||^2), ``sparsity``, ``laplacian``."""
    hs = _check_projections(projections, problem)
    pt = correlation_tensor(problem.cov, hs)
    return {
        "tensor": -0.5 * float(np.sum(pt * pt)),
        "sparsity": float(sum(lam * l21_norm(h) for lam, h in zip(problem.lambdas, hs))),
        "laplacian": float(sum(np.sum(h * (q @ h)) for q, h in zip(problem.quads, hs))),
    }


def objective(projections, problem: Problem, smooth_only: bool = False) -> float:
    """G; with ``smooth_only`` the smooth part F (no l2,1 term)."""
    terms = objective_terms(projections, problem)
    total = terms["tensor"] + terms["laplacian"]
    return total if smooth_only else total + terms["sparsity"]


def _mode_matrix(problem: Problem, hs, p: int) -> np.ndarray:
    # U_p = unfold_p(C x_{q != p} H_q^T), so that unfold_p(P) = H_p^T U_p
    return unfold(contract_all_but(problem.cov, hs, p), p)


def euclidean_grad(projections, problem: Problem, p: int) -> np.ndarray:
    """``-U_p U_p^T H_p + 2 X_p L_p X_p^T H_p``."""
    hs = _check_projections(projections, problem)
    u = _mode_matrix(problem, hs, p)
    h = hs[p]
    return -u @ (u.T @ h) + 2.0 * problem.quads[p] @ h


@dataclass
class LineSearchResult:
    alpha: float
    point: np.ndarray
    value: float
    stalled: bool
    trials: int


def line_search(h, d, t: float, gamma: float, value: Callable, step: Callable,
                f0: float | None = None, alpha0: float = 1.0, floor: float = 1e-10) -> LineSearchResult:
    """
    Backtracking on ``value(step(h, alpha d)) <= value(h) - alpha/(2t) ||d||^2``.

    Tries ``alpha0 * gamma**j`` down to ``floor``. When no trial passes, the
    point is left unchanged and the result is flagged as stalled. Trials
    where ``step`` raises :class:`RankError` count as rejections.
    """
    if f0 is None:
        f0 = value(h)
    dn2 = float(np.sum(d * d))
    alpha = alpha0
    trials = 0
    while alpha >= floor:
        trials += 1
        try:
            cand = step(h, alpha * d)
        except RankError:
            cand = None
        if cand is not None:
            fc = value(cand)
            if fc <= f0 - alpha / (2.0 * t) * dn2:
                return LineSearchResult(alpha, cand, fc, False, trials)
        alpha *= gamma
    return LineSearchResult(0.0, h, f0, True, trials)


@dataclass
class StepRecord:
    iteration: int
    view: int
    t: float
    alpha: float
    direction_norm: float
    before: float
    after: float
    stalled: bool
    ssn_converged: bool
    ssn_iterations: int


@dataclass
class FitResult:
    projections: list
    converged: bool
    iterations: int
    objective: float
    stationarity: float
    wall_time: float
    objective_trace: list = field(default_factory=list)
    stationarity_trace: list = field(default_factory=list)
    feasibility_trace: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def summary(self, include_projections: bool = False) -> dict:
        """Deterministic, JSON-ready record of the run (wall time excluded)."""
        out = {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "objective": float(self.objective),
            "stationarity": float(self.stationarity),
            "objective_trace": [float(v) for v in self.objective_trace],
            "stationarity_trace": [float(v) for v in self.stationarity_trace],
            "feasibility_max": float(max(self.feasibility_trace, default=0.0)),
            "stalled_steps": int(sum(s.stalled for s in self.steps)),
            "ssn_failures": int(sum(not s.ssn_converged for s in self.steps)),
            "row_support": [int(np.count_nonzero(np.linalg.norm(h, axis=1))) for h in self.projections],
        }
        if include_projections:
            out["projections"] = [h.tolist() for h in self.projections]
        return out


def stationarity(direction_norms) -> float:
    """Largest most-recent direction norm over views (0 means stationary)."""
    if isinstance(direction_norms, FitResult):
        return direction_norms.stationarity
    vals = [float(v) for v in direction_norms]
    return max(vals) if vals else 0.0


def initial_projections(problem: Problem, cfg: ProblemConfig) -> list:
    seeds = np.random.SeedSequence(cfg.seed).spawn(problem.m)
    out = []
    for p, (x, met, s) in enumerate(zip(problem.views, problem.metrics, seeds)):
        try:
            out.append(random_point(x.shape[0], cfg.r, met, seed=s, strategy=cfg.init, x=x))
        except RankError as exc:
            raise RankError(f"view {p}: {exc}") from exc
    return out


def _view_direction(h, grad, metric: ViewMetric, t: float, lam: float, cfg: ProblemConfig):
    """Direction for one view; retries with smaller t if the inner solve fails."""
    if not cfg.orthogonality_on:
        return row_shrink(h - t * grad, t * lam) - h, t, True, 0
    res = None
    for _ in range(4):
        res = solve_subproblem(SubproblemSpec(h, grad, metric, t, lam), max_iter=cfg.ssn_max_iter)
        if res.converged:
            break
        log.debug("SSN not converged (residual %.2e); shrinking t to %.2e", res.residual, t / 10)
        t /= 10.0
    return res.direction, t, res.converged, res.iterations


def fit(data, cfg: ProblemConfig | None = None, init=None, problem: Problem | None = None) -> FitResult:
    """
    Run the alternating solver.

    Parameters
    ----------
    data : MultiViewDataset or sequence of (d_p, N) arrays
        Centered, dimension-reduced views.
    cfg : ProblemConfig
    init : list of arrays, optional
        Starting projections; by default drawn with ``cfg.init`` and ``cfg.seed``.
    problem : Problem, optional
        Prebuilt problem (skips the covariance and graph construction).
    """
    cfg = cfg or ProblemConfig()
    start = time.perf_counter()
    if problem is None:
        problem = build_problem(data, cfg)
    if init is None:
        hs = initial_projections(problem, cfg)
    else:
        hs = [np.array(h, dtype=np.float64) for h in _check_projections(init, problem)]
    m = problem.m
    smooth_ls = cfg.line_search_on == "F"

    g_cur = objective(hs, problem)
    obj_trace = [g_cur]
    stat_trace: list = []
    feas_trace = [max(feasibility_residual(h, met) for h, met in zip(hs, problem.metrics))]
    steps: list = []
    norms = [np.inf] * m
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        for p in range(m):
            u = _mode_matrix(problem, hs, p)
            quad, lam, met = problem.quads[p], problem.lambdas[p], problem.metrics[p]
            h = hs[p]
            grad = -u @ (u.T @ h) + 2.0 * quad @ h

            def local_g(z, u=u, quad=quad, lam=lam):
                pz = z.T @ u
                return (-0.5 * float(np.sum(pz * pz)) + float(np.sum(z * (quad @ z)))
                        + lam * l21_norm(z))

            def local_f(z, lam=lam):
                return local_g(z) - lam * l21_norm(z)

            value = local_f if smooth_ls else local_g
            d, t_used, ssn_ok, ssn_it = _view_direction(h, grad, met, cfg.t, lam, cfg)
            norms[p] = float(np.linalg.norm(d))
            # a predicted decrease below the roundoff of G cannot be certified; skip the move
            if norms[p] ** 2 / (2.0 * t_used) <= _ROUNDOFF * max(1.0, abs(g_cur)):
                continue
            if cfg.orthogonality_on:
                def stepper(z, s, met=met):
                    return retract(z, s, met)
            else:
                def stepper(z, s):
                    return z + s
            ls = line_search(h, d, t_used, cfg.gamma, value, stepper)
            before = g_cur
            if not ls.stalled:
                g_cur = g_cur - local_g(h) + local_g(ls.point)
                hs[p] = ls.point
            steps.append(StepRecord(it, p, t_used, ls.alpha, norms[p], before, g_cur,
                                    ls.stalled, ssn_ok, ssn_it))
        g_cur = objective(hs, problem)
        obj_trace.append(g_cur)
        stat_trace.append(stationarity(norms))
        feas_trace.append(max(feasibility_residual(h, met) for h, met in zip(hs, problem.metrics)))
        if stat_trace[-1] <= cfg.tol:
            converged = True
            break
    else:
        it = cfg.max_iter
    return FitResult(
        projections=hs,
        converged=converged,
        iterations=it,
        objective=g_cur,
        stationarity=stat_trace[-1] if stat_trace else float("inf"),
        wall_time=time.perf_counter() - start,
        objective_trace=obj_trace,
        stationarity_trace=stat_trace,
        feasibility_trace=feas_trace,
        steps=steps,
    )
