"""Projected Tikhonov solves and the outer iterative driver.

The decomposition reduces the generalized least-squares problem to a small
(k+1)-by-k problem  min ||M y - beta1 e1||^2 + lambda^2 ||y||^2, solved here
through the SVD of M (filter factors sigma_i / (sigma_i^2 + lambda^2)). The
solution in original coordinates is mu + Q (V y).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import bidiag
from .errors import BreakdownSignal, DimensionError, NumericalError

RANK_RTOL = 1e-12


@dataclass
class ProjectedProblem:
    """Small projected least-squares problem with a cached SVD."""

    M: np.ndarray
    beta1: float
    _svd: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        if self.M.ndim != 2 or self.M.shape[1] < 1:
            raise DimensionError("projected matrix must have at least one column")
        if not np.all(np.isfinite(self.M)):
            raise NumericalError("projected matrix contains non-finite entries")

    @property
    def svd(self):
        if self._svd is None:
            U, s, Vt = np.linalg.svd(self.M, full_matrices=False)
            self._svd = (U, s, Vt)
        return self._svd

    @property
    def sigma_max(self):
        s = self.svd[1]
        return float(s[0]) if s.size else 0.0

    @property
    def svd_projection(self):
        """(singular values, U^T beta1 e1, squared residual tail outside range(M))."""
        U, s, _ = self.svd
        bhat = self.beta1 * U[0, :]
        tail2 = max(self.beta1**2 - float(np.dot(bhat, bhat)), 0.0)
        return s, bhat, tail2


@dataclass
class SolveOutcome:
    y: np.ndarray
    lambda_used: float
    projected_residual_norm: float


def projected_tikhonov(prob, lam):
    """Minimize ||M y - beta1 e1||^2 + lambda^2 ||y||^2 via the SVD of M.

    At lambda = 0 a rank-deficient M gets the minimum-norm solution through
    truncation at a relative rank tolerance.
    """
    if lam < 0:
        raise NumericalError("lambda must be nonnegative")
    U, s, Vt = prob.svd
    bhat = prob.beta1 * U[0, :]
    if lam == 0.0:
        cutoff = RANK_RTOL * (s[0] if s.size else 0.0)
        inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
        coeff = inv * bhat
    else:
        coeff = (s / (s * s + lam * lam)) * bhat
    y = Vt.T @ coeff
    resid = prob.M @ y
    resid[0] -= prob.beta1
    return SolveOutcome(y=y, lambda_used=float(lam), projected_residual_norm=float(np.linalg.norm(resid)))


def recover_solution(prior, V, y):
    """Solution in original coordinates: mu + Q (V y), one covariance matvec."""
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    if V.ndim != 2 or V.shape[1] != y.size:
        raise DimensionError("basis and coefficient dimensions disagree")
    return prior.mu + prior.Q.apply(V @ y)


@dataclass
class SolveConfig:
    """Outer-iteration options: length, regularization rule, error tracking."""

    max_iter: int
    reg: object  # RegRule
    s_true: np.ndarray = None
    snapshot_iters: tuple = ()

    def __post_init__(self):
        if self.max_iter < 1:
            raise DimensionError("max_iter must be at least 1")


@dataclass
class ReconRecord:
    """Per-iteration history of an iterative reconstruction."""

    iterations: int
    relerr: list
    lambdas: list
    proj_residual: list
    solution: np.ndarray
    snapshots: dict
    stop_reason: str
    timings: dict
    omegas: list = field(default_factory=list)

    @property
    def final_relerr(self):
        return self.relerr[-1] if self.relerr else None

    @property
    def min_relerr(self):
        return min(self.relerr) if self.relerr else None

    @property
    def argmin_iter(self):
        if not self.relerr:
            return None
        return int(np.argmin(self.relerr)) + 1


def run_iterative_solve(A, inexact, prior, noise, b, config):
    """Drive the decomposition, selecting lambda each iteration per the rule.

    Records the relative error against the true solution (when given), the
    selected lambda, and the projected residual at every iteration; solution
    snapshots only at requested checkpoints plus the final iterate. Breakdown
    of the recurrence is a normal early stop.
    """
    from . import regparam as rp

    rule = config.reg
    s_true = None if config.s_true is None else np.asarray(config.s_true, dtype=float)
    s_true_norm = float(np.linalg.norm(s_true)) if s_true is not None else 0.0

    timings = {"decomposition_s": 0.0, "param_selection_s": 0.0, "projected_solve_s": 0.0}
    relerr, lambdas, residuals, omegas = [], [], [], []
    snapshots = {}
    stop_reason = "max_iter"
    solution = prior.mu.copy()

    t0 = time.perf_counter()
    state = bidiag.igenGK_init(A, inexact, prior, noise, b)
    timings["decomposition_s"] += time.perf_counter() - t0

    omega_suggestions = []
    for it in range(1, config.max_iter + 1):
        t0 = time.perf_counter()
        try:
            bidiag.igenGK_step(state, A, inexact, prior, noise)
            stepped = True
        except BreakdownSignal:
            stop_reason = "breakdown"
            stepped = state.M.shape[1] >= it  # terminal square commit still solvable
        timings["decomposition_s"] += time.perf_counter() - t0
        if not stepped:
            break

        prob = ProjectedProblem(M=state.M, beta1=state.beta1)
        Vk = state.V[:, : state.M.shape[1]]

        t0 = time.perf_counter()
        if rule.kind == "none":
            lam = 0.0
        elif rule.kind == "fixed":
            lam = float(rule.lambda_fixed)
        elif rule.kind == "optimal":
            lam, _ = rp.select_lambda_optimal(prob, Vk, prior, s_true)
        elif rule.kind == "dp":
            lam, _ = rp.select_lambda_dp(prob, rule)
        elif rule.kind == "wgcv":
            if rule.omega_mode == "adaptive":
                omega_suggestions.append(rp.suggest_omega(prob))
                om = float(np.mean(omega_suggestions))
            else:
                om = rule.omega
            lam, _, om = rp.select_lambda_wgcv(prob, rule, omega=om)
            omegas.append(om)
        else:
            raise NumericalError(f"unhandled rule {rule.kind!r}")
        timings["param_selection_s"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        outcome = projected_tikhonov(prob, lam)
        solution = recover_solution(prior, Vk, outcome.y)
        timings["projected_solve_s"] += time.perf_counter() - t0

        lambdas.append(outcome.lambda_used)
        residuals.append(outcome.projected_residual_norm)
        if s_true is not None:
            relerr.append(float(np.linalg.norm(solution - s_true) / s_true_norm))
        if it in config.snapshot_iters:
            snapshots[it] = solution.copy()
        if stop_reason == "breakdown":
            break

    return ReconRecord(
        iterations=len(lambdas),
        relerr=relerr,
        lambdas=lambdas,
        proj_residual=residuals,
        solution=solution,
        snapshots=snapshots,
        stop_reason=stop_reason,
        timings=timings,
        omegas=omegas,
    )
