"""Tikhonov parameter selection on the projected problem.

Three rules operate on the small (k+1)-by-k projected least-squares problem:
an oracle rule minimizing the true reconstruction error, the discrepancy
principle, and weighted GCV. All are pure functions of the projected problem
and their auxiliary inputs, evaluated through the cached SVD.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidParameterError
from .solve import projected_tikhonov, recover_solution

log = logging.getLogger(__name__)

RULES = ("none", "fixed", "optimal", "dp", "wgcv")

GRID_POINTS = 50
GRID_FLOOR_RTOL = 1e-12
GRID_TOP_FACTOR = 10.0
REFINE_RELWIDTH = 1e-4
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RegRule:
    """Which rule selects lambda, plus the rule's inputs.

    dp requires ``noise_norm`` (the norm of the data noise in the residual's
    metric); fixed requires ``lambda_fixed``; wgcv takes a weight omega in
    (0, 1] either fixed or adapted along the iteration.
    """

    kind: str = "none"
    lambda_fixed: float = None
    nu_dp: float = 1.0
    noise_norm: float = None
    omega: float = 1.0
    omega_mode: str = "fixed"

    def __post_init__(self):
        if self.kind not in RULES:
            raise ConfigError(f"unknown regularization rule {self.kind!r}")
        if self.kind == "fixed" and self.lambda_fixed is None:
            raise ConfigError("rule 'fixed' requires lambda_fixed")
        if self.kind == "dp" and self.noise_norm is None:
            raise ConfigError("rule 'dp' requires noise_norm")
        if self.nu_dp <= 0:
            raise InvalidParameterError("nu_dp must be positive")
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError("omega must lie in (0, 1]")
        if self.omega_mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown omega_mode {self.omega_mode!r}")


def _lambda_grid(prob):
    s1 = prob.sigma_max
    lo = GRID_FLOOR_RTOL * s1
    hi = GRID_TOP_FACTOR * s1
    return np.geomspace(lo, hi, GRID_POINTS)


def _golden_refine(f, lo, hi):
    """Golden-section minimization of f on [lo, hi] to relative width 1e-4."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > REFINE_RELWIDTH * b:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _grid_then_refine(prob, objective):
    """Minimize an objective over the log-lambda grid, then refine locally."""
    grid = _lambda_grid(prob)
    vals = np.array([objective(lam) for lam in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        lam = _golden_refine(objective, lo, hi)
        if objective(lam) > vals[i]:
            lam = grid[i]
    else:
        lam = grid[i]
    return float(lam)


def select_lambda_optimal(prob, V, prior, s_true):
    """Oracle rule: minimize the reconstruction error against the true solution."""
    if s_true is None:
        raise ConfigError("optimal rule requires the true solution")
    s_true = np.asarray(s_true, dtype=float)

    def objective(lam):
        y = projected_tikhonov(prob, lam).y
        s = recover_solution(prior, V, y)
        d = s - s_true
        return float(np.dot(d, d))

    lam = _grid_then_refine(prob, objective)
    return lam, projected_tikhonov(prob, lam).y


def select_lambda_dp(prob, rule):
    """Discrepancy principle: residual norm matches nu_dp times the noise norm.

    The projected residual is nondecreasing in lambda, so the root is found by
    bisection in log-lambda to 1e-6 relative accuracy in the residual. If the
    lambda=0 residual already exceeds the target, lambda=0 is returned; if
    even the top of the grid cannot reach the target, the top is returned.
    Both saturations are logged.
    """
    if rule.noise_norm is None:
        raise ConfigError("dp rule requires noise_norm")
    target = rule.nu_dp * rule.noise_norm

    def residual(lam):
        return projected_tikhonov(prob, lam).projected_residual_norm

    tol = 1e-6 * max(target, prob.beta1 * 1e-300)
    if residual(0.0) >= target:
        if residual(0.0) > target + tol:
            log.warning(
                "dp: residual at lambda=0 (%.6e) already exceeds target %.6e",
                residual(0.0),
                target,
            )
        return 0.0, projected_tikhonov(prob, 0.0).y

    lo = GRID_FLOOR_RTOL * prob.sigma_max
    hi = GRID_TOP_FACTOR * prob.sigma_max
    if residual(hi) < target:
        log.warning(
            "dp: target %.6e unreachable, residual at lambda=%.3e is %.6e",
            target,
            hi,
            residual(hi),
        )
        return float(hi), projected_tikhonov(prob, hi).y
    if residual(lo) >= target:
        return float(lo), projected_tikhonov(prob, lo).y

    for _ in range(200):
        mid = math.sqrt(lo * hi)
        r = residual(mid)
        if abs(r - target) <= tol:
            lo = hi = mid
            break
        if r < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    lam = math.sqrt(lo * hi)
    return float(lam), projected_tikhonov(prob, lam).y


def wgcv_value(prob, lam, omega):
    """Weighted GCV functional G_omega(lambda) for the projected problem.

    Numerator: squared projected residual. Denominator: the squared weighted
    trace (k+1) - omega * sum_i sigma_i^2 / (sigma_i^2 + lambda^2). omega = 1
    is standard GCV.
    """
    s, bhat, tail2 = prob.svd_projection
    lam2 = lam * lam
    filt = lam2 / (s * s + lam2) if lam > 0 else np.where(s > 0, 0.0, 1.0)
    num = float(np.sum((filt * bhat) ** 2)) + tail2
    rows = prob.M.shape[0]
    trace = rows - omega * float(np.sum(s * s / (s * s + lam2)))
    return num / (trace * trace)


def select_lambda_wgcv(prob, rule, omega=None):
    """Minimize the weighted GCV functional over the lambda grid."""
    om = rule.omega if omega is None else float(omega)
    if not 0.0 < om <= 1.0:
        raise ConfigError("omega must lie in (0, 1]")

    lam = _grid_then_refine(prob, lambda lam: wgcv_value(prob, lam, om))
    return lam, projected_tikhonov(prob, lam).y, om


def suggest_omega(prob):
    """Adaptive weight: make G_omega stationary at lambda = sigma_min(M).

    Treats the smallest projected singular value as the tentative optimal
    regularization level and solves dG/dlambda = 0 there for omega in closed
    form; clamped into (0, 1]. Hybrid drivers average these suggestions along
    the iteration.
    """
    s, bhat, tail2 = prob.svd_projection
    smin = float(s[-1]) if s.size else 0.0
    if smin <= 0:
        return 1.0
    lam = smin
    lam2 = lam * lam
    denom_i = s * s + lam2
    phi = lam2 / denom_i
    num = float(np.sum((phi * bhat) ** 2)) + tail2
    dphi = 2.0 * lam * s * s / denom_i**2
    dnum = float(np.sum(2.0 * phi * bhat * bhat * dphi))
    psi_sum = float(np.sum(s * s / denom_i))
    S = float(np.sum(dphi))  # = -d(psi_sum)/dlambda
    rows = prob.M.shape[0]
    denom = dnum * psi_sum + 2.0 * num * S
    if denom <= 0 or dnum <= 0:
        return 1.0
    return float(min(1.0, dnum * rows / denom))
