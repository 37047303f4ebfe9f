"""Golub-Kahan-type decompositions with weighted inner products and inexact products.

One engine covers the four variants: the classic process (Q = I, R = I, exact
products), its inexact counterpart, the generalized process orthogonal in the
R^{-1} and Q inner products, and the inexact generalized process. With exact
products the projected matrix is numerically bidiagonal; with inexact products
it fills in to upper Hessenberg, and the adjoint-side coefficients fill a
triangular matrix, which is what keeps the bases orthonormal at machine
precision regardless of the error level.

A standalone two-term-recurrence implementation of the classic process is
provided as an independent oracle (``gk_decompose``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linop
from .errors import BreakdownSignal, DegenerateInputError, DimensionError
from .prior import weighted_norm

# Normalization coefficients below BREAKDOWN_RTOL * beta1 stop the recurrence.
BREAKDOWN_RTOL = 1e-14


@dataclass
class BidiagState:
    """Iteration-k factorization state.

    U has k+1 columns orthonormal in the R^{-1} inner product and V has k+1
    columns orthonormal in the Q inner product (the last V column is the
    look-ahead vector for the next step; the solve basis is V[:, :k]). M is
    the (k+1)-by-k projected matrix, C = L^T the (k+1)-by-(k+1) upper
    triangular adjoint-side coefficient matrix. After a terminal breakdown M
    may be square (the subdiagonal entry vanished and no new U column exists).
    """

    mode: str
    U: np.ndarray
    V: np.ndarray
    M: np.ndarray
    C: np.ndarray
    beta1: float
    qv: np.ndarray = field(repr=False, default=None)  # cached Q @ V[:, -1]
    terminated: bool = False

    @property
    def k(self):
        return self.M.shape[1]


def mode_label(inexact, prior, noise):
    generalized = not (prior.Q.is_identity and noise.is_identity)
    active = inexact is not None and inexact.active
    if generalized:
        return "igengk" if active else "gengk"
    return "igk" if active else "gk"


def _orthogonalize(vec, basis, weight_apply, passes=2):
    """Gram-Schmidt against ``basis`` in the ``weight_apply`` inner product.

    Classical Gram-Schmidt, two passes. Coefficients of both passes are
    accumulated so the expansion vec = basis @ coeffs + remainder stays exact,
    which keeps the factorization residuals at rounding level while the second
    pass restores orthogonality to machine precision.
    """
    coeffs = np.zeros(basis.shape[1])
    for _ in range(passes):
        w = weight_apply(vec)
        c = basis.T @ w
        vec = vec - basis @ c
        coeffs += c
    return vec, coeffs


def igenGK_init(A, inexact, prior, noise, b):
    """Initial state: u1 = b / ||b||_{R^{-1}}, v1 from the iteration-1 adjoint."""
    b = np.asarray(b, dtype=float)
    if b.shape != (A.nrows,):
        raise DimensionError("right-hand side length does not match operator rows")
    beta1 = weighted_norm(b, noise.apply_rinv)
    if beta1 == 0.0:
        raise DegenerateInputError("right-hand side is zero")
    u1 = b / beta1

    vbar = linop.perturbed_apply_adjoint(A, inexact, 1, noise.apply_rinv(u1))
    qv = prior.Q.apply(vbar)
    c11 = math.sqrt(max(float(np.dot(vbar, qv)), 0.0))
    if c11 <= BREAKDOWN_RTOL * beta1:
        raise BreakdownSignal("adjoint of right-hand side is degenerate", where="init")
    v1 = vbar / c11

    return BidiagState(
        mode=mode_label(inexact, prior, noise),
        U=u1[:, None],
        V=v1[:, None],
        M=np.zeros((1, 0)),
        C=np.array([[c11]]),
        beta1=beta1,
        qv=qv / c11,
    )


def igenGK_step(state, A, inexact, prior, noise):
    """Advance the decomposition by one column pair.

    Iteration i = k+1 computes u_{i+1} from the forward product with Q v_i and
    v_{i+1} from the adjoint product at iteration i+1, each fully
    reorthogonalized in its weighted inner product. On breakdown of the U-side
    normalization the projected matrix is committed in square, terminal form
    (its last subdiagonal vanished), so the projected problem built so far is
    still solvable; a BreakdownSignal is raised either way.
    """
    if state.terminated:
        raise BreakdownSignal("state is terminal", where="u")
    i = state.k + 1
    tol = BREAKDOWN_RTOL * state.beta1

    ubar = linop.perturbed_apply(A, inexact, i, state.qv)
    u, mcol = _orthogonalize(ubar, state.U, noise.apply_rinv)
    norm_u = weighted_norm(u, noise.apply_rinv)
    if norm_u <= tol:
        # Terminal commit: M becomes i-by-i, relations hold with U_i exactly.
        state.M = np.column_stack([state.M, mcol])
        state.terminated = True
        raise BreakdownSignal("U-side normalization vanished", where="u")
    Mnew = np.zeros((i + 1, i))
    Mnew[:i, : i - 1] = state.M
    Mnew[:i, i - 1] = mcol
    Mnew[i, i - 1] = norm_u
    unew = u / norm_u

    vbar = linop.perturbed_apply_adjoint(A, inexact, i + 1, noise.apply_rinv(unew))
    v, lrow = _orthogonalize(vbar, state.V, prior.Q.apply)
    qv = prior.Q.apply(v)
    norm_v = math.sqrt(max(float(np.dot(v, qv)), 0.0))
    state.U = np.column_stack([state.U, unew])
    state.M = Mnew
    if norm_v <= tol:
        state.terminated = True
        raise BreakdownSignal("V-side normalization vanished", where="v")
    Cnew = np.zeros((i + 1, i + 1))
    Cnew[:i, :i] = state.C
    Cnew[:i, i] = lrow
    Cnew[i, i] = norm_v
    state.V = np.column_stack([state.V, v / norm_v])
    state.C = Cnew
    state.qv = qv / norm_v
    return state


def igenGK_run(A, inexact, prior, noise, b, steps):
    """Run ``steps`` iterations, stopping gracefully on breakdown."""
    state = igenGK_init(A, inexact, prior, noise, b)
    reason = "max_iter"
    for _ in range(steps):
        try:
            igenGK_step(state, A, inexact, prior, noise)
        except BreakdownSignal:
            reason = "breakdown"
            break
    return state, reason


def gk_decompose(A, b, steps, reorthogonalize=True):
    """Classic two-term Golub-Kahan recurrence (independent of the engine).

    beta_{k+1} u_{k+1} = A v_k - alpha_k u_k and
    alpha_{k+1} v_{k+1} = A^T u_{k+1} - beta_{k+1} v_k, with optional full
    reorthogonalization. The bidiagonal matrix is returned inside M; C holds
    its adjoint-side transpose so relation diagnostics apply unchanged.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.nrows,):
        raise DimensionError("right-hand side length does not match operator rows")
    beta1 = float(np.linalg.norm(b))
    if beta1 == 0.0:
        raise DegenerateInputError("right-hand side is zero")
    tol = BREAKDOWN_RTOL * beta1

    us = [b / beta1]
    alphas = []
    betas = []
    w = A.apply_adjoint(us[0])
    alpha = float(np.linalg.norm(w))
    if alpha <= tol:
        raise BreakdownSignal("adjoint of right-hand side is degenerate", where="init")
    vs = [w / alpha]
    alphas.append(alpha)

    terminated = False
    for i in range(steps):
        w = A.apply(vs[i]) - alphas[i] * us[i]
        if reorthogonalize:
            U = np.column_stack(us)
            for _ in range(2):
                w = w - U @ (U.T @ w)
        beta = float(np.linalg.norm(w))
        if beta <= tol:
            terminated = True
            break
        us.append(w / beta)
        betas.append(beta)

        w = A.apply_adjoint(us[i + 1]) - beta * vs[i]
        if reorthogonalize:
            V = np.column_stack(vs)
            for _ in range(2):
                w = w - V @ (V.T @ w)
        alpha = float(np.linalg.norm(w))
        if alpha <= tol:
            terminated = True
            break
        vs.append(w / alpha)
        alphas.append(alpha)

    nu, nv = len(us), len(vs)
    M = np.zeros((nu, nv))
    C = np.zeros((nv, nv))
    for j in range(nv):
        M[j, j] = alphas[j]
        C[j, j] = alphas[j]
        if j + 1 < nu:
            M[j + 1, j] = betas[j] if j < len(betas) else 0.0
        if j + 1 < nv:
            C[j, j + 1] = betas[j]
    return BidiagState(
        mode="gk",
        U=np.column_stack(us),
        V=np.column_stack(vs),
        M=M,
        C=C,
        beta1=beta1,
        terminated=terminated,
    )


@dataclass
class RelationReport:
    """Relative Frobenius residuals of the factorization relations, exact operator."""

    err_adjoint: float
    err_forward: float
    err_Vorth: float
    err_Uorth: float

    def as_dict(self):
        return {
            "err_adjoint": self.err_adjoint,
            "err_forward": self.err_forward,
            "err_Vorth": self.err_Vorth,
            "err_Uorth": self.err_Uorth,
        }


def relation_diagnostics(state, exact_op, prior, noise):
    """Residuals of the four factorization relations, using exact products.

    The left-hand sides are evaluated with the exact operator, so with
    inexact decompositions the residuals measure the accumulated injected
    error; with exact ones they sit at rounding level.
    """
    k = min(state.k, state.V.shape[1], state.U.shape[1] - 1)
    if k < 1:
        raise DimensionError("need at least one completed step for diagnostics")
    Uk = state.U[:, :k]
    Vk = state.V[:, :k]
    Lt = state.C[:k, :k]

    rinv_Uk = np.column_stack([noise.apply_rinv(Uk[:, j]) for j in range(k)])
    lhs_adj = np.column_stack([exact_op.apply_adjoint(rinv_Uk[:, j]) for j in range(k)])
    err_adjoint = _rel_fro(lhs_adj - Vk @ Lt, lhs_adj)

    QV = np.column_stack([prior.Q.apply(Vk[:, j]) for j in range(k)])
    lhs_fwd = np.column_stack([exact_op.apply(QV[:, j]) for j in range(k)])
    kk = min(k, state.M.shape[1])
    rhs_fwd = state.U[:, : state.M.shape[0]] @ state.M[:, :kk]
    err_forward = _rel_fro(lhs_fwd[:, :kk] - rhs_fwd, lhs_fwd[:, :kk])

    gram_v = Vk.T @ QV
    err_Vorth = np.linalg.norm(gram_v - np.eye(k)) / math.sqrt(k)
    Ukk = state.U
    rinv_U = np.column_stack([noise.apply_rinv(Ukk[:, j]) for j in range(Ukk.shape[1])])
    gram_u = Ukk.T @ rinv_U
    err_Uorth = np.linalg.norm(gram_u - np.eye(Ukk.shape[1])) / math.sqrt(Ukk.shape[1])
    return RelationReport(err_adjoint, err_forward, err_Vorth, err_Uorth)


def _rel_fro(resid, ref):
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        return float(np.linalg.norm(resid))
    return float(np.linalg.norm(resid) / denom)
