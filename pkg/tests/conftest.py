import numpy as np
import pytest

from igenkrylov import tomo


class DenseSPDCovariance:
    """Arbitrary dense SPD weight exposed through the covariance interface."""

    def __init__(self, mat):
        self.mat = np.asarray(mat, dtype=float)
        self.n = self.mat.shape[0]

    @property
    def is_identity(self):
        return False

    def apply(self, x):
        return self.mat @ x


def random_spd(n, rng, cond=10.0):
    """Well-conditioned random SPD matrix with eigenvalues in [1/cond, 1]."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0 / cond, 1.0, n)
    return Q @ np.diag(eig) @ Q.T


def naive_matvec(mat, x):
    """Triple-loop matrix-vector product, independent of numpy's dot."""
    m, n = mat.shape
    out = [0.0] * m
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += mat[i][j] * x[j]
        out[i] = acc
    return np.array(out)


def dot_test(op, rng, scale=None):
    """|<u, Av> - <A^T u, v>| relative to the product magnitudes."""
    u = rng.standard_normal(op.nrows)
    v = rng.standard_normal(op.ncols)
    av = op.apply(v)
    atu = op.apply_adjoint(u)
    lhs = float(np.dot(u, av))
    rhs = float(np.dot(atu, v))
    denom = max(np.linalg.norm(av) * np.linalg.norm(u), np.linalg.norm(atu) * np.linalg.norm(v))
    return abs(lhs - rhs) / denom if denom > 0 else abs(lhs - rhs)


def dense_generalized_tikhonov(Amat, Qmat, sigma, b, lam, mu=None):
    """Direct solution of min ||A Q x - b||_{R^{-1}}^2 + lam^2 ||x||_Q^2, R = sigma^2 I.

    Whitening oracle: substitute z = Q^{1/2} x, solve standard Tikhonov by SVD,
    and return s = mu + Q^{1/2} z (no inverse of Q needed).
    """
    n = Qmat.shape[0]
    mu = np.zeros(n) if mu is None else mu
    w, P = np.linalg.eigh(Qmat)
    Qh = P @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ P.T
    B = (Amat @ Qh) / sigma
    c = b / sigma
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    bt = U.T @ c
    if lam == 0.0:
        filt = np.where(s > 1e-12 * s[0], 1.0 / np.where(s > 1e-12 * s[0], s, 1.0), 0.0)
    else:
        filt = s / (s * s + lam * lam)
    z = Vt.T @ (filt * bt)
    return mu + Qh @ z


@pytest.fixture(scope="session")
def small_ct():
    """16x16 CT problem with 8 angles, used across operator tests."""
    geom = tomo.CTGeometry(n=16, angles=tomo.default_angles(count=8, step=22.0))
    return geom, tomo.RadonOperator(geom)
