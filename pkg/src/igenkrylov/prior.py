"""Prior and noise models: Matern covariance with fast matvecs.

The covariance matrix Q on a regular grid with a stationary kernel is
(block-)Toeplitz, so Q x can be evaluated by embedding into a circulant
matrix of size prod(2*n_i - 1), diagonalizing with the FFT, and truncating.
Q is never factorized or inverted anywhere in the package; all solvers only
need its action.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .errors import (
    CapacityError,
    DimensionError,
    InvalidParameterError,
    NumericalError,
    UnsupportedError,
)

DENSE_LIMIT = 4096

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class MaternKernel:
    """Stationary Matern covariance with smoothness ``nu`` and scale ``alpha``.

    ``alpha`` is the inverse correlation length (alpha = 1/ell). ``nu`` = 1/2
    gives the exponential kernel; half-integer orders use closed forms and
    other orders fall back to a numerical modified-Bessel evaluation.
    """

    nu: float
    alpha: float
    variance: float = 1.0

    def __post_init__(self):
        if self.nu <= 0 or self.alpha <= 0:
            raise InvalidParameterError("nu and alpha must be positive")
        if self.variance <= 0:
            raise InvalidParameterError("variance must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise InvalidParameterError("distances must be nonnegative")
        t = math.sqrt(2.0 * self.nu) * self.alpha * r
        if self.nu == 0.5:
            val = np.exp(-t)
        elif self.nu == 1.5:
            s = _SQRT3 * self.alpha * r
            val = (1.0 + s) * np.exp(-s)
        elif self.nu == 2.5:
            s = _SQRT5 * self.alpha * r
            val = (1.0 + s + s * s / 3.0) * np.exp(-s)
        else:
            val = np.empty_like(t)
            zero = t == 0
            tv = t[~zero]
            val[~zero] = (
                (2.0 ** (1.0 - self.nu) / gamma_fn(self.nu)) * tv**self.nu * kv(self.nu, tv)
            )
            val[zero] = 1.0
        return self.variance * val


def matern_eval(kernel, r):
    """Kernel value at distance r (scalar in, scalar out)."""
    return float(kernel(np.asarray(r, dtype=float)))


@dataclass(frozen=True)
class Grid:
    """Regular grid of cell centers on the unit interval/square.

    2-d grids are vectorized column-major ("stack the columns"): vector index
    v maps to cell (row, col) = (v % n1, v // n1).
    """

    shape: tuple

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) not in (1, 2) or any(s < 1 for s in shape):
            raise InvalidParameterError(f"unsupported grid shape {shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def npoints(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return tuple(1.0 / s for s in self.shape)

    def points(self):
        """Coordinates of all grid points in vectorization order, shape (n, d)."""
        if len(self.shape) == 1:
            (n,) = self.shape
            return ((np.arange(n) + 0.5) / n)[:, None]
        n1, n2 = self.shape
        rows = (np.arange(n1) + 0.5) / n1
        cols = (np.arange(n2) + 0.5) / n2
        cc, rr = np.meshgrid(cols, rows)  # rr varies fastest down columns
        return np.column_stack([rr.ravel(order="F"), cc.ravel(order="F")])


def build_dense_cov(grid, kernel, dense_limit=DENSE_LIMIT):
    """Dense covariance matrix Q_ij = kernel(|x_i - x_j|)."""
    n = grid.npoints
    if n > dense_limit:
        raise CapacityError(f"{n} grid points exceed dense limit {dense_limit}")
    pts = grid.points()
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return kernel(r)


def _embedding_symbol(grid, kernel):
    """FFT of the circulant embedding of the (block-)Toeplitz covariance."""
    if len(grid.shape) == 1:
        (n,) = grid.shape
        h = 1.0 / n
        d = np.arange(2 * n - 1)
        d = np.where(d < n, d, d - (2 * n - 1))
        return np.fft.rfft(kernel(np.abs(d) * h))
    n1, n2 = grid.shape
    h1, h2 = 1.0 / n1, 1.0 / n2
    d1 = np.arange(2 * n1 - 1)
    d1 = np.where(d1 < n1, d1, d1 - (2 * n1 - 1))
    d2 = np.arange(2 * n2 - 1)
    d2 = np.where(d2 < n2, d2, d2 - (2 * n2 - 1))
    r = np.hypot((d1 * h1)[:, None], (d2 * h2)[None, :])
    return np.fft.rfft2(kernel(r))


class CovarianceOperator:
    """Symmetric PSD covariance operator Q on a regular grid.

    backend "dense" stores Q explicitly (small grids only); "fft-bttb"
    applies Q in O(n log n) through the circulant embedding. Instances are
    immutable after construction and safe for concurrent matvecs.
    """

    def __init__(self, grid, kernel, backend="fft-bttb", dense_limit=DENSE_LIMIT):
        if backend not in ("dense", "fft-bttb"):
            raise UnsupportedError(f"unknown covariance backend {backend!r}")
        self.grid = grid if isinstance(grid, Grid) else Grid(tuple(np.atleast_1d(grid)))
        self.kernel = kernel
        self.backend = backend
        self.n = self.grid.npoints
        if backend == "dense":
            self._dense = build_dense_cov(self.grid, kernel, dense_limit)
            self._symbol = None
        else:
            self._dense = None
            self._symbol = _embedding_symbol(self.grid, kernel)

    @property
    def is_identity(self):
        return False

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}")
        if self.backend == "dense":
            return self._dense @ x
        if len(self.grid.shape) == 1:
            (n,) = self.grid.shape
            m = 2 * n - 1
            xpad = np.zeros(m)
            xpad[:n] = x
            out = np.fft.irfft(np.fft.rfft(xpad) * self._symbol, m)
            return out[:n]
        n1, n2 = self.grid.shape
        m1, m2 = 2 * n1 - 1, 2 * n2 - 1
        xpad = np.zeros((m1, m2))
        xpad[:n1, :n2] = x.reshape((n1, n2), order="F")
        out = np.fft.irfft2(np.fft.rfft2(xpad) * self._symbol, s=(m1, m2))
        return out[:n1, :n2].ravel(order="F")


class IdentityCovariance:
    """Q = I; used to reduce the generalized methods to their standard forms."""

    def __init__(self, n):
        self.n = int(n)

    @property
    def is_identity(self):
        return True

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}")
        return x


def fft_cov_apply(grid, kernel, x):
    """One-shot FFT covariance matvec Q x (builds the symbol on the fly)."""
    op = CovarianceOperator(grid, kernel, backend="fft-bttb")
    return op.apply(x)


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise covariance R = sigma^2 I with cheap inverse."""

    sigma: float
    dimension: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidParameterError("sigma must be positive")
        if self.dimension < 1:
            raise InvalidParameterError("dimension must be positive")

    @property
    def is_identity(self):
        return self.sigma == 1.0

    def apply_rinv(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionError(f"expected vector of length {self.dimension}")
        if self.sigma == 1.0:
            return x
        return x / (self.sigma * self.sigma)


def apply_Rinv(noise, x):
    """R^{-1} x for the diagonal noise covariance."""
    return noise.apply_rinv(x)


@dataclass
class PriorModel:
    """Gaussian prior: mean ``mu``, covariance operator ``Q``, precision scale."""

    mu: np.ndarray
    Q: object
    lambda_scale: float = 1.0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.lambda_scale <= 0:
            raise InvalidParameterError("lambda_scale must be positive")
        if self.mu.shape != (self.Q.n,):
            raise DimensionError("prior mean and covariance dimensions disagree")

    @property
    def n(self):
        return self.Q.n


def identity_prior(n):
    """Prior with zero mean and Q = I (standard, non-generalized setting)."""
    return PriorModel(mu=np.zeros(n), Q=IdentityCovariance(n))


def weighted_norm(x, weight_apply):
    """sqrt(x^T W x) for an SPD weight given by its action.

    A quadratic form below -1e-10 * ||x||^2 signals loss of positive
    definiteness and raises; tiny negative values are clamped to zero.
    """
    x = np.asarray(x, dtype=float)
    q = float(np.dot(x, weight_apply(x)))
    floor = -1e-10 * float(np.dot(x, x))
    if q < floor:
        raise NumericalError(f"quadratic form {q:.3e} is negative beyond tolerance")
    return math.sqrt(max(q, 0.0))
