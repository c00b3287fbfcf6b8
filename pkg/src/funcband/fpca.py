"""Functional principal components of a centered curve series.

The covariance kernel is estimated on the grid and diagonalized under the
trapezoidal inner product, so eigenfunctions are orthonormal in the
quadrature sense.  The private ``_batched_*`` helpers accept arrays with
arbitrary leading axes and are shared with the predictors' vectorized refits.
"""

from dataclasses import dataclass

import numpy as np

from .curves import FunctionalSeries, Grid
from .errors import ContractViolationError, DegenerateDataError, InvalidInputError

__all__ = [
    "EigenSystem",
    "ScoreDecomposition",
    "covariance_operator",
    "eigendecompose",
    "select_m",
    "max_components",
    "decompose",
    "fpca",
]

RANK_TOL = 1e-12
Q_DEFAULT = 0.85


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues (descending) and quadrature-orthonormal eigenfunctions.

    ``eigenfunctions[:, j]`` holds the j-th eigenfunction on the grid.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: Grid

    @property
    def rank(self):
        """Number of eigenvalues above ``1e-12`` times the largest."""
        return _numerical_rank(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class ScoreDecomposition:
    scores: np.ndarray
    remainders: np.ndarray
    m: int


def _numerical_rank(eigenvalues):
    lam = np.asarray(eigenvalues)
    if lam.size == 0 or lam[0] <= 0:
        return 0
    return int(np.count_nonzero(lam > RANK_TOL * lam[0]))


def _batched_covariance(devs):
    n = devs.shape[-2]
    cov = np.swapaxes(devs, -1, -2) @ devs / n
    return (cov + np.swapaxes(cov, -1, -2)) / 2


def _batched_eigh(kernel, weights):
    """Weighted eigenproblem for stacked kernels; returns descending pairs."""
    sw = np.sqrt(weights)
    sym = sw[:, None] * kernel * sw[None, :]
    sym = (sym + np.swapaxes(sym, -1, -2)) / 2
    lam, vecs = np.linalg.eigh(sym)
    lam = lam[..., ::-1]
    funcs = vecs[..., ::-1] / sw[:, None]
    # flip so the entry of largest magnitude is positive (first index on ties)
    idx = np.argmax(np.abs(funcs), axis=-2)[..., None, :]
    signs = np.sign(np.take_along_axis(funcs, idx, axis=-2))
    signs[signs == 0] = 1.0
    return np.maximum(lam, 0.0), funcs * signs


def _batched_select_m(eigenvalues, threshold, m_max=None):
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum(axis=-1, keepdims=True)
    ratio = np.cumsum(lam, axis=-1) / np.where(total > 0, total, 1.0)
    m = np.argmax(ratio >= threshold - 1e-12, axis=-1) + 1
    rank = np.count_nonzero(lam > RANK_TOL * lam[..., :1], axis=-1)
    m = np.minimum(m, np.maximum(rank, 1))
    if m_max is not None:
        m = np.minimum(m, max(int(m_max), 1))
    return m


def covariance_operator(centered):
    """Lag-0 sample covariance kernel: the mean over curves of ``dev(tau_i) * dev(tau_j)``.

    Raises
    ------
    ContractViolationError
        If the column means exceed ``1e-8`` (relative to the data scale).
    """
    devs = centered.values if isinstance(centered, FunctionalSeries) else np.asarray(centered, dtype=float)
    scale = max(1.0, float(np.max(np.abs(devs))) if devs.size else 1.0)
    if np.max(np.abs(devs.mean(axis=0))) > 1e-8 * scale:
        raise ContractViolationError("covariance_operator requires a centered series")
    return _batched_covariance(devs)


def eigendecompose(kernel, grid):
    """Eigenpairs of the integral operator with this kernel under trapezoidal quadrature.

    Scales the kernel symmetrically by the square-root weights, diagonalizes
    it, and divides the eigenvectors by the square-root weights again so
    the returned eigenfunctions are orthonormal for :func:`~funcband.curves.inner_product`.
    Eigenvalues are sorted descending and negative round-off is clipped to zero.
    """
    kern = np.asarray(kernel, dtype=float)
    J = len(grid)
    if kern.shape != (J, J):
        raise InvalidInputError(f"kernel must be {J} x {J}, got {kern.shape}")
    scale = max(1.0, float(np.max(np.abs(kern))))
    if np.max(np.abs(kern - kern.T)) > 1e-10 * scale:
        raise InvalidInputError("kernel is not symmetric")
    lam, funcs = _batched_eigh(kern, grid.weights)
    return EigenSystem(lam, funcs, grid)


def max_components(n, J):
    """Cap ``floor(min(n/4, J/2))`` (at least 1) on the truncation level."""
    return max(1, int(np.floor(min(n / 4, J / 2))))


def select_m(eigenvalues, Q=Q_DEFAULT, m_max=None):
    """Smallest ``m`` whose leading eigenvalues explain at least a fraction ``Q`` of the total.

    The result is further capped by ``m_max`` and by the numerical rank.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < Q < 1:
        raise InvalidInputError("Q must lie in (0, 1)")
    if lam.ndim != 1 or lam.size == 0 or not np.all(np.diff(lam) <= 0):
        raise InvalidInputError("eigenvalues must be a non-empty descending sequence")
    if lam.sum() <= 0:
        raise DegenerateDataError("all eigenvalues are zero; nothing to explain")
    return int(_batched_select_m(lam, Q, m_max))


def decompose(centered, eigsys, m):
    """Scores on the first ``m`` eigenfunctions and the remainder curves.

    Each centered curve equals ``scores[t] @ eigenfunctions[:, :m].T + remainders[t]``.
    """
    m = int(m)
    funcs = eigsys.eigenfunctions
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    if m > funcs.shape[1]:
        raise InvalidInputError(f"m={m} exceeds the {funcs.shape[1]} available eigenfunctions")
    devs = centered.values if isinstance(centered, FunctionalSeries) else np.asarray(centered, dtype=float)
    basis = funcs[:, :m]
    scores = devs @ (eigsys.grid.weights[:, None] * basis)
    remainders = devs - scores @ basis.T
    return ScoreDecomposition(scores, remainders, m)


def fpca(series, m=None, Q=Q_DEFAULT, m_max=None):
    """Center, diagonalize and decompose in one call.

    Returns
    -------
    mean_curve, eigsys, decomposition
    """
    from .curves import center

    centered, mean_curve = center(series)
    eigsys = eigendecompose(covariance_operator(centered), series.grid)
    if eigsys.rank == 0:
        raise DegenerateDataError("the series has no variation around its mean")
    if m is None:
        if m_max is None:
            m_max = max_components(series.n, len(series.grid))
        m = select_m(eigsys.eigenvalues, Q, m_max)
    elif m > eigsys.rank:
        raise InvalidInputError(f"m={m} exceeds the numerical rank {eigsys.rank}")
    return mean_curve, eigsys, decompose(centered, eigsys, m)
