"""Pluggable curve predictors: fit on a series, forecast ``h`` steps from the last ``k`` curves.

Every fitted predictor works on deviations from its training mean:
``predict(block, h) = mean + predict_deviation(block - mean, h)``.  The
bootstrap uses :meth:`FittedPredictor.predict_deviation` directly so the
refitted operator can be applied to curves centered by a different mean.

Multi-step forecasts iterate the one-step map, feeding predicted curves back
in as inputs once the observed block is exhausted.

``fit_predictor`` also accepts a stack of series (shape ``(B, n, J)``) and
returns one batched fit; FAR(1) and the mean predictor are vectorized, the
other kinds loop.
"""

from dataclasses import asdict, dataclass, fields
import warnings

import numpy as np

from .curves import FunctionalSeries, Grid, l2_norm
from .errors import InvalidInputError, RankError
from .fpca import (
    Q_DEFAULT,
    _batched_covariance,
    _batched_eigh,
    _batched_select_m,
    fpca,
    max_components,
)
from .var import fit_forward

__all__ = [
    "PredictorSpec",
    "FittedPredictor",
    "fit_predictor",
    "far1_fit",
    "var_scores_fit",
    "nfr_fit",
    "mean_fit",
    "predict",
]

KINDS = ("far1", "var_scores", "nfr", "mean")
FAR1_EIG_TOL = 1e-10
NFR_N_BANDWIDTHS = 15


@dataclass(frozen=True)
class PredictorSpec:
    """Which predictor to use and its hyperparameters.

    Parameters
    ----------
    kind : {"far1", "var_scores", "nfr", "mean"}
    M : int, optional
        FAR(1) component count; chosen by the variance-ratio rule when None.
    Q : float
        Variance-ratio threshold used when ``M`` (or ``d``) is None.
    d : int, optional
        Number of leading scores modelled by ``var_scores``.
    p : int
        VAR order of ``var_scores``; also its terminal-block depth.
    bandwidth : float, optional
        Fixed NFR bandwidth; None selects it by leave-one-out cross-validation.
    """

    kind: str = "far1"
    M: int = None
    Q: float = Q_DEFAULT
    d: int = None
    p: int = 1
    bandwidth: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown predictor kind {self.kind!r}; choose from {KINDS}")
        if not 0 < self.Q < 1:
            raise InvalidInputError("Q must lie in (0, 1)")
        if self.p < 1:
            raise InvalidInputError("p must be at least 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise InvalidInputError("bandwidth must be positive")

    @property
    def k(self):
        """Number of terminal curves the predictor consumes."""
        return self.p if self.kind == "var_scores" else 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {entry.name for entry in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidInputError(f"unknown predictor fields: {sorted(unknown)}")
        return cls(**data)


class FittedPredictor:
    """Base class; subclasses implement :meth:`step` on deviation curves."""

    kind = None

    def __init__(self, mean, grid, k):
        self.mean = mean
        self.grid = grid
        self.k = k

    def step(self, devs):
        """One-step forecast from ``devs`` of shape ``(..., k, J)`` (oldest first)."""
        raise NotImplementedError

    def predict_deviation(self, devs, h):
        """``h``-step forecast (as a deviation) from a deviation block ``(..., k, J)``."""
        h = int(h)
        if h < 1:
            raise InvalidInputError("horizon h must be at least 1")
        window = np.asarray(devs, dtype=float)
        if window.shape[-2:] != (self.k, len(self.grid)):
            raise InvalidInputError(f"block must have shape (..., {self.k}, {len(self.grid)}), got {window.shape}")
        out = None
        for _ in range(h):
            out = self.step(window)
            lead = out.shape[:-1]
            old = np.broadcast_to(window[..., 1:, :], lead + (self.k - 1, window.shape[-1]))
            window = np.concatenate([old, out[..., None, :]], axis=-2)
        return out

    def predict(self, block, h=1):
        """Forecast the curve ``h`` steps past the last ``k`` curves (oldest first)."""
        block = _as_block(block, self.k, self.grid)
        mean = np.asarray(self.mean)
        return mean + self.predict_deviation(block - mean[..., None, :], h)


def _as_block(block, k, grid):
    if isinstance(block, FunctionalSeries):
        if block.grid != grid:
            raise InvalidInputError("block is on a different grid than the training data")
        block = block.values
    block = np.asarray(block, dtype=float)
    if block.ndim == 1:
        block = block[None, :]
    if block.shape[-1] != len(grid):
        raise InvalidInputError(f"block curves have {block.shape[-1]} points, grid has {len(grid)}")
    if block.shape[-2] < k:
        raise InvalidInputError(f"predictor needs the last {k} curves, got {block.shape[-2]}")
    return block[..., -k:, :]


class MeanFit(FittedPredictor):
    kind = "mean"

    def step(self, devs):
        lead = np.broadcast_shapes(devs.shape[:-2], np.shape(self.mean)[:-1])
        return np.zeros(lead + (devs.shape[-1],))


class Far1Fit(FittedPredictor):
    """FAR(1) with a truncated Yule-Walker kernel sampled on the grid (output point by input point)."""

    kind = "far1"

    def __init__(self, mean, grid, kernel, M):
        super().__init__(mean, grid, 1)
        self.kernel = kernel
        self.M = M

    def step(self, devs):
        weighted = devs[..., -1, :] * self.grid.weights
        return np.matmul(self.kernel, weighted[..., None])[..., 0]

    def apply(self, curve):
        """Integrate the kernel against a deviation curve (quadrature over the second argument)."""
        return np.matmul(self.kernel, (np.asarray(curve) * self.grid.weights)[..., None])[..., 0]


class VarScoresFit(FittedPredictor):
    kind = "var_scores"

    def __init__(self, mean, grid, eigenfunctions, model):
        super().__init__(mean, grid, model.order)
        self.eigenfunctions = eigenfunctions
        self.model = model
        self._proj = grid.weights[:, None] * eigenfunctions
        self._stacked = np.concatenate([model.coeffs[lag].T for lag in range(model.order - 1, -1, -1)], axis=0)

    def forecast_scores(self, scores, h):
        """Iterate the VAR ``h`` steps from ``scores`` of shape ``(..., p, d)`` (oldest first)."""
        window = np.asarray(scores, dtype=float)
        p, d = self.model.order, self.model.dim
        out = None
        for _ in range(int(h)):
            out = window.reshape(window.shape[:-2] + (p * d,)) @ self._stacked
            window = np.concatenate([window[..., 1:, :], out[..., None, :]], axis=-2)
        return out

    def step(self, devs):
        return self.forecast_scores(devs @ self._proj, 1) @ self.eigenfunctions.T


class NfrFit(FittedPredictor):
    """Functional Nadaraya-Watson regression of each curve on its predecessor, Gaussian kernel."""

    kind = "nfr"

    def __init__(self, mean, grid, predecessors, successors, bandwidth, cv_errors=None, candidates=None):
        super().__init__(mean, grid, 1)
        self.predecessors = predecessors
        self.successors = successors
        self.bandwidth = bandwidth
        self.cv_errors = cv_errors
        self.candidates = candidates

    def weights(self, curve):
        sq = _sq_dist(np.asarray(curve)[..., None, :], self.predecessors, self.grid.weights)
        return np.exp(-0.5 * sq / self.bandwidth**2)

    def step(self, devs):
        kern = self.weights(devs[..., -1, :])
        total = kern.sum(axis=-1, keepdims=True)
        empty = total[..., 0] <= np.finfo(float).tiny
        if np.any(empty):
            warnings.warn("all kernel weights vanished; falling back to the training mean", RuntimeWarning)
        safe = np.where(total > np.finfo(float).tiny, total, 1.0)
        out = (kern / safe) @ self.successors
        return np.where(empty[..., None], 0.0, out)


class StackedFit(FittedPredictor):
    """A batch of independent fits that share the grid and block depth."""

    def __init__(self, fits):
        first = fits[0]
        super().__init__(np.stack([fit.mean for fit in fits]), first.grid, first.k)
        self.kind = first.kind
        self.fits = list(fits)

    def step(self, devs):
        if devs.ndim == 3:
            return np.stack([fit.step(dev) for fit, dev in zip(self.fits, devs)])
        return np.stack([fit.step(devs) for fit in self.fits])


def _sq_dist(left, right, weights):
    diff = left - right
    return np.maximum((diff * diff) @ weights, 0.0)


def _values(series, grid=None):
    if isinstance(series, FunctionalSeries):
        return series.values, series.grid
    if grid is None:
        raise InvalidInputError("a raw array needs an explicit grid")
    return np.asarray(series, dtype=float), grid


def mean_fit(series, grid=None):
    values, grid = _values(series, grid)
    return MeanFit(values.mean(axis=-2), grid, 1)


def far1_fit(series, M=None, Q=Q_DEFAULT, grid=None):
    """FAR(1) operator estimate on the leading ``M`` principal components.

    The kernel expands on the leading eigenfunctions: its coefficient matrix is
    the lag-one cross-covariance of the scores, with each column divided by
    the matching eigenvalue.  Scores come from the centered curves.  Components whose eigenvalue is
    below ``1e-10`` times the largest are left out.  ``series`` may be a stack
    ``(B, n, J)``, in which case every slice is fitted independently.
    """
    values, grid = _values(series, grid)
    n, J = values.shape[-2:]
    if n < 2:
        raise InvalidInputError("FAR(1) needs at least two curves")
    weights = grid.weights
    mean = values.mean(axis=-2)
    devs = values - mean[..., None, :]
    lam, vecs = _batched_eigh(_batched_covariance(devs), weights)
    keep_rank = lam > FAR1_EIG_TOL * lam[..., :1]
    if M is None:
        M_sel = _batched_select_m(lam, Q, max_components(n, J))
    else:
        M = int(M)
        if M < 1 or M > J:
            raise InvalidInputError(f"M must lie in 1..{J}")
        if not np.all(keep_rank[..., M - 1]):
            raise RankError(f"eigenvalue {M} is numerically zero; reduce M")
        M_sel = np.full(lam.shape[:-1], M)
    use = (np.arange(J) < np.asarray(M_sel)[..., None]) & keep_rank
    inv_lam = np.where(use, 1.0 / np.where(use, lam, 1.0), 0.0)
    scores = devs @ (weights[:, None] * vecs)
    cross = np.swapaxes(scores[..., 1:, :], -1, -2) @ scores[..., :-1, :] / (n - 1)
    coef = cross * inv_lam[..., None, :] * use[..., :, None]
    kernel = vecs @ coef @ np.swapaxes(vecs, -1, -2)
    return Far1Fit(mean, grid, kernel, M_sel)


def var_scores_fit(series, d=None, p=1, Q=Q_DEFAULT, grid=None):
    """VAR(p) on the ``d`` leading scores; forecasts are rebuilt on the eigenfunctions."""
    values, grid = _values(series, grid)
    if values.ndim == 3:
        return StackedFit([var_scores_fit(vals, d, p, Q, grid) for vals in values])
    mean, eigsys, dec = fpca(FunctionalSeries(grid, values), m=d, Q=Q)
    model = fit_forward(dec.scores, p)
    return VarScoresFit(mean, grid, eigsys.eigenfunctions[:, :dec.m], model)


def _bandwidth_grid(dist):
    pos = dist[dist > 0]
    if pos.size == 0:
        return np.array([1.0])
    lo, hi = np.percentile(pos, [5, 95])
    lo = max(lo, 1e-12 * hi)
    if hi <= lo:
        return np.array([hi])
    return np.geomspace(lo, hi, NFR_N_BANDWIDTHS)


def nfr_fit(series, bandwidth=None, grid=None):
    """Nadaraya-Watson estimate of the conditional mean of a curve given its predecessor.

    With ``bandwidth=None`` the bandwidth is chosen among 15 log-spaced values
    between the 5th and 95th percentiles of pairwise predecessor distances by
    minimizing the leave-one-out one-step squared L2 error (first minimum wins).
    """
    values, grid = _values(series, grid)
    if values.ndim == 3:
        return StackedFit([nfr_fit(vals, bandwidth, grid) for vals in values])
    n = values.shape[0]
    if n < 3:
        raise InvalidInputError("NFR needs at least three curves")
    weights = grid.weights
    mean = values.mean(axis=0)
    devs = values - mean
    pred, succ = devs[:-1], devs[1:]
    if bandwidth is not None:
        return NfrFit(mean, grid, pred, succ, float(bandwidth))
    gram = (pred * weights) @ pred.T
    sq = np.diag(gram)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2 * gram, 0.0)
    np.fill_diagonal(dist2, 0.0)
    iu = np.triu_indices(n - 1, 1)
    candidates = _bandwidth_grid(np.sqrt(dist2[iu]))
    errors = np.empty(candidates.size)
    off = ~np.eye(n - 1, dtype=bool)
    for idx, delta in enumerate(candidates):
        kern = np.exp(-0.5 * dist2 / delta**2) * off
        total = kern.sum(axis=1, keepdims=True)
        ok = total > np.finfo(float).tiny
        fitted = np.where(ok, (kern / np.where(ok, total, 1.0)) @ succ, 0.0)
        errors[idx] = np.mean(((succ - fitted) ** 2) @ weights)
    best = int(np.argmin(errors))
    return NfrFit(mean, grid, pred, succ, float(candidates[best]), errors, candidates)


def fit_predictor(spec, series, grid=None):
    """Fit the predictor described by ``spec`` (a :class:`PredictorSpec` or a dict)."""
    if isinstance(spec, dict):
        spec = PredictorSpec.from_dict(spec)
    if spec.kind == "mean":
        return mean_fit(series, grid)
    if spec.kind == "far1":
        return far1_fit(series, M=spec.M, Q=spec.Q, grid=grid)
    if spec.kind == "var_scores":
        return var_scores_fit(series, d=spec.d, p=spec.p, Q=spec.Q, grid=grid)
    return nfr_fit(series, bandwidth=spec.bandwidth, grid=grid)


def predict(fitted, terminal_block, h=1):
    """Functional form of :meth:`FittedPredictor.predict`."""
    return fitted.predict(terminal_block, h)


def one_step_rmse(fitted, series):
    """Root mean squared L2 error of in-sample one-step forecasts (diagnostic)."""
    values = series.values
    k = fitted.k
    preds = np.stack([fitted.predict(values[end - k:end], 1) for end in range(k, series.n)])
    return float(np.sqrt(np.mean(l2_norm(values[k:] - preds, series.grid) ** 2)))
