"""Conditional sieve bootstrap for functional time series.

Pseudo-series are generated backwards in time from a VAR fitted to the
time-reversed principal-component scores, so every pseudo-series ends in the
observed final ``k`` curves.  Future pseudo-curves are generated
forward from the observed scores.  The predictor is refitted on each
pseudo-series and applied to the *observed* terminal block.  The spread of
pseudo-future minus pseudo-forecast estimates the conditional law of the
prediction error.

Replicates are processed in fixed blocks of ``block_size``.  Each replicate
draws from its own stream ``rng.stream(seed, index)``, so the ensemble does
not depend on the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import os

import numpy as np

from . import rng as rngmod
from .curves import FunctionalSeries, center, write_csv
from .errors import InvalidInputError, ReplicateFailureError
from .fpca import Q_DEFAULT, covariance_operator, decompose, eigendecompose, max_components, select_m
from .predictors import PredictorSpec, fit_predictor
from .var import backward_noise_filter, default_burn_in, default_p_max, fit_backward, fit_forward, select_p_aicc

__all__ = [
    "BootstrapConfig",
    "BootstrapReplicate",
    "BootstrapEnsemble",
    "SieveModel",
    "prepare",
    "resample_centered",
    "generate_future_scores",
    "generate_backward_scores",
    "assemble_pseudo_series",
    "generate_replicate",
    "run",
    "sigma_floor",
    "default_threads",
]

SIGMA_FLOOR = 1e-6
FAILURE_LIMIT = 0.01


@dataclass(frozen=True)
class BootstrapConfig:
    """Tuning of one bootstrap run.

    ``m``/``p`` fix the truncation level and VAR order; when None they are
    selected by the variance-ratio rule (threshold ``Q``) and by AICC over
    ``1..p_max``.  ``k`` defaults to the predictor's block depth.
    """

    m: int = None
    Q: float = Q_DEFAULT
    p: int = None
    p_max: int = None
    k: int = None
    h: int = 1
    B: int = 500
    seed: int = 0
    band_interval: tuple = (0.0, 1.0)
    burn_in: int = None
    var_method: str = "ols"
    block_size: int = 64
    threads: int = None
    keep_series: bool = False

    def __post_init__(self):
        if self.h < 1:
            raise InvalidInputError("h must be at least 1")
        if self.B < 1:
            raise InvalidInputError("B must be at least 1")
        if self.k is not None and self.k < 1:
            raise InvalidInputError("k must be at least 1")
        if not 0 < self.Q < 1:
            raise InvalidInputError("Q must lie in (0, 1)")
        start, stop = self.band_interval
        if not 0 <= start <= stop <= 1:
            raise InvalidInputError("band_interval must satisfy 0 <= start <= stop <= 1")
        if self.block_size < 1:
            raise InvalidInputError("block_size must be positive")
        object.__setattr__(self, "band_interval", (float(start), float(stop)))

    def to_dict(self):
        out = asdict(self)
        out["band_interval"] = list(self.band_interval)
        return out

    @classmethod
    def from_dict(cls, data):
        names = {entry.name for entry in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidInputError(f"unknown bootstrap fields: {sorted(unknown)}")
        data = dict(data)
        if "band_interval" in data:
            data["band_interval"] = tuple(data["band_interval"])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class BootstrapReplicate:
    pseudo_future: np.ndarray
    pseudo_prediction: np.ndarray
    error_curve: np.ndarray


@dataclass(frozen=True, eq=False)
class SieveModel:
    """Everything estimated once from the observed series before resampling."""

    series: FunctionalSeries
    mean_curve: np.ndarray
    eigsys: object
    decomposition: object
    forward: object
    backward: object
    innovation_pool: np.ndarray
    remainder_pool: np.ndarray
    k: int
    h: int
    burn_in: int

    @property
    def m(self):
        return self.decomposition.m

    @property
    def p(self):
        return self.forward.order

    @property
    def n(self):
        return self.series.n

    @property
    def extension(self):
        """Extra future score vectors needed when ``p > k + h``."""
        return max(0, self.p - self.k - self.h)


@dataclass(frozen=True, eq=False)
class BootstrapEnsemble:
    """Bootstrap prediction errors and their summaries.

    Attributes
    ----------
    errors, pseudo_futures, pseudo_predictions : ndarray, shape (B, J)
    sigma_star : ndarray, shape (J,)
        Pointwise standard deviation of ``errors`` floored at ``1e-6`` times its maximum.
    sigma_raw : ndarray, shape (J,)
        The same standard deviation before flooring.
    center : ndarray, shape (J,)
        Forecast of the predictor fitted on the observed series.
    """

    grid: object
    errors: np.ndarray
    pseudo_futures: np.ndarray
    pseudo_predictions: np.ndarray
    sigma_star: np.ndarray
    sigma_raw: np.ndarray
    center: np.ndarray
    config: BootstrapConfig
    predictor: PredictorSpec
    diagnostics: dict = field(default_factory=dict)
    pseudo_series: np.ndarray = None

    @property
    def B(self):
        return self.errors.shape[0]

    @property
    def replicates(self):
        return [
            BootstrapReplicate(fut, pred, err)
            for fut, pred, err in zip(self.pseudo_futures, self.pseudo_predictions, self.errors)
        ]

    def to_csv(self, path):
        """Dump the error curves (one row per replicate) followed by a ``sigma_star`` row."""
        series = FunctionalSeries(self.grid, np.vstack([self.errors, self.sigma_star]))
        write_csv(series, path, labels=[*range(1, self.B + 1), "sigma_star"])


def sigma_floor(errors):
    """Pointwise standard deviation of ``errors`` (ddof 0) and its floored version."""
    raw = np.asarray(errors).std(axis=0)
    floor = max(SIGMA_FLOOR * float(raw.max(initial=0.0)), np.finfo(float).tiny)
    return np.maximum(raw, floor), raw


def default_threads():
    env = os.environ.get("FUNCBAND_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def resample_centered(rows, count, rng):
    """Draw ``count`` rows i.i.d. with replacement from ``rows - mean(rows)``."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] == 0:
        raise InvalidInputError("cannot resample from an empty pool")
    pool = rows - rows.mean(axis=0)
    return pool[rng.integers(0, pool.shape[0], size=int(count))]


def prepare(series, config=None, k=1):
    """Center, decompose into principal components, and fit forward and backward VARs."""
    config = config or BootstrapConfig()
    k = config.k or k
    n, J = series.values.shape
    if k + config.h > n:
        raise InvalidInputError(f"k + h = {k + config.h} exceeds the series length {n}")
    centered, mean_curve = center(series)
    eigsys = eigendecompose(covariance_operator(centered), series.grid)
    if eigsys.rank == 0:
        raise InvalidInputError("the series has no variation around its mean")
    if config.m is None:
        m = select_m(eigsys.eigenvalues, config.Q, max_components(n, J))
    else:
        m = int(config.m)
        if m > eigsys.rank:
            raise InvalidInputError(f"m={m} exceeds the numerical rank {eigsys.rank}")
    dec = decompose(centered, eigsys, m)
    if config.p is None:
        p_max = config.p_max or default_p_max(n, m)
        p = select_p_aicc(dec.scores, p_max, config.var_method)
    else:
        p = int(config.p)
    forward = fit_forward(dec.scores, p, config.var_method)
    backward = fit_backward(dec.scores, p, config.var_method)
    resid = forward.residuals
    rem = dec.remainders
    return SieveModel(
        series=series,
        mean_curve=mean_curve,
        eigsys=eigsys,
        decomposition=dec,
        forward=forward,
        backward=backward,
        innovation_pool=resid - resid.mean(axis=0),
        remainder_pool=rem - rem.mean(axis=0),
        k=k,
        h=config.h,
        burn_in=config.burn_in if config.burn_in is not None else default_burn_in(p),
    )


def _draw_indices(model, gen):
    """Index draws for one replicate, always in the same order."""
    n_pool = model.innovation_pool.shape[0]
    n_rem = model.remainder_pool.shape[0]
    n_back = model.n - model.k
    idx_future = gen.integers(0, n_pool, size=model.h + model.extension)
    idx_backward = gen.integers(0, n_pool, size=n_back + 2 * model.burn_in)
    idx_remainder = gen.integers(0, n_rem, size=n_back + 1)
    return idx_future, idx_backward, idx_remainder


def generate_future_scores(forward, scores, k, h, rng=None, e_star=None):
    """Pseudo-future scores for steps ``1..h`` plus ``max(0, p - k - h)`` extension vectors.

    The recursion starts from the observed scores.  Innovations are either
    given (``e_star`` of shape ``(..., h + ext, m)``) or resampled from the
    centered forward residuals with ``rng``.
    """
    scores = np.asarray(scores, dtype=float)
    p, m = forward.order, forward.dim
    total = int(h) + max(0, p - int(k) - int(h))
    if e_star is None:
        e_star = resample_centered(forward.residuals, total, rng)
    e_star = np.asarray(e_star, dtype=float)
    if e_star.shape[-2] != total:
        raise InvalidInputError(f"expected {total} innovations, got {e_star.shape[-2]}")
    batch = e_star.shape[:-2]
    hist = np.broadcast_to(scores[-p:], batch + (p, m))
    a_rev = np.concatenate([forward.coeffs[lag].T for lag in range(p - 1, -1, -1)], axis=0)
    out = np.empty(batch + (total, m))
    window = hist
    for step in range(total):
        nxt = window.reshape(batch + (p * m,)) @ a_rev + e_star[..., step, :]
        out[..., step, :] = nxt
        window = np.concatenate([window[..., 1:, :], nxt[..., None, :]], axis=-2)
    return out


def generate_backward_scores(backward, forward, scores, future_scores, k, rng=None, u_star=None, burn_in=None):
    """Backward pseudo-scores for all ``n`` indices, ending in the observed ones.

    The last ``k`` rows are the observed scores.  Earlier rows run the backward
    VAR recursion toward the past, reaching into ``future_scores`` for lags
    beyond ``n``.  The backward innovations ``u_star`` come from the
    forward-to-backward noise filter applied to freshly resampled innovations
    unless given explicitly (shape ``(..., n - k, m)``).
    """
    scores = np.asarray(scores, dtype=float)
    future = np.asarray(future_scores, dtype=float)
    n, m = scores.shape
    p = backward.order
    k = int(k)
    n_back = n - k
    if future.shape[-2] < max(0, p - k):
        raise InvalidInputError(f"backward pass needs {p - k} future score vectors, got {future.shape[-2]}")
    if u_star is None:
        burn = default_burn_in(max(p, forward.order)) if burn_in is None else int(burn_in)
        draws = resample_centered(forward.residuals, n_back + 2 * burn, rng)
        u_star = backward_noise_filter(forward, backward, draws, burn)
    u_star = np.asarray(u_star, dtype=float)
    batch = np.broadcast_shapes(u_star.shape[:-2], future.shape[:-2])
    path = np.empty(batch + (n + future.shape[-2], m))
    path[..., n_back:n, :] = scores[n_back:]
    path[..., n:, :] = future
    b_stack = backward.stacked()
    flat = batch + (p * m,)
    for row in range(n_back - 1, -1, -1):
        path[..., row, :] = path[..., row + 1:row + 1 + p, :].reshape(flat) @ b_stack + u_star[..., row, :]
    return path[..., :n, :]


def assemble_pseudo_series(backward_scores, future_scores, model, remainder_draws, h=None):
    """Rebuild pseudo-curves from pseudo-scores, the mean and resampled remainders.

    Parameters
    ----------
    backward_scores : ndarray, shape (..., n, m)
    future_scores : ndarray, shape (..., h + ext, m)
    model : SieveModel
    remainder_draws : ndarray, shape (..., n - k + 1, J)
        Centered remainder curves: the first ``n - k`` are added to the
        backward curves, the last one to the future curve.

    Returns
    -------
    pseudo_series : ndarray, shape (..., n, J)
        Last ``k`` rows are the observed curves, copied exactly.
    pseudo_future : ndarray, shape (..., J)
    """
    h = model.h if h is None else int(h)
    basis = model.eigsys.eigenfunctions[:, :model.m]
    n_back = model.n - model.k
    bs = np.asarray(backward_scores)
    batch = bs.shape[:-2]
    pseudo = np.empty(batch + model.series.values.shape)
    pseudo[..., :n_back, :] = model.mean_curve + bs[..., :n_back, :] @ basis.T + remainder_draws[..., :n_back, :]
    pseudo[..., n_back:, :] = model.series.values[n_back:]
    fut = model.mean_curve + np.asarray(future_scores)[..., h - 1, :] @ basis.T + remainder_draws[..., n_back, :]
    return pseudo, fut


def _pseudo_block(model, indices):
    """Pseudo-series and pseudo-futures for a block of replicates given their index draws."""
    idx_f = np.stack([draw[0] for draw in indices])
    idx_b = np.stack([draw[1] for draw in indices])
    idx_u = np.stack([draw[2] for draw in indices])
    pool = model.innovation_pool
    scores = model.decomposition.scores
    future = generate_future_scores(model.forward, scores, model.k, model.h, e_star=pool[idx_f])
    u_star = backward_noise_filter(model.forward, model.backward, pool[idx_b], model.burn_in)
    back = generate_backward_scores(model.backward, model.forward, scores, future, model.k, u_star=u_star)
    return assemble_pseudo_series(back, future, model, model.remainder_pool[idx_u])


def generate_replicate(model, gen):
    """One pseudo-series and pseudo-future curve from generator ``gen``."""
    pseudo, fut = _pseudo_block(model, [_draw_indices(model, gen)])
    return pseudo[0], fut[0]


def _run_block(model, spec, seed, start, stop, terminal, keep_series):
    indices = [_draw_indices(model, rngmod.stream(seed, rep)) for rep in range(start, stop)]
    pseudo, fut = _pseudo_block(model, indices)
    fitted = fit_predictor(spec, pseudo, grid=model.series.grid)
    # refitted map sees the observed block centered by the pseudo-series mean;
    # the forecast is re-anchored at the observed mean
    devs = terminal - np.asarray(fitted.mean)[:, None, :]
    pred = model.mean_curve + fitted.predict_deviation(devs, model.h)
    return fut, pred, (pseudo if keep_series else None)


def run(series, predictor=None, config=None):
    """Bootstrap the conditional prediction-error distribution of ``predictor``.

    Parameters
    ----------
    series : FunctionalSeries
    predictor : PredictorSpec or dict, optional
        Defaults to FAR(1).
    config : BootstrapConfig, optional

    Returns
    -------
    BootstrapEnsemble

    Raises
    ------
    ReplicateFailureError
        If more than 1% of the replicates produce non-finite errors.
    """
    if predictor is None:
        predictor = PredictorSpec()
    elif isinstance(predictor, dict):
        predictor = PredictorSpec.from_dict(predictor)
    config = config or BootstrapConfig()
    k = config.k or predictor.k
    if k < predictor.k:
        raise InvalidInputError(f"k={k} is smaller than the predictor's block depth {predictor.k}")
    if config.k is None:
        config = replace(config, k=k)
    model = prepare(series, config)

    fitted = fit_predictor(predictor, series)
    block = series.values[-predictor.k:]
    center_forecast = fitted.predict(block, config.h)

    bounds = [(lo, min(lo + config.block_size, config.B)) for lo in range(0, config.B, config.block_size)]
    threads = config.threads or default_threads()
    args = (model, predictor, config.seed)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda span: _run_block(*args, *span, block, config.keep_series), bounds))
    else:
        parts = [_run_block(*args, lo, hi, block, config.keep_series) for lo, hi in bounds]

    futures = np.concatenate([part[0] for part in parts])
    preds = np.concatenate([part[1] for part in parts])
    errors = futures - preds
    ok = np.all(np.isfinite(errors), axis=1)
    n_failed = int(np.count_nonzero(~ok))
    if n_failed > FAILURE_LIMIT * config.B:
        raise ReplicateFailureError(n_failed, config.B, [f"replicate {idx}: non-finite error curve" for idx in np.flatnonzero(~ok)])
    pseudo = np.concatenate([part[2] for part in parts])[ok] if config.keep_series else None
    futures, preds, errors = futures[ok], preds[ok], errors[ok]
    sigma, raw = sigma_floor(errors)
    diagnostics = {
        "m": model.m,
        "p": model.p,
        "k": model.k,
        "n": model.n,
        "forward_radius": model.forward.radius,
        "backward_radius": model.backward.radius,
        "forward_shrunk": model.forward.shrunk,
        "backward_shrunk": model.backward.shrunk,
        "burn_in": model.burn_in,
        "n_failed": n_failed,
    }
    return BootstrapEnsemble(
        grid=series.grid,
        errors=errors,
        pseudo_futures=futures,
        pseudo_predictions=preds,
        sigma_star=sigma,
        sigma_raw=raw,
        center=center_forecast,
        config=config,
        predictor=predictor,
        diagnostics=diagnostics,
        pseudo_series=pseudo,
    )
