"""Pointwise prediction intervals and studentized simultaneous prediction bands.

A simultaneous band is ``center +/- q_star * sigma_star`` where ``q_star`` is an
upper order statistic of the bootstrap sup-statistics
``max_tau |error(tau) / sigma_star(tau)|`` over the band interval.  Pointwise
intervals add equal-tailed quantiles of the raw bootstrap errors to the
center.
"""

from dataclasses import dataclass, field
import csv
import json
import math

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "PredictionBand",
    "sup_statistics",
    "quantile_rank",
    "quantile",
    "simultaneous_band",
    "pointwise_interval",
    "pointwise_band",
    "self_coverage",
    "write_band_csv",
    "read_band_csv",
]


@dataclass(frozen=True, eq=False)
class PredictionBand:
    """A band on the grid; ``lower`` and ``upper`` are NaN outside ``mask``.

    Attributes
    ----------
    center, lower, upper : ndarray, shape (J,)
    alpha : float
        Nominal miss probability, so the nominal coverage is ``1 - alpha``.
    q_star : float or None
        Sup-statistic quantile (simultaneous bands only).
    interval : tuple
        ``(start, stop)`` sub-interval of [0, 1] the band refers to.
    mask : ndarray of bool, shape (J,)
    kind : {"simultaneous", "pointwise"}
    """

    grid: object
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    q_star: float
    interval: tuple
    mask: np.ndarray
    kind: str
    config: dict = field(default_factory=dict)

    @property
    def nominal(self):
        return 1.0 - self.alpha

    @property
    def width(self):
        """Pointwise width ``upper - lower`` on the mask (NaN elsewhere)."""
        return self.upper - self.lower

    def mean_width(self):
        """Quadrature average of the width over the masked points."""
        weights = self.grid.weights[self.mask]
        if weights.sum() > 0:
            return float(np.sum(self.width[self.mask] * weights) / np.sum(weights))
        return float(np.mean(self.width[self.mask]))

    def contains(self, curve):
        """Boolean per grid point (True outside the mask)."""
        curve = np.asarray(curve, dtype=float)
        inside = (curve >= self.lower) & (curve <= self.upper)
        return np.where(self.mask, inside, True)

    def shifted(self, offset):
        """The same band translated by a curve (or scalar) ``offset``."""
        offset = np.broadcast_to(np.asarray(offset, dtype=float), self.center.shape)
        return PredictionBand(
            self.grid, self.center + offset, self.lower + offset, self.upper + offset,
            self.alpha, self.q_star, self.interval, self.mask, self.kind, self.config,
        )


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _errors_and_sigma(ensemble):
    errors = np.asarray(ensemble.errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] == 0:
        raise InvalidInputError("ensemble has no replicates")
    return errors, np.asarray(ensemble.sigma_star, dtype=float)


def sup_statistics(ensemble, interval=None):
    """Per-replicate ``max |error / sigma_star|`` over the grid points in ``interval``."""
    errors, sigma = _errors_and_sigma(ensemble)
    mask = ensemble.grid.mask(interval)
    # huge errors over a tiny floored sigma may overflow to inf, which still ranks correctly
    with np.errstate(over="ignore"):
        return np.max(np.abs(errors[:, mask] / sigma[mask]), axis=1)


def quantile_rank(level, B):
    """1-based rank ``ceil(level * (B + 1))`` clamped to ``[1, B]``."""
    level = float(level)
    if not 0 < level < 1:
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")
    if B < 1:
        raise InvalidInputError("need at least one value")
    # the small offset keeps exact products such as 0.95 * 101 = 95.95 from
    # drifting up a rank through binary rounding
    rank = math.ceil(level * (B + 1) - 1e-9)
    return min(max(rank, 1), B)


def quantile(values, level):
    """Order statistic of rank :func:`quantile_rank` in the ascending sort of ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    rank = quantile_rank(level, values.size)
    return float(np.sort(values)[rank - 1])


def simultaneous_band(center, ensemble, alpha, interval=None):
    """``center +/- q_star * sigma_star`` with ``q_star`` the ``1 - alpha`` sup-statistic quantile."""
    alpha = _check_alpha(alpha)
    interval = tuple(ensemble.config.band_interval) if interval is None else tuple(float(val) for val in interval)
    _, sigma = _errors_and_sigma(ensemble)
    mask = ensemble.grid.mask(interval)
    q_star = quantile(sup_statistics(ensemble, interval), 1 - alpha)
    center = np.asarray(center, dtype=float)
    # a few ulps of slack: |e| / sigma <= q does not imply |e| <= q * sigma in
    # floating point, and the replicate attaining q must stay inside its band
    half = np.where(mask, q_star * sigma * (1 + 4 * np.finfo(float).eps), np.nan)
    return PredictionBand(
        ensemble.grid, center, center - half, center + half, alpha, q_star, interval, mask,
        "simultaneous", _config_echo(ensemble),
    )


def _pointwise_offsets(errors, alpha):
    B = errors.shape[0]
    hi_rank = quantile_rank(1 - alpha / 2, B)
    lo_rank = B + 1 - hi_rank
    ordered = np.sort(errors, axis=0)
    return ordered[lo_rank - 1], ordered[hi_rank - 1]


def pointwise_interval(center, ensemble, alpha, index):
    """Equal-tailed interval at grid index ``index``.

    The upper endpoint uses rank ``ceil((1 - alpha/2)(B + 1))`` and the lower
    endpoint the mirrored rank ``B + 1 -`` that, so a symmetric ensemble gives a
    symmetric interval.
    """
    alpha = _check_alpha(alpha)
    errors, _ = _errors_and_sigma(ensemble)
    lo, hi = _pointwise_offsets(errors[:, [index]], alpha)
    mid = float(np.asarray(center, dtype=float)[index])
    return mid + float(lo[0]), mid + float(hi[0])


def pointwise_band(center, ensemble, alpha, interval=None):
    """:func:`pointwise_interval` at every grid point of ``interval``."""
    alpha = _check_alpha(alpha)
    interval = tuple(ensemble.config.band_interval) if interval is None else tuple(float(val) for val in interval)
    errors, _ = _errors_and_sigma(ensemble)
    mask = ensemble.grid.mask(interval)
    lo, hi = _pointwise_offsets(errors, alpha)
    center = np.asarray(center, dtype=float)
    return PredictionBand(
        ensemble.grid, center,
        np.where(mask, center + lo, np.nan), np.where(mask, center + hi, np.nan),
        alpha, None, interval, mask, "pointwise", _config_echo(ensemble),
    )


def self_coverage(band, ensemble):
    """Fraction of replicates whose error curve lies inside ``band - center`` on the mask."""
    errors, _ = _errors_and_sigma(ensemble)
    mask = band.mask
    lo = (band.lower - band.center)[mask]
    hi = (band.upper - band.center)[mask]
    inside = np.all((errors[:, mask] >= lo) & (errors[:, mask] <= hi), axis=1)
    return float(inside.mean())


def _config_echo(ensemble):
    cfg = getattr(ensemble, "config", None)
    pred = getattr(ensemble, "predictor", None)
    out = {}
    if cfg is not None and hasattr(cfg, "to_dict"):
        out["bootstrap"] = cfg.to_dict()
    if pred is not None and hasattr(pred, "to_dict"):
        out["predictor"] = pred.to_dict()
    diag = getattr(ensemble, "diagnostics", None)
    if diag:
        out["diagnostics"] = {key: (val.item() if hasattr(val, "item") else val) for key, val in diag.items()}
    return out


def write_band_csv(band, path, sidecar=True):
    """Write ``tau,center,lower,upper`` rows for the masked grid points.

    With ``sidecar`` a JSON file ``<path>.json`` records alpha, q_star, the
    band kind and interval, and the configuration echo.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "center", "lower", "upper"])
        for idx in np.flatnonzero(band.mask):
            row = (band.grid.points[idx], band.center[idx], band.lower[idx], band.upper[idx])
            writer.writerow([repr(float(val)) for val in row])
    if sidecar:
        meta = {
            "kind": band.kind,
            "alpha": band.alpha,
            "nominal": band.nominal,
            "q_star": band.q_star,
            "interval": list(band.interval),
            "config": band.config,
        }
        with open(f"{path}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def read_band_csv(path):
    """Read a band CSV back as ``(tau, center, lower, upper)`` arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [cell.strip() for cell in rows[0]] != ["tau", "center", "lower", "upper"]:
        raise InvalidInputError(f"{path}: expected header tau,center,lower,upper")
    try:
        data = np.array([[float(cell) for cell in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    if data.size == 0:
        raise InvalidInputError(f"{path}: no rows")
    return tuple(data.T)
