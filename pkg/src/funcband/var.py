"""Forward and backward vector autoregressions on score vectors.

The forward model regresses each score vector on the ``p`` vectors before it;
the backward model regresses it on the ``p`` vectors after it.
:func:`backward_noise_filter` turns i.i.d. forward innovations into backward
innovations by inverting the forward recursion causally and then applying the
backward polynomial anticausally.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitError, InstabilityError, InvalidInputError, SelectionError

__all__ = [
    "VarModel",
    "fit_forward",
    "fit_backward",
    "select_p_aicc",
    "ar_power_series",
    "backward_noise_filter",
    "autocovariance",
    "default_burn_in",
    "companion_radius",
]

STABILITY_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class VarModel:
    """A fitted VAR(p) on m-dimensional scores.

    Attributes
    ----------
    direction : {"forward", "backward"}
    coeffs : ndarray, shape (p, m, m)
        ``coeffs[j - 1]`` multiplies the lag-j (forward) or lead-j (backward) vector.
    residuals : ndarray, shape (n - p, m)
        Fitted residuals in chronological order.
    innovation_cov : ndarray, shape (m, m)
        Residual cross-products divided by the series length ``n``.
    radius : float
        Companion spectral radius of the final coefficients.
    raw_radius : float
        Companion spectral radius before the stability guard.
    """

    direction: str
    coeffs: np.ndarray
    residuals: np.ndarray
    innovation_cov: np.ndarray
    residual_mean: np.ndarray
    radius: float
    raw_radius: float
    n: int

    @property
    def order(self):
        return self.coeffs.shape[0]

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @property
    def shrunk(self):
        return self.radius != self.raw_radius

    def stacked(self):
        """Coefficients as an ``(p*m, m)`` matrix acting on ``[x_1, ..., x_p]`` rows."""
        return np.concatenate([mat.T for mat in self.coeffs], axis=0)


def companion_radius(coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    p, m, _ = coeffs.shape
    comp = np.zeros((m * p, m * p))
    comp[:m, :] = np.concatenate(list(coeffs), axis=1)
    if p > 1:
        comp[m:, :-m] = np.eye(m * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def _lagged(data, p):
    n = data.shape[0]
    target = data[p:]
    design = np.concatenate([data[p - lag:n - lag] for lag in range(1, p + 1)], axis=1)
    return target, design


def _yule_walker(data, p):
    m = data.shape[1]
    gammas = [autocovariance(data, lag) for lag in range(p + 1)]
    # block Toeplitz system: stacked coefficients times the lag-difference
    # autocovariance blocks equal the stacked lag-1..p autocovariances
    toeplitz = np.zeros((m * p, m * p))
    for row in range(p):
        for col in range(p):
            diff = col - row
            block = gammas[diff] if diff >= 0 else gammas[-diff].T
            toeplitz[row * m:(row + 1) * m, col * m:(col + 1) * m] = block
    rhs = np.concatenate(gammas[1:], axis=1)
    try:
        coef = np.linalg.solve(toeplitz.T, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise FitError("singular Yule-Walker system; try smaller p or m") from exc
    return np.stack([coef[:, lag * m:(lag + 1) * m] for lag in range(p)])


def _fit(data, p, method, stabilize, direction):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n, m = data.shape
    p = int(p)
    if p < 1:
        raise InvalidInputError("VAR order p must be at least 1")
    if n - p <= m * p:
        raise InvalidInputError(f"need n - p > m*p for an overdetermined fit (n={n}, m={m}, p={p})")
    target, design = _lagged(data, p)
    if method == "ols":
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < design.shape[1]:
            raise FitError(f"rank-deficient regressors (rank {rank} < {design.shape[1]}); try smaller p or m")
        coeffs = np.stack([coef[lag * m:(lag + 1) * m].T for lag in range(p)])
    elif method == "yule-walker":
        coeffs = _yule_walker(data, p)
    else:
        raise InvalidInputError(f"unknown VAR estimation method {method!r}")
    raw_radius = companion_radius(coeffs)
    radius = raw_radius
    if stabilize and raw_radius >= 1 - STABILITY_MARGIN:
        shrink = (1 - STABILITY_MARGIN) / raw_radius
        coeffs = coeffs * (shrink ** np.arange(1, p + 1))[:, None, None]
        radius = companion_radius(coeffs)
    resid = target - design @ np.concatenate([mat.T for mat in coeffs], axis=0)
    sigma = resid.T @ resid / n
    return VarModel(
        direction=direction,
        coeffs=coeffs,
        residuals=resid,
        innovation_cov=(sigma + sigma.T) / 2,
        residual_mean=resid.mean(axis=0),
        radius=radius,
        raw_radius=raw_radius,
        n=n,
    )


def fit_forward(scores, p, method="ols", stabilize=True):
    """Least-squares regression of each score vector on the ``p`` before it.

    Parameters
    ----------
    scores : ndarray, shape (n, m)
    p : int
    method : {"ols", "yule-walker"}
    stabilize : bool
        Shrink the coefficients when the companion radius reaches ``1 - 1e-6``
        (lag ``j`` is scaled by ``shrink**j``), so simulated recursions cannot explode.
    """
    return _fit(scores, p, method, stabilize, "forward")


def fit_backward(scores, p, method="ols", stabilize=True):
    """Least-squares regression of each score vector on the ``p`` after it.

    This is exactly the forward fit of the time-reversed series; residuals
    are returned in chronological order.
    """
    scores = np.asarray(scores, dtype=float)
    model = _fit(scores[::-1], p, method, stabilize, "backward")
    resid = model.residuals[::-1]
    return VarModel(
        direction="backward",
        coeffs=model.coeffs,
        residuals=resid,
        innovation_cov=model.innovation_cov,
        residual_mean=model.residual_mean,
        radius=model.radius,
        raw_radius=model.raw_radius,
        n=model.n,
    )


def aicc(scores, p, method="ols"):
    """``n log det(innovation_cov) + n (n m + p m^2) / (n - m (p + 1) - 1)``."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    n, m = scores.shape
    denom = n - m * (p + 1) - 1
    if denom <= 0:
        raise InvalidInputError(f"AICC undefined: n - m(p+1) - 1 = {denom} <= 0")
    model = _fit(scores, p, method, False, "forward")
    sign, logdet = np.linalg.slogdet(model.innovation_cov)
    if sign <= 0 or not np.isfinite(logdet):
        return np.inf
    return n * logdet + n * (n * m + p * m * m) / denom


def select_p_aicc(scores, p_max, method="ols"):
    """Order in ``1..p_max`` minimizing AICC; ties go to the smaller order."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    n, m = scores.shape
    p_max = int(p_max)
    if p_max < 1:
        raise InvalidInputError("p_max must be at least 1")
    if n - m * (p_max + 1) - 1 <= 0:
        raise InvalidInputError(f"p_max={p_max} too large for n={n}, m={m}")
    best_p, best = None, np.inf
    for p in range(1, p_max + 1):
        try:
            value = aicc(scores, p, method)
        except (FitError, InvalidInputError):
            continue
        if value < best:
            best_p, best = p, value
    if best_p is None:
        raise SelectionError("innovation covariance singular (or fit failed) for every candidate order")
    return best_p


def default_p_max(n, m, cap=5):
    """Largest order up to ``cap`` for which AICC and the OLS fit are defined."""
    p = cap
    while p > 1 and (n - m * (p + 1) - 1 <= 0 or n - p <= m * p):
        p -= 1
    return p


def ar_power_series(model, n_terms):
    """Power-series coefficients of the inverse forward lag polynomial, starting at the identity.

    Raises
    ------
    InstabilityError
        If the companion spectral radius is not below one.
    """
    coeffs = model.coeffs if isinstance(model, VarModel) else np.asarray(model, dtype=float)
    radius = companion_radius(coeffs)
    if radius >= 1:
        raise InstabilityError(radius)
    p, m, _ = coeffs.shape
    psi = [np.eye(m)]
    for order in range(1, int(n_terms)):
        acc = np.zeros((m, m))
        for lag in range(1, min(order, p) + 1):
            acc += coeffs[lag - 1] @ psi[order - lag]
        psi.append(acc)
    return np.stack(psi[: int(n_terms)])


def default_burn_in(p):
    return 50 + 10 * int(p)


def _check_stable(model):
    if model.radius >= 1:
        raise InstabilityError(model.radius)


def backward_noise_filter(forward, backward, e_star, burn_in=None):
    """Map forward innovations to backward innovations.

    Pass 1 runs the forward recursion driven by ``e_star`` from zero initial
    values; pass 2 subtracts the backward coefficients applied to the next
    ``p`` values of that output.  ``burn_in`` values are
    dropped at both ends, so the output has ``len(e_star) - 2 * burn_in`` rows.
    Leading axes of ``e_star`` (shape ``(..., L, m)``) are treated as a batch.
    """
    _check_stable(forward)
    _check_stable(backward)
    innov = np.asarray(e_star, dtype=float)
    p_f, p_b = forward.order, backward.order
    if burn_in is None:
        burn_in = default_burn_in(max(p_f, p_b))
    burn_in = int(burn_in)
    if burn_in < p_b:
        raise InvalidInputError("burn_in must be at least the backward order")
    length, m = innov.shape[-2:]
    if length - 2 * burn_in < 1:
        raise InvalidInputError(f"need more than {2 * burn_in} innovations, got {length}")
    if m != forward.dim or m != backward.dim:
        raise InvalidInputError("innovation dimension does not match the models")
    batch = innov.shape[:-2]
    causal = np.zeros(batch + (length + p_f, m))
    # lags stacked oldest-first so one matmul per step covers all p lags
    a_rev = np.concatenate([forward.coeffs[lag].T for lag in range(p_f - 1, -1, -1)], axis=0)
    flat = batch + (p_f * m,)
    for step in range(length):
        causal[..., step + p_f, :] = innov[..., step, :] + causal[..., step:step + p_f, :].reshape(flat) @ a_rev
    causal = causal[..., p_f:, :]
    lo, hi = burn_in, length - burn_in
    out = causal[..., lo:hi, :].copy()
    for lead in range(1, p_b + 1):
        out -= causal[..., lo + lead:hi + lead, :] @ backward.coeffs[lead - 1].T
    return out


def autocovariance(scores, lag):
    """Sample autocovariance at ``lag`` (negative allowed), normalized by the series length.

    Entry ``[a, b]`` averages ``scores[t + lag, a] * scores[t, b]`` over the
    available ``t`` and divides by ``n`` rather than the number of terms.
    """
    data = np.asarray(scores, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    lag = int(lag)
    if abs(lag) >= n:
        raise InvalidInputError("lag must be smaller than the series length")
    if lag >= 0:
        return data[lag:].T @ data[:n - lag] / n
    return data[:n + lag].T @ data[-lag:] / n
