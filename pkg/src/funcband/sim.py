"""Simulated functional autoregressions and rolling-origin coverage studies.

The test process is

    X_t(tau) = int psi(tau, s) X_{t-1}(s) ds + b X_{t-2}(tau) + B_t(tau) + c B_{t-1}(tau),

with ``psi(tau, s) = 0.34 exp((tau^2 + s^2) / 2)`` and Brownian motions
``B_t`` built from Gaussian increments of variance ``1 / (L - 1)``.  The
named cases are FAR(1) (``I``), FAR(2) (``II``) and FARMA(2, 1) (``III``).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import json
import sys
import warnings

import numpy as np

from . import rng as rngmod
from .bands import pointwise_band, simultaneous_band
from .bootstrap import BootstrapConfig, default_threads, run
from .curves import FunctionalSeries, Grid
from .errors import InvalidInputError
from .evaluation import ForecastRecord, coverage, cpd, interval_score, write_report
from .predictors import PredictorSpec

__all__ = [
    "DgpConfig",
    "CASES",
    "case_config",
    "psi_kernel",
    "psi_operator_norm",
    "simulate_farma",
    "StudyConfig",
    "StudyResult",
    "SeriesEvaluation",
    "expanding_window_eval",
    "rolling_study",
]

PSI_SCALE = 0.34
CASES = {"I": (0.0, 0.0), "II": (0.4, 0.0), "III": (0.4, 0.8)}
L_MODES = ("grid", "sample")


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the simulated process.

    ``l_mode="grid"`` uses ``L = J`` in the increment variance ``1/(L-1)``, so
    ``Var B_t(1) = 1``; ``l_mode="sample"`` uses ``L = n + 1``.
    """

    n: int = 200
    J: int = 21
    b: float = 0.0
    c: float = 0.0
    burn_in: int = 100
    seed: int = 0
    l_mode: str = "grid"
    psi_scale: float = PSI_SCALE

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be at least 1")
        if self.J < 2:
            raise InvalidInputError("J must be at least 2")
        if self.burn_in < 0:
            raise InvalidInputError("burn_in must be nonnegative")
        if self.l_mode not in L_MODES:
            raise InvalidInputError(f"l_mode must be one of {L_MODES}")
        norm = psi_operator_norm(self.grid, self.psi_scale)
        if norm + abs(self.b) >= 1:
            warnings.warn(
                f"||Psi|| + |b| = {norm + abs(self.b):.3f} >= 1; the autoregressive part may not be stationary",
                RuntimeWarning,
            )

    @property
    def grid(self):
        return Grid.uniform(self.J)

    @property
    def L(self):
        return self.J if self.l_mode == "grid" else self.n + 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**_known(cls, data, "dgp"))


def _known(cls, data, what):
    names = {entry.name for entry in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise InvalidInputError(f"unknown {what} fields: {sorted(unknown)}")
    return dict(data)


def case_config(case, **overrides):
    """:class:`DgpConfig` for case ``"I"``, ``"II"`` or ``"III"``."""
    key = str(case).upper()
    if key not in CASES:
        raise InvalidInputError(f"unknown case {case!r}; choose from {sorted(CASES)}")
    b, c = CASES[key]
    return DgpConfig(b=b, c=c, **overrides)


def psi_kernel(grid, scale=PSI_SCALE):
    """``scale * exp((tau^2 + s^2) / 2)`` evaluated on ``grid x grid``."""
    expo = np.exp(0.5 * grid.points**2)
    return scale * np.outer(expo, expo)


def psi_operator_norm(grid, scale=PSI_SCALE):
    """Operator norm of the discretized integral operator under the quadrature inner product."""
    sw = np.sqrt(grid.weights)
    return float(np.linalg.norm(sw[:, None] * psi_kernel(grid, scale) * sw[None, :], 2))


def brownian_paths(count, grid, L, rng):
    """``count`` Brownian paths on ``grid`` with ``B(0) = 0`` and increment variance ``1/(L-1)``."""
    if L < 2:
        raise InvalidInputError("L must be at least 2")
    inc = rng.normal(0.0, np.sqrt(1.0 / (L - 1)), size=(count, len(grid) - 1))
    paths = np.zeros((count, len(grid)))
    paths[:, 1:] = np.cumsum(inc, axis=1)
    return paths


def simulate_farma(config, rng=None):
    """Simulate ``config.n`` curves after ``config.burn_in`` discarded ones.

    Parameters
    ----------
    config : DgpConfig
    rng : numpy.random.Generator, optional
        Defaults to the stream derived from ``config.seed``.

    Returns
    -------
    FunctionalSeries
    """
    if rng is None:
        rng = rngmod.stream(config.seed)
    grid = config.grid
    total = config.burn_in + config.n
    # one extra path so B_{t-1} exists for the first step
    noise = brownian_paths(total + 1, grid, config.L, rng)
    op = psi_kernel(grid, config.psi_scale) * grid.weights[None, :]
    curves = np.zeros((total + 2, len(grid)))
    for step in range(total):
        curves[step + 2] = (op @ curves[step + 1] + config.b * curves[step]
                            + noise[step + 1] + config.c * noise[step])
    return FunctionalSeries(grid, curves[-config.n:])


@dataclass(frozen=True)
class StudyConfig:
    """A Monte Carlo coverage study on one simulated case."""

    dgp: DgpConfig = field(default_factory=DgpConfig)
    case: str = None
    R: int = 200
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    nominal: tuple = (0.8, 0.95)
    train_fraction: float = 0.8
    horizons: tuple = (1,)
    seed: int = 0
    threads: int = None

    def __post_init__(self):
        if self.R < 1:
            raise InvalidInputError("R must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise InvalidInputError("train_fraction must lie in (0, 1)")
        nominal = tuple(float(lvl) for lvl in self.nominal)
        if not nominal or any(not 0 < lvl < 1 for lvl in nominal):
            raise InvalidInputError("nominal levels must lie in (0, 1)")
        horizons = tuple(int(h) for h in self.horizons)
        if not horizons or min(horizons) < 1:
            raise InvalidInputError("horizons must be positive")
        object.__setattr__(self, "nominal", nominal)
        object.__setattr__(self, "horizons", horizons)

    def to_dict(self):
        return {
            "dgp": self.dgp.to_dict(),
            "case": self.case,
            "R": self.R,
            "bootstrap": self.bootstrap.to_dict(),
            "predictor": self.predictor.to_dict(),
            "nominal": list(self.nominal),
            "train_fraction": self.train_fraction,
            "horizons": list(self.horizons),
            "seed": self.seed,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, data):
        data = _known(cls, data, "study")
        if "dgp" in data:
            data["dgp"] = DgpConfig.from_dict(data["dgp"])
        if "bootstrap" in data:
            data["bootstrap"] = BootstrapConfig.from_dict(data["bootstrap"])
        if "predictor" in data:
            data["predictor"] = PredictorSpec.from_dict(data["predictor"])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class SeriesEvaluation:
    """Expanding-window metrics for one series, keyed by ``(h, nominal)``.

    Each value is a dict with ``coverage_pointwise`` and ``interval_score``
    (pointwise intervals), ``coverage_uniform``, ``coverage_pointwise_sim``,
    ``interval_score_sim`` and ``width_simultaneous`` (simultaneous bands),
    ``width_pointwise`` and ``n_test``.
    """

    metrics: dict
    records: dict = None

    def rows(self):
        out = []
        for (h, nominal), met in sorted(self.metrics.items()):
            row = {
                "nominal": nominal,
                "coverage_pointwise": met["coverage_pointwise"],
                "cpd_pointwise": cpd(met["coverage_pointwise"], nominal),
                "coverage_uniform": met["coverage_uniform"],
                "cpd_uniform": cpd(met["coverage_uniform"], nominal),
                "interval_score": met["interval_score"],
                "horizon": h,
            }
            row.update({key: val for key, val in met.items() if key not in row})
            out.append(row)
        return out

    def to_csv(self, path):
        write_report(self.rows(), path)


def _origins(n, train_fraction, h):
    start = int(np.floor(train_fraction * n))
    origins = list(range(start, n - h + 1))
    if not origins:
        raise InvalidInputError(f"no forecast origins: n={n}, train_fraction={train_fraction}, h={h}")
    return origins


def expanding_window_eval(series, predictor=None, config=None, horizons=(1,), nominal=(0.8, 0.95),
                          train_fraction=0.8, origins=None, keep_records=False):
    """Forecast every curve after the initial window, growing the window by one curve each time.

    At each origin the curves before it are bootstrapped once per horizon
    ``h``, with a seed derived from ``config.seed``, the origin and ``h``.
    Pointwise and simultaneous bands at every nominal level are then scored
    against the curve ``h`` steps past the window.

    Parameters
    ----------
    series : FunctionalSeries
    predictor : PredictorSpec, optional
    config : BootstrapConfig, optional
        Its ``h`` is overridden per horizon.
    horizons : sequence of int
    nominal : sequence of float
        Nominal coverages ``1 - alpha``.
    train_fraction : float
        Initial window is ``floor(train_fraction * n)`` curves.
    origins : sequence of int, optional
        Explicit window lengths, overriding ``train_fraction``.

    Returns
    -------
    SeriesEvaluation
    """
    predictor = predictor or PredictorSpec()
    config = config or BootstrapConfig()
    metrics, all_records = {}, {}
    for h in horizons:
        h = int(h)
        starts = list(origins) if origins is not None else _origins(series.n, train_fraction, h)
        if any(start < 1 or start + h > series.n for start in starts):
            raise InvalidInputError("every origin needs its h-step truth inside the series")
        recs = {lvl: ([], []) for lvl in nominal}
        for start in starts:
            cfg = replace(config, h=h, seed=rngmod.derive_seed(config.seed, start, h))
            ens = run(series[:start], predictor, cfg)
            truth = series.values[start + h - 1]
            for lvl in nominal:
                alpha = 1 - lvl
                recs[lvl][0].append(ForecastRecord(truth, pointwise_band(ens.center, ens, alpha), h))
                recs[lvl][1].append(ForecastRecord(truth, simultaneous_band(ens.center, ens, alpha), h))
        for lvl in nominal:
            pw, sim = recs[lvl]
            cov_pw, _ = coverage(pw)
            cov_sim_pw, cov_unif = coverage(sim)
            metrics[(h, lvl)] = {
                "coverage_pointwise": cov_pw,
                "coverage_uniform": cov_unif,
                "interval_score": interval_score(pw, 1 - lvl),
                "coverage_pointwise_sim": cov_sim_pw,
                "interval_score_sim": interval_score(sim, 1 - lvl),
                "width_pointwise": float(np.mean([rec.band.mean_width() for rec in pw])),
                "width_simultaneous": float(np.mean([rec.band.mean_width() for rec in sim])),
                "n_test": len(pw),
            }
            if keep_records:
                all_records[(h, lvl)] = recs[lvl]
    return SeriesEvaluation(metrics, all_records if keep_records else None)


@dataclass(frozen=True, eq=False)
class StudyResult:
    """Aggregated study rows plus the per-replication metric arrays.

    ``per_replication[(h, nominal)][name]`` is an array of length ``R``.
    """

    config: StudyConfig
    rows: list
    per_replication: dict

    def to_csv(self, path, sidecar=True):
        write_report(self.rows, path)
        if sidecar:
            with open(f"{path}.json", "w") as fh:
                json.dump({"config": self.config.to_dict()}, fh, indent=2, sort_keys=True)


SUMMARY_METRICS = (
    "coverage_pointwise",
    "coverage_uniform",
    "interval_score",
    "coverage_pointwise_sim",
    "interval_score_sim",
    "width_pointwise",
    "width_simultaneous",
)


def _mc_se(values):
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")


def simulate_replication(study, rep):
    """Series of Monte Carlo replication ``rep`` (its own stream of ``study.seed``)."""
    return simulate_farma(study.dgp, rngmod.stream(study.seed, 0, rep))


def _replication(study, rep):
    series = simulate_replication(study, rep)
    boot = replace(study.bootstrap, seed=rngmod.derive_seed(study.seed, 1, rep), threads=1)
    return expanding_window_eval(
        series, study.predictor, boot, study.horizons, study.nominal, study.train_fraction,
    ).metrics


def rolling_study(study, progress=None):
    """Run ``study.R`` replications and aggregate them into report rows.

    Every replication simulates a fresh series and runs
    :func:`expanding_window_eval` on it.  Rows carry the across-replication
    means, their Monte Carlo standard errors (``se_*``), the CPD of the mean
    coverage and the mean per-replication absolute deviation (``mad_cpd_*``).

    Parameters
    ----------
    study : StudyConfig
    progress : callable, optional
        Called as ``progress(done, total)`` after each replication.

    Returns
    -------
    StudyResult
    """
    threads = study.threads or default_threads()
    results = [None] * study.R
    done = 0
    if threads > 1 and study.R > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_replication, study, rep): rep for rep in range(study.R)}
            for fut, rep in futures.items():
                results[rep] = fut.result()
                done += 1
                if progress:
                    progress(done, study.R)
    else:
        for rep in range(study.R):
            results[rep] = _replication(study, rep)
            if progress:
                progress(rep + 1, study.R)

    per_rep, rows = {}, []
    for key in sorted(results[0]):
        h, lvl = key
        arrays = {name: np.array([res[key][name] for res in results]) for name in SUMMARY_METRICS}
        per_rep[key] = arrays
        cov_pw = float(arrays["coverage_pointwise"].mean())
        cov_un = float(arrays["coverage_uniform"].mean())
        row = {
            "nominal": lvl,
            "coverage_pointwise": cov_pw,
            "cpd_pointwise": cpd(cov_pw, lvl),
            "coverage_uniform": cov_un,
            "cpd_uniform": cpd(cov_un, lvl),
            "interval_score": float(arrays["interval_score"].mean()),
            "horizon": h,
            "case": study.case or "",
            "n": study.dgp.n,
            "R": study.R,
            "B": study.bootstrap.B,
            "n_test": results[0][key]["n_test"],
            "mad_cpd_pointwise": float(np.mean(np.abs(arrays["coverage_pointwise"] - lvl))),
            "mad_cpd_uniform": float(np.mean(np.abs(arrays["coverage_uniform"] - lvl))),
        }
        for name in SUMMARY_METRICS:
            if name not in row:
                row[name] = float(arrays[name].mean())
            row[f"se_{name}"] = _mc_se(arrays[name])
        rows.append(row)
    return StudyResult(study, rows, per_rep)


def stderr_progress(label="study"):
    """Progress callback printing ``label: done/total`` to standard error."""
    def report(done, total):
        print(f"{label}: {done}/{total} replications", file=sys.stderr, flush=True)
    return report
