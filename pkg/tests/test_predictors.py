import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcband.curves import FunctionalSeries, Grid
from funcband.errors import InvalidInputError, RankError
from funcband.fpca import fpca
from funcband.predictors import (
    PredictorSpec,
    far1_fit,
    fit_predictor,
    mean_fit,
    nfr_fit,
    one_step_rmse,
    var_scores_fit,
)
from funcband.var import fit_forward


def basis(grid, count):
    weights = grid.weights
    out = []
    for freq in range(count):
        func = np.cos(np.pi * freq * grid.points)
        for prev in out:
            func = func - ((func * prev) @ weights) * prev
        out.append(func / np.sqrt((func * func) @ weights))
    return np.column_stack(out)


def linear_series(rng, n=200, J=21, rho=0.5, noise=1.0, scales=(1.0, 0.6, 0.3)):
    grid = Grid.uniform(J)
    funcs = basis(grid, len(scales))
    scores = np.zeros((n + 50, len(scales)))
    for step in range(1, n + 50):
        scores[step] = rho * scores[step - 1] + noise * rng.standard_normal(len(scales)) * np.array(scales)
    return FunctionalSeries(grid, 2.0 + scores[50:] @ funcs.T), funcs


def test_spec_validation_and_round_trip():
    spec = PredictorSpec(kind="var_scores", d=2, p=2)
    assert spec.k == 2
    assert PredictorSpec.from_dict(spec.to_dict()) == spec
    assert PredictorSpec().k == 1
    with pytest.raises(InvalidInputError):
        PredictorSpec(kind="arima")
    with pytest.raises(InvalidInputError):
        PredictorSpec.from_dict({"kind": "far1", "order": 2})


def test_far1_kernel_matches_direct_formula(rng):
    series, _ = linear_series(rng, n=80)
    fit = far1_fit(series, M=3)
    # direct transcription of the truncated estimator with a separate eigensolver
    grid = series.grid
    devs = series.values - series.values.mean(axis=0)
    sw = np.sqrt(grid.weights)
    lam, vecs = np.linalg.eigh(sw[:, None] * (devs.T @ devs / 80) * sw[None, :])
    lam, vecs = lam[::-1][:3], vecs[:, ::-1][:, :3]
    funcs = vecs / sw[:, None]
    xi = devs @ (grid.weights[:, None] * funcs)
    kernel = np.zeros((21, 21))
    for step in range(79):
        for row in range(3):
            for col in range(3):
                kernel += xi[step, col] * xi[step + 1, row] / lam[col] * np.outer(funcs[:, row], funcs[:, col])
    kernel /= 79
    np.testing.assert_allclose(fit.kernel, kernel, atol=1e-10)


def test_far1_consistent_for_halving_operator():
    rng = np.random.default_rng(5)
    series, funcs = linear_series(rng, n=20000, rho=0.5)
    fit = far1_fit(series, M=3)
    curve = funcs @ np.array([0.3, -0.2, 0.5])
    # estimation error of order 1/sqrt(n) per score direction
    np.testing.assert_allclose(fit.apply(curve), 0.5 * curve, atol=0.03)


def test_far1_white_noise_operator_shrinks():
    means = []
    for n in (100, 1600):
        norms = []
        for seed in range(20):
            series, _ = linear_series(np.random.default_rng([n, seed]), n=n, rho=0.0)
            fit = far1_fit(series, M=3)
            sw = np.sqrt(series.grid.weights)
            norms.append(np.linalg.norm(sw[:, None] * fit.kernel * sw[None, :], 2))
        means.append(np.mean(norms))
    # 16 times the data should cut the mean norm by about 4 (observed 0.47 -> 0.12)
    assert 2.5 < means[0] / means[1] < 6


def test_far1_default_m_uses_variance_rule(rng):
    series, _ = linear_series(rng, n=100)
    _, es, dec = fpca(series, Q=0.85)
    assert int(far1_fit(series).M) == dec.m


def test_far1_rank_error(grid21):
    curve = np.sin(grid21.points)
    series = FunctionalSeries(grid21, np.outer(np.arange(10.0), curve))
    with pytest.raises(RankError):
        far1_fit(series, M=2)


def test_far1_linearity_around_mean(rng):
    series, _ = linear_series(rng, n=60)
    fit = far1_fit(series)
    curve = rng.standard_normal(21)
    for scale in (-1.5, 0.3, 4.0):
        lhs = fit.predict(scale * (curve - fit.mean) + fit.mean) - fit.mean
        np.testing.assert_allclose(lhs, scale * (fit.predict(curve) - fit.mean), atol=1e-8)


def test_far1_zero_kernel_returns_mean(rng):
    series, _ = linear_series(rng, n=60)
    fit = far1_fit(series)
    fit.kernel = np.zeros_like(fit.kernel)
    np.testing.assert_allclose(fit.predict(rng.standard_normal(21), 3), fit.mean)


def test_batched_far1_matches_loop(rng):
    stack = np.stack([linear_series(rng, n=50)[0].values for _ in range(4)])
    batched = far1_fit(stack, grid=Grid.uniform(21))
    devs = rng.standard_normal((4, 1, 21))
    out = batched.predict_deviation(devs, 2)
    for idx in range(4):
        single = far1_fit(FunctionalSeries(Grid.uniform(21), stack[idx]))
        np.testing.assert_allclose(batched.kernel[idx], single.kernel, atol=1e-12)
        np.testing.assert_allclose(out[idx], single.predict_deviation(devs[idx], 2), atol=1e-12)


def test_mean_predictor(rng):
    series, _ = linear_series(rng, n=30)
    fit = mean_fit(series)
    np.testing.assert_array_equal(fit.predict(rng.standard_normal(21), 4), series.values.mean(axis=0))


@pytest.mark.parametrize("kind", ["far1", "var_scores", "nfr"])
def test_two_step_is_composition(kind, rng):
    series, _ = linear_series(rng, n=80)
    fit = fit_predictor(PredictorSpec(kind=kind, p=2) if kind == "var_scores" else PredictorSpec(kind=kind), series)
    block = series.values[-fit.k:]
    one = fit.predict(block, 1)
    two = fit.predict(np.vstack([block, one]), 1)
    np.testing.assert_allclose(fit.predict(block, 2), two, atol=1e-12)


def test_horizon_must_be_positive(rng):
    series, _ = linear_series(rng, n=40)
    with pytest.raises(InvalidInputError):
        far1_fit(series).predict(series.values[-1:], 0)


def test_block_shape_checked(rng):
    series, _ = linear_series(rng, n=40)
    fit = var_scores_fit(series, p=2)
    with pytest.raises(InvalidInputError):
        fit.predict(series.values[-1:], 1)
    with pytest.raises(InvalidInputError):
        fit.predict(np.zeros((2, 20)), 1)
    other = FunctionalSeries(Grid.uniform(21), series.values[-2:] + 0)
    fit.predict(other, 1)
    with pytest.raises(InvalidInputError):
        fit.predict(FunctionalSeries(Grid(np.linspace(0, 0.9, 21)), series.values[-2:]), 1)


def test_var_scores_shares_bootstrap_forward_fit(rng):
    series, _ = linear_series(rng, n=120)
    mean, es, dec = fpca(series, m=2)
    model = fit_forward(dec.scores, 2)
    fit = var_scores_fit(series, d=2, p=2)
    np.testing.assert_array_equal(fit.model.coeffs, model.coeffs)
    manual = dec.scores[-1] @ model.coeffs[0].T + dec.scores[-2] @ model.coeffs[1].T
    np.testing.assert_allclose(fit.forecast_scores(dec.scores[-2:], 1), manual, atol=1e-12)


def test_var_scores_exact_on_noiseless_scores():
    grid = Grid.uniform(21)
    funcs = basis(grid, 2)
    # a rotation by 2 pi / 10 over whole periods: the score mean is exactly zero,
    # so the centered scores obey the recursion exactly
    rot = np.array([[np.cos(0.2 * np.pi), -np.sin(0.2 * np.pi)], [np.sin(0.2 * np.pi), np.cos(0.2 * np.pi)]])
    scores = np.zeros((200, 2))
    scores[0] = [1.0, 0.0]
    for step in range(1, 200):
        scores[step] = rot @ scores[step - 1]
    series = FunctionalSeries(grid, 1.0 + scores @ funcs.T)
    fit = var_scores_fit(series, d=2, p=1)
    # unit radius trips the stability guard, which scales the rotation by 1 - 1e-6
    assert fit.model.shrunk
    truth = 1.0 + funcs @ (np.linalg.matrix_power(rot, 3) @ scores[-1])
    np.testing.assert_allclose(fit.predict(series.values[-1:], 3), truth, atol=1e-5)


def test_nfr_limits(rng):
    series, _ = linear_series(rng, n=30)
    tiny = nfr_fit(series, bandwidth=1e-6)
    np.testing.assert_allclose(tiny.predict(series.values[10], 1), series.values[11], atol=1e-12)
    huge = nfr_fit(series, bandwidth=1e6)
    np.testing.assert_allclose(huge.predict(series.values[10], 1), series.values[1:].mean(axis=0), atol=1e-9)


def test_nfr_vanishing_weights_fall_back_to_mean(rng):
    series, _ = linear_series(rng, n=30)
    fit = nfr_fit(series, bandwidth=1e-3)
    far = series.values[0] + 1e3
    with pytest.warns(RuntimeWarning, match="vanished"):
        out = fit.predict(far, 1)
    np.testing.assert_allclose(out, fit.mean)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 20))
def test_nfr_convex_combination(seed, bw):
    gen = np.random.default_rng(seed)
    series = FunctionalSeries(Grid.uniform(9), gen.standard_normal((25, 9)))
    fit = nfr_fit(series, bandwidth=bw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = fit.predict(gen.standard_normal(9), 1)
    succ = series.values[1:]
    assert np.all(out >= succ.min(axis=0) - 1e-9)
    assert np.all(out <= succ.max(axis=0) + 1e-9)


def test_nfr_cross_validation_picks_minimum(rng):
    series, _ = linear_series(rng, n=60)
    fit = nfr_fit(series)
    assert fit.candidates.size == 15
    assert fit.bandwidth == fit.candidates[int(np.argmin(fit.cv_errors))]
    assert np.all(np.diff(fit.candidates) > 0)


def test_nfr_rmse_close_to_far1_on_linear_data():
    rng = np.random.default_rng(3)
    series, _ = linear_series(rng, n=200)
    assert one_step_rmse(nfr_fit(series), series) < 2 * one_step_rmse(far1_fit(series), series)


def test_refit_is_deterministic(rng):
    series, _ = linear_series(rng, n=50)
    for kind in ("far1", "var_scores", "nfr", "mean"):
        first = fit_predictor({"kind": kind}, series).predict(series.values[-1:], 2)
        second = fit_predictor({"kind": kind}, FunctionalSeries(series.grid, series.values.copy())).predict(series.values[-1:], 2)
        np.testing.assert_array_equal(first, second)
