from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcband.bands import (
    pointwise_band,
    pointwise_interval,
    quantile,
    quantile_rank,
    read_band_csv,
    self_coverage,
    simultaneous_band,
    sup_statistics,
    write_band_csv,
)
from funcband.bootstrap import BootstrapConfig, sigma_floor
from funcband.curves import Grid
from funcband.errors import InvalidInputError


def ensemble(errors, grid=None, interval=(0.0, 1.0)):
    errors = np.asarray(errors, dtype=float)
    grid = grid or Grid.uniform(errors.shape[1])
    sigma, raw = sigma_floor(errors)
    return SimpleNamespace(
        grid=grid, errors=errors, sigma_star=sigma, sigma_raw=raw,
        config=BootstrapConfig(band_interval=interval), predictor=None, diagnostics={},
    )


def test_sup_statistic_examples():
    ens = ensemble([[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(sup_statistics(ens), [1.0, 1.0])
    ens = ensemble(np.zeros((3, 4)))
    np.testing.assert_array_equal(sup_statistics(ens), 0)
    ens = SimpleNamespace(grid=Grid.uniform(2), errors=np.array([[2.0, -3.0]]), sigma_star=np.ones(2))
    assert sup_statistics(ens)[0] == 3.0


def test_sup_statistic_restricted_interval():
    errors = np.array([[5.0, 0.1, 0.2], [-5.0, 0.3, -0.4]])
    ens = ensemble(errors)
    full = sup_statistics(ens)
    part = sup_statistics(ens, (0.5, 1.0))
    assert np.all(part <= full)
    with pytest.raises(InvalidInputError):
        sup_statistics(ens, (0.1, 0.2))


def test_quantile_rank_and_values():
    assert quantile_rank(0.95, 100) == 96
    assert quantile(np.arange(1, 101), 0.95) == 96
    assert quantile([3.5], 0.01) == 3.5
    assert quantile([3.5], 0.99) == 3.5
    assert quantile_rank(0.8, 99) == 80
    assert quantile_rank(0.999, 10) == 10
    with pytest.raises(InvalidInputError):
        quantile([1, 2], 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_quantile_monotone(values, l1, l2):
    lo, hi = sorted([l1, l2])
    assert quantile(values, lo) <= quantile(values, hi)


def test_degenerate_ensemble_band_is_negligible():
    ens = ensemble(np.zeros((50, 5)))
    band = simultaneous_band(np.ones(5), ens, 0.1)
    assert np.max(band.width) < 1e-300


def test_symmetric_two_value_ensemble():
    c = np.linspace(1, 2, 6)
    ens = ensemble(np.vstack([c, -c]))
    np.testing.assert_allclose(ens.sigma_star, c)
    band = simultaneous_band(np.zeros(6), ens, 0.2)
    assert band.q_star == pytest.approx(1.0)
    np.testing.assert_allclose(band.upper, band.q_star * c)
    np.testing.assert_allclose(band.width, 2 * band.q_star * ens.sigma_star, rtol=1e-14)


def test_band_nesting_across_alpha(rng):
    ens = ensemble(rng.standard_normal((200, 9)))
    center = rng.standard_normal(9)
    for make in (simultaneous_band, pointwise_band):
        wide = make(center, ens, 0.05)
        narrow = make(center, ens, 0.2)
        assert np.all(wide.lower <= narrow.lower)
        assert np.all(wide.upper >= narrow.upper)
        assert np.all(narrow.lower <= center)
        assert np.all(center <= narrow.upper)


def test_translation_equivariance(rng):
    ens = ensemble(rng.standard_normal((100, 7)))
    center = rng.standard_normal(7)
    shift = np.linspace(-3, 3, 7)
    for make in (simultaneous_band, pointwise_band):
        moved = make(center + shift, ens, 0.1)
        shifted = make(center, ens, 0.1).shifted(shift)
        np.testing.assert_allclose(moved.lower, shifted.lower, atol=1e-14)
        np.testing.assert_allclose(moved.upper, shifted.upper, atol=1e-14)


def test_band_masked_outside_interval(rng):
    ens = ensemble(rng.standard_normal((60, 11)), interval=(0.3, 0.7))
    band = simultaneous_band(np.zeros(11), ens, 0.1)
    assert np.all(np.isnan(band.lower[~band.mask]))
    assert np.all(np.isfinite(band.lower[band.mask]))
    assert band.mask.sum() == 5
    assert np.all(band.contains(np.full(11, 1e9))[~band.mask])


def test_pointwise_uniform_errors():
    # errors -10..10 repeated: quantiles near +-8 at alpha = 0.2
    vals = np.linspace(-10, 10, 100)
    ens = ensemble(vals[:, None] * np.ones((1, 3)))
    lo, hi = pointwise_interval(np.full(3, 5.0), ens, 0.2, 1)
    assert hi - 5.0 == pytest.approx(8.0, abs=0.25)
    assert lo - 5.0 == pytest.approx(-8.0, abs=0.25)
    assert (hi - 5.0) == pytest.approx(-(lo - 5.0), abs=1e-12)


def test_pointwise_interval_matches_band(rng):
    ens = ensemble(rng.standard_normal((99, 6)))
    center = rng.standard_normal(6)
    band = pointwise_band(center, ens, 0.1)
    for idx in range(6):
        lo, hi = pointwise_interval(center, ens, 0.1, idx)
        assert lo == band.lower[idx]
        assert hi == band.upper[idx]


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 2**31),
    st.integers(1, 300),
    st.integers(2, 15),
    st.sampled_from([0.01, 0.05, 0.1, 0.2, 0.5]),
    st.sampled_from(["normal", "exponential", "cauchy", "ties"]),
)
def test_self_coverage_order_statistic_guarantee(seed, B, J, alpha, law):
    gen = np.random.default_rng(seed)
    if law == "normal":
        errors = gen.standard_normal((B, J))
    elif law == "exponential":
        errors = gen.exponential(size=(B, J)) - 1
    elif law == "cauchy":
        errors = gen.standard_cauchy((B, J))
    else:
        errors = gen.integers(-2, 3, size=(B, J)).astype(float)
    ens = ensemble(errors)
    band = simultaneous_band(np.zeros(J), ens, alpha)
    cov = self_coverage(band, ens)
    assert 1 - alpha - 1 / B <= cov <= 1


def test_pointwise_inside_simultaneous_for_gaussian_ensembles():
    inside = 0
    for seed in range(50):
        ens = ensemble(np.random.default_rng(seed).standard_normal((500, 15)))
        sim = simultaneous_band(np.zeros(15), ens, 0.1)
        pw = pointwise_band(np.zeros(15), ens, 0.1)
        inside += np.all((pw.lower >= sim.lower) & (pw.upper <= sim.upper))
    assert inside == 50


def test_pointwise_containment_can_fail_for_skewed_ensembles():
    # containment is not a theorem: a column whose errors sit mostly on one
    # side has an equal-tailed quantile above q_star * sigma_star
    errors = np.zeros((100, 2))
    errors[85:, 0] = 10.0
    errors[:, 1] = np.random.default_rng(0).standard_normal(100)
    ens = ensemble(errors)
    sim = simultaneous_band(np.zeros(2), ens, 0.2)
    pw = pointwise_band(np.zeros(2), ens, 0.2)
    assert pw.upper[0] > sim.upper[0]


def test_band_csv_and_sidecar(tmp_path, rng):
    import json

    ens = ensemble(rng.standard_normal((40, 11)), interval=(0.2, 0.6))
    band = simultaneous_band(np.arange(11.0), ens, 0.2)
    path = tmp_path / "band.csv"
    write_band_csv(band, path)
    tau, center, lower, upper = read_band_csv(path)
    np.testing.assert_array_equal(tau, band.grid.points[band.mask])
    np.testing.assert_array_equal(lower, band.lower[band.mask])
    assert np.all((lower <= center) & (center <= upper))
    meta = json.loads((tmp_path / "band.csv.json").read_text())
    assert meta["alpha"] == 0.2
    assert meta["q_star"] == band.q_star
    assert meta["interval"] == [0.2, 0.6]
    assert meta["config"]["bootstrap"]["band_interval"] == [0.2, 0.6]
