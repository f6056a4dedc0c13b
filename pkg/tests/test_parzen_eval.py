import json
import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from sgn.parzen_eval import (DEFAULT_GRID, MllReport, ParzenModel, bandwidth_line_search,
                             evaluate_mll, mean_log_likelihoods, parzen_log_densities,
                             parzen_log_density)


def test_standard_normal_at_mean():
    m = ParzenModel([[0.0]], 1.0)
    assert parzen_log_density(m, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-14)


def test_duplicate_centers_cancel(rng):
    c = rng.normal(size=(1, 3))
    x = rng.normal(size=3)
    one = parzen_log_density(ParzenModel(c, 0.7), x)
    two = parzen_log_density(ParzenModel(np.vstack([c, c]), 0.7), x)
    assert two == pytest.approx(one, rel=1e-14)


def test_far_point_is_finite():
    # |x - c|^2 / (2 sigma^2) = 1e6
    m = ParzenModel([[0.0, 0.0]], 1.0)
    v = parzen_log_density(m, [math.sqrt(2e6), 0.0])
    assert np.isfinite(v) and v == pytest.approx(-1e6 - math.log(2 * math.pi), rel=1e-12)


def test_rejects_bad_sigma():
    with pytest.raises(ValueError):
        ParzenModel([[0.0]], 0.0)


def test_permutation_invariance(rng):
    c = rng.normal(size=(20, 4))
    x = rng.normal(size=(5, 4))
    a = parzen_log_densities(ParzenModel(c, 0.5), x)
    b = parzen_log_densities(ParzenModel(c[rng.permutation(20)], 0.5), x)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_doubled_multiset_unchanged(rng):
    c = rng.normal(size=(15, 6))
    x = rng.normal(size=(8, 6))
    a = parzen_log_densities(ParzenModel(c, 0.9), x)
    b = parzen_log_densities(ParzenModel(np.vstack([c, c]), 0.9), x)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_single_center_closed_form(rng):
    for _ in range(100):
        d = int(rng.integers(1, 11))
        c, x, s = rng.normal(size=d), rng.normal(size=d), float(rng.uniform(0.1, 3))
        expect = multivariate_normal(c, s * s * np.eye(d)).logpdf(x)
        assert parzen_log_density(ParzenModel(c[None, :], s), x) == pytest.approx(expect, rel=1e-10)


def test_mean_log_likelihoods_consistent(rng):
    c, x = rng.normal(size=(30, 3)), rng.normal(size=(12, 3))
    grid = [0.2, 0.5, 1.0]
    shared = mean_log_likelihoods(c, x, grid)
    single = [parzen_log_densities(ParzenModel(c, s), x).mean() for s in grid]
    np.testing.assert_allclose(shared, single, rtol=1e-12)


def test_line_search_singleton():
    assert bandwidth_line_search([[0.0]], [[1.0]], [0.3])[0] == 0.3


def test_line_search_memorized_picks_smallest(rng):
    pts = rng.normal(size=(10, 4))
    grid = [0.05, 0.1, 0.3, 1.0]
    sigma, scores = bandwidth_line_search(pts, pts, grid)
    assert sigma == 0.05
    assert np.all(np.diff(scores) < 0)


def test_line_search_tie_goes_to_smaller():
    # one center, one validation point at distance^2 = 2: log density -1/s^2 - log(2 pi s^2)
    # has equal values where the two grid points straddle the optimum symmetrically;
    # duplicated grid entries are the simplest exact tie.
    assert bandwidth_line_search([[0.0]], [[1.0]], [1.0, 1.0, 0.5])[0] in (0.5, 1.0)
    s, scores = bandwidth_line_search([[0.0]], [[1.0]], [2.0, 1.0, 1.0])
    assert s == 1.0


def test_line_search_errors():
    with pytest.raises(ValueError):
        bandwidth_line_search([[0.0]], [[1.0]], [])
    with pytest.raises(ValueError):
        bandwidth_line_search([[0.0]], np.zeros((0, 1)), [1.0])


def test_default_grid():
    assert len(DEFAULT_GRID) == 30
    assert DEFAULT_GRID[0] == pytest.approx(0.01) and DEFAULT_GRID[-1] == pytest.approx(1.0)


def test_data_centers_beat_noise(rng):
    def draw(n):
        return np.clip(rng.normal(0.3, 0.2, size=(n, 16)), 0, 1)
    val, test = draw(200), draw(200)
    good = evaluate_mll(draw(500), val, test)
    bad = evaluate_mll(rng.random((500, 16)), val, test)
    assert good.mll > bad.mll


def test_report_fields_and_determinism(rng):
    g, v, t = rng.random((50, 5)), rng.random((20, 5)), rng.random((30, 5))
    a = evaluate_mll(g, v, t, keep_per_point=True)
    b = evaluate_mll(g, v, t, keep_per_point=True)
    assert a == b
    assert (a.n_centers, a.n_eval, a.n_validation) == (50, 30, 20)
    assert a.mll == pytest.approx(np.mean(a.per_point_ll), rel=1e-13)
    assert a.sigma_star in a.grid


def test_report_serialization(rng):
    r = evaluate_mll(rng.random((20, 3)), rng.random((5, 3)), rng.random((5, 3)))
    assert MllReport.from_json(r.to_json()) == r
    assert set(json.loads(r.to_json())) >= {"mll", "sigma_star", "n_centers", "n_eval"}
    header, row = r.to_csv_row(header=True).splitlines()
    assert header.split(",") == list(MllReport.CSV_FIELDS)
    assert float(row.split(",")[0]) == r.mll
