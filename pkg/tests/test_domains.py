import math

import numpy as np
import pytest

from bergstat import Domain, DomainError, bergman_kernel, bergman_kernel_series, poisson_bergman, series_truncation
from bergstat.domains import box_acceptance, log_bergman_kernel, monomial_log_norms, multi_indices, uniform_box_sample

from conftest import random_points


def test_kernel_values_at_center():
    assert bergman_kernel(Domain.disc(), 0, 0) == pytest.approx(0.3183098862, rel=1e-10)
    assert bergman_kernel(Domain.disc(), 0.5, 0) == pytest.approx(1 / math.pi, rel=1e-14)
    assert bergman_kernel(Domain.ball(2), [0, 0], [0, 0]) == pytest.approx(2 / math.pi ** 2, rel=1e-14)
    assert bergman_kernel(Domain.polydisc(2), [0, 0], [0, 0]) == pytest.approx(1 / math.pi ** 2, rel=1e-14)


def test_kernel_is_hermitian(domain):
    z = random_points(domain, 50, 0.9, 1)
    w = random_points(domain, 50, 0.9, 2)
    np.testing.assert_allclose(bergman_kernel(domain, z, w), np.conj(bergman_kernel(domain, w, z)), rtol=1e-14)


def test_kernel_diagonal_is_real_positive(domain):
    z = random_points(domain, 50, 0.9, 3)
    k = bergman_kernel(domain, z, z)
    assert np.all(k.real > 0)
    np.testing.assert_allclose(k.imag, 0, atol=1e-12 * np.abs(k).max())


def test_log_kernel_matches_kernel(domain):
    z = random_points(domain, 20, 0.9, 4)
    w = random_points(domain, 20, 0.9, 5)
    np.testing.assert_allclose(np.exp(log_bergman_kernel(domain, z, w)), bergman_kernel(domain, z, w), rtol=1e-12)


def test_series_disc_near_boundary():
    val = bergman_kernel_series(Domain.disc(), 0.9, 0.9, 400)
    assert val == pytest.approx(bergman_kernel(Domain.disc(), 0.9, 0.9), rel=1e-8)


def test_series_truncation_one_is_constant_term():
    assert bergman_kernel_series(Domain.disc(), 0, 0, 1) == pytest.approx(1 / math.pi, rel=1e-15)


def test_series_factorizes_on_polydisc():
    d1, d2 = Domain.disc(), Domain.polydisc(2)
    z = np.array([0.3, 0.4])
    prod = bergman_kernel_series(d1, 0.3, 0.3, 100) * bergman_kernel_series(d1, 0.4, 0.4, 100)
    # polydisc truncation counts total-degree levels, so 200 levels hold every 100 x 100 term
    full = bergman_kernel_series(d2, z, z, 200)
    assert full == pytest.approx(prod, rel=1e-12)


def test_monomial_norms_against_beta_integral():
    # ball(2): ||z1^a z2^b||^2 = pi^2 a! b! / (a + b + 2)!
    alphas = multi_indices(2, 4)
    expect = [math.pi ** 2 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2) for a, b in alphas]
    np.testing.assert_allclose(np.exp(monomial_log_norms(Domain.ball(2), alphas)), expect, rtol=1e-12)


@pytest.mark.parametrize("radius", [0.5, 0.81])
def test_series_truncation_meets_tolerance(domain, radius):
    trunc = series_truncation(domain, radius, rtol=1e-11)
    z = np.sqrt(radius) * random_points(domain, 200, 1.0, 6)
    w = np.sqrt(radius) * random_points(domain, 200, 1.0, 7)
    closed = bergman_kernel(domain, z, w)
    series = bergman_kernel_series(domain, z, w, trunc)
    assert np.max(np.abs(series - closed) / np.abs(closed)) < 1e-8


def test_poisson_bergman_values():
    assert poisson_bergman(Domain.disc(), 0, 0.7j) == pytest.approx(1 / math.pi, rel=1e-14)
    assert poisson_bergman(Domain.disc(), 0.5, 0) == pytest.approx(0.5625 / math.pi, rel=1e-14)
    assert poisson_bergman(Domain.ball(2), [0, 0], [0.3, 0.1j]) == pytest.approx(2 / math.pi ** 2, rel=1e-14)


def test_outside_points_raise(domain):
    bad = np.full(domain.n, 0.99)
    with pytest.raises(DomainError):
        bergman_kernel(domain, bad * (1.5 if domain.kind != "ball" else 1.0), np.zeros(domain.n))


def test_boundary_and_nan_not_contained():
    d = Domain.disc()
    assert not d.contains(np.array([[1.0]]))[0]
    assert not d.contains(np.array([[np.nan]]))[0]
    assert d.contains(np.array([[0.999]]))[0]


def test_ball_vs_polydisc_membership():
    z = np.array([[0.8, 0.8]])
    assert Domain.polydisc(2).contains(z)[0]
    assert not Domain.ball(2).contains(z)[0]


def test_uniform_sample_is_deterministic_and_inside(domain):
    a = uniform_box_sample(domain, 42, 1000)
    b = uniform_box_sample(domain, 42, 1000)
    np.testing.assert_array_equal(a, b)
    assert np.all(domain.contains(a))
    single = uniform_box_sample(Domain.disc(), 42)
    assert single.shape == (1,) and abs(single[0]) < 1


def test_box_acceptance_rate_ball():
    d = Domain.ball(2)
    p = box_acceptance(d)
    assert p == pytest.approx(math.pi ** 2 / 2 / 16)
    from bergstat.domains import _box_rejection
    pts, proposed = _box_rejection(d, np.random.default_rng(3), 30_000)
    rate = pts.shape[0] / proposed
    assert abs(rate - p) < 3 * math.sqrt(p * (1 - p) / proposed)


def test_uniform_sample_mean_is_zero():
    pts = uniform_box_sample(Domain.polydisc(1), 8, 20_000)
    se = np.sqrt(np.mean(np.abs(pts) ** 2) / pts.shape[0])
    assert abs(pts.mean()) < 3 * se


def test_config_round_trip():
    for d in (Domain.disc(), Domain.polydisc(3), Domain.ball(2)):
        assert Domain.from_config(d.to_config()) == d
    with pytest.raises(ValueError):
        Domain("annulus", 1)
