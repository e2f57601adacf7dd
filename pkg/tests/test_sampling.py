import math

import numpy as np
import pytest
from scipy import stats

from bergstat import Domain, MCEstimate, PoissonBergman, SamplerError, rejection_sample
from bergstat.sampling import MomentAccumulator, envelope_constant, mc_expectation

# E[xi] under P(0.5, .) on the disc: 400 x 400 polar quadrature (tests/oracles/quadrature.py)
MEAN_XI_HALF = 0.49999999999998157


def mobius(a, x):
    return (x - a) / (1 - np.conj(a) * x)


def test_disc_center_is_uniform_with_full_acceptance():
    batch = rejection_sample(Domain.disc(), 0, 20_000, seed=1)
    assert batch.acceptance_rate == 1.0
    xi = batch.points[:, 0]
    se = np.sqrt(np.mean(np.abs(xi) ** 2) / xi.size)
    assert abs(xi.mean()) < 3 * se
    assert stats.kstest(np.abs(xi) ** 2, "uniform").pvalue > 1e-3


@pytest.mark.parametrize("z0", [0.5, 0.3 - 0.6j])
def test_disc_draws_map_to_uniform(z0):
    # phi_{z0} sends P(z0, .) dV to the uniform law
    xi = rejection_sample(Domain.disc(), z0, 20_000, seed=2).points[:, 0]
    u = mobius(z0, xi)
    assert stats.kstest(np.abs(u) ** 2, "uniform").pvalue > 1e-3
    assert stats.kstest((np.angle(u) + np.pi) / (2 * np.pi), "uniform").pvalue > 1e-3


def test_polydisc_draws_map_to_uniform():
    z0 = np.array([0.4, -0.2j])
    xi = rejection_sample(Domain.polydisc(2), z0, 20_000, seed=3).points
    for j in range(2):
        u = mobius(z0[j], xi[:, j])
        assert stats.kstest(np.abs(u) ** 2, "uniform").pvalue > 1e-3


def test_ball_radial_law_at_center():
    # uniform on the 4-ball: |xi|^2 has density 2r, so |xi|^4 is uniform
    xi = rejection_sample(Domain.ball(2), [0, 0], 20_000, seed=4).points
    r2 = np.sum(np.abs(xi) ** 2, axis=1)
    assert stats.kstest(r2 ** 2, "uniform").pvalue > 1e-3


def test_disc_mean_matches_quadrature():
    xi = rejection_sample(Domain.disc(), 0.5, 100_000, seed=5).points[:, 0]
    se = np.sqrt(np.var(xi.real) / xi.size + np.var(xi.imag) / xi.size)
    assert abs(xi.mean() - MEAN_XI_HALF) < 3 * se


def test_envelope_is_valid_on_disc():
    d = Domain.disc()
    m = envelope_constant(d, 0.5)
    assert m >= 9.0 - 1e-12
    xi = 0.999 * np.exp(1j * np.linspace(-0.01, 0.01, 101))
    ratio = PoissonBergman(d, 0.5).pdf(xi[:, None]) * d.volume / m
    assert ratio.max() <= 1.0


def test_batches_are_reproducible():
    a = rejection_sample(Domain.ball(2), [0.2, 0.1j], 500, seed=9)
    b = rejection_sample(Domain.ball(2), [0.2, 0.1j], 500, seed=9)
    c = rejection_sample(Domain.ball(2), [0.2, 0.1j], 500, seed=10)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_base_point_too_close_to_boundary():
    with pytest.raises((SamplerError, ValueError)):
        rejection_sample(Domain.disc(), 0.97, 10, seed=0)


def test_constant_integrand_has_zero_stderr():
    est = mc_expectation(Domain.disc(), 0.3, lambda xi: np.ones(xi.shape[0]), 1000, seed=1)
    assert est.mean == 1.0 and est.stderr == 0.0
    assert est.within(1.0) and est.z_score(1.0) == 0.0


def test_moment_accumulator_matches_numpy(rng):
    x = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    acc = MomentAccumulator()
    for part in np.array_split(x, 7):
        acc.add(part)
    est = acc.estimate()
    assert est.mean == pytest.approx(x.mean(), rel=1e-12)
    assert est.stderr == pytest.approx(np.sqrt(np.sum(np.abs(x - x.mean()) ** 2) / (x.size - 1) / x.size), rel=1e-9)


def test_mc_estimate_within_and_z_score():
    est = MCEstimate(np.array(1.0), np.array(0.1), 100)
    assert est.within(1.25) and not est.within(1.35)
    assert est.z_score(1.2) == pytest.approx(2.0)
    exact = MCEstimate(np.array(2.0), np.array(0.0), 100)
    assert exact.z_score(2.0 + 1e-12) == 0.0
    assert math.isinf(exact.z_score(2.1))


def test_csv_dump_round_trips(tmp_path):
    batch = rejection_sample(Domain.polydisc(2), [0.1, 0.2], 50, seed=11)
    path = tmp_path / "xi.csv"
    batch.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "re_xi1,im_xi1,re_xi2,im_xi2"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    back = data[:, 0::2] + 1j * data[:, 1::2]
    np.testing.assert_array_equal(back, batch.points)
