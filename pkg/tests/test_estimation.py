import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone

from bergstat import (ComplexNormalSpec, DiastasisEstimator, Domain, NotPositiveDefinite, bergman_metric,
                      clt_experiment, complex_normal_sample, consistency_experiment, estimate_zhat,
                      rejection_sample)
from bergstat.estimation import (diastasis_objective_grad, ks_marginals, minimize_diastasis, objective_change,
                                 real_gradient, whiten)

from conftest import random_points

DISC = Domain.disc()


def test_gradient_hand_value():
    val, grad = diastasis_objective_grad(DISC, np.array([0.0]), np.array([[0.4]]))
    assert grad[0] == pytest.approx(-0.8, rel=1e-14)


def test_singleton_batch():
    w = np.array([0.3 - 0.2j])
    val, grad = diastasis_objective_grad(DISC, w, w[None, :])
    assert val == pytest.approx(0.0, abs=1e-14)
    assert np.abs(grad).max() < 1e-14
    np.testing.assert_allclose(estimate_zhat(DISC, w[None, :]), w, atol=1e-8)


def test_gradient_against_finite_differences(domain):
    zs = random_points(domain, 20, 0.6, 31)
    h = 1e-6
    for k, z in enumerate(zs):
        batch = random_points(domain, 5, 0.8, 100 + k)
        _, grad = diastasis_objective_grad(domain, z, batch)
        fd = np.empty(domain.n, complex)
        for a in range(domain.n):
            e = np.zeros(domain.n, complex)
            e[a] = h
            dx = (diastasis_objective_grad(domain, z + e, batch)[0]
                  - diastasis_objective_grad(domain, z - e, batch)[0]) / (2 * h)
            dy = (diastasis_objective_grad(domain, z + 1j * e, batch)[0]
                  - diastasis_objective_grad(domain, z - 1j * e, batch)[0]) / (2 * h)
            fd[a] = 0.5 * (dx - 1j * dy)
        assert np.abs(grad - fd).max() / max(1.0, np.abs(grad).max()) < 1e-6


def test_real_gradient_layout():
    np.testing.assert_allclose(real_gradient(np.array([1 + 2j])), [2.0, -4.0])


def test_objective_change_is_accurate():
    batch = rejection_sample(DISC, 0.3, 500, seed=2).points
    z = np.array([0.25])
    delta = np.array([1e-7j])
    direct = diastasis_objective_grad(DISC, z + delta, batch)[0] - diastasis_objective_grad(DISC, z, batch)[0]
    assert objective_change(DISC, z, delta, batch) == pytest.approx(direct, rel=1e-5)


def test_objective_decreases_monotonically(domain):
    z0 = random_points(domain, 1, 0.4, 33)[0]
    batch = rejection_sample(domain, z0, 200, seed=3).points
    res = minimize_diastasis(domain, batch, record=True)
    assert res.converged and res.grad_norm < 1e-8
    assert np.all(np.diff(res.values) <= 0)


def test_large_batch_is_close():
    batch = rejection_sample(DISC, 0.3, 10_000, seed=4).points
    zhat = estimate_zhat(DISC, batch)
    # 3 sigma of the limiting law: sqrt(1 / (m g(0.3)))
    assert abs(zhat[0] - 0.3) < 0.05
    assert abs(zhat[0] - 0.3) < 3 * np.sqrt(1 / (10_000 * bergman_metric(DISC, 0.3)[0, 0].real))


def test_rotation_equivariance():
    batch = rejection_sample(DISC, 0, 300, seed=5).points
    theta = np.exp(0.7j)
    a = estimate_zhat(DISC, batch)
    b = estimate_zhat(DISC, theta * batch)
    np.testing.assert_allclose(b, theta * a, atol=1e-8)


def test_sklearn_estimator():
    est = DiastasisEstimator(domain=Domain.ball(2))
    assert clone(est).get_params()["domain"] == Domain.ball(2)
    X = rejection_sample(Domain.ball(2), [0.2, 0.1j], 400, seed=6).points
    est.fit(X)
    np.testing.assert_allclose(est.location_, estimate_zhat(Domain.ball(2), X), atol=1e-12)
    assert est.converged_ and est.n_iter_ > 0
    assert est.score(X) <= 0


def test_consistency_table():
    tab = consistency_experiment(DISC, 0, [50, 200, 800], 200, seed=7)
    assert tab.strictly_decreasing() and tab.failure_rate < 0.01
    errs = [r.mean_abs_error for r in tab.rows]
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    assert all(0.4 < r < 0.6 for r in ratios)
    again = consistency_experiment(DISC, 0, [50, 200, 800], 200, seed=7)
    assert again.to_dict() == tab.to_dict()


def test_consistency_schedule_must_increase():
    with pytest.raises(ValueError):
        consistency_experiment(DISC, 0, [200, 50], 10, seed=1)


def test_clt_disc_center():
    rep = clt_experiment(DISC, 0, 200, 2000, seed=8)
    np.testing.assert_allclose(rep.gamma_star, [[0.5]])
    checks = rep.checks(check_relation=True)
    assert checks["covariance"] and checks["relation"] and checks["failure_rate"], checks
    assert rep.to_dict()["init_policy"] == "batch mean"


def test_clt_csv(tmp_path):
    rep = clt_experiment(Domain.ball(2), [0, 0], 50, 20, seed=9)
    path = tmp_path / "y.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "re_y1,im_y1,re_y2,im_y2" and len(lines) == 1 + rep.n_ok
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 0::2] + 1j * data[:, 1::2], rep.samples)


def test_complex_normal_standard():
    z = complex_normal_sample(ComplexNormalSpec([0], [[1]]), 100_000, seed=10)[:, 0]
    v = np.abs(z) ** 2
    assert abs(v.mean() - 1) < 3 * v.std() / np.sqrt(z.size)
    q = z ** 2
    assert abs(q.mean()) < 3 * np.sqrt(np.mean(np.abs(q) ** 2) / z.size)


def test_complex_normal_affine():
    z = complex_normal_sample(ComplexNormalSpec([1 + 1j], [[2]]), 100_000, seed=11)[:, 0]
    assert abs(z.mean() - (1 + 1j)) < 3 * np.sqrt(2 / z.size)
    v = np.abs(z - (1 + 1j)) ** 2
    assert abs(v.mean() - 2) < 3 * v.std() / np.sqrt(z.size)


def test_complex_normal_whitened_ks():
    gamma = np.linalg.inv(bergman_metric(Domain.ball(2), [0.3, 0.2j]))
    z = complex_normal_sample(ComplexNormalSpec([0, 0], gamma), 5000, seed=12)
    pvalues = [p for _, p in ks_marginals(whiten(z, gamma))]
    assert min(pvalues) > 0.01


def test_complex_normal_logpdf_integrates():
    spec = ComplexNormalSpec([0.5j], [[0.7]])
    x = np.linspace(-6, 6, 601)
    X, Y = np.meshgrid(x, x)
    pts = (X + 1j * Y).ravel()[:, None] + 0.5j
    mass = np.exp(spec.logpdf(pts)).sum() * (x[1] - x[0]) ** 2
    assert mass == pytest.approx(1.0, rel=1e-6)
    assert stats.norm(0, np.sqrt(0.35)).pdf(0) ** 2 == pytest.approx(np.exp(spec.logpdf([[0.5j]]))[0], rel=1e-12)


def test_complex_normal_rejects_bad_covariance():
    with pytest.raises(NotPositiveDefinite):
        ComplexNormalSpec([0, 0], [[1, 2], [2, 1]])
    with pytest.raises(NotPositiveDefinite):
        ComplexNormalSpec([0, 0], [[1, 1j], [1j, 1]])
    with pytest.raises(NotImplementedError):
        ComplexNormalSpec([0], [[1]], relation=[[0.5]])
