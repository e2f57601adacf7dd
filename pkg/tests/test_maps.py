import numpy as np
import pytest

from bergstat import ConfigError, CriticalValueError, Domain, DomainError, ProperMap, bergman_metric, bell_rule_check
from bergstat.domains import poisson_bergman, uniform_box_sample
from bergstat.maps import (diagram_gap, k_inequality_check, lower_bound_check, pullback_fisher_mc,
                           pullback_relation_mc, pushforward_density)

# power(2) at z = 0.5: E|d_z log q|^2 and E (d_z log q)^2 by polar quadrature with
# finite-difference scores (tests/oracles/quadrature.py)
SQUARE_FISHER_HALF = 2.8656196740181055
SQUARE_RELATION_HALF = 0.061310549136295175

DISC = Domain.disc()
SQUARE = ProperMap.power(2)


def test_identity_pushforward_is_poisson_bergman():
    zeta = 0.8 * uniform_box_sample(DISC, 1, 20)
    np.testing.assert_allclose(pushforward_density(ProperMap.identity(), DISC, 0.3j, zeta),
                               poisson_bergman(DISC, 0.3j, zeta), rtol=1e-13)


@pytest.mark.parametrize("zeta", [0.3, -0.5j, 0.1 + 0.7j])
def test_square_pushforward_at_center(zeta):
    assert pushforward_density(SQUARE, DISC, 0, zeta) == pytest.approx(1 / (2 * np.pi * abs(zeta)), rel=1e-13)


@pytest.mark.parametrize("z", [0.0, 0.5])
def test_pushforward_integrates_to_one(z):
    zeta = uniform_box_sample(DISC, 2, 200_000)
    vals = pushforward_density(SQUARE, DISC, z, zeta) * np.pi
    assert abs(vals.mean() - 1) < 3 * vals.std() / np.sqrt(vals.size)


def test_critical_value_raises():
    with pytest.raises(CriticalValueError):
        pushforward_density(SQUARE, DISC, 0.2, 0.0)
    with pytest.raises(CriticalValueError):
        bell_rule_check(SQUARE, DISC, DISC, 0.0, 0.3)


def test_map_domain_checks():
    with pytest.raises(DomainError):
        SQUARE.check_domain(Domain.ball(2))
    with pytest.raises(DomainError):
        ProperMap.coordinate_power(2).check_domain(DISC)
    with pytest.raises(ConfigError):
        ProperMap.from_config({"kind": "power"})
    assert ProperMap.from_config(SQUARE.to_config()) == SQUARE
    assert ProperMap.coordinate_power(3).sheets(Domain.polydisc(2)) == 9


def test_identity_pullback_is_exact():
    est = pullback_fisher_mc(ProperMap.identity(), DISC, 0.5, 1000, seed=1)
    np.testing.assert_allclose(est.mean, bergman_metric(DISC, 0.5), rtol=1e-13)
    assert est.within(bergman_metric(DISC, 0.5))


def test_square_pullback_matches_quadrature():
    est = pullback_fisher_mc(SQUARE, DISC, 0.5, 200_000, seed=2)
    assert est.within(SQUARE_FISHER_HALF)
    assert 2 / 0.75 ** 2 - est.mean[0, 0].real > 3 * est.stderr[0, 0]


def test_square_pullback_score_form_agrees():
    est = pullback_fisher_mc(SQUARE, DISC, 0.5, 200_000, seed=3, method="score")
    assert est.within(SQUARE_FISHER_HALF)


def test_square_pullback_vanishes_at_center():
    # g(0) = 2 and E[Cov_w] = E[4 |zeta|] = 2, so the pullback is 0 (quadrature oracle: 0.0)
    est = pullback_fisher_mc(SQUARE, DISC, 0.0, 100_000, seed=4)
    assert est.within(0.0)


def test_square_relation_matches_quadrature():
    est = pullback_relation_mc(SQUARE, DISC, 0.5, 200_000, seed=5)
    assert est.within(SQUARE_RELATION_HALF)


def test_coordinate_power_pullback_below_metric():
    d = Domain.polydisc(2)
    z = np.array([0.5, 0.3j])
    est = pullback_fisher_mc(ProperMap.coordinate_power(2), d, z, 50_000, seed=6)
    gap = np.diag(bergman_metric(d, z)).real - np.diag(est.mean).real
    assert np.all(gap > 3 * np.diag(est.stderr))


@pytest.mark.parametrize("pmap, z, zeta", [
    (ProperMap.identity(), 0.4, 0.25),
    (SQUARE, 0.4, 0.25),
    (ProperMap.power(3), 0.5 + 0.1j, 0.2 * np.exp(1j)),
])
def test_bell_rule(pmap, z, zeta):
    assert bell_rule_check(pmap, DISC, DISC, z, zeta) < 1e-10


def test_bell_rule_polydisc():
    d = Domain.polydisc(2)
    res = bell_rule_check(ProperMap.coordinate_power(2), d, d, [0.3, -0.4j], [0.2j, 0.5])
    assert res < 1e-10


def test_k_inequality():
    ident = k_inequality_check(ProperMap.identity(), DISC, 0.5, 0.3)
    assert ident.equal
    strict = k_inequality_check(SQUARE, DISC, 0.5, 0.09)
    assert strict.lhs < strict.rhs and not strict.equal
    center = k_inequality_check(SQUARE, DISC, 0.0, 0.2j)
    assert center.lhs <= center.rhs


def test_lower_bound_and_diagram():
    zeta = 0.9 * uniform_box_sample(DISC, 7, 200)
    dens, bound = lower_bound_check(SQUARE, DISC, 0.4, zeta)
    assert np.all(dens >= bound * (1 - 1e-12))
    assert np.max(diagram_gap(ProperMap.identity(), DISC, 0.4, zeta)) < 1e-12
    assert np.max(diagram_gap(SQUARE, DISC, 0.4, zeta)) > 1e-3
