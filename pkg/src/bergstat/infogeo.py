"""Monte Carlo checks of the information geometry of ``z -> P(z, .) dV``.

Every estimate here is an average over exact draws ``xi ~ P(z, .) dV`` of a
function of the log-likelihood jet ``l(z, xi) = log P(z, xi)`` (see
:func:`bergstat.geometry.jet_from_points`), compared against a closed-form
right side built from the Bergman metric and its derivatives.

Identity ids
------------
``T3-1`` .. ``T3-10`` are the expectation identities for products of
derivatives of ``l`` up to total order three; ``T4-1`` .. ``T4-6`` are the
order-four family.  Indices are 1-based.  See :data:`IDENTITIES` for the
integrand and target of each.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import derive_seed
from ._validation import check_count
from .domains import log_poisson_bergman
from .exceptions import UnknownIdentity
from .geometry import _single, jet_from_points, normal_frame, potential_derivatives
from .sampling import MCEstimate, MomentAccumulator, _jsonable, rejection_sample

_CHUNK = 100_000
#: Seed offset for the one reseeded retry of a failed identity.
RETRY_OFFSET = 1_000_003


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one expectation identity at one point.

    ``passed`` is ``estimate.within(target)`` (3 standard errors entrywise,
    with a roundoff floor for integrands that are constant in ``xi``).
    """

    identity_id: str
    indices: tuple
    estimate: MCEstimate
    target: np.ndarray
    passed: bool
    point: np.ndarray = field(default=None, compare=False)
    seed: int = field(default=None, compare=False)
    attempts: int = field(default=1, compare=False)

    def recheck(self, k=3.0):
        return self.estimate.within(self.target, k=k)

    def to_dict(self):
        return {
            "identity_id": self.identity_id,
            "indices": [int(i) for i in self.indices],
            "point": _jsonable(self.point) if self.point is not None else None,
            "seed": self.seed,
            "attempts": self.attempts,
            "estimate": self.estimate.to_dict(),
            "target": _jsonable(self.target),
            "z_score": self.estimate.z_score(self.target),
            "pass": self.passed,
        }


# -- identity catalog --------------------------------------------------------

def _cols(n_rows, *cols):
    """Stack per-sample columns (or constants) into an ``(N, k)`` array."""
    return np.stack([np.broadcast_to(np.asarray(c, complex), (n_rows,)) for c in cols], axis=1)


@dataclass(frozen=True)
class Identity:
    """``E[integrand(jet)] = target(pot)`` for a fixed index tuple."""

    identity_id: str
    arity: int
    statement: str
    integrand: object
    target: object


def _t31(j, i):
    a, b = i
    return _cols(len(j), j.d[:, a] * j.dbar[:, b], -j.ddbar[a, b])


def _t36(j, i):
    a, b, c = i
    return _cols(len(j), j.ddbar[a, b] * j.d[:, c], j.ddbar[a, b] * j.dbar[:, c])


def _t41(j, i):
    a, b, c, d = i
    # d_a d_bbar d_cbar l = conj(d_b d_c d_abar l)
    return _cols(len(j), j.dd_dbar[a, b, c] * j.dbar[:, d], np.conj(j.dd_dbar[b, c, a]) * j.d[:, d])


def _t46(j, i):
    (a,) = i
    da, dda = j.d[:, a], j.dd[:, a, a]
    q = dda + da ** 2                              # d_a d_a P / P
    val = np.abs(da) ** 4 - np.abs(q) ** 2 + np.abs(dda) ** 2 + 2.0 * da ** 2 * np.conj(dda)
    return _cols(len(j), val)


def _zero(k=1):
    return lambda p, i: np.zeros(k, complex)


IDENTITIES = {
    ident.identity_id: ident
    for ident in [
        Identity("T3-1", 2, "E[d_a l d_bbar l] = -E[d_a d_bbar l] = g_{a bbar}",
                 _t31, lambda p, i: np.array([p.metric[i], p.metric[i]])),
        Identity("T3-2", 2, "E[d_a l d_b l] = 0",
                 lambda j, i: _cols(len(j), j.d[:, i[0]] * j.d[:, i[1]]), _zero()),
        Identity("T3-3", 2, "E[d_a d_b l] = 0",
                 lambda j, i: _cols(len(j), j.dd[:, i[0], i[1]]), _zero()),
        Identity("T3-4", 3, "E[d_a l d_b l d_c l] = 0",
                 lambda j, i: _cols(len(j), j.d[:, i[0]] * j.d[:, i[1]] * j.d[:, i[2]]), _zero()),
        Identity("T3-5", 3, "E[d_a d_b l d_c l] = 0",
                 lambda j, i: _cols(len(j), j.dd[:, i[0], i[1]] * j.d[:, i[2]]), _zero()),
        Identity("T3-6", 3, "E[d_a d_bbar l d_c l] = E[d_a d_bbar l d_cbar l] = 0",
                 _t36, _zero(2)),
        Identity("T3-7", 3, "E[d_a l d_b l d_cbar l] = 0",
                 lambda j, i: _cols(len(j), j.d[:, i[0]] * j.d[:, i[1]] * j.dbar[:, i[2]]), _zero()),
        Identity("T3-8", 3, "E[d_a d_b l d_cbar l] = d_b g_{a cbar}",
                 lambda j, i: _cols(len(j), j.dd[:, i[0], i[1]] * j.dbar[:, i[2]]),
                 lambda p, i: np.array([p.dmetric[i]])),
        Identity("T3-9", 3, "E[d_a d_b d_c l] = 0",
                 lambda j, i: _cols(len(j), j.ddd[:, i[0], i[1], i[2]]), _zero()),
        Identity("T3-10", 3, "E[d_a d_b d_cbar l] = -d_b g_{a cbar}",
                 lambda j, i: _cols(len(j), j.dd_dbar[i]), lambda p, i: np.array([-p.dmetric[i]])),
        Identity("T4-1", 4, "E[d_a d_b d_cbar l d_dbar l] = E[d_a d_bbar d_cbar l d_d l] = 0",
                 _t41, _zero(2)),
        Identity("T4-2", 4, "E[d_a d_bbar l d_c l d_dbar l] = -g_{a bbar} g_{c dbar}",
                 lambda j, i: _cols(len(j), j.ddbar[i[0], i[1]] * j.d[:, i[2]] * j.dbar[:, i[3]]),
                 lambda p, i: np.array([-p.metric[i[0], i[1]] * p.metric[i[2], i[3]]])),
        Identity("T4-3", 4, "E[d_a d_bbar l d_c d_dbar l] = g_{a bbar} g_{c dbar}",
                 lambda j, i: _cols(len(j), j.ddbar[i[0], i[1]] * j.ddbar[i[2], i[3]]),
                 lambda p, i: np.array([p.metric[i[0], i[1]] * p.metric[i[2], i[3]]])),
        Identity("T4-4", 4,
                 "E[d_a l d_b l d_cbar d_dbar l] + E[d_a l d_b l d_cbar l d_dbar l]"
                 " = g_{a dbar} g_{b cbar} + g_{b dbar} g_{a cbar}",
                 lambda j, i: _cols(len(j), j.d[:, i[0]] * j.d[:, i[1]]
                                    * (np.conj(j.dd[:, i[2], i[3]]) + j.dbar[:, i[2]] * j.dbar[:, i[3]])),
                 lambda p, i: np.array([p.metric[i[0], i[3]] * p.metric[i[1], i[2]]
                                        + p.metric[i[1], i[3]] * p.metric[i[0], i[2]]])),
        Identity("T4-5", 4,
                 "E[d_a d_b l d_cbar d_dbar l] + E[d_a d_b l d_cbar l d_dbar l] = d_b d_dbar g_{a cbar}",
                 lambda j, i: _cols(len(j), j.dd[:, i[0], i[1]]
                                    * (np.conj(j.dd[:, i[2], i[3]]) + j.dbar[:, i[2]] * j.dbar[:, i[3]])),
                 lambda p, i: np.array([p.ddmetric[i]])),
        Identity("T4-6", 1,
                 "E[|d_a l|^4] = E[|d_a d_a P|^2 / P^2] - E[|d_a d_a l|^2] - 2 E[(d_a l)^2 d_abar d_abar l]",
                 _t46, _zero()),
    ]
}


def get_identity(identity_id):
    try:
        return IDENTITIES[identity_id]
    except KeyError:
        raise UnknownIdentity(f"unknown identity {identity_id!r}; known: {sorted(IDENTITIES)}") from None


def _zero_based(indices, arity, n):
    idx = tuple(int(i) for i in indices)
    if len(idx) != arity:
        raise ValueError(f"expected {arity} indices, got {len(idx)}")
    if any(i < 1 or i > n for i in idx):
        raise IndexError(f"indices {idx} must lie in 1..{n}")
    return tuple(i - 1 for i in idx)


def _accumulate(domain, z, points, fns, chunk=_CHUNK):
    """One pass over ``points``: feed the jet of every chunk to each ``fn``."""
    pot = potential_derivatives(domain, z)
    accs = [MomentAccumulator() for _ in fns]
    for lo in range(0, points.shape[0], chunk):
        jet = jet_from_points(domain, z, points[lo:lo + chunk], pot)
        for acc, fn in zip(accs, fns):
            acc.add(fn(jet))
    return pot, [acc.estimate() for acc in accs]


def evaluate_identities(domain, z, points, requests):
    """Estimate several identities on one shared batch.

    Parameters
    ----------
    requests : list of (identity_id, indices)
        Indices are 1-based.

    Returns
    -------
    list of IdentityReport
    """
    z = _single(domain, z)
    resolved = []
    for ident_id, indices in requests:
        ident = get_identity(ident_id)
        resolved.append((ident, tuple(indices), _zero_based(indices, ident.arity, domain.n)))
    fns = [lambda jet, ident=ident, i0=i0: ident.integrand(jet, i0) for ident, _, i0 in resolved]
    pot, estimates = _accumulate(domain, z, points, fns)
    reports = []
    for (ident, idx, i0), est in zip(resolved, estimates):
        target = np.asarray(ident.target(pot, i0), complex)
        reports.append(IdentityReport(ident.identity_id, idx, est, target, est.within(target), point=z))
    return reports


def lemma_identity_mc(domain, z, identity_id, indices, n, seed):
    """Monte Carlo check of one cataloged identity at ``z`` (indices 1-based)."""
    get_identity(identity_id)
    z = _single(domain, z)
    batch = rejection_sample(domain, z, check_count(n, "n", minimum=2), seed)
    (report,) = evaluate_identities(domain, z, batch.points, [(identity_id, indices)])
    return _with(report, seed=int(seed))


def _with(report, **changes):
    return replace(report, **changes)


def default_indices(identity_id, n, rng):
    """Index tuple for the suite: all ones when ``n == 1``, else drawn from ``rng``."""
    arity = get_identity(identity_id).arity
    if n == 1:
        return (1,) * arity
    return tuple(int(i) for i in rng.integers(1, n + 1, size=arity))


def identity_suite(domain, points, n, seed, identity_ids=None, indices=None, retry=True):
    """Every requested identity at every point, sharing one batch per point.

    A failing identity is retried once on a fresh batch (seed offset by
    :data:`RETRY_OFFSET`); the retry result is final.

    Parameters
    ----------
    points : sequence of points
    indices : dict, optional
        ``identity_id -> indices``; missing ids get :func:`default_indices`.
    """
    ids = list(IDENTITIES) if identity_ids is None else list(identity_ids)
    for ident_id in ids:
        get_identity(ident_id)
    index_rng = np.random.default_rng(derive_seed(seed, 7))
    reports = []
    for k, z in enumerate(points):
        z = _single(domain, z)
        requests = []
        for ident_id in ids:
            if indices and ident_id in indices:
                idx = tuple(indices[ident_id])
            else:
                idx = default_indices(ident_id, domain.n, index_rng)
            requests.append((ident_id, idx))
        s = derive_seed(seed, k)
        batch = rejection_sample(domain, z, n, s)
        first = [_with(r, seed=s) for r in evaluate_identities(domain, z, batch.points, requests)]
        failed = [i for i, r in enumerate(first) if not r.passed]
        if retry and failed:
            s2 = derive_seed(seed + RETRY_OFFSET, k)
            batch = rejection_sample(domain, z, n, s2)
            again = evaluate_identities(domain, z, batch.points, [requests[i] for i in failed])
            for i, r in zip(failed, again):
                first[i] = _with(r, seed=s2, attempts=2)
        reports.extend(first)
    return reports


# -- Fisher metric and Amari-Chentsov tensor --------------------------------

def fisher_metric_mc(domain, z, n, seed):
    """``E[d_a l d_bbar l]`` as an ``(n, n)`` matrix estimate; compare with the Bergman metric."""
    z = _single(domain, z)
    batch = rejection_sample(domain, z, check_count(n, "n", minimum=2), seed)
    _, (est,) = _accumulate(domain, z, batch.points,
                            [lambda j: j.d[:, :, None] * j.dbar[:, None, :]])
    return est


def fisher_matches(estimate, metric, k=3.0):
    """``||mean - g||_F <= k ||stderr||_F`` (aggregate form of the entrywise check)."""
    diff = np.linalg.norm(np.asarray(estimate.mean) - np.asarray(metric))
    return bool(diff <= k * np.linalg.norm(estimate.stderr) + 1e-12)


def amari_chentsov_mc(domain, z, indices, n, seed, conj=(False, False, False)):
    """``E[D_A l D_B l D_C l]`` with each ``D`` holomorphic or, if flagged in ``conj``, antiholomorphic.

    The pulled-back Amari-Chentsov tensor vanishes, so the target is 0.
    """
    z = _single(domain, z)
    i0 = _zero_based(indices, 3, domain.n)
    if len(conj) != 3:
        raise ValueError("conj needs three flags")
    batch = rejection_sample(domain, z, check_count(n, "n", minimum=2), seed)

    def fn(j):
        val = np.ones(len(j), complex)
        for i, c in zip(i0, conj):
            val = val * (j.dbar[:, i] if c else j.d[:, i])
        return _cols(len(j), val)

    _, (est,) = _accumulate(domain, z, batch.points, [fn])
    target = np.zeros(1, complex)
    label = "".join("b" if c else "h" for c in conj)
    return IdentityReport(f"amari-chentsov:{label}", tuple(indices), est, target, est.within(target),
                          point=z, seed=int(seed))


# -- divergences --------------------------------------------------------------

def chi_alpha(x, alpha):
    """Generator ``chi^(alpha)`` of the alpha-divergence; logarithmic at ``alpha = +-1``."""
    x = np.asarray(x, float)
    alpha = float(alpha)
    if alpha == 1.0:
        return x * np.log(x)
    if alpha == -1.0:
        return -np.log(x)
    return 4.0 / (1.0 - alpha ** 2) * (1.0 - x ** ((1.0 + alpha) / 2.0))


def alpha_divergence_mc(domain, z, w, alpha, n, seed):
    """``D^(alpha)(P(z,.), P(w,.)) = E_z[chi^(alpha)(P(w, xi) / P(z, xi))]``."""
    z = _single(domain, z, "z")
    w = _single(domain, w, "w")
    batch = rejection_sample(domain, z, check_count(n, "n", minimum=2), seed)

    def fn(xi):
        log_ratio = log_poisson_bergman(domain, w[None, :], xi) - log_poisson_bergman(domain, z[None, :], xi)
        if float(alpha) == -1.0:
            return -log_ratio
        if float(alpha) == 1.0:
            return np.exp(log_ratio) * log_ratio
        return chi_alpha(np.exp(log_ratio), alpha)

    return _average(fn, batch.points)


def kl_divergence_mc(domain, z, w, n, seed):
    """``E_z[log P(z, xi) - log P(w, xi)]``; equals the diastasis ``Dia(z, w)``."""
    return alpha_divergence_mc(domain, z, w, -1.0, n, seed)


def _average(fn, points, chunk=_CHUNK):
    acc = MomentAccumulator()
    for lo in range(0, points.shape[0], chunk):
        acc.add(fn(points[lo:lo + chunk]))
    return acc.estimate()


def joint_agree(a, b, k=3.0):
    """``|a - b| <= k sqrt(se_a^2 + se_b^2)`` for independent scalar estimates."""
    return bool(abs(a.mean - b.mean) <= k * np.hypot(a.stderr, b.stderr) + 1e-12)


# -- curvature ------------------------------------------------------------------

def curvature_mc(domain, z, n, seed, alpha=1):
    """``2 - E[|d_al d_al P|^2 / P^2]`` in holomorphic normal coordinates at ``z``.

    With ``z = z0 + A w + C(w, w) / 2`` from :func:`bergstat.geometry.normal_frame`,
    ``d_w d_w P / P = A_a A_b (d_a d_b l + d_a l d_b l) + C^a d_a l``.
    ``alpha`` is 1-based.
    """
    z = _single(domain, z)
    (a0,) = _zero_based((alpha,), 1, domain.n)
    A, C = normal_frame(domain, z)
    col = A[:, a0]
    corr = C[:, a0, a0]
    batch = rejection_sample(domain, z, check_count(n, "n", minimum=2), seed)

    def fn(j):
        q = (np.einsum("Nab,a,b->N", j.dd, col, col) + (j.d @ col) ** 2 + j.d @ corr)
        return 2.0 - np.abs(q) ** 2

    _, (est,) = _accumulate(domain, z, batch.points, [fn])
    return est


__all__ = [
    "IDENTITIES", "Identity", "IdentityReport", "alpha_divergence_mc", "amari_chentsov_mc",
    "chi_alpha", "curvature_mc", "default_indices", "evaluate_identities", "fisher_matches",
    "fisher_metric_mc", "get_identity", "identity_suite", "joint_agree", "kl_divergence_mc",
    "lemma_identity_mc",
]
