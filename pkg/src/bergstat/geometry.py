"""Diastasis, Bergman metric, log-kernel jets and holomorphic sectional curvature.

Analytic derivatives come from the block form of the kernel (see
:mod:`bergstat.domains`).  For a block with power ``p`` put
``h(t) = -p log(1 - t)`` so that ``h^(k)(t) = p (k-1)! / (1 - t)^k``.  The
function ``F(z, conj(w)) = h(<z, w>_b)`` is holomorphic in ``z`` and
antiholomorphic in ``w``; every derivative of ``log B(z, xi)`` in ``z`` and
of the potential ``log B(z, z)`` is a polynomial in ``conj(w)``, ``z`` and
the Kronecker delta restricted to the block, weighted by ``h^(k)``.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np

from .domains import log_bergman_kernel, log_poisson_bergman
from .exceptions import ConditioningError, DomainError, EvaluationError
from .finite_diff import wirtinger_fd, wirtinger_tensor_fd

_LOG_TINY = np.log(1e-300)


def _hk(p, k, t):
    return p * factorial(k - 1) / (1.0 - t) ** k


def _single(domain, z, name="z"):
    pts = domain.check(z, name)
    if pts.shape[0] != 1:
        raise DomainError(f"{name} must be a single point")
    return pts[0]


# -- potential log B(z, z) ------------------------------------------------

@dataclass(frozen=True)
class PotentialDerivatives:
    """Derivatives of ``phi(z) = log B(z, z)`` at one point.

    Attributes
    ----------
    d1 : (n,)        d_a phi
    d2 : (n, n)      d_a d_b phi
    d3 : (n, n, n)   d_a d_b d_c phi
    metric : (n, n)  g[a, c] = d_a d_cbar phi
    dmetric : (n, n, n)
        ``dmetric[a, b, c] = d_b g_{a cbar} = d_a d_b d_cbar phi``.
    ddmetric : (n, n, n, n)
        ``ddmetric[a, b, c, d] = d_b d_dbar g_{a cbar}``.
    """

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    metric: np.ndarray
    dmetric: np.ndarray
    ddmetric: np.ndarray


def potential_derivatives(domain, z):
    z = _single(domain, z)
    n = domain.n
    d1 = np.zeros(n, complex)
    d2 = np.zeros((n, n), complex)
    d3 = np.zeros((n, n, n), complex)
    g = np.zeros((n, n), complex)
    dg = np.zeros((n, n, n), complex)
    ddg = np.zeros((n, n, n, n), complex)
    for mask, p in domain.block_masks:
        t = np.sum(np.abs(z) ** 2 * mask)
        v = np.conj(z) * mask     # conj(w) restricted to the block
        u = z * mask              # z restricted to the block
        E = np.diag(mask)
        h1, h2, h3, h4 = (_hk(p, k, t) for k in (1, 2, 3, 4))
        d1 += h1 * v
        d2 += h2 * np.einsum("a,b->ab", v, v)
        d3 += h3 * np.einsum("a,b,c->abc", v, v, v)
        g += h2 * np.einsum("a,c->ac", v, u) + h1 * E
        dg += (h3 * np.einsum("a,b,c->abc", v, v, u)
               + h2 * (np.einsum("ac,b->abc", E, v) + np.einsum("bc,a->abc", E, v)))
        # d_a d_b d_cbar d_dbar phi, stored as [a, b, c, d]
        ddg += (h4 * np.einsum("a,b,c,d->abcd", v, v, u, u)
                + h3 * (np.einsum("ad,b,c->abcd", E, v, u) + np.einsum("bd,a,c->abcd", E, v, u)
                        + np.einsum("ac,b,d->abcd", E, v, u) + np.einsum("bc,a,d->abcd", E, v, u))
                + h2 * (np.einsum("ac,bd->abcd", E, E) + np.einsum("bc,ad->abcd", E, E)))
    return PotentialDerivatives(d1, d2, d3, g, dg, ddg)


def bergman_metric(domain, z):
    """Bergman metric ``g[a, b] = d_a d_bbar log B(z, z)`` as a Hermitian matrix."""
    return potential_derivatives(domain, z).metric


def metric_derivative(domain, z):
    """``out[a, b, c] = d_b g_{a cbar}(z)``."""
    return potential_derivatives(domain, z).dmetric


def metric_second_derivative(domain, z):
    """``out[a, b, c, d] = d_b d_dbar g_{a cbar}(z)``."""
    return potential_derivatives(domain, z).ddmetric


def _potential_fn(domain):
    return lambda pts: log_bergman_kernel(domain, pts, pts).real


def bergman_metric_fd(domain, z, h=None):
    """Finite-difference Hessian ``d_a d_bbar`` of ``log B(z, z)``."""
    z = _single(domain, z)
    return wirtinger_tensor_fd(_potential_fn(domain), z, 1, 1, h=h)


def metric_derivative_fd(domain, z, h=None):
    """``d_b g_{a cbar}`` as the third Wirtinger derivative of ``log B(z, z)``."""
    z = _single(domain, z)
    t = wirtinger_tensor_fd(_potential_fn(domain), z, 2, 1, h=h)
    return t  # [a, b, c] already matches d_a d_b d_cbar


def metric_second_derivative_fd(domain, z, h=None):
    """``d_b d_dbar g_{a cbar}`` by differencing the analytic metric twice."""
    z = _single(domain, z)
    n = domain.n

    def metric_batch(pts):
        return np.stack([bergman_metric(domain, p) for p in pts])

    out = np.zeros((n, n, n, n), complex)
    for b in range(n):
        for d in range(n):
            out[:, b, :, d] = wirtinger_fd(metric_batch, z, (b,), (d,), h=h)
    return out


# -- diastasis ------------------------------------------------------------

def diastasis(domain, z, w):
    """Calabi diastasis ``log B(z,z) B(w,w) / |B(z,w)|^2``; broadcasts over batches."""
    zs = domain.check(z, "z")
    ws = domain.check(w, "w")
    cross = log_bergman_kernel(domain, zs, ws)
    if np.any(cross.real < _LOG_TINY):
        raise EvaluationError("B(z, w) vanishes to working precision")
    val = (log_bergman_kernel(domain, zs, zs).real + log_bergman_kernel(domain, ws, ws).real
           - 2.0 * cross.real)
    val = np.maximum(val, 0.0)
    single = np.ndim(z) <= (0 if domain.n == 1 else 1) and np.ndim(w) <= (0 if domain.n == 1 else 1)
    return float(val[0]) if single else val


# -- jets of l(z, xi) = log P(z, xi) ---------------------------------------

def log_kernel_holo_derivatives(domain, z, xi, order=3):
    """Holomorphic ``z``-derivatives of ``log B(z, xi)`` for a batch of ``xi``.

    Returns a list ``[D1, ..., D_order]`` with ``D_k`` of shape ``(N,) + (n,)*k``.
    No membership checks.
    """
    z = np.asarray(z, complex)
    xi = np.asarray(xi, complex)
    out = [np.zeros(xi.shape[:1] + (domain.n,) * k, complex) for k in range(1, order + 1)]
    letters = "abcd"
    for mask, p in domain.block_masks:
        t = np.sum(z * np.conj(xi) * mask, axis=-1)
        v = np.conj(xi) * mask
        for k in range(1, order + 1):
            spec = ",".join("N" + letters[i] for i in range(k)) + "->N" + letters[:k]
            outer = np.einsum(spec, *([v] * k))
            out[k - 1] += _hk(p, k, t).reshape((-1,) + (1,) * k) * outer
    return out


@dataclass(frozen=True)
class WirtingerJet:
    """Derivatives of ``l(z, xi) = log P(z, xi)`` in ``z`` for a batch of ``xi``.

    Batched fields carry a leading axis of length N (one per ``xi``); the
    mixed derivatives do not depend on ``xi`` and are stored once.

    Attributes
    ----------
    value : (N,) real
    d : (N, n)           d_a l
    dbar : (N, n)        d_abar l = conj(d_a l)
    dd : (N, n, n)       d_a d_b l
    ddd : (N, n, n, n)   d_a d_b d_c l
    ddbar : (n, n)       d_a d_bbar l = -g_{a bbar}
    dd_dbar : (n, n, n)  d_a d_b d_cbar l = -d_b g_{a cbar}
    """

    value: np.ndarray
    d: np.ndarray
    dbar: np.ndarray
    dd: np.ndarray
    ddd: np.ndarray
    ddbar: np.ndarray
    dd_dbar: np.ndarray

    def __len__(self):
        return self.value.shape[0]


def jet_from_points(domain, z, xi, pot=None):
    """Analytic jet without membership checks (hot path for Monte Carlo)."""
    if pot is None:
        pot = potential_derivatives(domain, z)
    value = log_poisson_bergman(domain, z, xi)
    D1, D2, D3 = log_kernel_holo_derivatives(domain, z, xi, order=3)
    d = D1 - pot.d1
    return WirtingerJet(
        value=value,
        d=d,
        dbar=np.conj(d),
        dd=D2 - pot.d2,
        ddd=D3 - pot.d3,
        ddbar=-pot.metric,
        dd_dbar=-pot.dmetric,
    )


def log_kernel_jet(domain, z, xi):
    """Wirtinger jet of ``l(z, xi) = log |B(z, xi)|^2 - log B(z, z)`` in ``z``."""
    z = _single(domain, z)
    xs = domain.check(xi, "xi")
    jet = jet_from_points(domain, z, xs)
    if np.any(jet.value < _LOG_TINY):
        raise EvaluationError("P(z, xi) is below 1e-300")
    return jet


def log_kernel_jet_fd(domain, z, xi, h=None):
    """Finite-difference oracle for :func:`log_kernel_jet` (same fields)."""
    z = _single(domain, z)
    xs = domain.check(xi, "xi")

    def l_fn(pts):
        # (M, n) base points -> (M, N) values of l
        return log_poisson_bergman(domain, pts[:, None, :], xs[None, :, :])

    def move(t, k):
        # tensor [idx..., N] -> [N, idx...]
        return np.moveaxis(t, -1, 0) if k else t

    d = move(wirtinger_tensor_fd(l_fn, z, 1, 0, h=h), 1)
    dd = move(wirtinger_tensor_fd(l_fn, z, 2, 0, h=h), 2)
    ddd = move(wirtinger_tensor_fd(l_fn, z, 3, 0, h=h), 3)
    ddbar = move(wirtinger_tensor_fd(l_fn, z, 1, 1, h=h), 2)
    dd_dbar = move(wirtinger_tensor_fd(l_fn, z, 2, 1, h=h), 3)
    return WirtingerJet(
        value=l_fn(z[None, :])[0],
        d=d,
        dbar=move(wirtinger_tensor_fd(l_fn, z, 0, 1, h=h), 1),
        dd=dd,
        ddd=ddd,
        ddbar=ddbar.mean(axis=0),
        dd_dbar=dd_dbar.mean(axis=0),
    )


# -- curvature --------------------------------------------------------------

def curvature_tensor(domain, z):
    """Curvature ``R[a, b, c, d] = R_{a bbar c dbar}`` of the Bergman metric.

    ``R_{a bbar c dbar} = -d_c d_dbar g_{a bbar} + g^{e fbar} d_c g_{a fbar} d_dbar g_{e bbar}``.
    """
    pot = potential_derivatives(domain, z)
    return _curvature_from(pot.metric, pot.dmetric, pot.ddmetric)


def _curvature_from(g, dg, ddg):
    ginv = np.linalg.inv(g)                       # ginv[f, e] pairs with g[e, f]
    # dg[a, c, f] = d_c g_{a fbar};  d_dbar g_{e bbar} = conj(d_d g_{b ebar}) = conj(dg[b, d, e])
    second = -np.einsum("acbd->abcd", ddg)
    first = np.einsum("fe,acf,bde->abcd", ginv, dg, np.conj(dg))
    return second + first


def normal_frame(domain, z):
    """Holomorphic normal coordinates ``z = z0 + A w + (1/2) C(w, w)`` at ``z0``.

    Returns ``(A, C)`` with ``A`` the inverse-transpose Cholesky factor of
    the metric (so the metric becomes the identity) and
    ``C[e, a, c]`` the quadratic correction that cancels the first
    derivatives of the metric at ``w = 0``.
    """
    pot = potential_derivatives(domain, z)
    g = pot.metric
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"metric at {z} is not positive definite") from exc
    if np.linalg.cond(L) > 1e12:
        raise ConditioningError(f"metric at {z} is too ill-conditioned for a normal frame")
    A = np.linalg.inv(L).T
    # sum_a C[a, al, ga] g[a, b] = -sum_{a,c} A[a, al] A[c, ga] dg[a, c, b]
    rhs = -np.einsum("aA,cG,acb->bAG", A, A, pot.dmetric)
    n = domain.n
    C = np.linalg.solve(g.T, rhs.reshape(n, -1)).reshape(n, n, n)
    return A, C


def normal_metric_derivatives(domain, z):
    """First and mixed second derivatives of the metric in normal coordinates.

    Returns ``(dg_w, ddg_w)`` indexed like :class:`PotentialDerivatives`;
    ``dg_w`` vanishes by construction.
    """
    pot = potential_derivatives(domain, z)
    A, C = normal_frame(domain, z)
    g, dg, ddg = pot.metric, pot.dmetric, pot.ddmetric
    Ab = np.conj(A)
    Cb = np.conj(C)
    dbar_g = np.conj(np.einsum("bda->abd", dg))           # [a, b, d] = d_dbar g_{a bbar}
    dg_w = (np.einsum("aA,acb,cG,bB->ABG", A, dg, A, Ab)
            + np.einsum("aAG,ab,bB->ABG", C, g, Ab))
    dg_w = np.einsum("ABG->AGB", dg_w)                    # to [al, ga, be] = d_ga g_{al bebar}
    ddg_w = (np.einsum("aAG,abd,dD,bB->AGBD", C, dbar_g, Ab, Ab)
             + np.einsum("aA,acbd,cG,dD,bB->AGBD", A, ddg, A, Ab, Ab)
             + np.einsum("aA,acb,cG,bBD->AGBD", A, dg, A, Cb)
             + np.einsum("aAG,ab,bBD->AGBD", C, g, Cb))
    return dg_w, ddg_w


def _direction(domain, alpha):
    if not 1 <= alpha <= domain.n:
        raise IndexError(f"direction index {alpha} out of range 1..{domain.n} for {domain}")
    return alpha - 1


def holo_sectional_curvature(domain, z, alpha=1):
    """``R_{al albar al albar}`` in holomorphic normal coordinates at ``z``.

    In these coordinates the metric is the identity at ``z``, so this equals
    the holomorphic sectional curvature along frame direction ``alpha``
    (1-based); it equals ``-d_al d_albar g_{al albar}``.
    """
    a = _direction(domain, alpha)
    _, ddg_w = normal_metric_derivatives(domain, z)
    return float(-ddg_w[a, a, a, a].real)


def holo_sectional_curvature_fd(domain, z, alpha=1, h=None):
    """Oracle: tensor formula with finite-difference metric derivatives, in the same frame."""
    z0 = _single(domain, z)
    g = bergman_metric_fd(domain, z0, h=h)
    dg = metric_derivative_fd(domain, z0, h=h)
    ddg = metric_second_derivative_fd(domain, z0, h=h)
    R = _curvature_from(g, dg, ddg)
    A, _ = normal_frame(domain, z0)
    a = A[:, _direction(domain, alpha)]
    return float(np.einsum("abcd,a,b,c,d->", R, a, np.conj(a), a, np.conj(a)).real)
