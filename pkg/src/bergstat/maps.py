"""Proper holomorphic self-maps, measure pushforward and sufficiency checks.

A proper map ``f`` of finite multiplicity ``m`` is handled through its local
inverses ("branches") ``g_k`` away from the critical values.  The pushforward
of ``P_1(z, xi) dV(xi)`` has density

    K(z, zeta) / B_1(z, z),   K = sum_k |B_1(z, g_k(zeta))|^2 |J g_k(zeta)|^2

and every derivative of ``K`` in ``z`` is a branch sum of derivatives of
``log B_1(z, g_k)``.  Writing ``w_k = |B_1(z, g_k)|^2 |J g_k|^2`` and
``D_k = d_z log B_1(z, g_k)``, the pulled-back Fisher metric is

    g_B(z) - E_zeta[ Cov_w(D) ]

with ``Cov_w`` the ``w``-weighted covariance over the branches of ``zeta``.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from ._rng import derive_seed
from ._validation import as_points, check_count
from .domains import bergman_kernel, log_bergman_kernel, log_poisson_bergman
from .exceptions import ConfigError, CriticalValueError, DomainError
from .geometry import _single, log_kernel_holo_derivatives, potential_derivatives
from .sampling import MomentAccumulator, rejection_sample

#: Distance to a critical value below which branch evaluation refuses.
CRITICAL_RADIUS = 1e-8


@dataclass(frozen=True)
class ProperMap:
    """``identity``, ``power`` (``z -> z^k`` on the disc) or ``coordinate_power``
    (``z_j -> z_j^k`` on the polydisc).

    Branches of ``zeta -> zeta^(1/k)`` are labeled
    ``|zeta|^(1/k) exp(i (arg zeta + 2 pi j) / k)``, ``j = 0 .. k-1``, with the
    principal argument in ``(-pi, pi]``.
    """

    kind: str = "identity"
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("identity", "power", "coordinate_power"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"power must be a positive integer, got {self.k!r}")
        if self.kind == "identity" and self.k != 1:
            raise ValueError("the identity map has k = 1")

    @classmethod
    def identity(cls):
        return cls("identity", 1)

    @classmethod
    def power(cls, k):
        return cls("power", int(k))

    @classmethod
    def coordinate_power(cls, k):
        return cls("coordinate_power", int(k))

    @classmethod
    def from_config(cls, spec):
        """``{"kind": "identity"}``, ``{"kind": "power", "k": 2}`` or ``{"kind": "coordinate_power", "k": 2}``."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError("map spec must be an object with a 'kind' field")
        if spec["kind"] == "identity":
            return cls.identity()
        if "k" not in spec:
            raise ConfigError("map.k is required for power maps")
        return cls(spec["kind"], int(spec["k"]))

    def to_config(self):
        return {"kind": self.kind} if self.kind == "identity" else {"kind": self.kind, "k": int(self.k)}

    def __str__(self):
        return "identity" if self.kind == "identity" else f"{self.kind}({self.k})"

    # -- structure ------------------------------------------------------------
    def check_domain(self, domain):
        if self.kind == "power" and domain.kind != "disc":
            raise DomainError("power maps act on the disc; use coordinate_power on a polydisc")
        if self.kind == "coordinate_power" and domain.kind != "polydisc":
            raise DomainError("coordinate_power acts on a polydisc")
        return domain

    def target_domain(self, domain):
        """All supported maps send a domain onto itself."""
        return self.check_domain(domain)

    def sheets(self, domain):
        self.check_domain(domain)
        if self.kind == "identity":
            return 1
        return self.k ** domain.n

    def apply(self, z):
        z = np.asarray(z, complex)
        return z if self.kind == "identity" else z ** self.k

    def jacobian(self, z):
        """Complex Jacobian determinant ``J_C f(z)`` (last axis holds coordinates)."""
        z = np.asarray(z, complex)
        if self.kind == "identity":
            return np.ones(z.shape[:-1], complex)
        return np.prod(self.k * z ** (self.k - 1), axis=-1)

    def is_critical_value(self, zeta):
        """True where some coordinate of ``zeta`` is within :data:`CRITICAL_RADIUS` of 0 (``k >= 2``)."""
        zeta = np.asarray(zeta, complex)
        if self.kind == "identity" or self.k == 1:
            return np.zeros(zeta.shape[:-1], bool)
        return np.any(np.abs(zeta) < CRITICAL_RADIUS, axis=-1)

    def branches(self, domain, zeta):
        """Local inverses at ``zeta``.

        Returns
        -------
        pre : (m, N, n) complex
            ``g_k(zeta)``.
        jac : (m, N) complex
            ``J_C g_k(zeta)``.
        """
        self.check_domain(domain)
        zeta = as_points(zeta, domain.n)
        if np.any(self.is_critical_value(zeta)):
            raise CriticalValueError(f"zeta is within {CRITICAL_RADIUS} of a critical value of {self}")
        if self.kind == "identity":
            return zeta[None], np.ones((1, zeta.shape[0]), complex)
        k = self.k
        r = np.abs(zeta) ** (1.0 / k)
        theta = np.angle(zeta)
        roots = np.stack([r * np.exp(1j * (theta + 2 * np.pi * j) / k) for j in range(k)])  # (k, N, n)
        pre, jac = [], []
        for labels in itertools.product(range(k), repeat=domain.n):
            pt = np.stack([roots[lab, :, c] for c, lab in enumerate(labels)], axis=-1)
            pre.append(pt)
            jac.append(np.prod(1.0 / (k * pt ** (k - 1)), axis=-1))
        return np.stack(pre), np.stack(jac)


def _branch_terms(pmap, domain, z, zeta):
    """Log-weights ``log(w_k / B_1(z, z))`` (m, N) and scores ``D_k`` (m, N, n)."""
    pre, jac = pmap.branches(domain, zeta)
    m, N, n = pre.shape
    flat = pre.reshape(-1, n)
    logw = (log_poisson_bergman(domain, z[None, :], flat).reshape(m, N)
            + 2.0 * np.log(np.abs(jac)))
    (D1,) = log_kernel_holo_derivatives(domain, z, flat, order=1)
    return logw, D1.reshape(m, N, n)


def pushforward_density(pmap, domain1, z, zeta):
    """Density ``K(z, zeta) / B_1(z, z)`` of ``f_*(P_1(z, .) dV)`` at ``zeta``.

    Raises
    ------
    CriticalValueError
        If ``zeta`` is within :data:`CRITICAL_RADIUS` of a critical value.
    """
    z0 = _single(domain1, z)
    zs = domain1.check(zeta, "zeta")
    logw, _ = _branch_terms(pmap, domain1, z0, zs)
    val = np.exp(logw).sum(axis=0)
    single = np.ndim(zeta) <= (0 if domain1.n == 1 else 1)
    return float(val[0]) if single else val


def _weighted_cov(logw, D):
    """Per-sample ``Cov_w(D)`` over branches, shape (N, n, n)."""
    w = np.exp(logw - logw.max(axis=0))
    w = w / w.sum(axis=0)
    mean = np.einsum("mN,mNa->Na", w, D)
    second = np.einsum("mN,mNa,mNb->Nab", w, D, np.conj(D))
    return second - mean[:, :, None] * np.conj(mean)[:, None, :], mean


def _pushforward_sample(pmap, domain, z, n, seed):
    """``zeta = f(xi)`` with ``xi ~ P_1(z, .)``; critical values are replaced by fresh draws."""
    out = pmap.apply(rejection_sample(domain, z, n, seed).points)
    bad = pmap.is_critical_value(out)
    round_ = 1
    while np.any(bad):
        extra = pmap.apply(rejection_sample(domain, z, int(bad.sum()), derive_seed(seed, round_)).points)
        out[bad] = extra
        bad = pmap.is_critical_value(out)
        round_ += 1
    return out


def pullback_fisher_mc(pmap, domain1, z, n, seed, method="kernel"):
    """Monte Carlo estimate of the pulled-back Fisher metric ``(kappa o Phi_1)^* g_F2`` at ``z``.

    Parameters
    ----------
    method : {"kernel", "score"}
        ``"kernel"`` averages ``g_B(z) - Cov_w(D)`` (the kernel-derivative form);
        ``"score"`` averages ``s s^H`` with ``s = d_z log`` of the pushforward density.

    Returns
    -------
    MCEstimate
        ``(n, n)`` matrix; the diagonal entries are the pulled-back metric on
        ``(d_a, d_abar)``.
    """
    z0 = _single(domain1, z)
    if method not in ("kernel", "score"):
        raise ValueError("method must be 'kernel' or 'score'")
    zeta = _pushforward_sample(pmap, domain1, z0, check_count(n, "n", minimum=2), seed)
    pot = potential_derivatives(domain1, z0)
    acc = MomentAccumulator()
    for lo in range(0, zeta.shape[0], 100_000):
        logw, D = _branch_terms(pmap, domain1, z0, zeta[lo:lo + 100_000])
        cov, mean = _weighted_cov(logw, D)
        if method == "kernel":
            acc.add(pot.metric[None] - cov)
        else:
            s = mean - pot.d1
            acc.add(s[:, :, None] * np.conj(s)[:, None, :])
    return acc.estimate()


def pullback_relation_mc(pmap, domain1, z, n, seed):
    """``E[s_a s_b]`` for the pushforward score ``s``; zero would make the pullback Hermitian.

    Reported only; whether it vanishes for non-injective maps is left open.
    """
    z0 = _single(domain1, z)
    zeta = _pushforward_sample(pmap, domain1, z0, check_count(n, "n", minimum=2), seed)
    d1 = potential_derivatives(domain1, z0).d1
    acc = MomentAccumulator()
    for lo in range(0, zeta.shape[0], 100_000):
        logw, D = _branch_terms(pmap, domain1, z0, zeta[lo:lo + 100_000])
        _, mean = _weighted_cov(logw, D)
        s = mean - d1
        acc.add(s[:, :, None] * s[:, None, :])
    return acc.estimate()


@dataclass(frozen=True)
class KInequality:
    """``|d_a K|^2 / K <= d_a d_abar K`` at one ``(z, zeta)``."""

    lhs: float
    rhs: float
    equal: bool


def k_inequality_check(pmap, domain1, z, zeta, alpha=1, rtol=1e-10):
    """Both sides of the branch-sum Cauchy-Schwarz inequality along direction ``alpha`` (1-based)."""
    z0 = _single(domain1, z)
    zs = _single(domain1, zeta, "zeta")
    if not 1 <= alpha <= domain1.n:
        raise IndexError(f"alpha must lie in 1..{domain1.n}")
    logw, D = _branch_terms(pmap, domain1, z0, zs[None, :])
    # back to raw kernel scale: w_k = B_1(z, z) * exp(logw)
    w = np.exp(logw[:, 0] + log_bergman_kernel(domain1, z0, z0).real)
    d = D[:, 0, alpha - 1]
    K = w.sum()
    lhs = float(np.abs(np.sum(w * d)) ** 2 / K)
    rhs = float(np.sum(w * np.abs(d) ** 2))
    equal = bool(abs(rhs - lhs) <= rtol * max(abs(rhs), np.finfo(float).tiny))
    return KInequality(lhs, rhs, equal)


def bell_rule_check(pmap, domain1, domain2, z, zeta):
    """Relative residual of ``J f(z) B_2(f(z), zeta) = sum_k B_1(z, g_k(zeta)) conj(J g_k(zeta))``."""
    z0 = _single(domain1, z)
    if domain2 != pmap.target_domain(domain1):
        raise DomainError(f"{pmap} maps {domain1} onto {pmap.target_domain(domain1)}, not {domain2}")
    zs = _single(domain2, zeta, "zeta")
    jf = pmap.jacobian(z0)
    if abs(jf) < CRITICAL_RADIUS:
        raise CriticalValueError(f"z={z0} is a critical point of {pmap}")
    pre, jac = pmap.branches(domain1, zs[None, :])
    lhs = complex(np.ravel(jf * bergman_kernel(domain2, pmap.apply(z0), zs))[0])
    rhs = complex(np.sum(bergman_kernel(domain1, z0, pre[:, 0, :]) * np.conj(jac[:, 0])))
    return float(abs(lhs - rhs) / abs(lhs))


def lower_bound_check(pmap, domain1, z, zeta):
    """Pushforward density versus ``B_2(f z, f z) |J f(z)|^2 / (m B_1(z, z)) * P_2(f(z), zeta)``.

    Returns ``(density, bound)`` arrays; ``density >= bound`` should hold pointwise.
    """
    z0 = _single(domain1, z)
    zs = domain1.check(zeta, "zeta")
    domain2 = pmap.target_domain(domain1)
    fz = pmap.apply(z0)
    m = pmap.sheets(domain1)
    density = np.atleast_1d(pushforward_density(pmap, domain1, z0, zs))
    scale = (np.exp(log_bergman_kernel(domain2, fz, fz).real - log_bergman_kernel(domain1, z0, z0).real)
             * abs(pmap.jacobian(z0)) ** 2 / m)
    bound = scale * np.exp(log_poisson_bergman(domain2, fz[None, :], zs))
    return density, bound


def diagram_gap(pmap, domain1, z, zeta):
    """``|kappa(P_1(z, .))(zeta) - P_2(f(z), zeta)|`` pointwise; zero iff the square commutes there."""
    z0 = _single(domain1, z)
    zs = domain1.check(zeta, "zeta")
    domain2 = pmap.target_domain(domain1)
    density = np.atleast_1d(pushforward_density(pmap, domain1, z0, zs))
    direct = np.exp(log_poisson_bergman(domain2, pmap.apply(z0)[None, :], zs))
    return np.abs(density - direct)


__all__ = [
    "CRITICAL_RADIUS", "KInequality", "ProperMap", "bell_rule_check", "diagram_gap",
    "k_inequality_check", "lower_bound_check", "pullback_fisher_mc", "pullback_relation_mc",
    "pushforward_density",
]
