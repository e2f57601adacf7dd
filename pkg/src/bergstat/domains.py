"""Bounded model domains and their Bergman kernels.

The three supported domains (unit disc, unit polydisc, unit ball) all have
kernels of the form

    B(z, w) = c * prod_b (1 - <z, w>_b) ** (-p_b)

where each *block* ``b`` is a group of coordinates with partial Hermitian
product ``<z, w>_b = sum_{j in b} z_j conj(w_j)`` and ``c = 1 / volume``.
The polydisc has one block per coordinate with ``p = 2``; the ball has a
single block holding every coordinate with ``p = n + 1``.  All kernel
derivatives used elsewhere in the package are built from this structure.
"""

from dataclasses import dataclass
from math import factorial, pi
import itertools

import numpy as np
from scipy.special import gammaln

from ._rng import make_rng
from ._validation import as_points, check_count
from .exceptions import DomainError

#: Points closer than this to the boundary are treated as outside.
BOUNDARY_MARGIN = 1e-12

_KINDS = ("disc", "polydisc", "ball")


@dataclass(frozen=True)
class Domain:
    """Unit disc, polydisc or ball in C^n.

    Parameters
    ----------
    kind : {"disc", "polydisc", "ball"}
    n : int
        Complex dimension. Must be 1 for the disc.
    """

    kind: str
    n: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {_KINDS}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")
        if self.kind == "disc" and self.n != 1:
            raise ValueError("the disc has dimension 1; use polydisc or ball for n > 1")

    @classmethod
    def disc(cls):
        return cls("disc", 1)

    @classmethod
    def polydisc(cls, n):
        return cls("polydisc", n)

    @classmethod
    def ball(cls, n):
        return cls("ball", n)

    @classmethod
    def from_config(cls, spec):
        """Build from ``{"kind": ..., "n": ...}``."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValueError("domain spec must be an object with a 'kind' field")
        return cls(spec["kind"], int(spec.get("n", 1)))

    def to_config(self):
        return {"kind": self.kind, "n": int(self.n)}

    def __str__(self):
        return "disc" if self.kind == "disc" else f"{self.kind}({self.n})"

    # -- block structure -------------------------------------------------
    @property
    def blocks(self):
        """Tuple of ``(indices, power)`` pairs describing the kernel."""
        if self.kind == "ball":
            return ((tuple(range(self.n)), self.n + 1),)
        return tuple(((j,), 2) for j in range(self.n))

    @property
    def block_masks(self):
        masks = []
        for idx, p in self.blocks:
            mask = np.zeros(self.n)
            mask[list(idx)] = 1.0
            masks.append((mask, p))
        return masks

    # -- geometry --------------------------------------------------------
    @property
    def volume(self):
        if self.kind == "ball":
            return pi ** self.n / factorial(self.n)
        return pi ** self.n

    @property
    def kernel_constant(self):
        return 1.0 / self.volume

    def block_norms(self, z):
        """Euclidean norm of each block of ``z``; shape ``(..., n_blocks)``."""
        z = np.asarray(z, dtype=complex)
        return np.stack(
            [np.sqrt(np.sum(np.abs(z[..., list(idx)]) ** 2, axis=-1)) for idx, _ in self.blocks],
            axis=-1,
        )

    def contains(self, z):
        """Membership test; points within ``BOUNDARY_MARGIN`` of the boundary fail."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1:] != (self.n,):
            z = as_points(z, self.n)
        abs2 = z.real ** 2 + z.imag ** 2
        worst = abs2.sum(axis=-1) if self.kind == "ball" else abs2.max(axis=-1)
        # NaN/inf compare False, so non-finite points are outside
        with np.errstate(invalid="ignore"):
            return worst < (1.0 - BOUNDARY_MARGIN) ** 2

    def check(self, z, name="z"):
        """Return ``z`` as an ``(N, n)`` array, raising DomainError if any point is outside."""
        pts = as_points(z, self.n)
        bad = ~self.contains(pts)
        if np.any(bad):
            first = pts[np.argmax(bad)]
            raise DomainError(f"{name}={first} is not inside the {self}")
        return pts

    def partial_products(self, z, w):
        """``<z, w>_b`` for every block; broadcasts over leading axes."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        prod = z * np.conj(w)
        return np.stack([np.sum(prod[..., list(idx)], axis=-1) for idx, _ in self.blocks], axis=-1)

    def powers(self):
        return np.array([p for _, p in self.blocks], dtype=float)


def _squeeze_like(value, *inputs, n):
    """Drop the batch axis when every input was a single point."""
    single = all(np.asarray(x).ndim <= (0 if n == 1 else 1) for x in inputs)
    return value[0] if single else value


def bergman_kernel(domain, z, w):
    """Closed-form Bergman kernel ``B(z, w)``.

    ``z`` and ``w`` broadcast against each other; single points give a scalar.
    """
    zs = domain.check(z, "z")
    ws = domain.check(w, "w")
    t = domain.partial_products(zs, ws)
    val = domain.kernel_constant * np.prod((1.0 - t) ** (-domain.powers()), axis=-1)
    return _squeeze_like(val, z, w, n=domain.n)


def log_bergman_kernel(domain, z, w):
    """``log B(z, w)`` on the principal branch of each factor (no membership check)."""
    t = domain.partial_products(z, w)
    return np.log(domain.kernel_constant) - np.sum(domain.powers() * np.log1p(-t), axis=-1)


def poisson_bergman(domain, z, xi):
    """Poisson-Bergman density ``P(z, xi) = |B(z, xi)|^2 / B(z, z)``."""
    zs = domain.check(z, "z")
    xs = domain.check(xi, "xi")
    val = np.exp(log_poisson_bergman(domain, zs, xs))
    return _squeeze_like(val, z, xi, n=domain.n)


def log_poisson_bergman(domain, z, xi):
    """``log P(z, xi)`` without membership checks; broadcasts over leading axes."""
    lb = log_bergman_kernel(domain, z, xi)
    return 2.0 * lb.real - log_bergman_kernel(domain, z, z).real


def multi_indices(n, max_degree):
    """All multi-indices of length ``n`` with total degree <= ``max_degree``.

    Graded lexicographic order: by total degree, then lexicographically
    descending within a degree.
    """
    out = []
    for d in range(max_degree + 1):
        level = [a for a in itertools.product(range(d, -1, -1), repeat=n) if sum(a) == d]
        out.extend(level)
    return np.array(out, dtype=int).reshape(-1, n)


def monomial_log_norms(domain, alphas):
    """``log ||z^alpha||^2`` in L^2(domain, dV) for each row of ``alphas``."""
    alphas = np.asarray(alphas)
    if domain.kind == "ball":
        # iterated Beta integrals collapse to pi^n prod(alpha_j!) / (n + |alpha|)!
        return (domain.n * np.log(pi) + np.sum(gammaln(alphas + 1), axis=-1)
                - gammaln(domain.n + alphas.sum(axis=-1) + 1))
    # product of disc integrals  int |z|^{2a} dV = pi / (a + 1)
    return np.sum(np.log(pi) - np.log(alphas + 1.0), axis=-1)


def bergman_kernel_series(domain, z, w, truncation):
    """Partial sum of ``sum_alpha e_alpha(z) conj(e_alpha(w))`` over orthonormal monomials.

    ``truncation`` is the number of total-degree levels kept (degrees
    ``0 .. truncation - 1``).
    """
    truncation = check_count(truncation, "truncation")
    zs = domain.check(z, "z")
    ws = domain.check(w, "w")
    zs, ws = np.broadcast_arrays(zs, ws)
    alphas = multi_indices(domain.n, truncation - 1)
    inv_norms = np.exp(-monomial_log_norms(domain, alphas))
    prod = zs * np.conj(ws)                      # (N, n)
    degrees = np.arange(truncation)
    val = np.empty(prod.shape[0], dtype=complex)
    step = max(1, 2_000_000 // alphas.shape[0])
    for lo in range(0, prod.shape[0], step):
        powers = prod[lo:lo + step, :, None] ** degrees     # (chunk, n, truncation)
        terms = np.ones((powers.shape[0], alphas.shape[0]), dtype=complex)
        for j in range(domain.n):
            terms *= powers[:, j, alphas[:, j]]
        val[lo:lo + step] = terms @ inv_norms
    return _squeeze_like(val, z, w, n=domain.n)


def series_truncation(domain, radius, rtol=1e-10):
    """Number of degree levels so the series tail is below ``rtol`` relative.

    ``radius`` bounds ``|z_b| |w_b|`` on every block.  Uses the geometric
    tail of each factor ``sum_d C(d + p - 1, d) t^d`` against the lower
    bound ``(1 + t)^-p`` of that factor.
    """
    t = float(radius)
    if not 0 <= t < 1:
        raise ValueError("radius must lie in [0, 1)")
    n_blocks = len(domain.blocks)
    p = domain.blocks[0][1]
    full = (1 - t) ** (-p)
    floor = (1 + t) ** (-p)
    d, coeff, tail = 0, 1.0, full
    while True:
        tail -= coeff * t ** d
        # polydisc: total degree >= n_blocks * (d + 1) forces some block past degree d
        rel = n_blocks * max(tail, 0.0) * full ** (n_blocks - 1) / floor ** n_blocks
        if rel < rtol or t == 0:
            return n_blocks * (d + 1)
        d += 1
        coeff = coeff * (d + p - 1) / d


def uniform_box_sample(domain, rng_seed, size=None):
    """Uniform point(s) in the domain by rejection from ``[-1, 1]^{2n}``.

    Parameters
    ----------
    rng_seed : int or numpy.random.Generator
    size : int, optional
        Number of points. ``None`` returns a single point of shape ``(n,)``.
    """
    rng = make_rng(rng_seed)
    count = 1 if size is None else check_count(size, "size")
    pts = _box_rejection(domain, rng, count)[0]
    return pts[0] if size is None else pts


def box_acceptance(domain):
    """Probability that a uniform box proposal lands in the domain."""
    return domain.volume / 4.0 ** domain.n


def _box_rejection(domain, rng, count):
    """Draw ``count`` uniform points; also returns the number of box proposals used."""
    acc = box_acceptance(domain)
    chunks, have, proposed = [], 0, 0
    while have < count:
        batch = int((count - have) / acc * 1.05) + 64
        raw = rng.uniform(-1.0, 1.0, size=(batch, 2 * domain.n))
        pts = raw[:, : domain.n] + 1j * raw[:, domain.n:]
        hit = domain.contains(pts)
        keep = pts[hit]
        if have + keep.shape[0] >= count:
            # count proposals only up to the last accepted point kept
            proposed += int(np.flatnonzero(hit)[count - have - 1]) + 1
        else:
            proposed += batch
        chunks.append(keep)
        have += keep.shape[0]
    return np.concatenate(chunks)[:count], proposed
