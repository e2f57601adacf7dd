"""Exact rejection sampling from Poisson-Bergman densities and Monte Carlo means."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from ._validation import check_count
from .domains import Domain, _box_rejection, log_poisson_bergman
from .exceptions import SamplerError

MAX_BASE_NORM = 0.95
MIN_ACCEPTANCE = 1e-4
_WINDOW = 10_000
_CHUNK = 2_000_000


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with entrywise standard error.

    For complex targets ``stderr`` is ``sqrt(E|x - mean|^2 / n)`` per entry.
    """

    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def within(self, target, k=3.0, atol=1e-10):
        """Entrywise ``|mean - target| <= k * stderr``, with a roundoff floor ``atol``."""
        target = np.asarray(target)
        slack = k * self.stderr + atol * (1.0 + np.abs(target))
        return bool(np.all(np.abs(self.mean - target) <= slack))

    def z_score(self, target, atol=1e-10):
        """Largest entrywise ``|mean - target| / stderr``.

        Differences inside the roundoff floor count as 0; a nonzero
        difference with zero stderr is ``inf``.
        """
        target = np.asarray(target)
        diff = np.abs(np.asarray(self.mean) - target)
        diff = np.where(diff <= atol * (1.0 + np.abs(target)), 0.0, diff)
        se = np.broadcast_to(self.stderr, diff.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0))
        return float(np.max(z))

    def to_dict(self):
        return {"mean": _jsonable(self.mean), "stderr": _jsonable(self.stderr), "n_samples": self.n_samples}


def _jsonable(x):
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        if np.all(arr.imag == 0):
            arr = arr.real
        else:
            return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    return arr.tolist()


class MomentAccumulator:
    """Streaming mean and sum of squared deviations (Chan et al. merge)."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None

    def add(self, values):
        values = np.asarray(values)
        nb = values.shape[0]
        if nb == 0:
            return
        mb = values.mean(axis=0)
        m2b = np.sum(np.abs(values - mb) ** 2, axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + np.abs(delta) ** 2 * (self.n * nb / n)
        self.n = n

    def estimate(self):
        if self.n < 2:
            raise ValueError("need at least two samples for a standard error")
        stderr = np.sqrt(self.m2 / (self.n - 1) / self.n)
        return MCEstimate(mean=self.mean, stderr=stderr, n_samples=self.n)


@dataclass(frozen=True)
class SampleBatch:
    """Reproducible i.i.d. draws from ``P(base_point, .) dV``."""

    domain: Domain
    base_point: np.ndarray
    points: np.ndarray
    seed: int
    proposals: int = field(default=0, compare=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def acceptance_rate(self):
        return len(self) / self.proposals if self.proposals else float("nan")

    def to_csv(self, path):
        """Write ``re(xi_1), im(xi_1), ...`` columns with round-trip float formatting."""
        header = []
        for j in range(self.domain.n):
            header += [f"re_xi{j + 1}", f"im_xi{j + 1}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in self.points:
                w.writerow([repr(float(v)) for c in row for v in (c.real, c.imag)])


def envelope_constant(domain, z0):
    """Bound ``M >= vol * sup_xi P(z0, xi)``.

    Uses ``|1 - <xi, z0>_b| >= 1 - |z0_b|`` on every block, which gives
    ``M = prod_b ((1 + r_b) / (1 - r_b))^p_b`` with ``r_b = |z0_b|``.
    """
    r = domain.block_norms(np.asarray(z0, complex).reshape(-1, domain.n))[0]
    return float(np.prod(((1 + r) / (1 - r)) ** domain.powers()))


def rejection_sample(domain, z0, count, seed):
    """Exact i.i.d. sample of size ``count`` from ``P(z0, .) dV``.

    Proposals are uniform on the domain; a proposal is accepted with
    probability ``vol * P(z0, xi) / M`` with ``M`` from :func:`envelope_constant`.

    Raises
    ------
    SamplerError
        If ``z0`` is closer to the boundary than ``MAX_BASE_NORM`` allows, the
        expected acceptance rate ``1/M`` is below ``MIN_ACCEPTANCE``, the
        observed rate collapses, or the envelope is violated.
    """
    z0 = domain.check(z0, "z0")
    if z0.shape[0] != 1:
        raise ValueError("z0 must be a single point")
    z0 = z0[0]
    count = check_count(count)
    if np.max(domain.block_norms(z0)) > MAX_BASE_NORM:
        raise SamplerError(f"base point {z0} is too close to the boundary (norm > {MAX_BASE_NORM})")
    M = envelope_constant(domain, z0)
    if 1.0 / M < MIN_ACCEPTANCE:
        raise SamplerError(f"envelope constant {M:.3g} gives acceptance below {MIN_ACCEPTANCE}")
    log_scale = np.log(domain.volume) - np.log(M)

    rng = make_rng(seed)
    accepted, have, proposed = [], 0, 0
    while have < count:
        batch = min(_CHUNK, int((count - have) * M * 1.05) + 64)
        xi, _ = _box_rejection(domain, rng, batch)
        u = rng.uniform(size=batch)
        ratio = np.exp(log_poisson_bergman(domain, z0[None, :], xi) + log_scale)
        if np.any(ratio > 1.0 + 1e-12):
            raise SamplerError(f"envelope violated: max ratio {ratio.max():.17g}")
        hit = u < np.minimum(ratio, 1.0)
        keep = xi[hit]
        if have + keep.shape[0] >= count:
            # count proposals only up to the last acceptance that is kept
            used = int(np.flatnonzero(hit)[count - have - 1]) + 1
            proposed += used
        else:
            proposed += batch
        accepted.append(keep)
        have += keep.shape[0]
        if proposed >= 10 * _WINDOW and have / proposed < MIN_ACCEPTANCE:
            raise SamplerError(f"acceptance rate {have / proposed:.3g} below {MIN_ACCEPTANCE}")
    points = np.concatenate(accepted)[:count]
    return SampleBatch(domain=domain, base_point=z0, points=points, seed=int(seed) if not
                       isinstance(seed, np.random.Generator) else -1, proposals=proposed)


def mc_expectation(domain, z, integrand, n, seed, chunk=100_000):
    """Estimate ``E_z[integrand(xi)]`` by averaging over ``xi ~ P(z, .) dV``.

    ``integrand`` maps an ``(N, n)`` array of points to an array with leading
    axis ``N``; trailing axes give a vector/matrix valued estimate.
    """
    n = check_count(n, "n", minimum=2)
    batch = rejection_sample(domain, z, n, seed)
    return average(integrand, batch.points, chunk=chunk)


def average(fn, points, chunk=100_000):
    acc = MomentAccumulator()
    for lo in range(0, points.shape[0], chunk):
        acc.add(fn(points[lo:lo + chunk]))
    return acc.estimate()


class PoissonBergman:
    """The distribution ``P(z0, xi) dV(xi)`` on a domain.

    Parameters
    ----------
    domain : Domain
    z0 : array_like
        Base point (parameter of the distribution).
    """

    def __init__(self, domain, z0):
        self.domain = domain
        self.z0 = domain.check(z0, "z0")[0]

    def logpdf(self, xi):
        xs = self.domain.check(xi, "xi")
        return log_poisson_bergman(self.domain, self.z0[None, :], xs)

    def pdf(self, xi):
        return np.exp(self.logpdf(xi))

    @property
    def envelope(self):
        return envelope_constant(self.domain, self.z0)

    def sample(self, count, seed):
        return rejection_sample(self.domain, self.z0, count, seed)

    def expect(self, integrand, n, seed):
        return mc_expectation(self.domain, self.z0, integrand, n, seed)
