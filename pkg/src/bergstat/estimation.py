"""The diastasis-sum estimator, its consistency and CLT experiments, and complex normals.

Given draws ``Z_1 .. Z_m ~ P(z0, .) dV`` the estimator is a local minimizer of

    L(z) = sum_i Dia(z, Z_i)

found by gradient descent on the ``2n`` real coordinates.  Its Wirtinger
gradient is ``m d log B(z, z) - sum_i d_z log B(z, Z_i)`` (the ``B(Z_i, z)``
factor is antiholomorphic in ``z``).  The real gradient is
``(2 Re, -2 Im)`` of it.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from ._rng import derive_seed, make_rng
from ._validation import as_point, as_points, check_count
from .domains import Domain, log_bergman_kernel
from .exceptions import NonConvergence, NotPositiveDefinite
from .geometry import _single, bergman_metric, log_kernel_holo_derivatives, potential_derivatives
from .sampling import SampleBatch, _jsonable, rejection_sample

ARMIJO_C = 1e-4
SHRINK = 0.5
GRAD_TOL = 1e-8
FAIL_TOL = 1e-4
MAX_ITER = 500
#: Relative Frobenius tolerance for the CLT covariance and the KS level.
CLT_RTOL = 0.10
KS_LEVEL = 0.01
MAX_FAILURE_RATE = 0.01


def _batch_points(domain, batch):
    pts = batch.points if isinstance(batch, SampleBatch) else domain.check(batch, "batch")
    if pts.shape[0] == 0:
        raise ValueError("batch is empty")
    return pts


def _objective(domain, z, pts, self_term=None):
    if self_term is None:
        self_term = log_bergman_kernel(domain, z, z).real
    cross = log_bergman_kernel(domain, z[None, :], pts).real
    diag = log_bergman_kernel(domain, pts, pts).real
    return float(np.sum(self_term + diag - 2.0 * cross))


def diastasis_objective_grad(domain, z, batch):
    """Value and Wirtinger gradient of ``L(z) = sum_i Dia(z, Z_i)``.

    Returns
    -------
    value : float
    grad : (n,) complex
        ``d_z L``.  The real gradient in ``(x, y)`` is ``(2 Re grad, -2 Im grad)``.
    """
    z = _single(domain, z)
    pts = _batch_points(domain, batch)
    value = max(_objective(domain, z, pts), 0.0)
    (D1,) = log_kernel_holo_derivatives(domain, z, pts, order=1)
    grad = pts.shape[0] * potential_derivatives(domain, z).d1 - D1.sum(axis=0)
    return value, grad


def real_gradient(wirtinger_grad):
    g = np.asarray(wirtinger_grad)
    return np.concatenate([2.0 * g.real, -2.0 * g.imag])


def _grad(domain, z, pts, pot_d1):
    (D1,) = log_kernel_holo_derivatives(domain, z, pts, order=1)
    return pts.shape[0] * pot_d1 - D1.sum(axis=0)


def default_init(domain, pts):
    """Coordinatewise mean of the batch, pulled radially inside the domain if needed."""
    z = pts.mean(axis=0)
    scale = 1.0
    while not domain.contains(z * scale):
        scale *= 0.9
    return z * scale


@dataclass(frozen=True)
class OptimizeResult:
    location: np.ndarray
    value: float
    grad_norm: float
    n_iter: int
    converged: bool
    values: tuple = field(default=(), repr=False)


def objective_change(domain, z, delta, pts):
    """``L(z + delta) - L(z)`` without cancellation.

    Each kernel factor changes by ``-p log1p(-<delta, w>_b / (1 - <z, w>_b))``,
    which stays accurate when the change is far below the roundoff of ``L``.
    """
    total = 0.0
    zn = z + delta
    for mask, p in domain.block_masks:
        dz = delta * mask
        own = np.sum(2.0 * (dz * np.conj(z)).real + np.abs(dz) ** 2)
        d_self = -p * np.log1p(-own / (1.0 - np.sum(np.abs(z * mask) ** 2)))
        cross_d = pts @ np.conj(dz)                     # conj(<delta, Z>_b)
        cross_0 = pts @ np.conj(z * mask)
        d_cross = -p * np.log1p(-cross_d / (1.0 - cross_0))
        total += pts.shape[0] * d_self - 2.0 * float(np.sum(d_cross.real))
    if not domain.contains(zn):
        return np.inf
    return total


def minimize_diastasis(domain, batch, init=None, max_iter=MAX_ITER, tol=GRAD_TOL, record=False):
    """Gradient descent with Armijo backtracking on ``L``; never raises on slow convergence.

    The first trial step is ``1 / (2 m lambda_max(g(init)))`` (the inverse
    curvature of ``L`` near its minimum); later trial steps use the
    Barzilai-Borwein length ``<s, s> / <s, y>`` from the last move.  Each trial
    is shrunk by :data:`SHRINK` until the Armijo test passes; leaving the
    domain counts as a failed test.  The sufficient-decrease test uses
    :func:`objective_change`.
    """
    pts = _batch_points(domain, batch)
    m = pts.shape[0]
    z = default_init(domain, pts) if init is None else _single(domain, init, "init")
    pot = potential_derivatives(domain, z)
    t = 1.0 / (2.0 * m * np.linalg.eigvalsh(pot.metric).max())
    val = _objective(domain, z, pts)
    grad = _grad(domain, z, pts, pot.d1)
    values = [val]
    it = 0
    stalled = False
    for it in range(1, max_iter + 1):
        rg = real_gradient(grad)
        gnorm2 = float(rg @ rg)
        if np.sqrt(gnorm2) < tol:
            it -= 1
            break
        step = -(rg[: domain.n] + 1j * rg[domain.n:])
        while True:
            change = objective_change(domain, z, t * step, pts)
            if change <= -ARMIJO_C * t * gnorm2:
                break
            t *= SHRINK
            if t * np.sqrt(gnorm2) < 1e-18:
                stalled = True
                break
        if stalled:
            break
        z = z + t * step
        val += change
        new_grad = _grad(domain, z, pts, potential_derivatives(domain, z).d1)
        s_vec = t * np.concatenate([step.real, step.imag])
        y_vec = real_gradient(new_grad) - rg
        sy = float(s_vec @ y_vec)
        if sy > 0:
            t = float(s_vec @ s_vec) / sy
        grad = new_grad
        values.append(val)
    gnorm = float(np.linalg.norm(real_gradient(grad)))
    return OptimizeResult(z, val, gnorm, it, gnorm < tol, tuple(values) if record else ())


def estimate_zhat(domain, batch, init=None, max_iter=MAX_ITER, tol=GRAD_TOL, fail_tol=FAIL_TOL):
    """Local minimizer of the summed diastasis to the batch.

    Raises
    ------
    NonConvergence
        If the gradient norm is still above ``fail_tol`` after ``max_iter`` iterations.
    """
    res = minimize_diastasis(domain, batch, init=init, max_iter=max_iter, tol=tol)
    if res.grad_norm > fail_tol:
        raise NonConvergence(f"gradient norm {res.grad_norm:.3g} after {res.n_iter} iterations")
    return res.location


class DiastasisEstimator(BaseEstimator):
    """Location estimator for ``P(z0, .) dV`` by diastasis-sum minimization.

    Parameters
    ----------
    domain : Domain
    max_iter : int
    tol : float
        Gradient-norm stopping tolerance.
    fail_tol : float
        Gradient norm above which the fit raises :class:`NonConvergence`.

    Attributes
    ----------
    location_ : (n,) complex
    n_iter_ : int
    grad_norm_ : float
    converged_ : bool
    """

    def __init__(self, domain=None, max_iter=MAX_ITER, tol=GRAD_TOL, fail_tol=FAIL_TOL):
        self.domain = domain
        self.max_iter = max_iter
        self.tol = tol
        self.fail_tol = fail_tol

    def _domain(self):
        return Domain.disc() if self.domain is None else self.domain

    def fit(self, X, y=None, init=None):
        domain = self._domain()
        pts = domain.check(X, "X")
        res = minimize_diastasis(domain, pts, init=init, max_iter=self.max_iter, tol=self.tol)
        if res.grad_norm > self.fail_tol:
            raise NonConvergence(f"gradient norm {res.grad_norm:.3g} after {res.n_iter} iterations")
        self.location_ = res.location
        self.n_iter_ = res.n_iter
        self.grad_norm_ = res.grad_norm
        self.converged_ = res.converged
        return self

    def score(self, X, y=None):
        """Negative mean diastasis from the fitted location to ``X``."""
        domain = self._domain()
        pts = domain.check(X, "X")
        return -_objective(domain, self.location_, pts) / pts.shape[0]


# -- experiments ------------------------------------------------------------------

def _replicate(domain, z0, m, seed):
    batch = rejection_sample(domain, z0, m, seed)
    return minimize_diastasis(domain, batch.points)


@dataclass(frozen=True)
class ConsistencyRow:
    m: int
    mean_abs_error: float
    stderr: float
    n_ok: int
    failures: int


@dataclass(frozen=True)
class ConsistencyTable:
    z0: np.ndarray
    R_rep: int
    seed: int
    rows: tuple

    @property
    def failure_rate(self):
        total = sum(r.n_ok + r.failures for r in self.rows)
        return sum(r.failures for r in self.rows) / total

    def strictly_decreasing(self):
        errs = [r.mean_abs_error for r in self.rows]
        return all(b < a for a, b in zip(errs, errs[1:]))

    def non_increasing(self, k=2.0):
        return all(b.mean_abs_error <= a.mean_abs_error + k * np.hypot(a.stderr, b.stderr)
                   for a, b in zip(self.rows, self.rows[1:]))

    def to_dict(self):
        return {
            "z0": _jsonable(self.z0),
            "R_rep": self.R_rep,
            "seed": self.seed,
            "rows": [r.__dict__ for r in self.rows],
            "failure_rate": self.failure_rate,
            "strictly_decreasing": self.strictly_decreasing(),
        }


def consistency_experiment(domain, z0, m_schedule, R_rep, seed):
    """Mean ``|zhat_m - z0|`` over ``R_rep`` replications for each ``m`` in the schedule."""
    z0 = _single(domain, z0, "z0")
    sched = [check_count(m, "m") for m in m_schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("m_schedule must be increasing")
    R_rep = check_count(R_rep, "R_rep", minimum=2)
    rows = []
    for i, m in enumerate(sched):
        base = derive_seed(seed, i)
        errs, fails = [], 0
        for r in range(R_rep):
            res = _replicate(domain, z0, m, derive_seed(base, r))
            if res.grad_norm > FAIL_TOL:
                fails += 1
                continue
            errs.append(np.linalg.norm(res.location - z0))
        errs = np.array(errs)
        se = float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else float("nan")
        rows.append(ConsistencyRow(m, float(errs.mean()), se, len(errs), fails))
    return ConsistencyTable(z0, R_rep, int(seed), tuple(rows))


@dataclass(frozen=True)
class CltReport:
    """Sampling distribution of ``Y = sqrt(m) (zhat - z0)`` against ``N_C(0, g_B(z0)^-1, 0)``."""

    z0: np.ndarray
    m: int
    R_rep: int
    seed: int
    n_ok: int
    failures: int
    gamma_hat: np.ndarray
    relation_hat: np.ndarray
    gamma_star: np.ndarray
    ks_statistics: tuple
    ks_pvalues: tuple
    iterations_mean: float
    iterations_max: int
    init_policy: str = "batch mean"
    samples: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def failure_rate(self):
        return self.failures / self.R_rep

    @property
    def gamma_rel_error(self):
        return float(np.linalg.norm(self.gamma_hat - self.gamma_star) / np.linalg.norm(self.gamma_star))

    @property
    def relation_norm(self):
        return float(np.linalg.norm(self.relation_hat))

    @property
    def relation_bound(self):
        """``3 ||Gamma*|| / sqrt(R)``, the fluctuation scale of the relation matrix."""
        return float(3.0 * np.linalg.norm(self.gamma_star) / np.sqrt(self.n_ok))

    def checks(self, rtol=CLT_RTOL, ks_level=KS_LEVEL, check_relation=False):
        out = {
            "covariance": self.gamma_rel_error < rtol,
            "normality": bool(min(self.ks_pvalues) > ks_level),
            "failure_rate": self.failure_rate <= MAX_FAILURE_RATE,
        }
        if check_relation:
            out["relation"] = self.relation_norm < self.relation_bound
        return out

    def passed(self, **kw):
        return all(self.checks(**kw).values())

    def to_dict(self, **kw):
        return {
            "z0": _jsonable(self.z0),
            "m": self.m,
            "R_rep": self.R_rep,
            "seed": self.seed,
            "n_ok": self.n_ok,
            "failures": self.failures,
            "failure_rate": self.failure_rate,
            "init_policy": self.init_policy,
            "gamma_hat": _jsonable(self.gamma_hat),
            "gamma_star": _jsonable(self.gamma_star),
            "gamma_rel_error": self.gamma_rel_error,
            "relation_hat": _jsonable(self.relation_hat),
            "relation_norm": self.relation_norm,
            "relation_bound": self.relation_bound,
            "ks_statistics": list(self.ks_statistics),
            "ks_pvalues": list(self.ks_pvalues),
            "iterations_mean": self.iterations_mean,
            "iterations_max": self.iterations_max,
            "checks": self.checks(**kw),
        }

    def to_csv(self, path):
        """Dump the ``Y`` samples as ``re_y1, im_y1, ...`` columns."""
        n = self.samples.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{p}_y{j + 1}" for j in range(n) for p in ("re", "im")])
            for row in self.samples:
                w.writerow([repr(float(v)) for c in row for v in (c.real, c.imag)])


def whiten(samples, gamma):
    """``L^-1 y`` for ``gamma = L L^H``; standard circular draws come out."""
    try:
        L = np.linalg.cholesky(gamma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc
    return np.linalg.solve(L, np.asarray(samples).T).T


def ks_marginals(white):
    """KS test of each real and imaginary marginal against ``Normal(0, 1/2)``."""
    res = []
    for j in range(white.shape[1]):
        for part in (white[:, j].real, white[:, j].imag):
            r = stats.kstest(part, "norm", args=(0.0, np.sqrt(0.5)))
            res.append((float(r.statistic), float(r.pvalue)))
    return res


def clt_experiment(domain, z0, m, R_rep, seed):
    """Replicate the estimator ``R_rep`` times at sample size ``m``.

    Failed replications (gradient norm above :data:`FAIL_TOL`) are excluded
    from the statistics and counted in ``failures``.
    """
    z0 = _single(domain, z0, "z0")
    m = check_count(m, "m")
    R_rep = check_count(R_rep, "R_rep", minimum=2)
    ys, iters, fails = [], [], 0
    for r in range(R_rep):
        res = _replicate(domain, z0, m, derive_seed(seed, r))
        iters.append(res.n_iter)
        if res.grad_norm > FAIL_TOL:
            fails += 1
            continue
        ys.append(np.sqrt(m) * (res.location - z0))
    Y = np.array(ys)
    gamma_hat = Y.T @ np.conj(Y) / Y.shape[0]
    relation_hat = Y.T @ Y / Y.shape[0]
    gamma_star = np.linalg.inv(bergman_metric(domain, z0))
    gamma_star = 0.5 * (gamma_star + np.conj(gamma_star.T))
    ks = ks_marginals(whiten(Y, gamma_star))
    return CltReport(
        z0=z0, m=m, R_rep=R_rep, seed=int(seed), n_ok=Y.shape[0], failures=fails,
        gamma_hat=gamma_hat, relation_hat=relation_hat, gamma_star=gamma_star,
        ks_statistics=tuple(s for s, _ in ks), ks_pvalues=tuple(p for _, p in ks),
        iterations_mean=float(np.mean(iters)), iterations_max=int(np.max(iters)), samples=Y,
    )


# -- complex normal -----------------------------------------------------------------

@dataclass(frozen=True)
class ComplexNormalSpec:
    """Circular complex normal ``N_C(mean, cov, 0)``.

    Raises
    ------
    NotPositiveDefinite
        If ``cov`` is not Hermitian positive definite.
    """

    mean: np.ndarray
    cov: np.ndarray
    relation: np.ndarray = None

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, complex))
        n = cov.shape[0]
        mean = as_point(self.mean, n)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)
        if cov.shape != (n, n) or not np.allclose(cov, np.conj(cov.T), atol=1e-12):
            raise NotPositiveDefinite("covariance must be a square Hermitian matrix")
        rel = np.zeros((n, n), complex) if self.relation is None else np.atleast_2d(np.asarray(self.relation, complex))
        if not np.allclose(rel, rel.T):
            raise ValueError("relation matrix must be symmetric")
        if np.any(rel != 0):
            raise NotImplementedError("only the circular case (relation = 0) is supported")
        object.__setattr__(self, "relation", rel)
        try:
            object.__setattr__(self, "_chol", np.linalg.cholesky(cov))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("covariance is not positive definite") from exc

    @property
    def n(self):
        return self.cov.shape[0]

    def logpdf(self, z):
        """``-n log pi - log det(cov) - (z - mu)^H cov^-1 (z - mu)``."""
        d = as_points(z, self.n) - self.mean
        w = np.linalg.solve(self._chol, d.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol).real))
        return -self.n * np.log(np.pi) - logdet - np.sum(np.abs(w) ** 2, axis=1)


def complex_normal_sample(spec, count, seed):
    """``count`` draws ``mu + L w`` with ``w`` standard circular (real/imag variance 1/2)."""
    count = check_count(count)
    rng = make_rng(seed)
    w = rng.standard_normal((count, spec.n, 2)) * np.sqrt(0.5)
    w = w[..., 0] + 1j * w[..., 1]
    return spec.mean + w @ spec._chol.T


__all__ = [
    "CltReport", "ComplexNormalSpec", "ConsistencyRow", "ConsistencyTable", "DiastasisEstimator",
    "OptimizeResult", "clt_experiment", "complex_normal_sample", "consistency_experiment",
    "default_init", "diastasis_objective_grad", "estimate_zhat", "ks_marginals",
    "minimize_diastasis", "real_gradient", "whiten",
]
