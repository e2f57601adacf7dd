"""Central finite-difference Wirtinger derivatives.

Used only as an independent oracle for the analytic derivative formulas in
:mod:`bergstat.geometry`.  A Wirtinger operator ``d/dz_j = (d/dx_j - i d/dy_j) / 2``
(or its conjugate) is expanded into real directional derivatives, and each
mixed real derivative is a tensor product of central differences.  One
level of Richardson extrapolation lifts the O(h^2) error to O(h^4).
"""

import itertools

import numpy as np

#: Default step per derivative order. Higher orders need larger steps to
#: keep roundoff (~ eps / h^k) below the 1e-6 comparison tolerance.
DEFAULT_STEPS = {1: 1e-4, 2: 1e-4, 3: 1e-3, 4: 1e-2}


def _stencil(n, holo, anti):
    """Displacements (real 2n-vectors, unit step) and complex weights."""
    factors = [(j, -1) for j in holo] + [(j, +1) for j in anti]
    k = len(factors)
    disp, weights = [], []
    # choose x or y for every factor, then every sign pattern of the central differences
    for axes in itertools.product((0, 1), repeat=k):
        coeff = 1.0 + 0j
        dirs = []
        for (j, sgn), ax in zip(factors, axes):
            coeff *= 0.5 * (1.0 if ax == 0 else sgn * 1j)
            dirs.append(j if ax == 0 else n + j)
        for signs in itertools.product((1, -1), repeat=k):
            v = np.zeros(2 * n)
            for d, s in zip(dirs, signs):
                v[d] += s
            disp.append(v)
            weights.append(coeff * np.prod(signs) / 2.0 ** k)
    return np.array(disp), np.array(weights)


def _central(f, z, disp, weights, h, k):
    n = z.shape[0]
    shifts = h * disp
    pts = z[None, :] + shifts[:, :n] + 1j * shifts[:, n:]
    vals = np.asarray(f(pts))
    return np.tensordot(weights, vals, axes=(0, 0)) / h ** k


def wirtinger_fd(f, z, holo=(), anti=(), h=None, richardson=True):
    """Mixed Wirtinger derivative ``d_holo d_anti f`` at ``z`` by finite differences.

    Parameters
    ----------
    f : callable
        Maps an ``(M, n)`` complex array of points to an array whose first
        axis has length ``M`` (further axes are carried through).
    z : (n,) complex array
    holo, anti : sequence of int
        Coordinate indices of the holomorphic and antiholomorphic factors.
    h : float, optional
        Step; defaults to ``DEFAULT_STEPS[order]``.
    """
    z = np.asarray(z, dtype=complex)
    k = len(holo) + len(anti)
    if k == 0:
        return np.asarray(f(z[None, :]))[0]
    if h is None:
        h = DEFAULT_STEPS.get(k, 1e-2)
    disp, weights = _stencil(z.shape[0], tuple(holo), tuple(anti))
    coarse = _central(f, z, disp, weights, h, k)
    if not richardson:
        return coarse
    fine = _central(f, z, disp, weights, h / 2, k)
    return (4.0 * fine - coarse) / 3.0


def wirtinger_tensor_fd(f, z, n_holo, n_anti, h=None):
    """All derivatives with ``n_holo`` holomorphic and ``n_anti`` antiholomorphic
    factors, as an array indexed ``[holo..., anti..., rest...]``."""
    n = np.asarray(z).shape[0]
    shape = (n,) * (n_holo + n_anti)
    out = None
    for idx in itertools.product(range(n), repeat=n_holo + n_anti):
        val = wirtinger_fd(f, z, idx[:n_holo], idx[n_holo:], h=h)
        if out is None:
            out = np.zeros(shape + np.shape(val), dtype=complex)
        out[idx] = val
    return out
