"""Hermite polynomials, Hermite functions and the chaos coefficients of B(t) and W(t)."""
import numpy as np
from scipy import integrate

PI_QUARTER = np.pi ** -0.25


def hermite_poly(n, x):
    """Probabilists' Hermite polynomial ``h_n`` via ``h_{n+1} = x h_n - n h_{n-1}``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev
    h = x.copy()
    for k in range(1, n):
        h_prev, h = h, x * h - k * h_prev
    return h


def hermite_fn(n, x):
    """Hermite function ``xi_n``, 1-based, orthonormal in ``L^2(R)``.

    ``xi_n(x) = ((n-1)! sqrt(pi))^(-1/2) exp(-x^2/2) h_{n-1}(sqrt(2) x)``, evaluated by the
    normalised recurrence so no factorial is ever formed.
    """
    if n < 1:
        raise ValueError("Hermite functions are indexed from 1")
    x = np.asarray(x, dtype=float)
    psi_prev = PI_QUARTER * np.exp(-0.5 * x * x)
    if n == 1:
        return psi_prev
    psi = np.sqrt(2.0) * x * psi_prev
    for k in range(1, n - 1):
        psi_prev, psi = psi, np.sqrt(2.0 / (k + 1)) * x * psi - np.sqrt(k / (k + 1)) * psi_prev
    return psi


def hermite_fns(nmax, x):
    """Rows ``xi_1 .. xi_nmax`` evaluated at ``x`` (shape ``(nmax, len(x))``)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    out[0] = PI_QUARTER * np.exp(-0.5 * x * x)
    if nmax > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, nmax - 1):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


def brownian_coeff(k, t, tol=1e-10):
    """Chaos coefficient ``int_0^t xi_k(s) ds`` of Brownian motion along ``H_{eps_k}``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: float(hermite_fn(k, s)), 0.0, t,
                            epsabs=tol, epsrel=0.0, limit=200)
    return val


def white_noise_coeff(k, t):
    """Coefficient ``xi_k(t)`` of white noise along ``H_{eps_k}``."""
    return hermite_fn(k, t)
