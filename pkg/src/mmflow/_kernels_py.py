"""Pure NumPy implementations of the hot pointwise kernels.

These are the fallback used when the compiled extension is unavailable.
The main entry point is the batched proximal map of the kinetic term

    (w', r') = argmin  (w'-w)^2/2 + (r'-r)^2/2 + sigma * w'^2 / m(r')

over r' in [lo, hi], where m is a concave quadratic mobility.  Partially
minimizing over w' gives the smooth reduced objective

    (r'-r)^2/2 + sigma * w^2 / (m(r') + 2 sigma),

whose stationarity equation F(r') = 0 is strictly increasing for concave m,
so a safeguarded Newton iteration with bisection bracket is exact to
rounding.  The reduced form stays finite at m = 0, which realizes the
perspective convention (zero flux is free, flux through a dry point is
infinitely expensive) without special cases.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def perspective_prox_batch(w, rho, sigma, c0, c1, c2, lo, hi):
    """Pointwise prox of the perspective kinetic term, quadratic mobility.

    Parameters are arrays ``w``, ``rho`` of equal shape, a positive scalar
    ``sigma``, mobility coefficients m(s) = c0 + c1 s + c2 s^2 with c2 <= 0,
    and interval bounds.  Returns (w_new, rho_new) arrays.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w = np.asarray(w, dtype=float)
    rho = np.asarray(rho, dtype=float)
    shape = w.shape
    w = w.ravel()
    rho = rho.ravel()
    width = hi - lo

    def mval(x):
        return c0 + x * (c1 + x * c2)

    def mprime(x):
        return c1 + 2.0 * c2 * x

    def F(x):
        m = mval(x)
        denom = m + 2.0 * sigma
        return (x - rho) - sigma * w**2 * mprime(x) / denom**2

    def Fprime(x):
        m = mval(x)
        denom = m + 2.0 * sigma
        mp = mprime(x)
        return 1.0 - sigma * w**2 * (2.0 * c2 * denom - 2.0 * mp**2) / denom**3

    a = np.full_like(rho, lo)
    b = np.full_like(rho, hi)
    Fa = F(a)
    Fb = F(b)
    at_lo = Fa >= 0.0
    at_hi = Fb <= 0.0
    interior = ~(at_lo | at_hi)

    x = np.clip(rho, lo, hi)
    x = np.where(at_lo, lo, np.where(at_hi, hi, x))
    tol = 1e-13 * max(width, 1.0)
    for _ in range(120):
        Fx = F(x)
        if np.max(np.abs(np.where(interior, Fx, 0.0))) < tol and np.max(b - a) < tol:
            break
        pos = Fx > 0.0
        b = np.where(interior & pos, x, b)
        a = np.where(interior & ~pos, x, a)
        if np.max(np.where(interior, b - a, 0.0)) < 1e-15 * max(width, 1.0):
            break
        step = Fx / Fprime(x)
        x_new = x - step
        bad = (x_new <= a) | (x_new >= b) | ~np.isfinite(x_new)
        x_new = np.where(bad, 0.5 * (a + b), x_new)
        x = np.where(interior, x_new, x)

    m = np.maximum(mval(x), 0.0)
    w_new = w * m / (m + 2.0 * sigma)
    return w_new.reshape(shape), x.reshape(shape)


def perspective_prox_batch_generic(w, rho, sigma, pair):
    """Prox for arbitrary mobilities via bisection on the monotone equation.

    ``pair`` supplies ``mobility_at`` and ``mobility_derivative_at``; used
    when no quadratic coefficient form is available.  Slower than the
    quadratic path but makes no smoothness assumptions beyond (H3).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w = np.asarray(w, dtype=float)
    rho = np.asarray(rho, dtype=float)
    shape = w.shape
    w = w.ravel()
    rho = rho.ravel()
    lo, hi = pair.lower, pair.upper

    def F(x):
        m = pair.mobility_at(x)
        mp = pair.mobility_derivative_at(x)
        return (x - rho) - sigma * w**2 * mp / (m + 2.0 * sigma) ** 2

    a = np.full_like(rho, lo)
    b = np.full_like(rho, hi)
    at_lo = F(a) >= 0.0
    at_hi = F(b) <= 0.0
    interior = ~(at_lo | at_hi)
    for _ in range(90):
        x = 0.5 * (a + b)
        pos = F(x) > 0.0
        b = np.where(interior & pos, x, b)
        a = np.where(interior & ~pos, x, a)
    x = 0.5 * (a + b)
    x = np.where(at_lo, lo, np.where(at_hi, hi, x))
    m = np.maximum(pair.mobility_at(x), 0.0)
    w_new = w * m / (m + 2.0 * sigma)
    return w_new.reshape(shape), x.reshape(shape)
