"""Closed-form kernels on R^n and on balls.

Conventions (documented, fixed once):
  * newtonian G1 is normalized so that -laplacian G1(., y) = delta_y:
    n >= 3: |x-y|^(2-n) / ((n-2) * area(S^{n-1})),  n = 2: -log|x-y| / (2 pi).
  * the biharmonic fundamental profile w is kept bare:
    n = 2: r^2 log r / (8 pi),  n = 3: r,  n >= 5: r^(4-n);  n = 4 excluded.
    Its Laplacian relates to G1 affinely, laplacian w = a * G1 + b, with
    (a, b) per dimension from biharm_laplacian_constants(); every identity
    exercised here is invariant under that scaling.
  * riesz_iterated uses the true Newtonian composition constant
    c_n = Gamma((n-4)/2) / (16 pi^{n/2}), so it equals
    integral G1(x,z) G1(z,y) dz for n >= 5.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Ball, as_point, singular_ball_integral, surface_area


def _pairwise_dist(x, y):
    """|x - y| supporting (n,) and (m, n) operands; returns scalar or (m,)."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    d = np.linalg.norm(np.atleast_2d(xa) - np.atleast_2d(ya), axis=-1)
    if xa.ndim == 1 and ya.ndim == 1:
        return float(d[0])
    return d


def newtonian(x, y, n: int):
    """Newtonian kernel G1(x, y); either argument may be an (m, n) batch."""
    if n < 2:
        raise ValueError("dimension must be >= 2")
    r = _pairwise_dist(x, y)
    if np.any(np.asarray(r) == 0.0):
        raise ZeroDivisionError("newtonian kernel is singular at x = y")
    if n == 2:
        return -np.log(r) / (2.0 * np.pi)
    return r ** (2 - n) / ((n - 2) * surface_area(n))


def ball_green(ball_: Ball, x, y):
    """Dirichlet Green function of a ball by Kelvin reflection (dim 2 or 3).

    Second argument may be an (m, n) batch of interior points.
    """
    n = ball_.dim
    if n not in (2, 3):
        raise ValueError("ball Green function implemented for dim 2 and 3")
    c, R = ball_.c, ball_.radius
    x = as_point(x, n)
    ya = np.atleast_2d(np.asarray(y, dtype=float))
    single = np.asarray(y).ndim == 1
    rx = float(np.linalg.norm(x - c))
    ry = np.linalg.norm(ya - c, axis=1)
    if rx >= R or np.any(ry >= R):
        raise ValueError("ball Green function needs both points strictly inside")
    r = np.linalg.norm(ya - x, axis=1)
    if np.any(r == 0.0):
        raise ZeroDivisionError("ball Green function is singular at x = y")
    if rx < 1e-14 * R:
        if n == 2:
            g = (np.log(R) - np.log(ry)) / (2.0 * np.pi)
        else:
            g = (ry ** (2 - n) - R ** (2 - n)) / ((n - 2) * surface_area(n))
    else:
        xs = c + (R * R / (rx * rx)) * (x - c)
        rs = np.linalg.norm(ya - xs, axis=1)
        if n == 2:
            g = np.log(rs * rx / (R * r)) / (2.0 * np.pi)
        else:
            g = (r ** (2 - n) - (R / rx) ** (n - 2) * rs ** (2 - n)) \
                / ((n - 2) * surface_area(n))
    g = np.maximum(g, 0.0)  # clip -1e-17 level rounding at the boundary
    return float(g[0]) if single else g


def biharm_fundamental(x, y, n: int):
    """Bare biharmonic fundamental profile w(|x - y|); n = 4 excluded."""
    if n == 4:
        raise ValueError("dim 4 excluded (logarithmic resonance)")
    if n < 2:
        raise ValueError("dimension must be >= 2")
    r = _pairwise_dist(x, y)
    ra = np.asarray(r, dtype=float)
    if n == 2:
        out = np.zeros_like(ra)
        nz = ra > 0
        out = np.where(nz, ra**2 * np.log(np.where(nz, ra, 1.0)), 0.0) / (8.0 * np.pi)
    elif n == 3:
        out = ra
    else:
        if np.any(ra == 0.0):
            raise ZeroDivisionError("kernel singular at x = y for n >= 5")
        out = ra ** (4 - n)
    return float(out) if np.isscalar(r) else out


def riesz_constant(n: int) -> float:
    """Composition constant: integral G1(x,z) G1(z,y) dz = c_n |x-y|^{4-n}."""
    if n < 5:
        raise ValueError("whole-space iterated kernel diverges for n < 5")
    return math.gamma((n - 4) / 2.0) / (16.0 * math.pi ** (n / 2.0))


def riesz_iterated(x, y, n: int):
    """Whole-space iterated Newtonian kernel, n >= 5."""
    c = riesz_constant(n)
    r = _pairwise_dist(x, y)
    if np.any(np.asarray(r) == 0.0):
        raise ZeroDivisionError("iterated kernel singular at x = y")
    return c * r ** (4 - n)


def biharm_laplacian_constants(n: int):
    """(a, b) with laplacian w(., y) = a * G1(., y) + b away from the pole."""
    if n == 2:
        return -1.0, 1.0 / (2.0 * math.pi)
    if n == 3:
        return 8.0 * math.pi, 0.0
    if n >= 5:
        return 2.0 * (4 - n) * (n - 2) * surface_area(n), 0.0
    raise ValueError("dim 4 excluded")


def iterated_ball_green(ball_: Ball, x, y, quad_order: int = 64) -> float:
    """Iterated Dirichlet Green kernel of a ball by singular volume quadrature:
    integral over the ball of G_B(x, z) G_B(z, y) dz.

    Finite at x = y (the singularity is square-integrable in dim 2 and 3);
    accuracy is set by the patch orders of singular_ball_integral.
    """
    n = ball_.dim
    x = as_point(x, n)
    y = as_point(y, n)
    if not (ball_.contains(x) and ball_.contains(y)):
        raise ValueError("both points must lie strictly inside the ball")

    def integrand(z):
        return ball_green(ball_, x, z) * ball_green(ball_, y, z)

    return singular_ball_integral(ball_, integrand, poles=[x, y],
                                  sphere_order=quad_order)
