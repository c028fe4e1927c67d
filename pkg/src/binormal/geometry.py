"""Points, balls, sphere quadrature and ball volume quadrature in R^n.

All surface rules integrate against *normalized* surface measure (weights sum
to one), so probability-measure invariants are sum-to-one checks.  Volume
rules integrate against plain Lebesgue measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng

MAX_QUAD_ORDER = 4096  # configurable cap on deterministic rule order


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and return a point of R^n (n >= 2, finite coords)."""
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"a point needs >= 2 coordinates, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    if dim is not None and p.size != dim:
        raise ValueError(f"expected dimension {dim}, got {p.size}")
    return p


@dataclass(frozen=True)
class Ball:
    """Open ball with its bounding sphere; center stored as a tuple so balls
    compare exactly and can key symbolic cancellation."""

    center: tuple
    radius: float
    dim: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        if len(self.center) != self.dim or self.dim < 2:
            raise ValueError("ball center/dim mismatch")
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("ball center has non-finite coordinates")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains(self, x, strict: bool = True, tol: float = 0.0) -> bool:
        d = float(np.linalg.norm(as_point(x, self.dim) - self.c))
        return d < self.radius - tol if strict else d <= self.radius + tol

    def on_sphere(self, x, tol: float = 1e-10) -> bool:
        d = float(np.linalg.norm(as_point(x, self.dim) - self.c))
        return abs(d - self.radius) <= tol * max(1.0, self.radius)


def ball(center, radius: float) -> Ball:
    p = as_point(center)
    return Ball(tuple(float(v) for v in p), float(radius), p.size)


def surface_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def eval_field(f, pts: np.ndarray) -> np.ndarray:
    """Evaluate a scalar field on an (m, n) array of points.

    Accepts vectorized callables returning shape (m,) and falls back to a
    per-point loop for plain scalar functions.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    try:
        out = np.asarray(f(pts), dtype=float)
        if out.shape == (pts.shape[0],):
            return out
    except Exception:
        pass
    return np.array([float(f(p)) for p in pts])


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for normalized surface measure on a sphere."""

    nodes: np.ndarray   # (m, n)
    weights: np.ndarray  # (m,), sum to 1
    order: int

    def integrate(self, f) -> float:
        return float(self.weights @ eval_field(f, self.nodes))


def _gauss_legendre(k: int):
    return np.polynomial.legendre.leggauss(k)


def sphere_quadrature(ball_: Ball, order: int) -> QuadratureRule:
    """Deterministic rule on the sphere of ``ball_``, exact for polynomials of
    total degree <= order against normalized surface measure.

    n = 2: equally spaced angles, node count the smallest odd integer > order.
    n = 3: Gauss-Legendre in the polar cosine x uniform azimuth.
    n >= 4 has no deterministic rule here; use mc_sphere_samples.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if order > MAX_QUAD_ORDER:
        raise ValueError(f"order {order} exceeds cap {MAX_QUAD_ORDER}")
    n = ball_.dim
    if n == 2:
        m = order + 1 if (order + 1) % 2 == 1 else order + 2
        theta = 2.0 * np.pi * np.arange(m) / m
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        weights = np.full(m, 1.0 / m)
    elif n == 3:
        k = (order + 2) // 2  # Gauss exactness 2k-1 >= order
        t, wt = _gauss_legendre(k)
        m = order + 1
        phi = 2.0 * np.pi * np.arange(m) / m
        s = np.sqrt(1.0 - t**2)
        x = np.outer(s, np.cos(phi)).ravel()
        y = np.outer(s, np.sin(phi)).ravel()
        z = np.repeat(t, m)
        dirs = np.stack([x, y, z], axis=1)
        weights = np.repeat(wt / 2.0, m) / m
    else:
        raise ValueError(f"no deterministic sphere rule for dim {n}; "
                         "use mc_sphere_samples")
    nodes = ball_.c + ball_.radius * dirs
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def mc_sphere_samples(ball_: Ball, count: int, seed: int) -> np.ndarray:
    """Uniform points on the sphere of ``ball_`` by normalized Gaussians.

    Point i is a function of (seed, i) alone: requesting more points never
    changes earlier ones, and any chunked/threaded evaluation agrees.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = ball_.dim
    if n > rng.SLOTS_PER_POINT:
        raise ValueError(f"dim {n} exceeds the per-point counter budget")
    idx = np.arange(count, dtype=np.uint64)
    base = rng.pack(rng.TAG_SPHERE, (idx, 50), (np.uint64(0), 4))
    dirs = rng.unit_vectors(seed, base, n)
    return ball_.c + ball_.radius * dirs


def mc_ball_samples(ball_: Ball, count: int, seed: int) -> np.ndarray:
    """Uniform points in the open ball; same counter discipline as the
    sphere sampler (point i depends only on seed and i)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    n = ball_.dim
    idx = np.arange(count, dtype=np.uint64)
    base = rng.pack(rng.TAG_SPHERE, (idx, 50), (np.uint64(0), 4))
    dirs = rng.unit_vectors(seed, base, n)
    u = rng.uniforms(seed, rng.pack(rng.TAG_SPHERE, (idx, 50), (np.uint64(8), 4)))
    r = ball_.radius * u ** (1.0 / n)
    return ball_.c + r[:, None] * dirs


def ball_volume(n: int, radius: float) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * radius**n


# -- volume quadrature on balls ------------------------------------------------

def _ray_lengths(ball_: Ball, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Distance from an interior origin to the sphere along each direction."""
    d = origin - ball_.c
    b = dirs @ d
    disc = ball_.radius**2 - float(d @ d) + b**2
    return -b + np.sqrt(np.maximum(disc, 0.0))


def _radial_panels(panels: int, ratio: float):
    """Breakpoints in (0, 1] packing geometrically toward 0 to absorb the
    r^k log r behavior of 2-d kernels near a pole."""
    pts = [ratio**j for j in range(panels, -1, -1)]
    return [0.0] + pts


def ball_volume_rule(ball_: Ball, sphere_order: int = 32, radial_points: int = 12,
                     center=None, panels: int = 10, ratio: float = 0.3):
    """Nodes and weights for Lebesgue integration over a ball.

    Spherical coordinates about ``center`` (default: the ball center) with the
    exact ray length per direction, composite Gauss-Legendre panels in the
    scaled radius s = r / r_max(u), geometrically refined toward s = 0 to
    absorb r^k log r kernel behavior at the center point.

    Returns (nodes (m, n), weights (m,)).
    """
    n = ball_.dim
    origin = ball_.c if center is None else as_point(center, n)
    if not ball_.contains(origin, strict=True):
        raise ValueError("volume rule center must lie strictly inside the ball")
    sph = sphere_quadrature(Ball(tuple(0.0 for _ in range(n)), 1.0, n), sphere_order)
    dirs = sph.nodes
    vdir = sph.weights
    rmax = _ray_lengths(ball_, origin, dirs)

    edges = _radial_panels(panels, ratio)
    gx, gw = _gauss_legendre(radial_points)
    svals, swts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        svals.append(mid + half * gx)
        swts.append(half * gw)
    s = np.concatenate(svals)
    ws = np.concatenate(swts)

    area = surface_area(n)
    # nodes: for each direction i and radial node j: x = origin + rmax_i * s_j * u_i
    r = rmax[:, None] * s[None, :]
    nodes = origin[None, None, :] + r[:, :, None] * dirs[:, None, :]
    # weight: area * vdir_i * rmax_i^n * ws_j * s_j^{n-1}
    w = area * vdir[:, None] * (rmax[:, None] ** n) * ws[None, :] * (s[None, :] ** (n - 1))
    return nodes.reshape(-1, n), w.ravel()


def singular_ball_integral(ball_: Ball, f, poles, sphere_order: int = 64,
                           radial_points: int = 12, panels: int = 12,
                           ratio: float = 0.3, pole_power: int = 4) -> float:
    """Integrate f over the ball when f has integrable point singularities.

    One spherical-coordinate patch per pole: f is multiplied by a smooth
    partition of unity w_s = d_s^{-p} / sum_t d_t^{-p} that equals 1 at its
    own pole and vanishes to order p at the others, then each patch is
    integrated in coordinates centered at its pole (the r^{n-1} Jacobian
    absorbs a Newtonian singularity there).  Poles closer than a resolution
    threshold are merged.
    """
    n = ball_.dim
    ps = [as_point(p, n) for p in poles]
    merged: list[np.ndarray] = []
    merge_tol = 0.02 * ball_.radius
    for p in ps:
        if not ball_.contains(p, strict=False, tol=1e-12):
            raise ValueError("singular pole outside the closed ball")
        for q in merged:
            if np.linalg.norm(p - q) < merge_tol:
                break
        else:
            merged.append(p)
    if not merged:
        raise ValueError("at least one pole required")

    # A pole exactly on the boundary contributes nothing special but breaks
    # the patch geometry; pull it inward by a hair.
    centers = []
    for p in merged:
        d = np.linalg.norm(p - ball_.c)
        if d >= ball_.radius * (1 - 1e-9):
            p = ball_.c + (p - ball_.c) * ((ball_.radius * (1 - 1e-6)) / d)
        centers.append(p)

    def weight_for(k: int, pts: np.ndarray) -> np.ndarray:
        if len(centers) == 1:
            return np.ones(pts.shape[0])
        dk = np.linalg.norm(pts - centers[k], axis=1)
        denom = np.zeros(pts.shape[0])
        for j, cj in enumerate(centers):
            if j == k:
                continue
            dj = np.linalg.norm(pts - cj, axis=1)
            denom += (dk / np.maximum(dj, 1e-300)) ** pole_power
        return 1.0 / (1.0 + denom)

    total = 0.0
    for k, ck in enumerate(centers):
        nodes, w = ball_volume_rule(ball_, sphere_order=sphere_order,
                                    radial_points=radial_points, center=ck,
                                    panels=panels, ratio=ratio)
        vals = eval_field(f, nodes) * weight_for(k, nodes)
        total += float(w @ vals)
    if not math.isfinite(total):
        raise ArithmeticError("singular volume quadrature returned non-finite value")
    return total
