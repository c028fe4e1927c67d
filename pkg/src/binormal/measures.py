"""Signed measures on balls and spheres: construction, integration, mass
bookkeeping and harmonic balayage onto ball complements.

Components are kept in symbolic form (atoms, Poisson-kernel harmonic
measures, surface/volume densities) so that sweeps can cancel exactly
instead of leaving numerical residue.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import (Ball, as_point, ball, ball_volume_rule, eval_field,
                       mc_ball_samples, mc_sphere_samples, sphere_quadrature,
                       singular_ball_integral)

DEFAULT_QUAD_ORDER = 32
DEFAULT_MC_SAMPLES = 100_000

_CONC_TOL = 1e-12  # relative tolerance for concentricity / radius matching


@dataclass(frozen=True)
class PointMass:
    location: tuple

    @property
    def dim(self):
        return len(self.location)

    def mass(self, quad_order=DEFAULT_QUAD_ORDER):
        return 1.0


@dataclass(frozen=True)
class HarmonicMeasure:
    """Harmonic measure of a ball seen from an interior base point; the
    Poisson-kernel probability measure on the sphere."""

    ball: Ball
    base: tuple

    def __post_init__(self):
        if not self.ball.contains(self.base, strict=True):
            raise ValueError("harmonic measure base must be strictly inside its ball")

    @property
    def dim(self):
        return self.ball.dim

    def mass(self, quad_order=DEFAULT_QUAD_ORDER):
        return 1.0


@dataclass(frozen=True)
class SurfaceDensity:
    """density * (normalized surface measure) on the sphere of `ball`."""

    ball: Ball
    density: object  # callable on points

    @property
    def dim(self):
        return self.ball.dim

    def mass(self, quad_order=DEFAULT_QUAD_ORDER):
        return _surface_mass(self, quad_order)


@dataclass(frozen=True)
class VolumeDensity:
    """density * (Lebesgue volume) on the open ball."""

    ball: Ball
    density: object

    @property
    def dim(self):
        return self.ball.dim

    def mass(self, quad_order=DEFAULT_QUAD_ORDER):
        return _volume_mass(self, quad_order)


@functools.lru_cache(maxsize=256)
def _surface_mass(comp: SurfaceDensity, quad_order: int) -> float:
    rule = sphere_quadrature(comp.ball, quad_order)
    return float(rule.weights @ eval_field(comp.density, rule.nodes))


@functools.lru_cache(maxsize=256)
def _volume_mass(comp: VolumeDensity, quad_order: int) -> float:
    nodes, w = ball_volume_rule(comp.ball, sphere_order=quad_order)
    return float(w @ eval_field(comp.density, nodes))


@dataclass(frozen=True)
class CompactSupport:
    """A closed ball acting as the compact carrier K."""

    ball: Ball

    @property
    def center(self):
        return self.ball.center

    @property
    def radius(self):
        return self.ball.radius

    @property
    def dim(self):
        return self.ball.dim


def closed_ball(center, radius) -> CompactSupport:
    return CompactSupport(ball(center, radius))


@dataclass(frozen=True)
class SignedMeasure:
    """Finite weighted sum of nonnegative components."""

    terms: tuple  # of (weight: float, component)

    def __post_init__(self):
        dims = {c.dim for _, c in self.terms}
        if len(dims) > 1:
            raise ValueError(f"mixed dimensions in measure: {sorted(dims)}")

    @property
    def dim(self):
        return self.terms[0][1].dim if self.terms else None

    def __add__(self, other):
        return SignedMeasure(self.terms + other.terms)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return SignedMeasure(tuple((-w, c) for w, c in self.terms))

    def __rmul__(self, a):
        return SignedMeasure(tuple((float(a) * w, c) for w, c in self.terms))

    __mul__ = __rmul__

    def simplify(self) -> "SignedMeasure":
        """Merge equal components and drop exact-zero weights; this is what
        makes symbolic sweep cancellations exact."""
        merged: dict = {}
        order: list = []
        for w, c in self.terms:
            if c in merged:
                merged[c] += w
            else:
                merged[c] = w
                order.append(c)
        return SignedMeasure(tuple((merged[c], c) for c in order if merged[c] != 0.0))

    def positive_part(self) -> "SignedMeasure":
        return SignedMeasure(tuple((w, c) for w, c in self.terms if w > 0))

    def negative_part(self) -> "SignedMeasure":
        """The measure m2 >= 0 in the canonical split m = m1 - m2."""
        return SignedMeasure(tuple((-w, c) for w, c in self.terms if w < 0))

    def total_variation(self, quad_order=DEFAULT_QUAD_ORDER) -> float:
        return sum(abs(w) * c.mass(quad_order) for w, c in self.terms)

    def bounding_ball(self) -> Ball:
        """A closed ball containing the support (not minimal)."""
        if not self.terms:
            raise ValueError("empty measure has no support")
        n = self.dim
        centers = []
        for _, c in self.terms:
            if isinstance(c, PointMass):
                centers.append((np.asarray(c.location), 0.0))
            else:
                centers.append((c.ball.c, c.ball.radius))
        mid = np.mean([p for p, _ in centers], axis=0)
        rad = max(float(np.linalg.norm(p - mid)) + r for p, r in centers)
        return Ball(tuple(mid), max(rad, 1e-12), n)


def dirac(x) -> SignedMeasure:
    p = as_point(x)
    return SignedMeasure(((1.0, PointMass(tuple(p))),))


def harmonic_measure(ball_: Ball, base) -> SignedMeasure:
    b = as_point(base, ball_.dim)
    return SignedMeasure(((1.0, HarmonicMeasure(ball_, tuple(b))),))


def uniform_sphere(ball_: Ball) -> SignedMeasure:
    """Uniform probability measure on a sphere = harmonic measure at center."""
    return harmonic_measure(ball_, ball_.center)


# -- Poisson kernel --------------------------------------------------------

def poisson_density(ball_: Ball, base, boundary_point):
    """Density of harmonic measure against *normalized* surface measure:
    (R^2 - |x - c|^2) R^{n-2} / |x - z|^n.

    ``boundary_point`` may be an (m, n) batch.
    """
    n = ball_.dim
    x = as_point(base, n)
    c, R = ball_.c, ball_.radius
    rho = float(np.linalg.norm(x - c))
    if rho >= R:
        raise ValueError("base point must lie strictly inside the ball")
    z = np.atleast_2d(np.asarray(boundary_point, dtype=float))
    single = np.asarray(boundary_point).ndim == 1
    rz = np.linalg.norm(z - c, axis=1)
    if np.any(np.abs(rz - R) > 1e-10 * max(1.0, R)):
        raise ValueError("boundary point not on the sphere")
    d = np.linalg.norm(z - x, axis=1)
    vals = (R * R - rho * rho) * R ** (n - 2) / d**n
    return float(vals[0]) if single else vals


# -- integration -------------------------------------------------------------

def _component_integral(comp, f, quad_order: int, mc) -> float:
    n = comp.dim
    if isinstance(comp, PointMass):
        vals = eval_field(f, np.asarray(comp.location)[None, :])
        _check_finite(vals, np.asarray(comp.location)[None, :])
        return float(vals[0])
    if isinstance(comp, (HarmonicMeasure, SurfaceDensity)):
        if n <= 3:
            rule = sphere_quadrature(comp.ball, quad_order)
            pts, w = rule.nodes, rule.weights
        else:
            count, seed = mc if mc else (DEFAULT_MC_SAMPLES, 0)
            pts = mc_sphere_samples(comp.ball, count, seed)
            w = np.full(len(pts), 1.0 / len(pts))
        if isinstance(comp, HarmonicMeasure):
            dens = poisson_density(comp.ball, comp.base, pts)
        else:
            dens = eval_field(comp.density, pts)
        vals = eval_field(f, pts)
        _check_finite(vals, pts)
        return float(w @ (dens * vals))
    if isinstance(comp, VolumeDensity):
        if n <= 3:
            pts, w = ball_volume_rule(comp.ball, sphere_order=quad_order)
        else:
            count, seed = mc if mc else (DEFAULT_MC_SAMPLES, 0)
            pts = mc_ball_samples(comp.ball, count, seed)
            from .geometry import ball_volume
            w = np.full(len(pts), ball_volume(n, comp.ball.radius) / len(pts))
        vals = eval_field(f, pts) * eval_field(comp.density, pts)
        _check_finite(vals, pts)
        return float(w @ vals)
    raise TypeError(f"unknown measure component {type(comp).__name__}")


def _check_finite(vals, pts):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = pts[np.argmax(bad)]
        raise ValueError(f"integrand is not finite at {tuple(where)}")


def integrate(m: SignedMeasure, f, quad_order: int = DEFAULT_QUAD_ORDER,
              mc=None) -> float:
    """Integral of a scalar field against the signed measure."""
    return sum(w * _component_integral(c, f, quad_order, mc)
               for w, c in m.terms)


def total_mass(m: SignedMeasure) -> float:
    """Integral of the constant 1, from stored component masses."""
    return sum(w * c.mass() for w, c in m.terms)


# -- balayage ------------------------------------------------------------------

def _concentric(a: Ball, b: Ball) -> bool:
    scale = max(a.radius, b.radius)
    return float(np.linalg.norm(a.c - b.c)) <= _CONC_TOL * scale


def sweep_harmonic(m: SignedMeasure, K: CompactSupport) -> SignedMeasure:
    """Harmonic balayage onto the complement of the closed ball K.

    Supported configurations (everything the concentric-sphere identity
    integral mu^{K}_z(.) dm(z) makes exact):
      * atoms anywhere: inside K they become harmonic measures of K, on the
        boundary or outside they are already carried by the complement;
      * harmonic measures / surface densities on spheres concentric with K
        of radius <= K.radius.
    Anything else is rejected rather than approximated.
    """
    kb = K.ball
    out = []
    for w, comp in m.terms:
        if isinstance(comp, PointMass):
            d = float(np.linalg.norm(np.asarray(comp.location) - kb.c))
            if d < kb.radius * (1.0 - _CONC_TOL):
                out.append((w, HarmonicMeasure(kb, comp.location)))
            else:
                out.append((w, comp))
            continue
        if isinstance(comp, (HarmonicMeasure, SurfaceDensity)):
            if not _concentric(comp.ball, kb):
                raise ValueError(
                    f"sweep of non-concentric component {comp!r} is not supported")
            if comp.ball.radius > kb.radius * (1.0 + _CONC_TOL):
                raise ValueError(
                    f"component sphere of {comp!r} reaches outside K")
            if abs(comp.ball.radius - kb.radius) <= _CONC_TOL * kb.radius:
                out.append((w, comp))  # already on the boundary of K
            elif isinstance(comp, HarmonicMeasure):
                out.append((w, HarmonicMeasure(kb, comp.base)))
            else:
                out.append((w, _smoothed_surface_density(comp, kb)))
            continue
        raise ValueError(f"component {type(comp).__name__} cannot be swept")
    return SignedMeasure(tuple(out)).simplify()


def _smoothed_surface_density(comp: SurfaceDensity, kb: Ball,
                              quad_order: int = 64) -> SurfaceDensity:
    """Sweep of g dsigma on an interior concentric sphere: surface density on
    the boundary of K obtained by Poisson smoothing."""
    inner = comp.ball
    g = comp.density

    rule = sphere_quadrature(inner, quad_order)
    gv = eval_field(g, rule.nodes)
    rho2 = np.sum((rule.nodes - kb.c) ** 2, axis=1)
    n = kb.dim

    def density(zp):
        zp2 = np.atleast_2d(np.asarray(zp, dtype=float))
        out = np.empty(zp2.shape[0])
        for i, z in enumerate(zp2):
            d = np.linalg.norm(rule.nodes - z, axis=1)
            pk = (kb.radius**2 - rho2) * kb.radius ** (n - 2) / d**n
            out[i] = float(rule.weights @ (gv * pk))
        return out if np.asarray(zp).ndim > 1 else float(out[0])

    return SurfaceDensity(kb, density)


# -- potentials (closed forms; the oracle side of sweep checks) -----------------

def newtonian_potential(m: SignedMeasure, x) -> float:
    """Newtonian potential of the measure at a point, using the exact
    piecewise closed form for harmonic-measure components (their potential
    equals G1(base, .) outside the sphere and G1(base, .) - G_ball(base, .)
    inside) and quadrature for density components."""
    n = m.dim
    xp = as_point(x, n)
    total = 0.0
    for w, comp in m.terms:
        if isinstance(comp, PointMass):
            total += w * kernels.newtonian(np.asarray(comp.location), xp, n)
        elif isinstance(comp, HarmonicMeasure):
            b = comp.ball
            r = float(np.linalg.norm(xp - b.c))
            val = kernels.newtonian(np.asarray(comp.base), xp, n)
            if r < b.radius * (1.0 - 1e-13):
                val -= kernels.ball_green(b, np.asarray(comp.base), xp)
            total += w * val
        elif isinstance(comp, (SurfaceDensity, VolumeDensity)):
            total += w * _component_integral(
                comp, lambda z: kernels.newtonian(z, xp, n), DEFAULT_QUAD_ORDER, None)
        else:
            raise TypeError(f"unknown component {type(comp).__name__}")
    return total


def green_potential(ball_: Ball, m: SignedMeasure, x) -> float:
    """Ball-Green potential of an atomic measure at an interior point."""
    xp = as_point(x, ball_.dim)
    total = 0.0
    for w, comp in m.terms:
        if not isinstance(comp, PointMass):
            raise ValueError("green_potential expects an atomic measure")
        total += w * kernels.ball_green(ball_, np.asarray(comp.location), xp)
    return total


# -- Riquier coupling mass ----------------------------------------------------

def riquier_coupling_mass(ball_: Ball, x, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Total mass of the coupling measure: the volume integral of the ball's
    Dirichlet Green function against the evaluation point, equal to
    (R^2 - |x - c|^2) / (2 n) in closed form (used as the test oracle)."""
    n = ball_.dim
    if n not in (2, 3):
        raise ValueError("coupling mass implemented for dim 2 and 3")
    xp = as_point(x, n)
    if not ball_.contains(xp, strict=True):
        raise ValueError("evaluation point must lie strictly inside the ball")

    def integrand(z):
        return kernels.ball_green(ball_, xp, z)

    val = singular_ball_integral(ball_, integrand, poles=[xp],
                                 sphere_order=min(quad_order, 64))
    if not np.isfinite(val):
        raise ArithmeticError("coupling-mass quadrature returned non-finite value")
    return val
