"""Two-sphere binormal measures and their verifiers.

The central object is the signed measure

    lambda = epsilon_x - alpha_x * mu1_x + beta_x * mu2_x

on concentric spheres, whose adjoint potentials vanish off the supporting
ball: both the biharmonic-profile potential and the Newtonian potential of
lambda are zero outside.  Verifiers evaluate those potentials by quadrature
on exterior grids and report residual tables; constructors for superposed
and density-type variants, the sweep decomposition, and the finite
generator expansion live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Ball, ball, eval_field, singular_ball_integral, \
    sphere_quadrature
from .measures import (CompactSupport, HarmonicMeasure, PointMass,
                       SignedMeasure, VolumeDensity, dirac,
                       harmonic_measure, integrate, newtonian_potential,
                       sweep_harmonic, total_mass)

DEFAULT_VERIFY_ORDER = 192
DEFAULT_TOLERANCE = 1e-10
DEFAULT_SHELLS = (1.2, 2.0, 5.0)
DEFAULT_POINTS_PER_SHELL = 36


@dataclass(frozen=True)
class TwoSphereConfig:
    """Evaluation point inside the smaller of two concentric spheres."""

    x: tuple
    omega1: Ball
    omega2: Ball

    def __post_init__(self):
        if self.omega1.dim != self.omega2.dim:
            raise ValueError("spheres must share a dimension")
        if np.linalg.norm(self.omega1.c - self.omega2.c) > 1e-12 * self.omega2.radius:
            raise ValueError("spheres must be concentric")
        if not self.omega1.radius < self.omega2.radius:
            raise ValueError("need R1 < R2")
        if not self.omega1.contains(self.x, strict=True):
            raise ValueError("x must lie strictly inside the inner sphere")

    @property
    def dim(self):
        return self.omega1.dim

    @property
    def rho(self):
        return float(np.linalg.norm(np.asarray(self.x) - self.omega1.c))


def two_sphere_config(dim: int = 3, center=None, r1: float = 1.0,
                      r2: float = 2.0, x=None) -> TwoSphereConfig:
    c = [0.0] * dim if center is None else list(center)
    xx = tuple(c) if x is None else tuple(float(v) for v in x)
    return TwoSphereConfig(xx, ball(c, r1), ball(c, r2))


@dataclass(frozen=True)
class Coefficients:
    alpha: float
    beta: float
    rho: float

    def __post_init__(self):
        if self.alpha - self.beta != 1.0:
            raise ValueError("coefficients must satisfy alpha - beta = 1")


def coefficients(cfg: TwoSphereConfig) -> Coefficients:
    """alpha = (R2^2 - rho^2)/(R2^2 - R1^2), beta the same with R1; beta is
    computed as alpha - 1 so the defining identity holds exactly in floats
    (the direct formula agrees to 1e-15 and the exactness is what lets
    sweeps cancel symbolically)."""
    r1, r2, rho = cfg.omega1.radius, cfg.omega2.radius, cfg.rho
    alpha = (r2 * r2 - rho * rho) / (r2 * r2 - r1 * r1)
    return Coefficients(alpha=alpha, beta=alpha - 1.0, rho=rho)


@dataclass
class VerificationReport:
    name: str
    residuals: list  # of (label, value)
    tolerance: float
    metadata: dict = field(default_factory=dict)

    @property
    def max_abs(self) -> float:
        return max((abs(v) for _, v in self.residuals), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residuals": [[label, value] for label, value in self.residuals],
            "max_abs": self.max_abs,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "metadata": dict(self.metadata),
        }

    def __str__(self):
        state = "PASS" if self.passed else "FAIL"
        return (f"[{state}] {self.name}: max |residual| = {self.max_abs:.3e} "
                f"(tolerance {self.tolerance:.1e}, {len(self.residuals)} checks)")


# -- constructors --------------------------------------------------------------

def two_sphere_binormal(cfg: TwoSphereConfig) -> SignedMeasure:
    """epsilon_x - alpha mu1_x + beta mu2_x; annihilates biharmonic pairs on a
    neighborhood of the closed outer ball and has total mass zero."""
    co = coefficients(cfg)
    return (dirac(cfg.x)
            - co.alpha * harmonic_measure(cfg.omega1, cfg.x)
            + co.beta * harmonic_measure(cfg.omega2, cfg.x))


def superposed_binormal(nu: SignedMeasure, radius_pairs) -> SignedMeasure:
    """Superposition of centered two-sphere measures over the atoms of nu.

    ``radius_pairs`` is one (R1, R2) per atom; each atom x contributes
    w * (epsilon_x - alpha mu^{B(x,R1)}_x + beta mu^{B(x,R2)}_x) with the
    centered coefficients alpha = R2^2/(R2^2 - R1^2), beta = alpha - 1.
    """
    atoms = [(w, c) for w, c in nu.terms]
    if len(atoms) != len(radius_pairs):
        raise ValueError("need one radius pair per atom")
    out = SignedMeasure(())
    for (w, comp), (r1, r2) in zip(atoms, radius_pairs):
        if not isinstance(comp, PointMass):
            raise ValueError("superposed_binormal expects an atomic measure")
        if not 0 < r1 < r2:
            raise ValueError("need 0 < R1 < R2 per atom")
        cfg = TwoSphereConfig(comp.location,
                              ball(comp.location, r1), ball(comp.location, r2))
        out = out + w * two_sphere_binormal(cfg)
    return out


def choquet_deny_prime(lam: SignedMeasure, E: Ball,
                       kernel: str = "newtonian") -> SignedMeasure:
    """Density measure lambda' = U^lambda dtau on the ball E, where U is the
    Newtonian potential of lambda (or the Dirichlet Green potential of E for
    kernel='ball-green', atoms only)."""
    n = E.dim
    if n not in (2, 3):
        raise ValueError("density construction implemented for dim 2 and 3")
    support = lam.bounding_ball()
    if np.linalg.norm(support.c - E.c) + support.radius > E.radius * (1 + 1e-9):
        raise ValueError("measure support must lie inside the closed ball E")
    if kernel == "newtonian":
        def density(pts):
            pts2 = np.atleast_2d(np.asarray(pts, dtype=float))
            out = np.array([newtonian_potential(lam, p) for p in pts2])
            return out if np.asarray(pts).ndim > 1 else float(out[0])
    elif kernel == "ball-green":
        atoms = [(w, np.asarray(c.location)) for w, c in lam.terms]
        if not all(isinstance(c, PointMass) for _, c in lam.terms):
            raise ValueError("ball-green density needs an atomic measure")

        def density(pts):
            pts2 = np.atleast_2d(np.asarray(pts, dtype=float))
            out = np.zeros(pts2.shape[0])
            for w, z in atoms:
                out += w * kernels.ball_green(E, z, pts2)
            return out if np.asarray(pts).ndim > 1 else float(out[0])
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return SignedMeasure(((1.0, VolumeDensity(E, density)),))


# -- exterior grids ------------------------------------------------------------

def _fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count)
    z = 1.0 - (2.0 * k + 1.0) / count
    theta = math.pi * (3.0 - math.sqrt(5.0)) * k
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(theta), s * np.sin(theta), z], axis=1)


def default_exterior_grid(K: CompactSupport, extra_points=()) -> np.ndarray:
    """Three concentric shells at 1.2, 2 and 5 times the support radius with
    36 deterministic points each, plus any user-supplied points."""
    n = K.dim
    if n == 2:
        theta = 2.0 * np.pi * np.arange(DEFAULT_POINTS_PER_SHELL) / DEFAULT_POINTS_PER_SHELL
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    elif n == 3:
        dirs = _fibonacci_sphere(DEFAULT_POINTS_PER_SHELL)
    else:
        raise ValueError("default grids implemented for dim 2 and 3")
    shells = [K.ball.c + f * K.radius * dirs for f in DEFAULT_SHELLS]
    pts = np.vstack(shells)
    if len(extra_points):
        pts = np.vstack([pts, np.atleast_2d(np.asarray(extra_points, dtype=float))])
    return pts


def _require_exterior(K: CompactSupport, grid: np.ndarray):
    d = np.linalg.norm(grid - K.ball.c, axis=1)
    if np.any(d <= K.radius * (1 + 1e-12)):
        bad = grid[int(np.argmin(d))]
        raise ValueError(f"grid point {tuple(bad)} lies inside the support ball")


# -- potential residuals -------------------------------------------------------

def _newtonian_profile(r, n):
    if n == 2:
        return -np.log(r) / (2.0 * np.pi)
    from .geometry import surface_area
    return r ** (2 - n) / ((n - 2) * surface_area(n))


def _biharm_profile(r, n):
    if n == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, r * r * np.log(np.maximum(r, 1e-300)), 0.0)
        return out / (8.0 * np.pi)
    if n == 3:
        return r
    return r ** (4 - n)


def _component_residuals(comp, grid: np.ndarray, profile, quad_order: int) -> np.ndarray:
    """integral of profile(|z - y|) d(comp)(z) for every grid point y."""
    n = comp.dim
    if isinstance(comp, PointMass):
        r = np.linalg.norm(grid - np.asarray(comp.location), axis=1)
        return profile(r, n)
    if isinstance(comp, HarmonicMeasure):
        rule = sphere_quadrature(comp.ball, quad_order)
        from .measures import poisson_density
        dens = poisson_density(comp.ball, comp.base, rule.nodes)
        r = np.linalg.norm(rule.nodes[:, None, :] - grid[None, :, :], axis=2)
        return (rule.weights * dens) @ profile(r, n)
    raise ValueError(f"potential residuals not implemented for "
                     f"{type(comp).__name__}")


def potential_residuals(m: SignedMeasure, grid: np.ndarray, which: str,
                        quad_order: int) -> np.ndarray:
    """Quadrature values of the 'w' (biharmonic-profile) or 'p' (Newtonian)
    potential of m at each grid point; this is the numeric verification
    path, independent of the closed-form potential helpers."""
    profile = _biharm_profile if which == "w" else _newtonian_profile
    out = np.zeros(len(grid))
    for w, comp in m.terms:
        out += w * _component_residuals(comp, grid, profile, quad_order)
    return out


# -- verifiers -----------------------------------------------------------------

def verify_pure_binormal(lam: SignedMeasure, K: CompactSupport, grid=None,
                         quad_order: int = DEFAULT_VERIFY_ORDER,
                         tolerance: float = DEFAULT_TOLERANCE) -> VerificationReport:
    """Check that the pair (lambda, 0) is pure binormal for K: both the
    biharmonic-profile potential and the Newtonian potential of lambda vanish
    on an exterior grid."""
    if grid is None:
        grid = default_exterior_grid(K)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    _require_exterior(K, grid)
    rw = potential_residuals(lam, grid, "w", quad_order)
    rp = potential_residuals(lam, grid, "p", quad_order)
    residuals = [(f"w[{i}]", float(v)) for i, v in enumerate(rw)]
    residuals += [(f"p[{i}]", float(v)) for i, v in enumerate(rp)]
    return VerificationReport(
        name="pure-binormal potential criterion",
        residuals=residuals, tolerance=tolerance,
        metadata={"grid_size": len(grid), "quad_order": quad_order,
                  "dim": K.dim})


def verify_2normal(mu: SignedMeasure, K: CompactSupport, grid=None,
                   quad_order: int = DEFAULT_VERIFY_ORDER,
                   tolerance: float = DEFAULT_TOLERANCE) -> VerificationReport:
    """Check 2-normality: the Newtonian potential of mu vanishes off K."""
    if grid is None:
        grid = default_exterior_grid(K)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    _require_exterior(K, grid)
    rp = potential_residuals(mu, grid, "p", quad_order)
    residuals = [(f"p[{i}]", float(v)) for i, v in enumerate(rp)]
    return VerificationReport(
        name="2-normal potential criterion",
        residuals=residuals, tolerance=tolerance,
        metadata={"grid_size": len(grid), "quad_order": quad_order,
                  "dim": K.dim})


def _weak_test_functions(dim: int, count: int = 10) -> list:
    """Deterministic polynomial test battery of degree <= 6."""
    from .funczoo import PolyFunction
    funcs = [PolyFunction.constant(dim, 1), PolyFunction.radius_sq(dim)]
    for k in range(1, 4):
        funcs.append(PolyFunction.variable(dim, 0) ** k)
        funcs.append(PolyFunction.variable(dim, 1) ** k)
    funcs.append(PolyFunction.variable(dim, 0) ** 2 * PolyFunction.variable(dim, 1))
    funcs.append(PolyFunction.radius_sq(dim) ** 3)
    return funcs[:count]


def verify_sweep_decomposition(cfg: TwoSphereConfig,
                               quad_order: int = 64,
                               tolerance: float = DEFAULT_TOLERANCE) -> VerificationReport:
    """Split lambda into interior part xi = epsilon_x - alpha mu1_x and
    boundary part sigma = beta mu2_x, sweep xi onto the complement of the
    closed outer ball, and check weakly that the sweep equals -sigma."""
    co = coefficients(cfg)
    K = CompactSupport(cfg.omega2)
    xi = dirac(cfg.x) - co.alpha * harmonic_measure(cfg.omega1, cfg.x)
    sigma = co.beta * harmonic_measure(cfg.omega2, cfg.x)
    swept = sweep_harmonic(xi, K)
    residuals = []
    for j, f in enumerate(_weak_test_functions(cfg.dim)):
        a = integrate(swept, f, quad_order=quad_order)
        b = -integrate(sigma, f, quad_order=quad_order)
        residuals.append((f"f[{j}]", a - b))
    residuals.append(("mass", total_mass(swept) - (-total_mass(sigma))))
    return VerificationReport(
        name="sweep decomposition", residuals=residuals, tolerance=tolerance,
        metadata={"quad_order": quad_order, "dim": cfg.dim,
                  "alpha": co.alpha, "beta": co.beta})


def generator_nodes(cfg: TwoSphereConfig, m: int):
    """Discretization (z_j, w_j) of mu^{omega1}_x by m nodes on the inner
    sphere; weights are quadrature weights times the Poisson density."""
    if m < 2:
        raise ValueError("need at least 2 generator nodes")
    n = cfg.dim
    from .measures import poisson_density
    if n == 2:
        theta = 2.0 * np.pi * np.arange(m) / m
        nodes = cfg.omega1.c + cfg.omega1.radius * np.stack(
            [np.cos(theta), np.sin(theta)], axis=1)
        base_w = np.full(m, 1.0 / m)
    elif n == 3:
        order = 3
        while True:
            rule = sphere_quadrature(cfg.omega1, order)
            if len(rule.weights) >= m:
                break
            order += 2
        nodes, base_w = rule.nodes, rule.weights
    else:
        raise ValueError("generator nodes implemented for dim 2 and 3")
    dens = poisson_density(cfg.omega1, cfg.x, nodes)
    return nodes, base_w * dens


def generator_expansion(cfg: TwoSphereConfig, m: int,
                        test_functions=None, quad_order: int = 64,
                        tolerance: float = DEFAULT_TOLERANCE):
    """Finite combination of sweep generators epsilon_z - mu^{omega2}_z that
    approximates the two-sphere measure:

        lambda_m = (epsilon_x - mu2_x) - alpha * sum_j w_j (epsilon_{z_j} - mu2_{z_j})

    Returns the measure together with a weak-error report against the exact
    two-sphere measure.
    """
    co = coefficients(cfg)
    nodes, wts = generator_nodes(cfg, m)
    lam_m = dirac(cfg.x) - harmonic_measure(cfg.omega2, cfg.x)
    for z, w in zip(nodes, wts):
        lam_m = lam_m - co.alpha * w * (dirac(z) - harmonic_measure(cfg.omega2, z))
    lam_m = lam_m.simplify()
    lam = two_sphere_binormal(cfg)
    if test_functions is None:
        test_functions = _weak_test_functions(cfg.dim)
    residuals = []
    for j, f in enumerate(test_functions):
        a = integrate(lam_m, f, quad_order=quad_order)
        b = integrate(lam, f, quad_order=quad_order)
        residuals.append((f"f[{j}]", a - b))
    report = VerificationReport(
        name=f"generator expansion (m={len(wts)})", residuals=residuals,
        tolerance=tolerance,
        metadata={"m": int(len(wts)), "quad_order": quad_order, "dim": cfg.dim})
    return lam_m, report


def generator_value(cfg: TwoSphereConfig, m: int, f,
                    quad_order: int = 64) -> float:
    """integral of f against lambda_m, sharing one outer-sphere rule across
    all generator nodes (fast path for convergence studies):

        f(x) - mu2_x(f) - alpha * sum_j w_j (f(z_j) - mu2_{z_j}(f)).
    """
    co = coefficients(cfg)
    nodes, wts = generator_nodes(cfg, m)
    rule = sphere_quadrature(cfg.omega2, quad_order)
    fvals = eval_field(f, rule.nodes)
    n = cfg.dim

    # Poisson kernel of omega2 evaluated from base points {x} union nodes
    bases = np.vstack([np.asarray(cfg.x)[None, :], nodes])
    rho2 = np.sum((bases - cfg.omega2.c) ** 2, axis=1)
    r = np.linalg.norm(rule.nodes[None, :, :] - bases[:, None, :], axis=2)
    pk = (cfg.omega2.radius**2 - rho2[:, None]) * cfg.omega2.radius ** (n - 2) / r**n
    mu2 = pk @ (rule.weights * fvals)
    fx = float(eval_field(f, np.asarray(cfg.x)[None, :])[0])
    fz = eval_field(f, nodes)
    return (fx - mu2[0]) - co.alpha * float(wts @ (fz - mu2[1:]))


def default_interior_probes(E: Ball, count: int = 5) -> np.ndarray:
    """Deterministic interior probe points on a coarse spiral."""
    n = E.dim
    fractions = np.linspace(0.15, 0.75, count)
    if n == 2:
        theta = np.linspace(0.3, 5.5, count)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        dirs = _fibonacci_sphere(count)
    return E.c + fractions[:, None] * E.radius * dirs


def verify_choquet_deny(lam: SignedMeasure, E: Ball, probes=None,
                        quad_order: int = 48,
                        tolerance: float = 1e-6) -> VerificationReport:
    """Iterated-kernel consistency of the density construction with the ball
    Green function: at each probe y, the Green potential of the density
    measure lambda' (one explicit volume quadrature with pole-aware patches)
    must match sum_i w_i G2B(y, z_i) computed by the iterated kernel.
    """
    if not all(isinstance(c, PointMass) for _, c in lam.terms):
        raise ValueError("the consistency check needs an atomic measure")
    atoms = [(w, np.asarray(c.location)) for w, c in lam.terms]
    lam_prime = choquet_deny_prime(lam, E, kernel="ball-green")
    density = lam_prime.terms[0][1].density
    if probes is None:
        probes = default_interior_probes(E)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    residuals = []
    for i, y in enumerate(probes):
        if not E.contains(y, strict=True):
            raise ValueError(f"probe point {tuple(y)} is not interior to E")

        def integrand(pts, y=y):
            return kernels.ball_green(E, y, pts) * np.asarray(density(pts))

        lhs = singular_ball_integral(E, integrand,
                                     poles=[y] + [z for _, z in atoms],
                                     sphere_order=quad_order)
        rhs = sum(w * kernels.iterated_ball_green(E, y, z, quad_order=quad_order)
                  for w, z in atoms)
        residuals.append((f"fubini[{i}]", lhs - rhs))
    return VerificationReport(
        name="iterated-kernel density consistency", residuals=residuals,
        tolerance=tolerance,
        metadata={"quad_order": quad_order, "dim": E.dim,
                  "probes": len(probes), "atoms": len(atoms)})


def mean_value_defect(cfg: TwoSphereConfig, f, quad_order: int = 64) -> float:
    """Two-sphere mean-value defect alpha * mu1(f) - beta * mu2(f) - f(x);
    zero exactly when f extends to a biharmonic pair near the outer ball."""
    co = coefficients(cfg)
    m1 = harmonic_measure(cfg.omega1, cfg.x)
    m2 = harmonic_measure(cfg.omega2, cfg.x)
    fx = float(eval_field(f, np.asarray(cfg.x)[None, :])[0])
    return (co.alpha * integrate(m1, f, quad_order=quad_order)
            - co.beta * integrate(m2, f, quad_order=quad_order) - fx)
