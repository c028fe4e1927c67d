"""Numerical potential theory on balls in R^n: signed measures and balayage,
harmonic and biharmonic kernels, mean-value verifiers for binormal measures,
and walk-on-spheres Monte Carlo solvers."""

from .geometry import (Ball, QuadratureRule, as_point, ball, mc_sphere_samples,
                       sphere_quadrature, surface_area)
from .measures import (CompactSupport, HarmonicMeasure, PointMass,
                       SignedMeasure, SurfaceDensity, VolumeDensity,
                       closed_ball, dirac, harmonic_measure, integrate,
                       newtonian_potential, poisson_density,
                       riquier_coupling_mass, sweep_harmonic, total_mass,
                       uniform_sphere)
from .kernels import (ball_green, biharm_fundamental, iterated_ball_green,
                      newtonian, riesz_iterated)
from .funczoo import (BiharmonicPair, PolyFunction, almansi_pair,
                      gamma1_estimate, harmonic_basis, laplacian, parse_poly,
                      sphere_average)

__version__ = "0.1.0"
