import math

import numpy as np
import pytest

from binormal.geometry import ball, singular_ball_integral
from binormal.kernels import (ball_green, biharm_fundamental,
                              biharm_laplacian_constants, iterated_ball_green,
                              newtonian, riesz_constant, riesz_iterated)

from oracles import (fd_laplacian, iterated_green_center_exact,
                     mean_distance_to_sphere)


class TestNewtonian:
    def test_unit_distance_3d(self):
        v = newtonian(np.zeros(3), np.array([1.0, 0, 0]), 3)
        assert v == pytest.approx(1.0 / (4 * math.pi), abs=1e-16)
        assert v == pytest.approx(0.07957747154594767, abs=1e-16)

    def test_unit_distance_2d_is_zero(self):
        assert newtonian(np.zeros(2), np.array([0.0, 1.0]), 2) == 0.0

    def test_symmetry_exact(self, np_rng):
        for _ in range(100):
            x, y = np_rng.normal(size=3), np_rng.normal(size=3)
            assert newtonian(x, y, 3) == newtonian(y, x, 3)

    def test_singularity_raises(self):
        with pytest.raises(ZeroDivisionError):
            newtonian(np.zeros(3), np.zeros(3), 3)

    @pytest.mark.parametrize("n,y", [(2, [0.7, -0.1]), (3, [0.5, 0.5, 0.5])])
    def test_harmonic_off_pole(self, np_rng, n, y):
        y = np.array(y, dtype=float)
        for _ in range(5):
            x = y + np_rng.normal(size=n) * 2.0
            while np.linalg.norm(x - y) < 0.5:
                x = y + np_rng.normal(size=n) * 2.0
            lap = fd_laplacian(lambda p: newtonian(p, y, n), x, h=1e-3)
            assert abs(lap) < 1e-4


class TestBallGreen:
    def test_center_formula(self):
        b = ball([0, 0, 0], 1.0)
        v = ball_green(b, np.zeros(3), np.array([0.5, 0, 0]))
        assert v == pytest.approx(1.0 / (4 * math.pi), rel=1e-14)

    def test_vanishes_at_boundary(self):
        b = ball([0, 0, 0], 1.0)
        y = np.array([1.0 - 1e-10, 0, 0])
        assert abs(ball_green(b, np.array([0.2, 0.1, 0.0]), y)) < 1e-9

    def test_symmetry(self, np_rng):
        for dim in (2, 3):
            b = ball([0.0] * dim, 1.0)
            for _ in range(100):
                x = np_rng.uniform(-0.6, 0.6, dim)
                y = np_rng.uniform(-0.6, 0.6, dim)
                if np.linalg.norm(x - y) < 1e-3:
                    continue
                assert ball_green(b, x, y) == pytest.approx(ball_green(b, y, x),
                                                            abs=1e-12)

    def test_rejects_exterior_points(self):
        b = ball([0, 0, 0], 1.0)
        with pytest.raises(ValueError):
            ball_green(b, np.array([2.0, 0, 0]), np.zeros(3))

    def test_positive_inside(self, np_rng):
        b = ball([0, 0], 2.0)
        for _ in range(50):
            x, y = np_rng.uniform(-1, 1, 2), np_rng.uniform(-1, 1, 2)
            if np.linalg.norm(x - y) < 1e-6:
                continue
            assert ball_green(b, x, y) >= 0.0


class TestBiharmFundamental:
    def test_2d_zero_at_unit_distance(self):
        assert biharm_fundamental(np.zeros(2), np.array([1.0, 0.0]), 2) == 0.0

    def test_3d_is_distance(self):
        assert biharm_fundamental(np.array([3.0, 0, 0]), np.zeros(3), 3) == 3.0

    def test_dim4_excluded(self):
        with pytest.raises(ValueError):
            biharm_fundamental(np.zeros(4), np.ones(4), 4)

    def test_mean_distance_annihilation_value(self):
        # two-sphere cancellation at y = (3,0,0): exterior mean distances obey
        # d + R^2/(3d), so 3 - (4/3)(3 + 1/9) + (1/3)(3 + 4/9) = 0
        d = 3.0
        val = d - (4.0 / 3.0) * mean_distance_to_sphere(d, 1.0) \
            + (1.0 / 3.0) * mean_distance_to_sphere(d, 2.0)
        assert abs(val) < 1e-15

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_laplacian_affine_in_newtonian(self, np_rng, n):
        a, b = biharm_laplacian_constants(n)
        y = np.zeros(n)
        for _ in range(5):
            x = np_rng.normal(size=n)
            x *= (0.8 + np_rng.uniform()) / np.linalg.norm(x)
            lap = fd_laplacian(lambda p: biharm_fundamental(p, y, n), x, h=1e-3)
            model = a * newtonian(x, y, n) + b
            assert abs(lap - model) < 1e-3 * max(1.0, abs(model))


class TestRieszIterated:
    def test_proportional_to_biharm(self, np_rng):
        ratios = []
        for _ in range(100):
            x, y = np_rng.normal(size=5), np_rng.normal(size=5)
            ratios.append(riesz_iterated(x, y, 5) / biharm_fundamental(x, y, 5))
        ratios = np.array(ratios)
        assert np.all(ratios > 0)
        assert np.max(np.abs(ratios - ratios[0])) < 1e-12 * abs(ratios[0])

    def test_symmetry_exact(self, np_rng):
        x, y = np_rng.normal(size=6), np_rng.normal(size=6)
        assert riesz_iterated(x, y, 6) == riesz_iterated(y, x, 6)

    def test_n5_value_at_distance_two(self):
        # c_5 = Gamma(1/2) / (16 pi^{5/2}) = 1 / (16 pi^2)
        c5 = riesz_constant(5)
        assert c5 == pytest.approx(1.0 / (16 * math.pi**2), rel=1e-15)
        v = riesz_iterated(np.zeros(5), np.array([2.0, 0, 0, 0, 0]), 5)
        assert v == pytest.approx(c5 / 2.0, rel=1e-15)

    def test_low_dim_rejected(self):
        with pytest.raises(ValueError):
            riesz_constant(4)


class TestIteratedBallGreen:
    def test_center_center_unit_ball(self):
        b = ball([0, 0, 0], 1.0)
        v = iterated_ball_green(b, np.zeros(3), np.zeros(3))
        assert v == pytest.approx(1.0 / (12 * math.pi), abs=1e-6)

    @pytest.mark.parametrize("n,rho", [(3, 0.3), (3, 0.7), (2, 0.4), (2, 0.8)])
    def test_center_to_point_closed_form(self, n, rho):
        b = ball([0.0] * n, 1.0)
        z = np.zeros(n)
        z[0] = rho
        v = iterated_ball_green(b, np.zeros(n), z)
        assert v == pytest.approx(iterated_green_center_exact(n, 1.0, rho), abs=2e-9)

    def test_symmetry_random_pairs(self, np_rng):
        b = ball([0, 0, 0], 1.0)
        for _ in range(20):
            x = np_rng.uniform(-0.55, 0.55, 3)
            y = np_rng.uniform(-0.55, 0.55, 3)
            if np.linalg.norm(x - y) < 0.1:
                y = y + np.array([0.25, 0.0, 0.0])
            va = iterated_ball_green(b, x, y, quad_order=32)
            vb = iterated_ball_green(b, y, x, quad_order=32)
            assert va == pytest.approx(vb, abs=1e-8)

    def test_positive_random_pairs(self, np_rng):
        b = ball([0, 0], 1.5)
        for _ in range(20):
            x = np_rng.uniform(-0.8, 0.8, 2)
            y = np_rng.uniform(-0.8, 0.8, 2)
            if np.linalg.norm(x - y) < 0.1:
                y = y + np.array([0.3, 0.0])
            assert iterated_ball_green(b, x, y, quad_order=32) > 0.0

    def test_fubini_identity_atomic_measure(self):
        # integral of G2B(y, .) against sum of atoms equals the volume integral
        # of G_B(y, x) * (atom potential)(x), within quadrature tolerance
        b = ball([0, 0, 0], 1.0)
        y = np.array([0.15, 0.1, 0.0])
        atoms = [(0.7, np.array([0.45, 0.0, 0.0])),
                 (-0.3, np.array([-0.2, 0.35, 0.0]))]
        lhs = sum(w * iterated_ball_green(b, y, z) for w, z in atoms)

        def inner(pts):
            u = np.zeros(pts.shape[0])
            for w, z in atoms:
                u += w * ball_green(b, z, pts)
            return ball_green(b, y, pts) * u

        rhs = singular_ball_integral(b, inner, poles=[y] + [z for _, z in atoms])
        assert lhs == pytest.approx(rhs, abs=1e-6)
