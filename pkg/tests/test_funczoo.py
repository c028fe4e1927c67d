from fractions import Fraction

import numpy as np
import pytest

from binormal.funczoo import (BiharmonicPair, PolyFunction, almansi_family,
                              almansi_pair, gamma1_estimate, harmonic_basis,
                              laplacian, parse_poly, sphere_average,
                              sphere_monomial_moment, zoo_list, zoo_member)

from oracles import poly_sphere_average


def P(expr, dim):
    return parse_poly(expr, dim)


class TestPolyAlgebra:
    def test_eval_and_arith(self):
        p = P("z1^2 - 2*z2 + 3", 2)
        assert p(np.array([2.0, 1.0])) == 4 - 2 + 3
        q = p * p
        assert q(np.array([2.0, 1.0])) == 25.0

    def test_exact_rational_coefficients(self):
        p = P("z1^2", 2) * 3
        assert all(isinstance(c, Fraction) for c in p.terms.values())

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            P("z1 $ z2", 2)
        with pytest.raises(ValueError):
            P("z5", 3)


class TestLaplacian:
    def test_z1_squared(self):
        assert laplacian(P("z1^2", 3)) == P("2", 3)

    def test_radius_squared(self):
        for n in (2, 3, 5):
            assert laplacian(PolyFunction.radius_sq(n)) == PolyFunction.constant(n, 2 * n)

    def test_radius_fourth(self):
        # symbolic expansion: laplacian |z|^4 = 4 (n + 2) |z|^2
        for n in (2, 3):
            r2 = PolyFunction.radius_sq(n)
            assert laplacian(r2 * r2) == 4 * (n + 2) * r2


class TestHarmonicBasis:
    def test_planar_degree_two_members(self):
        basis = harmonic_basis(2, 2)
        assert any(b == P("z1^2 - z2^2", 2) for b in basis)
        assert any(b == P("2*z1*z2", 2) for b in basis)

    @pytest.mark.parametrize("n", [2, 3])
    def test_all_exactly_harmonic(self, n):
        for b in harmonic_basis(n, 6):
            assert b.laplacian().is_zero()

    def test_planar_count_per_degree(self):
        basis = harmonic_basis(2, 5)
        by_deg = {}
        for b in basis:
            by_deg.setdefault(b.degree(), []).append(b)
        assert len(by_deg[0]) == 1
        for k in range(1, 6):
            assert len(by_deg[k]) == 2

    def test_solid_count_per_degree(self):
        basis = harmonic_basis(3, 4)
        by_deg = {}
        for b in basis:
            by_deg.setdefault(b.degree(), []).append(b)
        for k in range(5):
            assert len(by_deg[k]) == 2 * k + 1

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            harmonic_basis(2, 9)


class TestAlmansi:
    def test_h_one_q_zero(self):
        for n in (2, 3):
            pair = almansi_pair(PolyFunction.constant(n, 1), PolyFunction.constant(n, 0))
            assert pair.u1 == PolyFunction.radius_sq(n)
            assert pair.u2 == PolyFunction.constant(n, -2 * n)

    def test_degenerate_harmonic_pair(self):
        q = P("z1^2 - z2^2", 2)
        pair = almansi_pair(PolyFunction.constant(2, 0), q)
        assert pair.u1 == q and pair.u2.is_zero()

    def test_h_z1_in_3d(self):
        pair = almansi_pair(P("z1", 3), PolyFunction.constant(3, 0))
        assert pair.u2 == P("-10*z1", 3)
        assert pair.u2.laplacian().is_zero()

    def test_nonharmonic_rejected(self):
        with pytest.raises(ValueError):
            almansi_pair(P("z1^2", 2), PolyFunction.constant(2, 0))

    @pytest.mark.parametrize("n", [2, 3])
    def test_pair_identities_exact(self, n):
        for pair in almansi_family(n, 6):
            assert (pair.u1.laplacian() + pair.u2).is_zero()
            assert pair.u2.laplacian().is_zero()


class TestSphereAverage:
    def test_monomial_moment_values(self):
        assert sphere_monomial_moment((2, 0, 0), 3) == Fraction(1, 3)
        assert sphere_monomial_moment((4, 0, 0), 3) == Fraction(1, 5)
        assert sphere_monomial_moment((2, 2, 0), 3) == Fraction(1, 15)
        assert sphere_monomial_moment((1, 0), 2) == 0

    def test_radius_sq_average(self):
        p = PolyFunction.radius_sq(3)
        assert abs(sphere_average(p, [0, 0, 0], 2.0) - 4.0) < 1e-14

    def test_matches_independent_binomial_oracle(self, np_rng):
        for _ in range(5):
            terms = {}
            for _ in range(5):
                e = tuple(np_rng.integers(0, 3, size=3))
                terms[e] = float(np_rng.uniform(-1, 1))
            p = PolyFunction(3, terms)
            center = np_rng.uniform(-1, 1, 3)
            mine = sphere_average(p, center, 1.4)
            ref = poly_sphere_average(terms, 3, center, 1.4)
            assert abs(mine - ref) < 1e-12 * max(1.0, abs(ref))


class TestGamma1:
    @pytest.mark.parametrize("n", [2, 3])
    def test_quadratic_distance_recovers_minus_2n(self, n):
        x = np.zeros(n)
        p = PolyFunction.radius_sq(n)
        got = gamma1_estimate(p, x, [0.4, 0.2])
        assert abs(got - (-2 * n)) < 1e-6

    @pytest.mark.parametrize("n", [2, 3])
    def test_harmonic_input_gives_zero(self, n):
        h = P("z1^2 - z2^2", n) if n == 2 else P("z1*z2", 3)
        got = gamma1_estimate(h, np.zeros(n), [0.4, 0.2])
        assert abs(got) < 1e-8

    def test_quartic_vanishes_at_center(self):
        r2 = PolyFunction.radius_sq(3)
        got = gamma1_estimate(r2 * r2, np.zeros(3), [0.4, 0.2])
        assert abs(got) < 1e-10

    def test_pair_consistency_at_random_points(self, np_rng):
        # the shrinking-ball operator recovers u2 from u1 for biharmonic pairs
        for n in (2, 3):
            pairs = almansi_family(n, 4)
            idx = np_rng.choice(len(pairs), size=4, replace=False)
            for i in idx:
                pair = pairs[i]
                for _ in range(3):
                    x = np_rng.uniform(-0.5, 0.5, n)
                    got = gamma1_estimate(pair.u1, x, [0.3, 0.15])
                    assert abs(got - pair.u2(x)) < 1e-6

    def test_radii_must_decrease(self):
        with pytest.raises(ValueError):
            gamma1_estimate(PolyFunction.radius_sq(2), np.zeros(2), [0.1, 0.2])


class TestZoo:
    def test_almansi_identifier(self):
        pair = zoo_member("almansi:h=z1,q=0", 3)
        assert isinstance(pair, BiharmonicPair)
        assert pair.u2 == P("-10*z1", 3)

    def test_harmonic_identifier_validates(self):
        with pytest.raises(ValueError):
            zoo_member("harmonic:z1^2", 2)

    def test_list_mentions_syntax(self):
        entries = zoo_list(2, 2)
        assert any("almansi" in e for e in entries)
