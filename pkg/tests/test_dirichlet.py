import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regimepricer.dirichlet import (
    laplace_exact,
    laplace_taylor,
    simplex_moment,
    taylor_remainder_bound,
)

from oracles import laplace_bidiagonal, simplex_moment_quadrature, simplex_quadrature


class TestExact:
    def test_unit_mass_at_zero(self):
        assert laplace_exact([0.0]) == pytest.approx(1.0, abs=1e-15)

    def test_one_dimensional_closed_form(self):
        # (1 - e^-a)/a, via an independent quadrature oracle as well
        val = laplace_exact([1.0])
        assert val == pytest.approx(0.6321205588285577, abs=1e-12)
        assert val == pytest.approx(simplex_quadrature([1.0]), abs=1e-12)

    def test_two_dimensional_vs_quadrature(self):
        assert laplace_exact([0.3, 0.7]) == pytest.approx(
            simplex_quadrature([0.3, 0.7]), abs=1e-10)

    @pytest.mark.parametrize("x", [
        [0.5, 0.5],                      # exact duplicate
        [0.0, 1.2],                      # duplicate with the built-in zero node
        [1.0, 1.0 + 5e-7, 2.0],          # near-confluent pair
        [-1.0, 2.0, 0.3, -0.4],          # mixed signs
        [3.0, -3.0, 1.5, 0.2, -1.1],     # m = 5
    ])
    def test_against_quadrature(self, x):
        assert laplace_exact(x) == pytest.approx(simplex_quadrature(x), abs=5e-12)

    def test_against_matrix_function_identity(self, rng):
        for m in range(1, 7):
            x = rng.uniform(-2, 2, m)
            assert laplace_exact(x) == pytest.approx(laplace_bidiagonal(x),
                                                     abs=1e-10)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            laplace_exact([])
        with pytest.raises(ValueError):
            laplace_exact([np.inf])


class TestProperties:
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=6),
           st.permutations(range(6)))
    @settings(max_examples=200, deadline=None)
    def test_permutation_symmetry(self, xs, perm):
        x = np.array(xs)
        shuffled = x[[p for p in perm if p < len(x)]]
        assert laplace_exact(shuffled) == pytest.approx(laplace_exact(x),
                                                        rel=1e-12, abs=1e-12)

    @given(st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=5),
           st.lists(st.floats(0, 1), min_size=5, max_size=5))
    @settings(max_examples=200, deadline=None)
    def test_componentwise_monotone_decreasing(self, xs, bumps):
        x = np.array(xs)
        y = x + np.array(bumps[:len(x)])
        assert laplace_exact(y) <= laplace_exact(x) + 1e-12

    @given(st.integers(1, 6))
    @settings(deadline=None)
    def test_zero_argument_is_one(self, m):
        assert laplace_exact([0.0] * m) == pytest.approx(1.0, abs=1e-14)

    @given(st.lists(st.floats(0, 3), min_size=1, max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_arguments_bounded(self, xs):
        val = laplace_exact(xs)
        assert 0.0 < val <= 1.0 + 1e-14


class TestMoments:
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("i", [1, 2, 3, 4])
    def test_single_coordinate_moment(self, m, i):
        # m! i!/(m+i)!, cross-checked by quadrature
        closed = simplex_moment(m, [i])
        assert closed == pytest.approx(
            math.factorial(m) * math.factorial(i) / math.factorial(m + i))
        n_nodes = 10 if m >= 5 else 24
        assert closed == pytest.approx(
            simplex_moment_quadrature(m, [i], n_nodes=n_nodes), rel=1e-8)

    def test_mixed_moment(self):
        assert simplex_moment(3, [1, 2]) == pytest.approx(
            simplex_moment_quadrature(3, [1, 2]), rel=1e-10)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            simplex_moment(2, [1, 1, 1])
        with pytest.raises(ValueError):
            simplex_moment(0, [1])


def _taylor_by_enumeration(x, p):
    """Term-by-term multinomial expansion; the slow reference."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    total = 0.0
    for ell in range(p + 1):
        coeff = 0.0
        for ks in itertools.product(range(ell + 1), repeat=m):
            if sum(ks) != ell:
                continue
            multinom = math.factorial(ell)
            term = 1.0
            for k, xi in zip(ks, x):
                multinom //= math.factorial(k)
                term *= xi ** k
            coeff += multinom * term * simplex_moment(m, ks)
        total += (-1) ** ell * coeff / math.factorial(ell)
    return total


class TestTaylor:
    def test_zeroth_order_is_total_mass(self):
        for m in (1, 2, 3):
            assert laplace_taylor([0.4] * m, 0) == 1.0

    def test_first_order_two_arguments(self):
        # 1 - (x1 + x2)/3
        x1, x2 = 0.3, 0.7
        assert laplace_taylor([x1, x2], 1) == pytest.approx(1 - (x1 + x2) / 3)

    def test_second_order_two_arguments(self):
        x1, x2 = 0.3, 0.7
        expected = (1 - (x1 + x2) / 3
                    + (x1 ** 2 + x2 ** 2 + x1 * x2) / 12.0)
        assert laplace_taylor([x1, x2], 2) == pytest.approx(expected, abs=1e-15)

    def test_matches_multinomial_enumeration(self, rng):
        for m in (1, 2, 3, 4):
            for p in (0, 1, 2, 3, 4):
                x = rng.uniform(-1, 1, m)
                assert laplace_taylor(x, p) == pytest.approx(
                    _taylor_by_enumeration(x, p), rel=1e-12, abs=1e-12)

    def test_order_guard(self):
        with pytest.raises(ValueError):
            laplace_taylor([0.1], 9)
        assert laplace_taylor([0.1], 9, max_order=12) > 0
        with pytest.raises(ValueError):
            laplace_taylor([0.1], -1)


class TestRemainderBound:
    def test_zero_argument(self):
        assert taylor_remainder_bound([0.0], 0) == 0.0

    @pytest.mark.parametrize("x,p", [
        ([0.3, 0.7], 2),
        ([0.1, 0.1, 0.1, 0.1], 1),
        ([1.5, -0.5], 0),
    ])
    def test_bound_dominates_observed_error(self, x, p):
        err = abs(laplace_exact(x) - laplace_taylor(x, p))
        # the bound is attained for m = 1 with negative arguments, so the
        # comparison needs a relative rounding allowance
        assert err <= taylor_remainder_bound(x, p) * (1 + 1e-12) + 1e-15

    def test_sweep_bound_containment(self, rng):
        # every (m <= 6, |x| <= 2, p <= 4) combination drawn at random
        for m in range(1, 7):
            for p in range(5):
                for _ in range(20):
                    x = rng.uniform(-1, 1, m)
                    x *= rng.uniform(0, 2) / max(np.linalg.norm(x), 1e-12)
                    err = abs(laplace_exact(x) - laplace_taylor(x, p))
                    bound = taylor_remainder_bound(x, p)
                    assert err <= bound * (1 + 1e-12) + 1e-15
