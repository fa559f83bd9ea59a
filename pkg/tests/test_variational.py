from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfgseg.grid1d import Grid, integrate
from mfgseg.interactions import linear_pair
from mfgseg.nash import pde_residuals
from mfgseg.variational import (
    VariationalProblem,
    competitor,
    gamma_limit_reference,
    j_beta,
    minimize,
    monotone_gamma_check,
    to_nash,
)

TWO_PI2 = 2 * math.pi**2


def test_problem_validation():
    with pytest.raises(ValueError):
        VariationalProblem(0.0, 1.0, 1.0, Grid(16))
    with pytest.raises(ValueError):
        VariationalProblem(1.0, 1.0, -1.0, Grid(16))
    with pytest.raises(ValueError):
        monotone_gamma_check(1, 1, [50, 25], Grid(16))


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 1e3))
def test_energy_of_constants(g1, g2, beta):
    prob = VariationalProblem(g1, g2, beta, Grid(32))
    assert j_beta(prob, *prob.trivial()) == pytest.approx(g1 * g2 * beta, rel=1e-12)


def test_limit_profiles_carry_limit_energy():
    g = Grid(4096)
    ref = gamma_limit_reference(1.0, 1.0, g)
    assert ref.x0 == 0.5 and ref.c_inf == pytest.approx(TWO_PI2)
    V1, V2 = ref.profiles
    np.testing.assert_allclose(V1[g.nodes < 0.5], 2 * np.cos(np.pi * g.nodes[g.nodes < 0.5]))
    prob = VariationalProblem(1.0, 1.0, 1e3, g)
    assert j_beta(prob, V1, V2) == pytest.approx(TWO_PI2, rel=1e-3)
    assert gamma_limit_reference(1.0, 8.0).x0 == pytest.approx(2 / 3)


@given(st.floats(0.2, 10), st.floats(0.2, 10))
def test_reference_profiles_satisfy_constraints(g1, g2):
    g = Grid(2048)
    ref = gamma_limit_reference(g1, g2, g)
    V1, V2 = ref.profiles
    assert integrate(g, V1**2) == pytest.approx(g2, rel=5e-3)
    assert integrate(g, V2**2) == pytest.approx(g1, rel=5e-3)
    assert ref.c_inf == pytest.approx(math.pi**2 / 4 * (g1 ** (1 / 3) + g2 ** (1 / 3)) ** 3)


def test_small_beta_minimizer_is_trivial():
    prob = VariationalProblem(1.0, 1.0, 1.0, Grid(128))
    res = minimize(prob)
    assert not res.nontrivial
    assert res.c_beta == pytest.approx(1.0, abs=1e-12)


def test_above_threshold_minimizer_is_nontrivial():
    prob = VariationalProblem(1.0, 1.0, 25.0, Grid(128))
    res = minimize(prob)
    assert res.nontrivial and res.converged
    assert res.c_beta < TWO_PI2
    assert res.c_beta == j_beta(prob, res.vtilde1, res.vtilde2)
    assert integrate(prob.grid, res.vtilde1**2) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("gammas", [(1.0, 1.0), (1.0, 3.0)])
def test_minimizers_are_equilibria(gammas):
    prob = VariationalProblem(*gammas, 60.0, Grid(128))
    res = minimize(prob)
    st_ = to_nash(prob, res)
    assert st_.check(linear_pair(*gammas)) == []
    assert max(pde_residuals(st_, linear_pair(*gammas))) < 1e-9


def test_competitor_is_on_the_manifold():
    prob = VariationalProblem(2.0, 0.5, 10.0, Grid(64))
    a, b = competitor(prob)
    assert integrate(prob.grid, a**2) == pytest.approx(0.5)
    assert integrate(prob.grid, b**2) == pytest.approx(2.0)


def test_sweep_is_monotone_bounded_and_deterministic():
    g = Grid(128)
    betas = [25.0, 50.0, 100.0]
    c = monotone_gamma_check(1, 1, betas, g)
    assert np.all(np.diff(c) >= 0)
    assert max(c) <= TWO_PI2 * (1 + 10 * g.h**2)
    assert monotone_gamma_check(1, 1, betas, g) == c
