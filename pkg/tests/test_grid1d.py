from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mfgseg.grid1d import (
    Grid,
    NeumannLaplacian,
    cumulative_integral,
    derivative,
    dirichlet_energy,
    inner,
    integrate,
    node_derivative,
    normalize,
)
from oracles import observed_order

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_grid_rejects_coarse_or_fractional():
    for bad in (4, 7, 8.5, 0, -16):
        with pytest.raises(ValueError):
            Grid(bad)


def test_nodes_are_cell_centres_and_read_only():
    g = Grid(16)
    assert g.h == 1 / 16
    np.testing.assert_allclose(g.nodes, (np.arange(16) + 0.5) / 16)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0
    assert g.edges.size == 15


def test_field_shape_checked():
    with pytest.raises(ValueError):
        Grid(8).field(np.ones(9))


def test_laplacian_annihilates_constants():
    lap = NeumannLaplacian(Grid(32))
    assert np.max(np.abs(lap.apply(np.full(32, 3.7)))) == 0.0


def test_laplacian_dense_matches_apply():
    g = Grid(20)
    lap = NeumannLaplacian(g)
    f = np.sin(np.arange(20.0))
    np.testing.assert_allclose(lap.dense() @ f, lap.apply(f), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(lap.sparse() @ f, lap.apply(f), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_cosine_modes_are_exact_eigenvectors(k):
    g = Grid(64)
    lap = NeumannLaplacian(g)
    psi = np.cos(k * np.pi * g.nodes)
    np.testing.assert_allclose(lap.apply(psi), lap.eigenvalue(k) * psi, atol=1e-9 * lap.eigenvalue(k))


def test_eigenvalues_converge_at_second_order():
    errs, hs = [], []
    for M in (64, 128, 256, 512):
        lap = NeumannLaplacian(Grid(M))
        errs.append(abs(lap.eigenvalue(1) - np.pi**2))
        hs.append(1 / M)
    assert np.allclose(observed_order(errs, hs), 2.0, atol=0.02)


@given(arrays(float, 12, elements=finite), arrays(float, 12, elements=finite))
def test_summation_by_parts(f, g_):
    g = Grid(12)
    lap = NeumannLaplacian(g)
    lhs = inner(g, f, lap.apply(g_))
    rhs = g.h * np.dot(derivative(g, f), derivative(g, g_))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


@given(arrays(float, 10, elements=st.floats(0.1, 10)), st.floats(0.1, 5))
def test_normalize_sets_mass(f, mass):
    g = Grid(10)
    assert integrate(g, normalize(g, f, mass) ** 2) == pytest.approx(mass, rel=1e-12)


def test_dirichlet_energy_of_cosine():
    g = Grid(512)
    f = np.sqrt(2) * np.cos(np.pi * g.nodes)
    assert dirichlet_energy(g, f) == pytest.approx(NeumannLaplacian(g).eigenvalue(1), rel=1e-10)


def test_node_derivative_has_zero_boundary_faces():
    g = Grid(8)
    d = node_derivative(g, np.arange(8.0))
    assert d[0] == pytest.approx(0.5 / g.h)
    assert d[3] == pytest.approx(1 / g.h)


def test_cumulative_integral_anchored():
    g = Grid(200)
    a = g.nodes[100]
    F = cumulative_integral(g, 2 * g.nodes, anchor=a)
    np.testing.assert_allclose(F, g.nodes**2 - a**2, atol=1e-12)
    # between nodes the primitive is interpolated linearly
    F = cumulative_integral(g, 2 * g.nodes, anchor=0.5)
    np.testing.assert_allclose(F, g.nodes**2 - 0.25, atol=g.h**2)
