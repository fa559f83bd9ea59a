from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cached_branch
from mfgseg.asymptotics import segregation_metric
from mfgseg.grid1d import Grid, normalize
from mfgseg.hopfcole import MFGState, mfg_residuals, segregation_from_mfg, to_mfg
from mfgseg.interactions import InteractionPair, RationalPerturbed, linear_pair
from mfgseg.nash import SolutionState, trivial_state
from oracles import observed_order

RATIONAL = InteractionPair(RationalPerturbed(1.0, 0.3, 0.5), RationalPerturbed(2.0, 0.2, 0.4))


def test_trivial_map():
    m = to_mfg(trivial_state(Grid(32), 0.5, RATIONAL))
    assert m.nu_tilde == 0.5
    assert np.all(m.m1 == 1.0) and np.all(m.u1 == 0.0)
    assert m.lambda1 == float(RATIONAL.g1(1.0))
    assert all(v == 0.0 for v in mfg_residuals(m, RATIONAL).values())


@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 10.0))
def test_round_trip(seed, nu):
    g = Grid(64)
    rng = np.random.default_rng(seed)
    v1 = normalize(g, rng.uniform(0.01, 3.0, 64))
    v2 = normalize(g, rng.uniform(0.01, 3.0, 64))
    s = SolutionState(nu, v1, v2, 0.7, 1.3, g)
    back = to_mfg(s).to_state()
    assert np.max(np.abs(back.v1 - v1)) <= 1e-14
    assert np.max(np.abs(back.v2 - v2)) <= 1e-14
    assert back.nu == pytest.approx(nu, rel=1e-15)
    assert segregation_from_mfg(to_mfg(s)) == pytest.approx(segregation_metric(s), rel=1e-13)


def test_rejects_nonpositive_fields():
    g = Grid(16)
    v = normalize(g, np.linspace(-0.1, 1, 16) + 0.1)
    with pytest.raises(ValueError):
        to_mfg(SolutionState(0.1, v, v, 1, 1, g))
    with pytest.raises(ValueError):
        MFGState(0.1, np.full(16, 2.0), np.ones(16), np.zeros(16), np.zeros(16), 1, 1, g)


def test_fokker_planck_residual_is_a_discretization_artifact():
    errs = []
    for M in (128, 256, 512):
        g = Grid(M)
        v = normalize(g, 1 + 0.3 * np.cos(np.pi * g.nodes))
        res = mfg_residuals(to_mfg(SolutionState(0.02, v, v, 1.0, 1.0, g)), linear_pair())
        errs.append(res["fp1"])
    assert np.all(observed_order(errs, [1 / 128, 1 / 256, 1 / 512]) > 1.9)


@pytest.mark.parametrize("mean", ["geometric", "arithmetic"])
def test_residuals_second_order_on_branch_point(mean):
    hjb, fp = [], []
    for M in (256, 512, 1024):
        br = cached_branch((1.0, 3.0), 1, 1e-2, M)
        res = mfg_residuals(to_mfg(br.points[-1].state), br.pair, edge_mean=mean)
        hjb.append(max(res["hjb1"], res["hjb2"]))
        fp.append(max(res["fp1"], res["fp2"]))
    hs = [1 / 256, 1 / 512, 1 / 1024]
    assert np.all(observed_order(hjb, hs) > 1.9)
    assert np.all(observed_order(fp, hs) > 1.9)


def test_unknown_edge_mean():
    m = to_mfg(trivial_state(Grid(16), 0.5, linear_pair()))
    with pytest.raises(ValueError):
        mfg_residuals(m, linear_pair(), edge_mean="harmonic")


def test_masses_inherited():
    br = cached_branch((1.0, 1.0), 1, 1e-3, 256)
    m = to_mfg(br.points[-1].state)
    assert m.nu_tilde == pytest.approx(math.sqrt(1e-3 / 2))
    assert abs(m.grid.h * m.m1.sum() - 1) < 1e-10
