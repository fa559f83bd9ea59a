from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cached_branch
from mfgseg.asymptotics import (
    NotMonotone,
    aitken,
    apriori_bounds_check,
    count_critical_points,
    interface_report,
    joint_energy,
    limit_profile,
    profile_error,
    scaling_law_report,
    segregation_metric,
    trivial_joint_energy,
)
from mfgseg.grid1d import Grid, integrate, normalize
from mfgseg.interactions import linear_pair
from mfgseg.nash import SolutionState, trivial_state


def _state_from(grid, v1, v2):
    return SolutionState(0.1, normalize(grid, v1), normalize(grid, v2), 1.0, 1.0, grid)


def test_trivial_state_is_degenerate():
    s = trivial_state(Grid(64), 0.2, linear_pair())
    rep = count_critical_points(s, linear_pair())
    assert rep.counts == (0, 0)
    assert rep.degenerate
    assert segregation_metric(s) == pytest.approx(1.0)


@given(st.integers(1, 8), st.integers(64, 400), st.floats(0.05, 0.9))
def test_cosine_profiles_have_k_minus_one_critical_points(k, M, amp):
    g = Grid(M)
    v = 1 + amp * np.cos(k * np.pi * g.nodes)
    rep = count_critical_points(_state_from(g, v, v[::-1].copy()))
    assert rep.counts == (k - 1, k - 1)
    kinds = [t for _, t in rep.critical_points[0]]
    assert all(a != b for a, b in zip(kinds[:-1], kinds[1:]))
    for (x, _), j in zip(rep.critical_points[0], range(1, k)):
        assert x == pytest.approx(j / k, abs=g.h)


def test_dead_band_ignores_rounding_ripples():
    g = Grid(128)
    v = np.ones(128) + 1e-12 * np.sin(np.arange(128))
    rep = count_critical_points(_state_from(g, v, v))
    assert rep.counts == (0, 0) and rep.degenerate


def test_first_branch_morphology(sym_branch_256):
    s = sym_branch_256.points[-1].state
    rep = count_critical_points(s, linear_pair())
    assert rep.counts == (0, 0)
    assert [len(i) for i in rep.inflection_points] == [1, 1]
    assert not rep.degenerate
    assert s.v1[0] > s.v1[-1] and s.v2[0] < s.v2[-1]


def test_third_branch_opposite_concavity_at_ends():
    br = cached_branch((1.0, 1.0), 3, 2e-3, 256)
    s = br.points[-1].state
    rep = count_critical_points(s, br.pair)
    assert rep.counts == (2, 2)
    for V, lam in zip((br.pair.g1(s.v2**2), br.pair.g2(s.v1**2)), s.lambdas):
        q = V - lam
        assert np.sign(q[0]) == -np.sign(q[-1])


def test_interface_report_and_reflection(sym_branch_256):
    s = sym_branch_256.points[-1].state
    rep = interface_report(s, linear_pair())
    assert rep.x_m == pytest.approx(0.5, abs=1e-12)
    assert rep.xi1 < rep.x_m < rep.xi2
    mirrored = SolutionState(s.nu, s.v1[::-1].copy(), s.v2[::-1].copy(), s.lambda1, s.lambda2, s.grid)
    rep2 = interface_report(mirrored, linear_pair())
    assert rep2.reflected and rep2.x_m == pytest.approx(rep.x_m)
    assert rep.m4_over_nu == pytest.approx(rep.m**4 / s.nu)


def test_interface_needs_monotone_components():
    br = cached_branch((1.0, 1.0), 2, 2e-3, 256)
    with pytest.raises(NotMonotone):
        interface_report(br.points[-1].state, br.pair)
    with pytest.raises(ValueError, match="first branch"):
        scaling_law_report(br)


@pytest.mark.parametrize("gammas,x0,ratio", [((1, 1), 0.5, 1.0), ((1, 8), 2 / 3, 4.0), ((8, 1), 1 / 3, 0.25)])
def test_limit_profile_closed_forms(gammas, x0, ratio):
    g = Grid(2048)
    lim = limit_profile(linear_pair(*gammas), g)
    assert lim.x0 == pytest.approx(x0)
    assert lim.ratio == pytest.approx(ratio)
    assert lim.ell1 == pytest.approx((math.pi / (2 * x0)) ** 2)
    assert integrate(g, lim.V1**2) == pytest.approx(1.0, abs=1e-3)
    assert integrate(g, lim.V2**2) == pytest.approx(1.0, abs=1e-3)
    assert integrate(g, lim.V1 * lim.V2) < 3 * g.h


def test_trivial_joint_energy_constant():
    pair = linear_pair(1, 3)
    T = trivial_joint_energy(trivial_state(Grid(32), 0.1, pair), pair)
    np.testing.assert_allclose(T, 1.0, rtol=1e-14)


def test_joint_energy_matches_endpoint_values(sym_branch_256):
    s = sym_branch_256.points[-1].state
    je = joint_energy(s, linear_pair())
    assert je.max_deviation < 1e-3 * abs(je.mean)
    assert max(je.endpoint_gaps) < 1e-3 * abs(je.mean)


def test_joint_energy_deviation_is_second_order():
    devs = []
    for M in (256, 512, 1024):
        br = cached_branch((1.0, 3.0), 1, 1e-2, M)
        devs.append(joint_energy(br.points[-1].state, br.pair).max_deviation)
    orders = np.log2(np.array(devs[:-1]) / np.array(devs[1:]))
    assert np.all(orders > 1.8)


def test_apriori_bounds_hold_on_branch_and_trivial(sym_branch_256):
    for p in sym_branch_256.points[::4]:
        assert apriori_bounds_check(p.state, linear_pair()) == []
    assert apriori_bounds_check(trivial_state(Grid(64), 0.1, linear_pair()), linear_pair()) == []


def test_apriori_bounds_detect_corruption(sym_branch_256):
    s = sym_branch_256.points[-1].state
    bad = replace(s, v1=2 * s.v1)
    names = {v["check"] for v in apriori_bounds_check(bad, linear_pair())}
    assert "bound12abv:v1" in names


def test_profile_error_decreases_along_branch(sym_branch_256):
    errs = [profile_error(p.state, linear_pair())[0] for p in sym_branch_256.checkpoints()[-5:]]
    assert np.all(np.diff(errs) < 0)


@given(st.floats(-5, 5), st.floats(0.1, 5), st.floats(0.05, 0.85))
def test_aitken_is_exact_on_geometric_sequences(L, c, r):
    f = [L + c * r**n for n in range(3)]
    assert aitken(*f) == pytest.approx(L, rel=1e-6, abs=1e-6 * c)


def test_aitken_falls_back_without_contraction():
    assert aitken(1.0, 2.0, 4.0) == 4.0
    assert aitken(1.0, 1.0, 1.0) == 1.0


def test_scaling_report_structure(sym_branch_256):
    rep = scaling_law_report(sym_branch_256)
    assert len(rep.extrapolation_nus) == 3
    assert rep.extrapolation_nus[-1] == pytest.approx(1e-3)
    assert set(rep.drift) >= {"lambda1_over_nu", "m4_over_nu"}
    seg = rep.column("seg")
    assert np.all(np.diff(seg) < 0)
