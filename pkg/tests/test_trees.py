"""Tree closed forms and threshold bounds.

The expectation formulas are cross-checked against the exact pattern
enumeration from the estimator module on small trees, where the two
routes share nothing but the protocol definition. Threshold and bound
routes are checked for the exact lattice orderings they promise, plus
hand-computable substitution values.
"""
import math

import numpy as np
import pytest

from probfwd.errors import NoSolutionError
from probfwd.estimator import exact_small_graph
from probfwd.graphs import build_tree
from probfwd.protocol import run_trials
from probfwd.trees import (
    TreeSpec,
    tree_expected_receivers,
    tree_expected_transmissions,
    tree_pmin,
    tree_pmin_bounds_kl,
    tree_pmin_lower_bound,
    tree_pmin_upper_bound,
    tree_tau,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        TreeSpec(-1, 1, 1, 0.1)
    with pytest.raises(ValueError):
        TreeSpec(2, 1, 1, 0.1, arity=1)
    with pytest.raises(ValueError):
        TreeSpec(2, 0, 1, 0.1)
    with pytest.raises(ValueError):
        TreeSpec(2, 1, 0, 0.1)
    with pytest.raises(ValueError):
        TreeSpec(2, 1, 1, 1.0)
    assert TreeSpec(3, 2, 4, 0.1).vertex_count == 15
    assert TreeSpec(2, 1, 1, 0.1, arity=3).vertex_count == 13


def test_receivers_hand_values():
    spec = TreeSpec(height=2, k=1, n=1, delta=0.1)
    # 1 + 2 tail(1,1,1) + 4 tail(1,p,1) = 3 + 4p
    for p in (0.0, 0.3, 1.0):
        assert tree_expected_receivers(spec, p) == pytest.approx(3 + 4 * p, rel=1e-12)
    big = TreeSpec(height=6, k=4, n=9, delta=0.1)
    assert tree_expected_receivers(big, 1.0) == pytest.approx(127, rel=1e-12)
    assert tree_expected_receivers(big, 0.0) == pytest.approx(3, rel=1e-12)


def test_transmissions_hand_values():
    spec = TreeSpec(height=2, k=1, n=1, delta=0.1)
    # n ((2p)^2 - 1) / (2p - 1) = 2p + 1
    for p in (0.0, 0.2, 0.9, 1.0):
        assert tree_expected_transmissions(spec, p) == pytest.approx(
            2 * p + 1, rel=1e-12
        )
    # at d p = 1 the geometric sum degenerates to n H
    even = TreeSpec(height=7, k=2, n=6, delta=0.1)
    assert tree_expected_transmissions(even, 0.5) == 6 * 7
    # p = 1 floods every unmuted vertex
    assert tree_expected_transmissions(even, 1.0) == pytest.approx(
        6 * (2 ** 7 - 1), rel=1e-12
    )
    tri = TreeSpec(height=5, k=1, n=3, delta=0.1, arity=3)
    assert tree_expected_transmissions(tri, 1 / 3) == 3 * 5


@pytest.mark.parametrize("height,arity", [(2, 2), (3, 2), (2, 3)])
def test_closed_forms_match_exact_enumeration(height, arity):
    # independent route: exact enumeration over firing patterns of the
    # unmuted interior, from the estimator module
    g = build_tree(arity, height)
    for n, k, p in [(1, 1, 0.4), (3, 2, 0.7), (4, 1, 0.15), (5, 5, 0.52)]:
        spec = TreeSpec(height, k, n, 0.1, arity)
        er, et = exact_small_graph(g, k, n, p, leaves_mute=True)
        assert tree_expected_receivers(spec, p) == pytest.approx(er, rel=1e-11)
        assert tree_expected_transmissions(spec, p) == pytest.approx(et, rel=1e-11)


def test_receivers_monotone_in_p():
    spec = TreeSpec(height=6, k=3, n=7, delta=0.1)
    vals = [tree_expected_receivers(spec, p) for p in np.linspace(0, 1, 40)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_pmin_is_the_lattice_threshold():
    spec = TreeSpec(height=8, k=5, n=10, delta=0.1)
    tol = 1e-6
    pm = tree_pmin(spec, tol)
    count = spec.vertex_count
    target = (1 - spec.delta) * count
    assert tree_expected_receivers(spec, pm) >= target - 1e-9 * count
    assert tree_expected_receivers(spec, pm - 2 * tol) < target + 1e-9 * count


def test_pmin_edges():
    # delta so loose that silence already satisfies it: deficit(0) is
    # (N - 1)/N = 6/7 on a height-2 binary tree
    assert tree_pmin(TreeSpec(2, 1, 1, 0.9)) == 0.0
    with pytest.raises(NoSolutionError):
        tree_pmin(TreeSpec(4, 5, 4, 0.1))
    with pytest.raises(ValueError):
        tree_pmin(TreeSpec(4, 2, 5, 0.1), tol=0.0)


def test_pmin_nonincreasing_in_n():
    # shared dyadic lattice makes the ordering exact, not approximate
    vals = [tree_pmin(TreeSpec(7, 4, n, 0.1)) for n in range(4, 13)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_tau_definition():
    spec = TreeSpec(6, 3, 8, 0.1)
    assert tree_tau(spec) == tree_expected_transmissions(spec, tree_pmin(spec))


def test_lower_bound_hand_values():
    assert tree_pmin_lower_bound(TreeSpec(2, 2, 2, 0.1)) == pytest.approx(0.5)
    assert tree_pmin_lower_bound(TreeSpec(3, 1, 4, 0.1)) == pytest.approx(0.5)


def test_upper_bound_hand_values():
    # delta large enough that the rescale hits its ceiling: the slack t
    # collapses to 0 and the bound reduces to ((k-1)/n)^(1/(H-1))
    assert tree_pmin_upper_bound(TreeSpec(2, 2, 2, 0.99)) == pytest.approx(0.5)
    assert tree_pmin_upper_bound(TreeSpec(3, 1, 4, 0.99)) == 0.0
    # and it clips at 1 when the slack is enormous
    assert tree_pmin_upper_bound(TreeSpec(2, 2, 2, 1e-12)) == 1.0


def test_bound_validation():
    with pytest.raises(ValueError):
        tree_pmin_lower_bound(TreeSpec(1, 2, 4, 0.05))
    with pytest.raises(ValueError):
        tree_pmin_lower_bound(TreeSpec(4, 2, 4, 0.5))  # needs delta < 1/8
    with pytest.raises(ValueError):
        tree_pmin_lower_bound(TreeSpec(4, 1, 1, 0.05))  # k = 1 needs n > 1
    with pytest.raises(NoSolutionError):
        tree_pmin_upper_bound(TreeSpec(4, 9, 4, 0.05))
    with pytest.raises(ValueError):
        tree_pmin_upper_bound(TreeSpec(1, 2, 4, 0.05))


def test_bracket_ordering():
    spec = TreeSpec(height=8, k=5, n=10, delta=0.05)
    pm = tree_pmin(spec)
    kl_lo, kl_hi = tree_pmin_bounds_kl(spec)
    lo = tree_pmin_lower_bound(spec)
    hi = tree_pmin_upper_bound(spec)
    # kl routes share the bisection lattice with pmin: exact ordering
    assert kl_lo <= pm <= kl_hi
    assert lo < kl_lo and kl_hi <= hi


def test_closed_form_against_simulation_arity3():
    # d-ary generalization smoke: Monte Carlo on a ternary tree agrees
    # with the closed form at the computed threshold
    spec = TreeSpec(height=4, k=3, n=6, delta=0.1, arity=3)
    pm = tree_pmin(spec)
    assert 0.0 < pm < 1.0
    g = build_tree(3, 4)
    r, t = run_trials(g, n=6, k=3, p=pm, trials=3000, seed=17)
    count = spec.vertex_count
    se_r = r.std(ddof=1) / math.sqrt(r.size)
    se_t = t.std(ddof=1) / math.sqrt(t.size)
    assert abs(r.mean() - tree_expected_receivers(spec, pm)) <= 3 * se_r
    assert abs(t.mean() - tree_expected_transmissions(spec, pm)) <= 3 * se_t
    assert r.mean() / count >= 1 - spec.delta - 3 * se_r / count
