"""Grid-limit formulas: identity checks and synthetic-table inversions.

two_stage_tail must agree with the direct binomial tail at the squared
probability; that identity is exercised over random triples. Threshold
searches are checked on a synthetic table constructed so the coverage
curve is exactly s(p) = p (theta = p^2), where every answer is available
in closed form: the limit fraction is tail(n, p^2, k) and the threshold
is the square root of the single-packet-style inversion.
"""
import numpy as np
import pytest

from probfwd.binom import binom_tail
from probfwd.errors import NoSolutionError
from probfwd.gridlimit import (
    GapResult,
    GridLimitSpec,
    extended_coverage_tail,
    finite_grid_pmin_gap,
    grid_pmin,
    grid_tau_normalized,
    limit_receiver_fraction,
    limit_receiver_fraction_double_sum,
    two_stage_tail,
)
from probfwd.percolation import ThetaTable


def linear_coverage_table(scale: float = 1.0) -> ThetaTable:
    # theta = scale * p^2 makes the monotone coverage curve scale * p,
    # and both projections are identities because the inputs are already
    # isotonic; interpolation of the linear ratio is exact
    p = np.round(0.593 + 0.001 * np.arange(408), 3)
    assert p[-1] == 1.0
    theta = scale * p * p
    return ThetaTable(
        p=p,
        theta=theta,
        theta_stderr=np.zeros_like(p),
        theta_plus=scale * p,
        m=31,
        reps=2,
        seed=0,
    )


def test_two_stage_identity_random_triples():
    rng = np.random.default_rng(77)
    for _ in range(300):
        n = int(rng.integers(1, 61))
        k = int(rng.integers(0, n + 3))
        s = float(rng.uniform(0.001, 0.999))
        direct = binom_tail(n, s * s, k)
        assert two_stage_tail(n, k, s) == pytest.approx(direct, abs=1e-10)


def test_two_stage_edges():
    assert two_stage_tail(10, 0, 0.5) == 1.0
    assert two_stage_tail(10, 11, 0.5) == 0.0
    assert two_stage_tail(10, 3, 0.0) == 0.0
    assert two_stage_tail(10, 3, 1.0) == 1.0
    with pytest.raises(ValueError):
        two_stage_tail(501, 3, 0.5)
    with pytest.raises(ValueError):
        two_stage_tail(0, 0, 0.5)
    with pytest.raises(ValueError):
        two_stage_tail(10, 3, 1.5)


def test_spec_validation():
    table = linear_coverage_table()
    with pytest.raises(ValueError):
        GridLimitSpec(0, 5, 0.1, table)
    with pytest.raises(ValueError):
        GridLimitSpec(2, 0, 0.1, table)
    with pytest.raises(ValueError):
        GridLimitSpec(2, 5, 1.5, table)
    with pytest.raises(ValueError):
        GridLimitSpec(2, 5, 0.1, table, p_floor=0.0)
    with pytest.raises(ValueError):
        GridLimitSpec(2, 5, 0.1, table, p_floor=0.5)  # below table start


def test_fraction_routes_agree_through_the_table():
    table = linear_coverage_table()
    spec = GridLimitSpec(3, 12, 0.1, table)
    for p in (0.6, 0.75, 0.9, 1.0):
        product = limit_receiver_fraction(spec, p)
        double = limit_receiver_fraction_double_sum(spec, p)
        assert double == pytest.approx(product, abs=1e-10)
        assert extended_coverage_tail(spec, p) >= product - 1e-12


def test_pmin_inverts_the_coverage_curve():
    table = linear_coverage_table()
    tol = 1e-4
    # n = k = 1: fraction is p^2, threshold is sqrt(1 - delta)
    spec = GridLimitSpec(1, 1, 0.1, table)
    found = grid_pmin(spec, tol)
    assert not found.clamped
    target = np.sqrt(0.9)
    assert target <= found.p_min <= target + tol
    # a composite case, inverted by bisecting the same closed form
    spec = GridLimitSpec(7, 20, 0.2, table)
    found = grid_pmin(spec, tol)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if binom_tail(20, mid * mid, 7) >= 0.8:
            hi = mid
        else:
            lo = mid
    assert hi <= found.p_min <= hi + tol


def test_pmin_clamped_and_unreachable():
    table = linear_coverage_table()
    loose = GridLimitSpec(1, 1, 0.9, table)
    found = grid_pmin(loose)
    assert found.clamped and found.p_min == pytest.approx(0.593)
    weak = GridLimitSpec(1, 1, 0.1, linear_coverage_table(scale=0.25))
    with pytest.raises(NoSolutionError):
        grid_pmin(weak)
    with pytest.raises(ValueError):
        grid_pmin(GridLimitSpec(1, 1, 0.1, table), tol=0.0)


def test_tau_normalized_closed_form():
    table = linear_coverage_table()
    spec = GridLimitSpec(1, 4, 0.15, table)
    gt = grid_tau_normalized(spec, tol=1e-4)
    # theta(p*) = p*^2, so tau = n p*^4 / p* = n p*^3; the table curve is
    # piecewise linear in p^2, hence the loose interpolation tolerance
    assert gt.tau == pytest.approx(4 * gt.p_min ** 3, abs=1e-5)
    assert gt.p_min == grid_pmin(spec, tol=1e-4).p_min
    assert not gt.clamped


def test_finite_gap_structure():
    table = linear_coverage_table()
    spec = GridLimitSpec(1, 2, 0.15, table)
    out = finite_grid_pmin_gap(spec, m=31, trials=200, seed=4, tol=1e-3)
    assert isinstance(out, GapResult)
    assert out.gap == pytest.approx(out.finite.p_min - out.limit.p_min, abs=1e-15)
    assert out.ci == out.finite.ci
    assert not out.small_delta_regime
    tight = GridLimitSpec(1, 2, 0.1, table)
    out = finite_grid_pmin_gap(tight, m=31, trials=200, seed=4, tol=1e-3)
    assert out.small_delta_regime
