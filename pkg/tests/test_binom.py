"""Oracle checks for the binomial numerics.

The reference CDF is exact rational arithmetic on the same float64 inputs
the implementation sees: Fraction(p) expands the double exactly, so both
routes evaluate the same mathematical quantity and the only admissible
difference is the implementation's rounding. Large-n spot values were
computed separately with 40-digit arithmetic (smaller-tail term
recurrence) and are frozen below.
"""
import math
from fractions import Fraction

import pytest

from probfwd.binom import (
    binom_cdf,
    binom_cdf_kl_bound,
    binom_tail,
    kl_bern,
    sandwich_check,
    std_normal_cdf,
)


def rational_cdf_row(n: int, p: float):
    """All P(X <= k), k = 0..n, as exact fractions of the float input p."""
    pf = Fraction(p)
    qf = 1 - pf
    term = qf ** n
    acc = term
    out = [acc]
    for i in range(n):
        term = term * (n - i) * pf / ((i + 1) * qf)
        acc += term
        out.append(acc)
    return out


ORACLE_PS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.123456, 1 / 3, 0.999]


def test_cdf_matches_exact_rationals():
    worst = 0.0
    for n in range(1, 61):
        for p in ORACLE_PS:
            row = rational_cdf_row(n, p)
            for k in range(n + 1):
                err = abs(binom_cdf(n, p, k) - float(row[k]))
                worst = max(worst, err)
    assert worst <= 1e-12


def test_tail_complements_cdf_exactly_in_rationals():
    # the tail goes through the beta function with swapped arguments, so
    # this pins the second route against the same rational reference
    worst = 0.0
    for n in (1, 2, 5, 17, 40, 60):
        for p in ORACLE_PS:
            row = rational_cdf_row(n, p)
            for k in range(1, n + 1):
                err = abs(binom_tail(n, p, k) - float(1 - row[k - 1]))
                worst = max(worst, err)
    assert worst <= 1e-12


# (n, p, k, 40-digit reference)
FROZEN_CDF = [
    (1000, 0.3, 300, 0.51559351981412026),
    (1000, 0.3, 250, 0.00025980303652893142),
    (1000, 0.77, 800, 0.9899072047641594),
    (10000, 0.5, 5000, 0.50398932306969108),
    (10000, 0.123, 1200, 0.18473533602253002),
    (10000, 0.9, 9050, 0.9546500323594529),
    (100000, 0.5, 50000, 0.50126156310709837),
    (100000, 0.25, 24900, 0.23380972268567679),
    (100000, 0.6, 60210, 0.91291956472082633),
]


@pytest.mark.parametrize("n,p,k,ref", FROZEN_CDF)
def test_cdf_frozen_large_n(n, p, k, ref):
    tol = 1e-12 if n <= 10_000 else 5e-12
    assert binom_cdf(n, p, k) == pytest.approx(ref, abs=tol)
    assert binom_tail(n, p, k + 1) == pytest.approx(1.0 - ref, abs=tol)


def test_cdf_hand_value():
    # sum_{i<=5} C(10,i) / 2^10 = 319/512, a dyadic rational
    assert binom_cdf(10, 0.5, 5) == pytest.approx(0.623046875, abs=1e-15)


def test_cdf_edges():
    assert binom_cdf(10, 0.5, -1) == 0.0
    assert binom_cdf(10, 0.5, 10) == 1.0
    assert binom_cdf(10, 0.5, 99) == 1.0
    assert binom_cdf(10, 0.0, 0) == 1.0
    assert binom_cdf(10, 1.0, 9) == 0.0
    assert binom_cdf(10, 1.0, 10) == 1.0
    assert binom_cdf(0, 0.3, 0) == 1.0
    with pytest.raises(ValueError):
        binom_cdf(-1, 0.5, 0)
    with pytest.raises(ValueError):
        binom_cdf(10, 1.5, 5)


def test_tail_edges():
    assert binom_tail(10, 0.5, 0) == 1.0
    assert binom_tail(10, 0.5, -3) == 1.0
    assert binom_tail(10, 0.5, 11) == 0.0
    assert binom_tail(10, 0.0, 1) == 0.0
    assert binom_tail(10, 1.0, 10) == 1.0
    with pytest.raises(ValueError):
        binom_tail(5, -0.1, 2)


def test_kl_frozen_values():
    assert kl_bern(0.5, 0.25) == pytest.approx(0.14384103622589046, rel=1e-14)
    assert kl_bern(0.1, 0.8) == pytest.approx(1.1457255029306631, rel=1e-14)


def test_kl_conventions():
    assert kl_bern(0.0, 0.0) == 0.0
    assert kl_bern(1.0, 1.0) == 0.0
    assert kl_bern(0.3, 0.3) == 0.0
    assert kl_bern(0.5, 0.0) == math.inf
    assert kl_bern(0.5, 1.0) == math.inf
    assert kl_bern(0.0, 1.0) == math.inf
    assert kl_bern(1.0, 0.0) == math.inf
    assert kl_bern(0.0, 0.4) == pytest.approx(-math.log(0.6), rel=1e-14)
    assert kl_bern(1.0, 0.4) == pytest.approx(-math.log(0.4), rel=1e-14)


def test_kl_nonnegative_sweep():
    import random

    rng = random.Random(1234)
    for _ in range(2000):
        x, y = rng.random(), rng.uniform(1e-9, 1 - 1e-9)
        assert kl_bern(x, y) >= 0.0


def test_normal_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.0) == pytest.approx(0.84134474606854295, rel=1e-15)
    assert std_normal_cdf(-2.5) == pytest.approx(0.0062096653257761352, rel=1e-13)
    for x in (0.1, 0.7, 1.3, 2.9, 4.4):
        assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-15)


def test_kl_bound_closed_cases():
    for n, p in ((7, 0.3), (25, 0.88), (100, 0.01)):
        assert binom_cdf_kl_bound(n, p, 0) == (1.0 - p) ** n
        assert binom_cdf_kl_bound(n, p, n) == 1.0 - p ** n
    # k/n == p exactly in binary: sgn(0) = 0 and Phi(0) = 1/2
    assert binom_cdf_kl_bound(10, 0.5, 5) == 0.5
    assert binom_cdf_kl_bound(16, 0.25, 4) == 0.5


def test_kl_bound_frozen_interior():
    assert binom_cdf_kl_bound(20, 0.3, 10) == pytest.approx(
        0.96907497632647409, rel=1e-14
    )


def test_kl_bound_validation():
    with pytest.raises(ValueError):
        binom_cdf_kl_bound(10, 0.0, 3)
    with pytest.raises(ValueError):
        binom_cdf_kl_bound(10, 1.0, 3)
    with pytest.raises(ValueError):
        binom_cdf_kl_bound(10, 0.5, -1)
    with pytest.raises(ValueError):
        binom_cdf_kl_bound(10, 0.5, 11)
    with pytest.raises(ValueError):
        binom_cdf_kl_bound(0, 0.5, 0)


def test_sandwich_sweep():
    for n in (1, 2, 3, 5, 8, 13, 21, 34, 55, 100, 250):
        for p in (0.05, 0.3, 0.5, 0.77, 0.95):
            for k in range(0, n, max(1, n // 17)):
                assert sandwich_check(n, p, k), (n, p, k)


def test_sandwich_tight_at_the_ends():
    # the bound pair collapses onto the CDF at k = 0 and k = n - 1
    for n, p in ((5, 0.4), (30, 0.9), (120, 0.13)):
        assert binom_cdf_kl_bound(n, p, 0) == pytest.approx(
            binom_cdf(n, p, 0), abs=1e-12
        )
        assert binom_cdf_kl_bound(n, p, n) == pytest.approx(
            binom_cdf(n, p, n - 1), abs=1e-12
        )


def test_sandwich_strict_between_the_ends():
    n, p = 20, 0.3
    for k in range(5, 13):
        lo = binom_cdf_kl_bound(n, p, k)
        hi = binom_cdf_kl_bound(n, p, k + 1)
        mid = binom_cdf(n, p, k)
        assert lo < mid < hi


def test_sandwich_check_validation():
    with pytest.raises(ValueError):
        sandwich_check(10, 0.5, 10)
    with pytest.raises(ValueError):
        sandwich_check(10, 0.5, -1)
