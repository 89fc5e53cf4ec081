"""Closed-form analysis of forwarding on complete d-ary trees.

With the deepest level muted, a vertex at depth l receives a given packet
iff all l - 1 proper ancestors below the root forwarded it, which happens
with probability p^(l-1) independently across packets. Receiver and
transmission expectations therefore collapse to binomial tails summed over
levels, and the near-broadcast threshold solves a one-dimensional
monotone equation: the population-weighted failure mass

    deficit(p) = sum_l  d^(l+1)/N * P(Binomial(n, p^l) <= k - 1),
                 l = 0..H-1

is strictly decreasing in p, and p_min is the smallest p with
deficit(p) <= delta. Replacing the exact binomial CDF by the KL-based
normal bound pair gives computable bounds that bracket p_min; the coarse
closed-form bounds trade tightness for an explicit (k/n)^(1/(H-1)) shape.
Every bisection runs on the same fixed dyadic lattice, so the bracketing
order of the three routes is exact rather than tolerance-fuzzy.

The bound constants are calibrated for arity 2. Other arities reuse the
same construction with the matching vertex counts; treat those bounds as
heuristics until validated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .binom import binom_cdf, binom_cdf_kl_bound
from .binom import binom_tail
from .errors import NoSolutionError

__all__ = [
    "TreeSpec",
    "tree_expected_receivers",
    "tree_expected_transmissions",
    "tree_pmin",
    "tree_tau",
    "tree_pmin_lower_bound",
    "tree_pmin_upper_bound",
    "tree_pmin_bounds_kl",
]


@dataclass(frozen=True)
class TreeSpec:
    """Problem parameters on a complete arity-ary tree of the given height."""

    height: int
    k: int
    n: int
    delta: float
    arity: int = 2

    def __post_init__(self):
        if int(self.height) < 0:
            raise ValueError(f"height must be >= 0, got {self.height}")
        if int(self.arity) < 2:
            raise ValueError(f"arity must be >= 2, got {self.arity}")
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < float(self.delta) < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def vertex_count(self) -> int:
        d, h = int(self.arity), int(self.height)
        return (d ** (h + 1) - 1) // (d - 1)


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


def tree_expected_receivers(spec: TreeSpec, p: float) -> float:
    """E[number of vertices that decode], root included.

    1 + sum over depths l = 1..H of d^l * P(Binomial(n, p^(l-1)) >= k).
    """
    p = _check_p(p)
    d = int(spec.arity)
    total = 1.0
    width = 1.0
    for depth in range(1, int(spec.height) + 1):
        width *= d
        total += width * binom_tail(spec.n, p ** (depth - 1), spec.k)
    return total


def tree_expected_transmissions(spec: TreeSpec, p: float) -> float:
    """E[total transmissions] = n ((dp)^H - 1) / (dp - 1), n H at dp = 1.

    A depth-l vertex (l < H, deeper vertices are muted) transmits each
    packet with probability p^l, so the sum is geometric in dp.
    """
    p = _check_p(p)
    x = spec.arity * p
    h = int(spec.height)
    if x == 0.0:
        # only the depth-0 term survives (none at all when h = 0, where
        # the muting convention silences the lone vertex)
        return float(spec.n if h >= 1 else 0)
    if x == 1.0:
        return float(spec.n * h)
    return spec.n * math.expm1(h * math.log1p(x - 1.0)) / (x - 1.0)


def _level_weights(spec: TreeSpec) -> list[float]:
    # d^(l+1) / N without forming the possibly huge N
    d = float(spec.arity)
    h = int(spec.height)
    scale = (d - 1.0) / (1.0 - d ** (-(h + 1.0)))
    return [d ** (lvl - h) * scale for lvl in range(h)]


_ROUTE_EXACT = 0
_ROUTE_KL_LOWER = 1  # underestimates the CDF: deficit shrinks, root drops
_ROUTE_KL_UPPER = 2


def _level_cdf(n: int, q: float, k: int, route: int) -> float:
    """P(Binomial(n, q) <= k - 1), exact or via the KL bound pair.

    Degenerate q has an exact CDF and bypasses the bound, which is only
    defined on the open interval.
    """
    if q <= 0.0:
        return 1.0  # k >= 1, so Binomial(n, 0) = 0 <= k - 1
    if q >= 1.0:
        return 1.0 if k - 1 >= n else 0.0
    if route == _ROUTE_EXACT:
        return binom_cdf(n, q, k - 1)
    if route == _ROUTE_KL_LOWER:
        return binom_cdf_kl_bound(n, q, k - 1)
    return binom_cdf_kl_bound(n, q, k)


def _deficit(spec: TreeSpec, p: float, route: int) -> float:
    weights = _level_weights(spec)
    total = 0.0
    q = 1.0
    for lvl in range(int(spec.height)):
        total += weights[lvl] * _level_cdf(spec.n, q, spec.k, route)
        q *= p
    return total


def _pmin_route(spec: TreeSpec, tol: float, route: int) -> float:
    if spec.n < spec.k:
        raise NoSolutionError(
            f"decoding needs n >= k, got n={spec.n} k={spec.k}"
        )
    tol = float(tol)
    if not 0.0 < tol <= 0.5:
        raise ValueError(f"tol must lie in (0, 0.5], got {tol}")
    delta = float(spec.delta)
    if _deficit(spec, 0.0, route) <= delta:
        return 0.0
    # deficit(1) = 0 for n >= k, so a root always exists
    depth = min(60, max(1, math.ceil(math.log2(1.0 / tol))))
    lo, hi = 0.0, 1.0
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if _deficit(spec, mid, route) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def tree_pmin(spec: TreeSpec, tol: float = 1e-6) -> float:
    """Smallest p with expected decoder fraction >= 1 - delta, within tol."""
    return _pmin_route(spec, tol, _ROUTE_EXACT)


def tree_tau(spec: TreeSpec, tol: float = 1e-6) -> float:
    """Expected transmissions when operating exactly at the threshold."""
    return tree_expected_transmissions(spec, tree_pmin(spec, tol))


def _require_bound_shape(spec: TreeSpec):
    if int(spec.height) < 2:
        raise ValueError("closed-form bounds need height >= 2")
    if spec.n < spec.k:
        raise NoSolutionError(f"decoding needs n >= k, got n={spec.n} k={spec.k}")


def tree_pmin_lower_bound(spec: TreeSpec) -> float:
    """Closed-form lower bound ((k-1)/n)^(1/(H-1)); needs delta < 1/8.

    For k = 1 the bound is (1/n)^(1/(H-1)) and needs n > 1.
    """
    _require_bound_shape(spec)
    if not float(spec.delta) < 0.125:
        raise ValueError(
            f"lower bound applies only for delta < 1/8, got {spec.delta}"
        )
    h = int(spec.height)
    if spec.k >= 2:
        return ((spec.k - 1) / spec.n) ** (1.0 / (h - 1))
    if spec.n <= 1:
        raise ValueError("k = 1 lower bound needs n > 1")
    return (1.0 / spec.n) ** (1.0 / (h - 1))


def tree_pmin_upper_bound(spec: TreeSpec) -> float:
    """Closed-form upper bound min(((k - 1 + t)/n)^(1/(H-1)), 1).

    t inflates k - 1 by a slack solving a subgaussian tail inequality at
    a delta rescaled by N/(N-1); at the rescale ceiling t collapses to 0.
    """
    _require_bound_shape(spec)
    count = spec.vertex_count
    dprime = min(float(spec.delta) * count / (count - 1), 1.0)
    log_dp = math.log(dprime)
    h = int(spec.height)
    if spec.k >= 2:
        t = math.sqrt(2.0 * (spec.k - 1) * (-log_dp) + log_dp * log_dp) - log_dp
        return min(((spec.k - 1 + t) / spec.n) ** (1.0 / (h - 1)), 1.0)
    return min(((-log_dp) / spec.n) ** (1.0 / (h - 1)), 1.0)


def tree_pmin_bounds_kl(spec: TreeSpec, tol: float = 1e-6) -> tuple[float, float]:
    """Bisected (lower, upper) threshold bounds from the KL bound pair.

    Pointwise the KL pair sandwiches the exact level CDFs, and all three
    bisections share one dyadic lattice, so lower <= tree_pmin <= upper
    holds exactly at matching tol.
    """
    return (
        _pmin_route(spec, tol, _ROUTE_KL_LOWER),
        _pmin_route(spec, tol, _ROUTE_KL_UPPER),
    )
