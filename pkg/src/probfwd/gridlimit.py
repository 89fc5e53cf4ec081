"""Large-grid limits: receiver fractions, thresholds, and cost per area.

On a large grid the forwarder set of a supercritical run looks like the
giant open cluster, and a vertex hears a packet iff it sits in the
extended cluster (the cluster plus its boundary). Writing s(p) for the
extended-cluster density, a fixed far-away vertex decodes a given packet
with probability s(p)^2: the packet must leave the source's neighbourhood
into the giant cluster and the vertex must touch it. Receiver fractions,
thresholds, and normalized transmission counts then reduce to binomial
tails in s(p), with s read off a tabulated percolation curve.

Everything here is deterministic given the table; the one Monte Carlo
entry point is finite_grid_pmin_gap, which replays the protocol on an
actual finite grid and reports how far its threshold sits from the limit
prediction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .binom import binom_tail
from .errors import NoSolutionError
from .estimator import PminEstimate, mc_pmin
from .graphs import build_grid
from .percolation import SITE_THRESHOLD_ESTIMATE, ThetaTable

__all__ = [
    "DEFAULT_P_FLOOR",
    "GridLimitSpec",
    "GridPmin",
    "GridTau",
    "GapResult",
    "two_stage_tail",
    "extended_coverage_tail",
    "limit_receiver_fraction",
    "limit_receiver_fraction_double_sum",
    "grid_pmin",
    "grid_tau_normalized",
    "finite_grid_pmin_gap",
]

# searches stay above the supercritical knee, where theta is well behaved
DEFAULT_P_FLOOR = SITE_THRESHOLD_ESTIMATE

_DOUBLE_SUM_MAX_N = 500


@dataclass(frozen=True)
class GridLimitSpec:
    """Decoding target (k of n, deficit delta) against a theta table."""

    k: int
    n: int
    delta: float
    theta: ThetaTable
    p_floor: float = DEFAULT_P_FLOOR

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < float(self.delta) < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < float(self.p_floor) < 1.0:
            raise ValueError(f"p_floor must lie in (0, 1), got {self.p_floor}")
        if float(self.p_floor) < float(self.theta.p[0]):
            raise ValueError(
                f"p_floor {self.p_floor} falls below the table grid start "
                f"{self.theta.p[0]}; queries there would silently clamp"
            )

    def coverage(self, p: float) -> float:
        """Extended-cluster density s(p) from the monotone table curve."""
        return float(self.theta.theta_plus_at(p))


def extended_coverage_tail(spec: GridLimitSpec, p: float) -> float:
    """Limit fraction of vertices hearing >= k packets: tail(n, s(p), k)."""
    return binom_tail(spec.n, spec.coverage(p), spec.k)


def limit_receiver_fraction(spec: GridLimitSpec, p: float) -> float:
    """Limit fraction of vertices decoding: tail(n, s(p)^2, k)."""
    s = spec.coverage(p)
    return binom_tail(spec.n, s * s, spec.k)


def two_stage_tail(n: int, k: int, s: float) -> float:
    """P(at least k of n two-stage Bernoulli(s) pairs both succeed).

    Conditioning on the count t passing the first stage gives

        sum_{t=k..n} sum_{j=k..t} C(n,t) C(t,j) s^(t+j) (1-s)^(n-j)

    which must agree with tail(n, s^2, k). Kept as an independent
    evaluation route; the quadratic term count caps n at 500.
    """
    n, k = int(n), int(k)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > _DOUBLE_SUM_MAX_N:
        raise ValueError(f"double sum is quadratic in n, capped at {_DOUBLE_SUM_MAX_N}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    if s == 0.0:
        return 0.0
    if s == 1.0:
        return 1.0
    lgf = gammaln(np.arange(n + 1, dtype=np.float64) + 1.0)
    ln_s = math.log(s)
    ln_q = math.log1p(-s)
    terms = (
        math.exp(
            lgf[n] - lgf[n - t] - lgf[j] - lgf[t - j]
            + (t + j) * ln_s + (n - j) * ln_q
        )
        for t in range(k, n + 1)
        for j in range(k, t + 1)
    )
    return min(math.fsum(terms), 1.0)


def limit_receiver_fraction_double_sum(spec: GridLimitSpec, p: float) -> float:
    """limit_receiver_fraction through the conditioned double sum."""
    return two_stage_tail(spec.n, spec.k, spec.coverage(p))


@dataclass(frozen=True)
class GridPmin:
    p_min: float
    clamped: bool  # target already met at the search floor


@dataclass(frozen=True)
class GridTau:
    tau: float  # expected transmissions per vertex at the threshold
    p_min: float
    clamped: bool


def grid_pmin(spec: GridLimitSpec, tol: float = 1e-4) -> GridPmin:
    """Smallest p in [p_floor, 1] whose limit fraction reaches 1 - delta.

    Bisects the monotone table-backed curve on a fixed dyadic lattice of
    pitch tol, so thresholds from one table are exactly comparable across
    specs. A target already satisfied at the floor comes back clamped;
    a target out of reach at p = 1 raises NoSolutionError.
    """
    tol = float(tol)
    if not 0.0 < tol <= 0.5:
        raise ValueError(f"tol must lie in (0, 0.5], got {tol}")
    floor = float(spec.p_floor)
    target = 1.0 - float(spec.delta)
    if limit_receiver_fraction(spec, floor) >= target:
        return GridPmin(floor, True)
    if limit_receiver_fraction(spec, 1.0) < target:
        raise NoSolutionError(
            f"limit fraction at p = 1 stays below 1 - delta = {target}; "
            f"coverage tops out at {spec.coverage(1.0)}"
        )
    depth = min(60, max(1, math.ceil(math.log2((1.0 - floor) / tol))))
    lo, hi = floor, 1.0
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if limit_receiver_fraction(spec, mid) >= target:
            hi = mid
        else:
            lo = mid
    return GridPmin(hi, False)


def grid_tau_normalized(spec: GridLimitSpec, tol: float = 1e-4) -> GridTau:
    """Limit transmissions per vertex at the threshold: n theta(p*)^2 / p*.

    Each open vertex in the giant cluster forwards all n packets, and the
    source-side conditioning contributes the second theta factor over p.
    """
    found = grid_pmin(spec, tol)
    theta_star = float(spec.theta.theta_at(found.p_min))
    tau = spec.n * theta_star * theta_star / found.p_min
    return GridTau(tau, found.p_min, found.clamped)


@dataclass(frozen=True)
class GapResult:
    """Finite-grid threshold vs the limit prediction, same decoding target."""

    gap: float  # finite-grid p_min minus limit p_min
    ci: float  # half-width inherited from the Monte Carlo threshold
    finite: PminEstimate
    limit: GridPmin
    small_delta_regime: bool  # delta < 1/8, where the limit claim is sharpest


def finite_grid_pmin_gap(
    spec: GridLimitSpec,
    m: int,
    trials: int,
    seed: int,
    tol: float = 1e-4,
    workers: int = 1,
) -> GapResult:
    """Measure the finite-size threshold offset on an m x m grid.

    Runs the actual protocol (centre source, no muting) and compares its
    coupled-field threshold to grid_pmin of the same spec on the same
    dyadic pitch.
    """
    g = build_grid(m)
    finite = mc_pmin(
        g, spec.k, spec.n, spec.delta, trials, seed, tol=tol, workers=workers
    )
    limit = grid_pmin(spec, tol)
    return GapResult(
        gap=finite.p_min - limit.p_min,
        ci=finite.ci,
        finite=finite,
        limit=limit,
        small_delta_regime=float(spec.delta) < 0.125,
    )
