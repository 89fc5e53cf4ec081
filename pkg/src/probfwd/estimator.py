"""Monte Carlo and exact estimators for the forwarding protocol.

The threshold estimator reuses one set of threshold fields across every
probed forwarding probability and every packet-prefix count, so the
empirical success curve is exactly nondecreasing in both p and n and the
fitted thresholds inherit that monotonicity with no statistical flicker.
Bisection runs on a fixed dyadic lattice: the reported p_min is the
smallest lattice point of width tol whose empirical fraction clears the
target, which makes thresholds comparable across n by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .binom import binom_tail
from .errors import NoSolutionError
from .graphs import Graph
from .protocol import (
    ROLE_TAU,
    field_batches,
    leaf_mute_mask,
    run_trials,
)

__all__ = [
    "McEstimate",
    "PminEstimate",
    "CurvePoint",
    "mc_expected_fraction",
    "mc_tau",
    "exact_small_graph",
    "mc_pmin",
    "sweep_n",
    "write_curve_csv",
    "CURVE_CSV_HEADER",
]

CURVE_CSV_HEADER = "n,p_min,p_min_ci,tau,tau_stderr"

_EXACT_VERTEX_CAP = 21
_MATERIALIZE_CAP_BYTES = 512 * 1024 * 1024


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error over independent trials."""

    mean: float
    stderr: float
    trials: int
    seed: int


@dataclass(frozen=True)
class PminEstimate:
    """Threshold estimate with a confidence half-width in p units.

    The half-width brackets where the target would move if the empirical
    curve shifted by one standard error of the trial mean at p_min.
    """

    p_min: float
    ci: float
    trials: int
    seed: int


@dataclass(frozen=True)
class CurvePoint:
    n: int
    p_min: float
    p_min_ci: float
    tau: float
    tau_stderr: float


def _subseed(seed: int, *path: int) -> int:
    ss = np.random.SeedSequence((int(seed),) + tuple(int(x) for x in path))
    return int(ss.generate_state(1, np.uint64)[0])


def mc_expected_fraction(
    g: Graph,
    k: int,
    n: int,
    p: float,
    trials: int,
    seed: int,
    leaves_mute: bool | None = None,
    workers: int = 1,
) -> McEstimate:
    """Mean successful-receiver fraction over independent trials."""
    r, _ = run_trials(g, n, k, p, trials, seed, leaves_mute, workers)
    frac = r / g.vertex_count
    stderr = float(frac.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(float(frac.mean()), stderr, int(trials), int(seed))


def mc_tau(
    g: Graph,
    n: int,
    p: float,
    trials: int,
    seed: int,
    leaves_mute: bool | None = None,
    workers: int = 1,
) -> McEstimate:
    """Mean total transmissions over independent trials (k plays no role)."""
    _, t = run_trials(g, n, 1, p, trials, seed, leaves_mute, workers)
    t = t.astype(np.float64)
    stderr = float(t.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(float(t.mean()), stderr, int(trials), int(seed))


def exact_small_graph(
    g: Graph, k: int, n: int, p: float, leaves_mute: bool | None = None
) -> tuple[float, float]:
    """Exact (E[successful receivers], E[transmissions]) by enumeration.

    Walks every forward-indicator pattern of the vertices whose decision
    matters, once; packets are i.i.d. so each vertex's reception count is
    Binomial(n, q_v) with q_v the per-packet reception probability, and
    transmissions scale linearly in n. Only graphs with at most 21
    vertices are accepted; the pattern count is exponential.
    """
    if g.vertex_count > _EXACT_VERTEX_CAP:
        raise ValueError(
            f"exact enumeration is capped at {_EXACT_VERTEX_CAP} vertices, "
            f"got {g.vertex_count}"
        )
    n = int(n)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    mute = leaf_mute_mask(g, leaves_mute)
    free = np.array(
        [v for v in range(g.vertex_count) if v != g.source and not mute[v]],
        np.int64,
    )
    n_free = free.size
    bits = np.arange(n_free + 1, dtype=np.float64)
    weights = p ** bits * (1.0 - p) ** (n_free - bits)
    recv_prob = np.zeros(g.vertex_count)
    exp_fwd = _kernels.enumerate_reception(
        g.indptr, g.indices, g.source, free, weights, recv_prob
    )
    expected_r = 1.0  # the source holds all n >= k packets
    for v in range(g.vertex_count):
        if v != g.source:
            # pattern-weight sums can stray past 1 by a few ulps
            q = min(max(float(recv_prob[v]), 0.0), 1.0)
            expected_r += binom_tail(n, q, k)
    return expected_r, n * float(exp_fwd)


class _CoupledSolver:
    """Success and transmission curves over one shared field set.

    Threshold tensors are materialised when they fit comfortably in
    memory and regenerated batch by batch otherwise; both paths see the
    identical numbers. Evaluations are cached per probed p, holding the
    per-prefix sums needed for means and standard errors.
    """

    def __init__(self, g, k, n_max, trials, seed, leaves_mute=None, workers=1):
        if not 1 <= int(k) <= int(n_max):
            raise ValueError(f"need 1 <= k <= n, got k={k} n={n_max}")
        self.g = g
        self.k = int(k)
        self.n_max = int(n_max)
        self.trials = int(trials)
        if self.trials < 2:
            raise ValueError(f"threshold search needs trials >= 2, got {trials}")
        self.seed = int(seed)
        self.mute = leaf_mute_mask(g, leaves_mute)
        self.workers = int(workers)
        self._cache: dict[float, tuple] = {}
        total_bytes = self.trials * (g.vertex_count - 1) * self.n_max * 8
        self._stored = None
        if total_bytes <= _MATERIALIZE_CAP_BYTES:
            self._stored = list(
                field_batches(g, self.n_max, self.trials, self.seed)
            )

    def _batches(self):
        if self._stored is not None:
            return self._stored
        return field_batches(self.g, self.n_max, self.trials, self.seed)

    def curves(self, p: float):
        """(mean_r, var_r, mean_t) per packet prefix at probability p."""
        p = float(p)
        hit = self._cache.get(p)
        if hit is not None:
            return hit
        n = self.n_max
        sum_r = np.zeros(n)
        sum_r2 = np.zeros(n)
        sum_t = np.zeros(n)
        g = self.g
        for _, u3 in self._batches():
            b = u3.shape[0]
            r = np.empty((b, n), np.int64)
            t = np.empty((b, n), np.int64)
            _kernels.coupled_prefix_curves(
                g.indptr, g.indices, g.source, self.mute, u3, p, self.k, r, t
            )
            rf = r.astype(np.float64)
            sum_r += rf.sum(axis=0)
            sum_r2 += (rf * rf).sum(axis=0)
            sum_t += t.sum(axis=0)
        mean_r = sum_r / self.trials
        var_r = np.maximum(sum_r2 / self.trials - mean_r ** 2, 0.0)
        var_r *= self.trials / max(self.trials - 1, 1)
        mean_t = sum_t / self.trials
        out = (mean_r, var_r, mean_t)
        self._cache[p] = out
        return out

    def mean_fraction(self, p: float, n: int) -> float:
        return self.curves(p)[0][n - 1] / self.g.vertex_count

    def mean_tau(self, p: float, n: int) -> float:
        return float(self.curves(p)[2][n - 1])

    def _lattice_min(self, n: int, target_r: float, tol: float) -> float:
        """Smallest dyadic point of width tol whose mean R clears target_r.

        Assumes the caller checked feasibility at p = 1. The empirical
        curve is nondecreasing in p, so plain bisection lands exactly on
        the first admissible lattice point.
        """
        idx = n - 1
        if self.curves(0.0)[0][idx] >= target_r:
            return 0.0
        depth = max(1, math.ceil(math.log2(1.0 / tol)))
        lo, hi = 0.0, 1.0
        for _ in range(depth):
            mid = 0.5 * (lo + hi)
            if self.curves(mid)[0][idx] >= target_r:
                hi = mid
            else:
                lo = mid
        return hi

    def pmin(self, n: int, delta: float, tol: float) -> PminEstimate:
        n = int(n)
        if not self.k <= n <= self.n_max:
            raise ValueError(f"n must lie in [k, n_max], got {n}")
        delta = float(delta)
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        tol = float(tol)
        if not 0.0 < tol <= 0.5:
            raise ValueError(f"tol must lie in (0, 0.5], got {tol}")
        target_r = (1.0 - delta) * self.g.vertex_count
        mean_r, var_r, _ = self.curves(1.0)
        if mean_r[n - 1] < target_r:
            raise NoSolutionError(
                f"target fraction {1 - delta} unreachable even at p = 1 "
                f"(graph may be disconnected or n too small)"
            )
        p_hat = self._lattice_min(n, target_r, tol)
        spread = math.sqrt(self.curves(p_hat)[1][n - 1] / self.trials)
        hi_target = target_r + spread
        lo_target = target_r - spread
        p_hi = (
            1.0
            if self.curves(1.0)[0][n - 1] < hi_target
            else self._lattice_min(n, hi_target, tol)
        )
        p_lo = self._lattice_min(n, lo_target, tol)
        ci = 0.5 * (p_hi - p_lo)
        return PminEstimate(p_hat, ci, self.trials, self.seed)


def mc_pmin(
    g: Graph,
    k: int,
    n: int,
    delta: float,
    trials: int,
    seed: int,
    tol: float = 1e-4,
    leaves_mute: bool | None = None,
    workers: int = 1,
) -> PminEstimate:
    """Smallest p whose empirical success fraction reaches 1 - delta.

    One field set is shared by every probe, so the curve being bisected
    is a fixed, genuinely monotone function of p; tol is the lattice
    resolution of the returned threshold. Raises NoSolutionError when the
    target is out of reach even at p = 1 (n < k, or too little of the
    graph is reachable).
    """
    if not 1 <= int(k) <= int(n):
        raise NoSolutionError(f"need k <= n for decodability, got k={k} n={n}")
    solver = _CoupledSolver(g, k, n, trials, seed, leaves_mute, workers)
    return solver.pmin(n, delta, tol)


def sweep_n(
    g: Graph,
    k: int,
    delta: float,
    n_values,
    trials: int,
    seed: int,
    tol: float = 1e-4,
    tau_trials: int | None = None,
    leaves_mute: bool | None = None,
    workers: int = 1,
) -> list[CurvePoint]:
    """Threshold and cost curve over packet counts n.

    All n share one field set (thresholds are exactly nonincreasing in n);
    tau at each point is a fresh-seed Monte Carlo run at that p_min, its
    stderr widened by a two-point sensitivity over the p_min confidence
    interval evaluated on the shared fields.
    """
    n_values = [int(x) for x in n_values]
    if not n_values:
        raise ValueError("n_values must be nonempty")
    if min(n_values) < int(k):
        raise NoSolutionError(f"every n must be >= k={k}, got min {min(n_values)}")
    solver = _CoupledSolver(g, k, max(n_values), trials, seed, leaves_mute, workers)
    if tau_trials is None:
        tau_trials = int(trials)
    points = []
    for i, n in enumerate(n_values):
        est = solver.pmin(n, delta, tol)
        tau_seed = _subseed(seed, ROLE_TAU, i)
        tau = mc_tau(g, n, est.p_min, tau_trials, tau_seed, leaves_mute, workers)
        p_lo = max(est.p_min - est.ci, 0.0)
        p_hi = min(est.p_min + est.ci, 1.0)
        slope = 0.5 * abs(solver.mean_tau(p_hi, n) - solver.mean_tau(p_lo, n))
        tau_stderr = math.hypot(tau.stderr, slope)
        points.append(CurvePoint(n, est.p_min, est.ci, tau.mean, tau_stderr))
    return points


def write_curve_csv(points, path, comment: str | None = None) -> None:
    """Curve points as CSV with an optional leading comment block."""
    with open(path, "w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(CURVE_CSV_HEADER + "\n")
        for pt in points:
            fh.write(
                f"{pt.n},{pt.p_min!r},{pt.p_min_ci!r},{pt.tau!r},{pt.tau_stderr!r}\n"
            )
