"""Probabilistic forwarding of coded packets over a graph.

The source broadcasts every one of the n packets to its neighbours. Any
other vertex decides exactly once per packet, on first reception, whether
to forward it to all neighbours (probability p). A single forward is one
transmission regardless of degree. Packets are independent. On trees the
deepest level is muted by default since those forwards could never reach
anyone new.

Randomness convention: a run is identified by one master seed. Trials are
laid out in fixed-size batches; batch b draws its uniform tensor from
default_rng(SeedSequence((seed, role, b))). The batch size depends only on
the problem shape (a 32 MB target), never on worker count or memory, so
any worker count and the streamed and materialised evaluation paths all
see identical numbers. Vertex v compares row v (or v - 1 past the source)
of the threshold matrix against p: it forwards packet j iff u[row, j] <= p,
which makes every outcome pathwise monotone in p.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graphs import Graph

__all__ = [
    "ThresholdField",
    "TrialOutcome",
    "leaf_mute_mask",
    "run_single_packet",
    "run_trial",
    "run_trials",
    "run_trial_coupled",
]

_BATCH_TARGET_BYTES = 32 * 1024 * 1024
_BATCH_CAP = 4096

# role tags keep independent substreams apart under one master seed
ROLE_TRIALS = 0
ROLE_FIELDS = 1
ROLE_TAU = 2
ROLE_PERC = 3


def _check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    return seed


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def rng_for(seed: int, role: int, index: int) -> np.random.Generator:
    """The canonical substream generator, a fixed mix of (seed, role, index)."""
    return np.random.default_rng(np.random.SeedSequence((seed, role, index)))


def batch_size(rows: int, n: int) -> int:
    """Trials per batch: a deterministic function of problem shape only."""
    per_trial = max(1, rows * n) * 8
    return max(1, min(_BATCH_CAP, _BATCH_TARGET_BYTES // per_trial))


def field_batches(g: Graph, n: int, trials: int, seed: int, role: int = ROLE_FIELDS):
    """Yield (start_index, tensor) threshold batches in canonical layout.

    tensor has shape (batch_trials, vertex_count - 1, n); trial start+i
    uses tensor[i]. Regenerating any batch is cheap and exact, which is
    what lets threshold searches stream instead of holding every trial.
    """
    rows = g.vertex_count - 1
    b = batch_size(rows, n)
    start = 0
    batch_index = 0
    while start < trials:
        count = min(b, trials - start)
        rng = rng_for(seed, role, batch_index)
        yield start, rng.random((count, rows, n))
        start += count
        batch_index += 1


def leaf_mute_mask(g: Graph, leaves_mute: bool | None = None) -> np.ndarray:
    """Per-vertex mute mask; None means the graph-kind default.

    Trees mute their deepest level by default. Requesting leaf muting on a
    graph without level data is an error.
    """
    if leaves_mute is None:
        leaves_mute = g.is_tree
    mask = np.zeros(g.vertex_count, np.bool_)
    if leaves_mute:
        if g.level is None:
            raise ValueError("leaves_mute requires a tree graph with level data")
        mask = np.asarray(g.level == g.level.max())
    return mask


@dataclass(frozen=True)
class ThresholdField:
    """Per-(vertex, packet) uniform thresholds for coupled evaluation.

    u has shape (vertex_count - 1, n): one row per non-source vertex in
    index order. A vertex forwards packet j at level p iff its entry is
    <= p, so outcomes at increasing p are nested realisations.
    """

    u: np.ndarray

    @classmethod
    def sample(cls, g: Graph, n: int, seed: int) -> "ThresholdField":
        seed = _check_seed(seed)
        rng = rng_for(seed, ROLE_FIELDS, 0)
        return cls(rng.random((g.vertex_count - 1, int(n))))


@dataclass(frozen=True)
class TrialOutcome:
    """Result of sending n packets once.

    receive_counts[v] is the number of distinct packets v received, with
    the source pinned at n (it holds everything by construction).
    successful_receivers counts vertices at or above the decoding
    threshold k; transmissions sums forwarder counts over packets, so it
    is at least n (the source) and at most n * vertex_count.
    """

    receive_counts: np.ndarray
    successful_receivers: int
    transmissions: int


def run_single_packet(
    g: Graph,
    p: float,
    rng: np.random.Generator | None = None,
    indicators: np.ndarray | None = None,
    leaves_mute: bool | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one packet; returns (forwarder_mask, receiver_mask).

    Forward decisions come from `indicators` (bool per vertex, source
    entry ignored) when given, otherwise from one uniform draw per
    non-source vertex against p. The forwarder set is always connected
    and contains the source; receivers are the vertices adjacent to at
    least one forwarder.
    """
    p = _check_prob(p)
    mute = leaf_mute_mask(g, leaves_mute)
    if indicators is None:
        if rng is None:
            raise ValueError("need either an rng or explicit indicators")
        u = rng.random(g.vertex_count - 1)
        indicators = np.empty(g.vertex_count, np.bool_)
        indicators[: g.source] = u[: g.source] <= p
        indicators[g.source] = True
        indicators[g.source + 1:] = u[g.source:] <= p
    else:
        indicators = np.asarray(indicators, np.bool_)
        if indicators.shape != (g.vertex_count,):
            raise ValueError("indicators must be a bool array of length vertex_count")
    fire = indicators & ~mute
    fwd = np.empty(g.vertex_count, np.bool_)
    recv = np.empty(g.vertex_count, np.bool_)
    _kernels.single_packet(g.indptr, g.indices, g.source, fire, fwd, recv)
    return fwd, recv


def run_trial(
    g: Graph, n: int, k: int, p: float, seed: int, leaves_mute: bool | None = None
) -> TrialOutcome:
    """One independent trial of n packets with decoding threshold k."""
    n = int(n)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    p = _check_prob(p)
    seed = _check_seed(seed)
    mute = leaf_mute_mask(g, leaves_mute)
    u = rng_for(seed, ROLE_TRIALS, 0).random((1, g.vertex_count - 1, n))
    counts = np.zeros(g.vertex_count, np.int32)
    transmissions = _kernels.trial_counts(
        g.indptr, g.indices, g.source, mute, u[0], p, counts
    )
    counts[g.source] = n
    successful = int(np.count_nonzero(counts >= k))
    return TrialOutcome(counts, successful, int(transmissions))


def run_trials(
    g: Graph,
    n: int,
    k: int,
    p: float,
    trials: int,
    seed: int,
    leaves_mute: bool | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Independent trials in canonical batches.

    Returns (successful_receivers, transmissions) as int64 arrays of
    length trials, identical for any worker count.
    """
    n = int(n)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    p = _check_prob(p)
    seed = _check_seed(seed)
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    mute = leaf_mute_mask(g, leaves_mute)
    r_all = np.empty(trials, np.int64)
    t_all = np.empty(trials, np.int64)

    def work(item):
        start, u3 = item
        r = np.empty(u3.shape[0], np.int64)
        t = np.empty(u3.shape[0], np.int64)
        _kernels.batch_trial_stats(g.indptr, g.indices, g.source, mute, u3, p, k, r, t)
        r_all[start: start + u3.shape[0]] = r
        t_all[start: start + u3.shape[0]] = t

    batches = field_batches(g, n, trials, seed, ROLE_TRIALS)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            list(pool.map(work, batches))
    else:
        for item in batches:
            work(item)
    return r_all, t_all


def run_trial_coupled(
    g: Graph,
    k: int,
    p_grid: np.ndarray,
    field: ThresholdField,
    leaves_mute: bool | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate one threshold field across a p grid and all packet prefixes.

    Returns (R, T), each of shape (len(p_grid), n) where entry [i, j] is
    the outcome at forwarding probability p_grid[i] using only the first
    j + 1 packets. Rows reuse the same thresholds, so R and T are
    nondecreasing along both axes; the p = 1 column of any row matches an
    independent flood at p = 1.
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    u = np.asarray(field.u, np.float64)
    if u.ndim != 2 or u.shape[0] != g.vertex_count - 1:
        raise ValueError("field shape does not match the graph")
    p_grid = np.asarray(p_grid, np.float64)
    if p_grid.ndim != 1 or p_grid.size == 0:
        raise ValueError("p_grid must be a nonempty 1-d array")
    if np.any(p_grid < 0) or np.any(p_grid > 1) or np.any(np.diff(p_grid) < 0):
        raise ValueError("p_grid must be ascending within [0, 1]")
    mute = leaf_mute_mask(g, leaves_mute)
    n = u.shape[1]
    r_rows = np.empty((p_grid.size, n), np.int64)
    t_rows = np.empty((p_grid.size, n), np.int64)
    u3 = u[None, :, :]
    r_buf = np.empty((1, n), np.int64)
    t_buf = np.empty((1, n), np.int64)
    for i, p in enumerate(p_grid):
        _kernels.coupled_prefix_curves(
            g.indptr, g.indices, g.source, mute, u3, float(p), k, r_buf, t_buf
        )
        r_rows[i] = r_buf[0]
        t_rows[i] = t_buf[0]
    return r_rows, t_rows
