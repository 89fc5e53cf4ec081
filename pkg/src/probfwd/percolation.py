"""Site percolation on a square lattice, free boundary.

Sites of an m x m window are open i.i.d. with probability p; clusters use
4-neighbour adjacency. The extended cluster of an open cluster adds the
closed sites adjacent to it. The giant-component density theta(p) is
estimated by the largest-cluster fraction averaged over realisations, and
theta_plus(p) either as theta(p) / p (the two densities differ by exactly
the conditioning on the site being open) or directly from extended
clusters. Estimates below the (believed) critical point near 0.593 measure
finite boxes only and are reported as-is; treat them as sub-critical
diagnostics, not densities.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from . import _kernels
from .estimator import McEstimate

__all__ = [
    "SITE_THRESHOLD_ESTIMATE",
    "PercField",
    "ThetaTable",
    "sample_field",
    "label_clusters",
    "extended_cluster",
    "estimate_theta",
    "estimate_theta_plus",
    "conditioned_origin_density",
    "build_theta_table",
    "default_p_grid",
    "theta_cache_filename",
]

# believed site-percolation critical point on the square lattice
SITE_THRESHOLD_ESTIMATE = 0.593

THETA_CSV_HEADER = "p,theta,theta_stderr,theta_plus,m,reps,seed"

_ROLE_PERC = 3


def _check_m(m: int) -> int:
    m = int(m)
    if m < 1 or m % 2 == 0:
        raise ValueError(f"window side m must be odd and positive, got {m}")
    return m


def _field_rng(seed: int, stream: int, rep: int) -> np.random.Generator:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    return np.random.default_rng(
        np.random.SeedSequence((seed, _ROLE_PERC, int(stream), int(rep)))
    )


@dataclass(frozen=True)
class PercField:
    """One sampled site configuration on an m x m window."""

    p: float
    open_sites: np.ndarray  # (m, m) bool

    @property
    def m(self) -> int:
        return self.open_sites.shape[0]

    @property
    def centre(self) -> tuple[int, int]:
        c = (self.m - 1) // 2
        return c, c


def sample_field(m: int, p: float, seed: int, stream: int = 0) -> PercField:
    """Bernoulli(p) site field; deterministic in (m, p, seed, stream)."""
    m = _check_m(m)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = _field_rng(seed, stream, 0)
    return PercField(p, rng.random((m, m)) < p)


def label_clusters(f: PercField) -> tuple[np.ndarray, np.ndarray]:
    """Union-find cluster labels for open sites.

    Returns (labels, sizes): labels is (m, m) int32 with -1 on closed
    sites and compact ids elsewhere; sizes[c] is the site count of
    cluster c, so sizes.sum() equals the number of open sites.
    """
    m = f.m
    flat = np.ascontiguousarray(f.open_sites.reshape(-1))
    labels = np.empty(m * m, np.int32)
    n_clusters = _kernels.label_grid(flat, m, labels)
    labels = labels.reshape(m, m)
    if n_clusters == 0:
        return labels, np.zeros(0, np.int64)
    sizes = np.bincount(labels[labels >= 0].ravel(), minlength=n_clusters)
    return labels, sizes.astype(np.int64)


def extended_cluster(
    f: PercField, cluster_id: int, labels: np.ndarray | None = None
) -> np.ndarray:
    """Mask of the cluster plus its closed boundary inside the window."""
    if labels is None:
        labels, _ = label_clusters(f)
    cluster_id = int(cluster_id)
    if cluster_id < 0 or not np.any(labels == cluster_id):
        raise ValueError(f"unknown cluster id {cluster_id}")
    mask = labels == cluster_id
    nb = np.zeros_like(mask)
    nb[1:, :] |= mask[:-1, :]
    nb[:-1, :] |= mask[1:, :]
    nb[:, 1:] |= mask[:, :-1]
    nb[:, :-1] |= mask[:, 1:]
    return mask | (nb & ~f.open_sites)


def _per_rep(m, p, reps, seed, stream, workers, one_rep):
    out = np.empty(reps, np.float64)

    def work(r):
        out[r] = one_rep(_field_rng(seed, stream, r).random((m, m)) < p)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            list(pool.map(work, range(reps)))
    else:
        for r in range(reps):
            work(r)
    return out


def _stats(values: np.ndarray, seed: int) -> McEstimate:
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(values.size))
    return McEstimate(mean, stderr, int(values.size), int(seed))


def _largest_fraction(open_sites: np.ndarray) -> float:
    m = open_sites.shape[0]
    flat = np.ascontiguousarray(open_sites.reshape(-1))
    labels = np.empty(m * m, np.int32)
    n_clusters = _kernels.label_grid(flat, m, labels)
    if n_clusters == 0:
        return 0.0
    sizes = np.bincount(labels[labels >= 0], minlength=n_clusters)
    return float(sizes.max()) / (m * m)


def estimate_theta(
    m: int, p: float, reps: int, seed: int, workers: int = 1, stream: int = 0
) -> McEstimate:
    """Largest-open-cluster fraction, mean and stderr over reps.

    reps must be at least 2 for the stderr to exist.
    """
    m = _check_m(m)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    reps = int(reps)
    if reps < 2:
        raise ValueError(f"need reps >= 2 for a standard error, got {reps}")
    vals = _per_rep(m, p, reps, seed, stream, workers, _largest_fraction)
    return _stats(vals, seed)


def _largest_extended_fraction(open_sites: np.ndarray) -> float:
    m = open_sites.shape[0]
    flat = np.ascontiguousarray(open_sites.reshape(-1))
    labels = np.empty(m * m, np.int32)
    n_clusters = _kernels.label_grid(flat, m, labels)
    if n_clusters == 0:
        return 0.0
    sizes = np.bincount(labels[labels >= 0], minlength=n_clusters)
    big = int(np.argmax(sizes))
    lab2 = labels.reshape(m, m)
    mask = lab2 == big
    nb = np.zeros_like(mask)
    nb[1:, :] |= mask[:-1, :]
    nb[:-1, :] |= mask[1:, :]
    nb[:, 1:] |= mask[:, :-1]
    nb[:, :-1] |= mask[:, 1:]
    ext = mask | (nb & ~open_sites)
    return float(np.count_nonzero(ext)) / (m * m)


def estimate_theta_plus(
    m: int,
    p: float,
    reps: int,
    seed: int,
    method: str = "ratio",
    workers: int = 1,
    stream: int = 0,
) -> McEstimate:
    """Extended-cluster density estimate.

    method="ratio" rescales the theta estimate by 1 / p (needs p > 0);
    method="direct" measures the largest cluster together with its closed
    boundary. The two agree in the large-window limit.
    """
    if method == "ratio":
        p = float(p)
        if p <= 0.0:
            raise ValueError("ratio method needs p > 0")
        base = estimate_theta(m, p, reps, seed, workers=workers, stream=stream)
        return McEstimate(base.mean / p, base.stderr / p, base.trials, base.seed)
    if method == "direct":
        m = _check_m(m)
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        reps = int(reps)
        if reps < 2:
            raise ValueError(f"need reps >= 2 for a standard error, got {reps}")
        vals = _per_rep(m, p, reps, seed, stream, workers, _largest_extended_fraction)
        return _stats(vals, seed)
    raise ValueError(f"method must be 'ratio' or 'direct', got {method!r}")


def conditioned_origin_density(
    m: int, p: float, reps: int, seed: int, workers: int = 1, stream: int = 0
) -> McEstimate:
    """Mean cluster fraction of the centre site, conditioned open.

    Each rep samples a field, forces the centre open (an exact sampling of
    the conditional law, since sites are independent) and measures the
    centre's cluster size over m^2.
    """
    m = _check_m(m)
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    reps = int(reps)
    if reps < 2:
        raise ValueError(f"need reps >= 2 for a standard error, got {reps}")
    c = (m - 1) // 2
    centre_flat = c * m + c

    def one_rep(open_sites):
        open_sites[c, c] = True
        flat = np.ascontiguousarray(open_sites.reshape(-1))
        labels = np.empty(m * m, np.int32)
        n_clusters = _kernels.label_grid(flat, m, labels)
        sizes = np.bincount(labels[labels >= 0], minlength=n_clusters)
        return float(sizes[labels[centre_flat]]) / (m * m)

    vals = _per_rep(m, p, reps, seed, stream, workers, one_rep)
    return _stats(vals, seed)


def default_p_grid() -> np.ndarray:
    """The standard table grid: 0.593 to 0.998 in steps of 0.005."""
    return np.round(0.593 + 0.005 * np.arange(82), 3)


@dataclass(frozen=True)
class ThetaTable:
    """Tabulated theta estimates with monotone query curves.

    Raw means keep their sampling noise; queries interpolate isotonic
    (pool-adjacent-violators) projections instead so that threshold
    searches see genuinely nondecreasing curves. After projection the row
    invariant 0 <= theta <= theta_plus <= 1 holds everywhere.
    """

    p: np.ndarray
    theta: np.ndarray
    theta_stderr: np.ndarray
    theta_plus: np.ndarray
    m: int
    reps: int
    seed: int
    theta_monotone: np.ndarray = field(init=False, repr=False)
    theta_plus_monotone: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.p, np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("p grid must be a nonempty 1-d array")
        if np.any(np.diff(p) <= 0):
            raise ValueError("p grid must be strictly ascending")
        if p[0] < 0 or p[-1] > 1:
            raise ValueError("p grid must lie within [0, 1]")
        for name in ("theta", "theta_stderr", "theta_plus"):
            arr = np.asarray(getattr(self, name), np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{name} must match the p grid shape")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "p", p)
        mono_t = np.clip(isotonic_regression(self.theta).x, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(p > 0, mono_t / np.where(p > 0, p, 1.0), 0.0)
        mono_tp = np.clip(isotonic_regression(ratio).x, 0.0, 1.0)
        # isotonic projection preserves pointwise order, so mono_t <= mono_tp
        object.__setattr__(self, "theta_monotone", mono_t)
        object.__setattr__(self, "theta_plus_monotone", mono_tp)

    def theta_at(self, p) -> float | np.ndarray:
        """Monotone theta query, linear between grid points, clamped ends."""
        out = np.interp(p, self.p, self.theta_monotone)
        return float(out) if np.isscalar(p) else out

    def theta_plus_at(self, p) -> float | np.ndarray:
        out = np.interp(p, self.p, self.theta_plus_monotone)
        return float(out) if np.isscalar(p) else out

    def save_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w") as fh:
            if comment:
                for line in comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(THETA_CSV_HEADER + "\n")
            for i in range(self.p.size):
                # float() strips the numpy scalar repr; repr round-trips
                fh.write(
                    f"{float(self.p[i])!r},{float(self.theta[i])!r},"
                    f"{float(self.theta_stderr[i])!r},{float(self.theta_plus[i])!r},"
                    f"{self.m},{self.reps},{self.seed}\n"
                )

    @classmethod
    def load_csv(cls, path) -> "ThetaTable":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if line == THETA_CSV_HEADER:
                    continue
                rows.append(line.split(","))
        if not rows:
            raise ValueError(f"no data rows in {path}")
        cols = list(zip(*rows))
        return cls(
            p=np.array([float(x) for x in cols[0]]),
            theta=np.array([float(x) for x in cols[1]]),
            theta_stderr=np.array([float(x) for x in cols[2]]),
            theta_plus=np.array([float(x) for x in cols[3]]),
            m=int(cols[4][0]),
            reps=int(cols[5][0]),
            seed=int(cols[6][0]),
        )


def theta_cache_filename(m: int, reps: int, seed: int, p_grid: np.ndarray) -> str:
    """Cache name keyed by every input that shapes the table."""
    digest = hashlib.sha256(np.asarray(p_grid, np.float64).tobytes()).hexdigest()[:8]
    return f"theta_m{int(m)}_r{int(reps)}_s{int(seed)}_g{digest}.csv"


def build_theta_table(
    m: int, p_grid: np.ndarray, reps: int, seed: int, workers: int = 1
) -> ThetaTable:
    """Estimate theta over a p grid; one independent substream per point."""
    m = _check_m(m)
    p_grid = np.asarray(p_grid, np.float64)
    theta = np.empty(p_grid.size)
    stderr = np.empty(p_grid.size)
    theta_plus = np.empty(p_grid.size)
    for i, p in enumerate(p_grid):
        est = estimate_theta(m, float(p), reps, seed, workers=workers, stream=i)
        theta[i] = est.mean
        stderr[i] = est.stderr
        theta_plus[i] = est.mean / p if p > 0 else 0.0
    return ThetaTable(p_grid, theta, stderr, theta_plus, m, int(reps), int(seed))
