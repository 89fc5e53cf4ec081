"""Graph construction for forwarding experiments.

Graphs are immutable, undirected, simple (no loops, no parallel edges) and
stored in CSR form so the propagation kernels can walk them without Python
overhead. Builders cover the four families used throughout: square grids
with a centre source, complete d-ary trees rooted at the source, random
geometric graphs on a square, and random regular graphs. Every randomized
builder is a deterministic function of (parameters, seed).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphGenerationError

__all__ = [
    "Graph",
    "build_grid",
    "build_tree",
    "build_rgg",
    "build_random_regular",
    "build_from_edges",
    "rgg_points",
    "write_edge_list",
]


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph in CSR form.

    Attributes
    ----------
    vertex_count : int
        Number of vertices, indexed 0..vertex_count-1.
    indptr, indices : numpy.ndarray
        CSR adjacency: neighbours of v are indices[indptr[v]:indptr[v+1]],
        sorted ascending. Both arrays are int64 and must not be mutated.
    source : int
        Distinguished broadcast source.
    kind : str
        Construction tag, e.g. "grid(m=31)" or "tree(d=2,H=10)". Purely
        descriptive except that tree graphs get leaf muting by default.
    level : numpy.ndarray or None
        Per-vertex distance from the root, trees only.
    """

    vertex_count: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    source: int
    kind: str
    level: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.source < self.vertex_count:
            raise ValueError(
                f"source {self.source} out of range for {self.vertex_count} vertices"
            )
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if self.level is not None:
            self.level.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return self.indices.size // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]: self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> list[np.ndarray]:
        """Per-vertex neighbour arrays (views into the CSR storage)."""
        return [self.neighbors(v) for v in range(self.vertex_count)]

    @property
    def is_tree(self) -> bool:
        return self.level is not None


def _csr_from_pairs(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR arrays from undirected edge endpoints (each pair listed once)."""
    if u.size:
        if np.any(u == v):
            raise ValueError("self loops are not allowed")
        heads = np.concatenate([u, v])
        tails = np.concatenate([v, u])
        key = heads * np.int64(n) + tails
        if np.unique(key).size != key.size:
            raise ValueError("parallel edges are not allowed")
        order = np.argsort(key, kind="stable")
        heads = heads[order]
        tails = tails[order]
    else:
        heads = np.empty(0, np.int64)
        tails = np.empty(0, np.int64)
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, heads + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, tails.astype(np.int64)


def build_from_edges(
    vertex_count: int,
    edges,
    source: int = 0,
    kind: str = "custom",
    level: np.ndarray | None = None,
) -> Graph:
    """Graph from an explicit undirected edge list (each edge given once)."""
    e = np.asarray(list(edges), np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= vertex_count):
        raise ValueError("edge endpoint out of range")
    indptr, indices = _csr_from_pairs(vertex_count, e[:, 0], e[:, 1])
    return Graph(vertex_count, indptr, indices, source, kind, level)


def build_grid(m: int) -> Graph:
    """m x m square grid, 4-neighbour adjacency, row-major indexing.

    m must be odd and positive so the source can sit at the exact centre,
    index (m^2 - 1) // 2. The result has 2 m (m - 1) edges.
    """
    m = int(m)
    if m < 1 or m % 2 == 0:
        raise ValueError(f"grid side m must be odd and positive, got {m}")
    idx = np.arange(m * m, dtype=np.int64).reshape(m, m)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    e = np.concatenate([right, down])
    indptr, indices = _csr_from_pairs(m * m, e[:, 0], e[:, 1])
    return Graph(m * m, indptr, indices, (m * m - 1) // 2, f"grid(m={m})")


def build_tree(arity: int, height: int) -> Graph:
    """Complete arity-ary tree of the given height, BFS level-order indexing.

    The root (index 0) is the source. Vertex counts follow the geometric
    sum; the level array records depth and is what leaf muting keys on.
    """
    d = int(arity)
    h = int(height)
    if d < 2:
        raise ValueError(f"tree arity must be >= 2, got {d}")
    if h < 0:
        raise ValueError(f"tree height must be >= 0, got {h}")
    n = (d ** (h + 1) - 1) // (d - 1)
    level = np.zeros(n, np.int64)
    start, width = 1, d
    for depth in range(1, h + 1):
        level[start: start + width] = depth
        start += width
        width *= d
    if n > 1:
        parents = np.repeat(np.arange((n - 1) // d, dtype=np.int64), d)
        children = np.arange(1, n, dtype=np.int64)
        indptr, indices = _csr_from_pairs(n, parents, children)
    else:
        indptr, indices = _csr_from_pairs(n, np.empty(0, np.int64), np.empty(0, np.int64))
    return Graph(n, indptr, indices, 0, f"tree(d={d},H={h})", level)


def rgg_points(n_vertices: int, side: float, seed: int) -> np.ndarray:
    """The uniform point sample behind build_rgg, exposed for verification."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x9667)))
    return rng.random((int(n_vertices), 2)) * float(side)


def build_rgg(n_vertices: int, side: float, radius: float, seed: int) -> Graph:
    """Random geometric graph: uniform points on a square, edges by distance.

    Vertices are i.i.d. uniform on [0, side]^2 and joined when their
    Euclidean distance is <= radius. The source is the vertex nearest the
    square centre, ties broken by lowest index. May be disconnected; the
    protocol and estimators tolerate that.
    """
    n = int(n_vertices)
    if n < 1:
        raise ValueError(f"rgg needs at least one vertex, got {n}")
    if side <= 0 or radius < 0:
        raise ValueError(f"rgg needs side > 0 and radius >= 0, got {side}, {radius}")
    pts = rgg_points(n, side, seed)
    from scipy.spatial import cKDTree

    pairs = cKDTree(pts).query_pairs(float(radius), output_type="ndarray")
    pairs = pairs.astype(np.int64)
    indptr, indices = _csr_from_pairs(n, pairs[:, 0], pairs[:, 1])
    centre = np.array([side / 2.0, side / 2.0])
    d2 = np.sum((pts - centre) ** 2, axis=1)
    src = int(np.argmin(d2))  # argmin takes the lowest index on ties
    return Graph(n, indptr, indices, src, f"rgg(N={n},side={side},r={radius})")


def build_random_regular(
    n_vertices: int, degree: int, seed: int, max_tries: int = 2000
) -> Graph:
    """Random d-regular graph by the configuration model with rejection.

    Stubs are paired uniformly; any pairing containing a self loop or a
    parallel edge rejects the whole model and retries. n_vertices * degree
    must be even and degree < n_vertices. Exhausting max_tries raises
    GraphGenerationError.
    """
    n = int(n_vertices)
    d = int(degree)
    if n < 1 or d < 1:
        raise ValueError(f"regular graph needs n >= 1 and degree >= 1, got {n}, {d}")
    if d >= n:
        raise ValueError(f"degree must be < n_vertices, got d={d} n={n}")
    if (n * d) % 2:
        raise ValueError(f"n_vertices * degree must be even, got {n} * {d}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x4268)))
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(int(max_tries)):
        perm = rng.permutation(stubs)
        u, v = perm[0::2], perm[1::2]
        if np.any(u == v):
            continue
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        key = lo * np.int64(n) + hi
        if np.unique(key).size != key.size:
            continue
        indptr, indices = _csr_from_pairs(n, u, v)
        return Graph(n, indptr, indices, 0, f"regular(N={n},d={d})")
    raise GraphGenerationError(
        f"no simple {d}-regular pairing on {n} vertices after {max_tries} tries"
    )


def write_edge_list(g: Graph, path) -> None:
    """Dump as text: header '#N <count> source <index>', then 'u v' lines.

    Each undirected edge appears once with u < v, sorted lexicographically.
    """
    with open(path, "w") as fh:
        fh.write(f"#N {g.vertex_count} source {g.source}\n")
        for u in range(g.vertex_count):
            for v in g.neighbors(u):
                if u < v:
                    fh.write(f"{u} {v}\n")
