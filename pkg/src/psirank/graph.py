"""Directed follower/leader graph in compressed sparse row form, plus synthetic topologies.

Users are dense integer ids 0..N-1. An edge (j, i) means "j follows i", i.e. i is a
leader of j and posts flow from i's Wall into j's Newsfeed. Both orientations are
stored so that leaders(j) and followers(i) are O(degree) slices. Graphs are immutable
after construction and safe for concurrent reads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SocialGraph",
    "build_graph",
    "generate_binary_tree",
    "generate_scale_free",
    "generate_erdos_renyi",
    "load_edge_list",
    "save_edge_list",
    "load_id_map",
    "save_id_map",
]


class GraphError(ValueError):
    pass


def _csr_from_pairs(rows: np.ndarray, cols: np.ndarray, n: int):
    """Sort (row, col) pairs and pack them into CSR indptr/indices arrays."""
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, np.ascontiguousarray(cols)


class SocialGraph:
    """Follower graph with CSR adjacency in both orientations.

    leader_adj[j] lists the users j follows (j's leaders); follower_adj[i] lists the
    users following i. The two are exact transposes of each other, rows are sorted,
    and self-loops are rejected at construction.
    """

    __slots__ = ("n_users", "_lptr", "_lidx", "_fptr", "_fidx")

    def __init__(self, n_users: int, follower: np.ndarray, leader: np.ndarray):
        # follower[k] follows leader[k]; pairs must already be deduplicated,
        # in-range and self-loop free (use build_graph for raw input).
        self.n_users = int(n_users)
        self._lptr, self._lidx = _csr_from_pairs(follower, leader, self.n_users)
        self._fptr, self._fidx = _csr_from_pairs(leader, follower, self.n_users)

    # -- accessors ---------------------------------------------------------

    def leaders(self, j: int) -> np.ndarray:
        """Sorted ids of the users that j follows."""
        return self._lidx[self._lptr[j]:self._lptr[j + 1]]

    def followers(self, i: int) -> np.ndarray:
        """Sorted ids of the users following i."""
        return self._fidx[self._fptr[i]:self._fptr[i + 1]]

    @property
    def leader_indptr(self) -> np.ndarray:
        return self._lptr

    @property
    def leader_indices(self) -> np.ndarray:
        return self._lidx

    @property
    def follower_indptr(self) -> np.ndarray:
        return self._fptr

    @property
    def follower_indices(self) -> np.ndarray:
        return self._fidx

    @property
    def n_edges(self) -> int:
        return int(self._lidx.size)

    def leader_counts(self) -> np.ndarray:
        """Number of leaders per user (out-degree of the follow edge)."""
        return np.diff(self._lptr)

    def follower_counts(self) -> np.ndarray:
        """Number of followers per user (in-degree of the follow edge)."""
        return np.diff(self._fptr)

    def edge_pairs(self) -> np.ndarray:
        """All edges as an (E, 2) array of (follower, leader) pairs."""
        follower = np.repeat(np.arange(self.n_users, dtype=np.int64), self.leader_counts())
        return np.column_stack([follower, self._lidx])

    def subgraph(self, keep: np.ndarray) -> tuple["SocialGraph", np.ndarray]:
        """Induced subgraph on `keep` (relabelled densely); returns (graph, old_ids)."""
        keep = np.unique(np.asarray(keep, dtype=np.int64))
        remap = np.full(self.n_users, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        pairs = self.edge_pairs()
        mask = (remap[pairs[:, 0]] >= 0) & (remap[pairs[:, 1]] >= 0)
        pairs = remap[pairs[mask]]
        return SocialGraph(keep.size, pairs[:, 0], pairs[:, 1]), keep

    def validate(self) -> None:
        """Full-scan structural check: ids in range, no self-loops, exact transpose consistency."""
        for ptr, idx in ((self._lptr, self._lidx), (self._fptr, self._fidx)):
            if ptr[-1] != idx.size:
                raise GraphError("corrupt CSR structure")
            if idx.size and (idx.min() < 0 or idx.max() >= self.n_users):
                raise GraphError("adjacency id out of range")
        fwd = {(j, i) for j in range(self.n_users) for i in self.leaders(j)}
        rev = {(j, i) for i in range(self.n_users) for j in self.followers(i)}
        if fwd != rev:
            raise GraphError("leader/follower adjacency are not transposes")
        if any(j == i for j, i in fwd):
            raise GraphError("self-loop present")

    def __repr__(self) -> str:  # pragma: no cover
        return f"SocialGraph(n_users={self.n_users}, n_edges={self.n_edges})"


def build_graph(edges, n_users: int) -> SocialGraph:
    """Build a SocialGraph from (follower, leader) pairs.

    Duplicate pairs are silently deduplicated. Self-loops or out-of-range ids are
    rejected, naming the offending pair.
    """
    n_users = int(n_users)
    if n_users < 0:
        raise GraphError("n_users must be non-negative")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError("edges must be (follower, leader) pairs")
    bad = (arr < 0) | (arr >= n_users)
    if bad.any():
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise GraphError(f"edge ({arr[k, 0]}, {arr[k, 1]}) has id outside [0, {n_users})")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        k = int(np.flatnonzero(loops)[0])
        raise GraphError(f"self-loop edge ({arr[k, 0]}, {arr[k, 1]}) rejected")
    keys = np.unique(arr[:, 0] * n_users + arr[:, 1])
    return SocialGraph(n_users, keys // n_users, keys % n_users)


def _from_undirected(pairs: np.ndarray, n: int) -> SocialGraph:
    """Turn undirected (u, v) pairs into a symmetric directed graph (u<->v follow each other)."""
    if pairs.size == 0:
        return build_graph(np.empty((0, 2), dtype=np.int64), n)
    both = np.vstack([pairs, pairs[:, ::-1]])
    return build_graph(both, n)


def generate_binary_tree(depth: int) -> SocialGraph:
    """Perfect binary tree of the given depth; every tree edge follows both ways.

    Node 0 is the root and node k has children 2k+1, 2k+2, so level-d nodes occupy
    ids [2^d - 1, 2^(d+1) - 1).
    """
    if depth < 1:
        raise GraphError("depth must be >= 1")
    n = 2 ** (depth + 1) - 1
    child = np.arange(1, n, dtype=np.int64)
    parent = (child - 1) // 2
    return _from_undirected(np.column_stack([child, parent]), n)


def tree_level(node) -> np.ndarray:
    """Level (root = 0) of heap-ordered tree node ids."""
    return np.floor(np.log2(np.asarray(node, dtype=np.float64) + 1)).astype(np.int64)


def generate_scale_free(n: int, exponent: float, seed: int) -> SocialGraph:
    """Undirected configuration-model graph with power-law degrees, both orientations.

    Degrees are sampled from a discrete power law with the given exponent (minimum
    degree 1, capped at n-1); an odd stub total is repaired by incrementing user 0's
    degree. Stubs are matched uniformly at random and the self-loops/multi-edges this
    produces are discarded, so realized degrees can fall slightly short.
    """
    if n < 2:
        raise GraphError("n must be >= 2")
    if exponent <= 2:
        raise GraphError("exponent must be > 2")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    degrees = np.floor((1.0 - u) ** (-1.0 / (exponent - 1.0))).astype(np.int64)
    np.clip(degrees, 1, n - 1, out=degrees)
    if degrees.sum() % 2 == 1:
        degrees[0] += 1
    stubs = np.repeat(np.arange(n, dtype=np.int64), degrees)
    stubs = rng.permutation(stubs)
    a = stubs[0::2]
    b = stubs[1::2]
    keep = a != b
    a, b = a[keep], b[keep]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    keys = np.unique(lo * n + hi)
    pairs = np.column_stack([keys // n, keys % n])
    return _from_undirected(pairs, n)


def generate_erdos_renyi(n: int, mean_degree: float, seed: int) -> SocialGraph:
    """Undirected G(n, p) with p = mean_degree/(n-1), both orientations emitted.

    Samples only the ~p*n*(n-1)/2 present edges by geometric skipping over the
    upper-triangle pair sequence, so large sparse graphs stay cheap.
    """
    if n < 2:
        raise GraphError("n must be >= 2")
    if not (0.0 < mean_degree < n - 1):
        raise GraphError("mean_degree must lie in (0, n-1)")
    p = mean_degree / (n - 1)
    rng = np.random.default_rng(seed)
    total = n * (n - 1) // 2
    positions = []
    pos = -1
    while True:
        pos += int(rng.geometric(p))
        if pos >= total:
            break
        positions.append(pos)
    if not positions:
        return build_graph(np.empty((0, 2), dtype=np.int64), n)
    # decode linear upper-triangle indices: row u starts at S(u) = u*(2n-u-1)/2
    pos = np.asarray(positions, dtype=np.int64)
    rows = np.arange(n, dtype=np.int64)
    starts = rows * (2 * n - rows - 1) // 2
    u = np.searchsorted(starts, pos, side="right") - 1
    v = u + 1 + (pos - starts[u])
    return _from_undirected(np.column_stack([u, v]), n)


# -- edge-list files ---------------------------------------------------------

def save_edge_list(graph: SocialGraph, path, id_map=None) -> None:
    """Write one `follower<TAB>leader` line per edge (external ids if id_map given)."""
    pairs = graph.edge_pairs()
    with open(path, "w") as fh:
        for j, i in pairs:
            if id_map is not None:
                fh.write(f"{id_map[j]}\t{id_map[i]}\n")
            else:
                fh.write(f"{j}\t{i}\n")


def load_edge_list(path, n_users: int | None = None, id_map_path=None) -> SocialGraph:
    """Read a `follower<TAB>leader` edge list; `#` comment lines are ignored.

    Ids are dense integers, or arbitrary strings resolvable through the sidecar
    id-map file (`id<TAB>external_id` per line).
    """
    to_internal = None
    if id_map_path is not None:
        ext = load_id_map(id_map_path)
        to_internal = {e: k for k, e in enumerate(ext)}
        if n_users is None:
            n_users = len(ext)
    pairs = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            f, l = line.split("\t")
            if to_internal is not None:
                pairs.append((to_internal[f], to_internal[l]))
            else:
                pairs.append((int(f), int(l)))
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if n_users is None:
        n_users = int(arr.max()) + 1 if arr.size else 0
    return build_graph(arr, n_users)


def save_id_map(ids, path) -> None:
    """Write the `internal<TAB>external` sidecar mapping."""
    with open(path, "w") as fh:
        for k, ext in enumerate(ids):
            fh.write(f"{k}\t{ext}\n")


def load_id_map(path) -> list:
    """Read the sidecar mapping back as a list indexed by internal id."""
    entries = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            k, ext = line.split("\t", 1)
            entries[int(k)] = ext
    return [entries[k] for k in range(len(entries))]
