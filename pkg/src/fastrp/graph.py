"""Undirected graphs in compressed sparse row form.

A :class:`CsrGraph` stores the adjacency matrix ``S`` of a simple undirected
graph; the degree matrix ``D`` is its ``degrees`` vector and the row-stochastic
transition matrix ``A = D^-1 S`` is never materialized, only applied through
:func:`apply_transition`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from . import _kernels
from .errors import GraphError, ParseError, ShapeError

CSR_MAGIC = b"FRPG"
CSR_VERSION = 1


@dataclass(frozen=True)
class EdgeList:
    """Raw (u, v) pairs as read from input, before symmetrization."""

    u: np.ndarray
    v: np.ndarray

    def __len__(self) -> int:
        return len(self.u)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.u.tolist(), self.v.tolist()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "EdgeList":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if (arr < 0).any():
            raise GraphError("node ids must be non-negative")
        return cls(arr[:, 0].copy(), arr[:, 1].copy())

    def max_node(self) -> int:
        if len(self) == 0:
            return -1
        return int(max(self.u.max(), self.v.max()))


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Simple undirected graph; each edge is stored in both directions.

    Attributes
    ----------
    offsets : int64 array, shape (n + 1,)
        ``targets[offsets[i]:offsets[i + 1]]`` are the neighbours of ``i``,
        sorted ascending.
    targets : int32 array, shape (2m,)
    degrees : int64 array, shape (n,)
    """

    offsets: np.ndarray
    targets: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return len(self.offsets) - 1

    @property
    def m(self) -> int:
        return int(self.offsets[-1]) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.targets[self.offsets[i]:self.offsets[i + 1]]

    def check(self) -> None:
        """Raise :class:`GraphError` if any structural invariant is violated."""
        off, tgt = self.offsets, self.targets
        if off[0] != 0 or np.any(np.diff(off) < 0) or off[-1] != len(tgt):
            raise GraphError("offsets are not a valid cumulative index")
        if off[-1] % 2:
            raise GraphError("odd number of stored arcs")
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(off))
        if len(tgt):
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (tgt[1:] <= tgt[:-1])):
                raise GraphError("targets within a row are not strictly increasing")
            if np.any(rows == tgt):
                raise GraphError("self-loop present")
        fwd = rows * self.n + tgt
        rev = np.sort(tgt.astype(np.int64) * self.n + rows)
        if not np.array_equal(fwd, rev):
            raise GraphError("adjacency is not symmetric")
        if not np.array_equal(self.degrees, np.diff(off)):
            raise GraphError("degrees disagree with offsets")

    def to_dense_adjacency(self) -> np.ndarray:
        s = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), self.degrees)
        s[rows, self.targets] = 1.0
        return s

    def is_connected(self) -> bool:
        from scipy.sparse.csgraph import connected_components

        n_comp = connected_components(self.to_scipy(), directed=False, return_labels=False)
        return n_comp == 1

    def is_bipartite(self) -> bool:
        color = np.full(self.n, -1, dtype=np.int64)
        for start in range(self.n):
            if color[start] >= 0:
                continue
            color[start] = 0
            stack = [start]
            while stack:
                i = stack.pop()
                for j in self.neighbors(i):
                    if color[j] < 0:
                        color[j] = 1 - color[i]
                        stack.append(int(j))
                    elif color[j] == color[i]:
                        return False
        return True

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        data = np.ones(len(self.targets), dtype=np.float64)
        return csr_matrix((data, self.targets, self.offsets), shape=(self.n, self.n))


def parse_edge_list(stream: TextIO | Iterable[str], header: bool = False):
    """Read whitespace-separated integer pairs, one edge per line.

    Lines starting with ``#`` or ``%`` and blank lines are skipped.  With
    ``header=True`` the first data line is read as ``"n m"`` and returned
    alongside the edges as ``(edges, n)``; otherwise only the edges are
    returned.
    """
    us: list[int] = []
    vs: list[int] = []
    declared_n = None
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise ParseError(f"line {lineno}: expected 2 tokens, got {len(tokens)}")
        try:
            a, b = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer token in {stripped!r}") from None
        if a < 0 or b < 0:
            raise ParseError(f"line {lineno}: negative node id")
        if header and declared_n is None:
            declared_n = a
            continue
        us.append(a)
        vs.append(b)
    edges = EdgeList(np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64))
    if header:
        if declared_n is None:
            raise ParseError("missing 'n m' header line")
        return edges, declared_n
    return edges


def build_csr(edges: EdgeList, n: int) -> CsrGraph:
    """Symmetrize, drop self-loops, and collapse duplicates into a CSR graph."""
    if n <= 0:
        raise GraphError("graph must have at least one node")
    u = np.asarray(edges.u, dtype=np.int64)
    v = np.asarray(edges.v, dtype=np.int64)
    if len(u) and (max(u.max(), v.max()) >= n or min(u.min(), v.min()) < 0):
        raise GraphError(f"node id out of range [0, {n})")
    keep = u != v
    u, v = u[keep], v[keep]
    keys = np.unique(np.concatenate([u * n + v, v * n + u]))
    rows = keys // n
    targets = (keys - rows * n).astype(np.int32 if n < 2**31 else np.int64)
    degrees = np.bincount(rows, minlength=n).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])
    return CsrGraph(offsets, targets, degrees)


def from_pairs(pairs: Iterable[tuple[int, int]], n: int | None = None) -> CsrGraph:
    edges = EdgeList.from_pairs(pairs)
    return build_csr(edges, edges.max_node() + 1 if n is None else n)


def apply_transition(g: CsrGraph, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Return ``A @ x`` where ``A = D^-1 S``; rows of isolated nodes are zero."""
    if x.ndim != 2 or x.shape[0] != g.n:
        raise ShapeError(f"expected {g.n} rows, got shape {x.shape}")
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    x = np.ascontiguousarray(x)
    if out is None:
        out = np.empty_like(x)
    _kernels.neighbor_mean(g.offsets, g.targets, x, out)
    return out


def transition_matrix_dense(g: CsrGraph) -> np.ndarray:
    s = g.to_dense_adjacency()
    deg = g.degrees.astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return s * inv[:, None]


def transition_power_dense(g: CsrGraph, k: int) -> np.ndarray:
    """Dense float64 ``A**k`` by repeated multiplication; a test oracle only."""
    if k < 1:
        raise ValueError("power k must be >= 1")
    a = transition_matrix_dense(g)
    out = a
    for _ in range(k - 1):
        out = out @ a
    return out


def stationary_limit(g: CsrGraph) -> np.ndarray:
    """The rank-one limit ``P[i, j] = d_j / 2m`` of ``A**k``."""
    p = g.degrees / (2.0 * g.m)
    return np.broadcast_to(p, (g.n, g.n))


def _decode_pair_index(t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # Row-major upper-triangle index t -> (i, j), i < j.
    t = t.astype(np.int64)
    nn = 2 * n - 1
    i = np.floor((nn - np.sqrt(float(nn) ** 2 - 8.0 * t)) / 2.0).astype(np.int64)
    i = np.clip(i, 0, n - 2)
    start = i * (2 * n - i - 1) // 2
    # float rounding can leave i off by one in either direction
    low = t < start
    i[low] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    high = t >= nxt
    i[high] += 1
    start = i * (2 * n - i - 1) // 2
    j = t - start + i + 1
    return i, j


def generate_erdos_renyi(n: int, m: int, seed: int) -> CsrGraph:
    """G(n, m): exactly ``m`` distinct edges drawn uniformly without replacement."""
    if n < 1:
        raise GraphError("graph must have at least one node")
    total = n * (n - 1) // 2
    if m < 0 or m > total:
        raise ValueError(f"m={m} exceeds the {total} possible edges on {n} nodes")
    rng = np.random.default_rng(seed)
    idx = rng.choice(total, size=m, replace=False, shuffle=False) if m else np.empty(0, np.int64)
    u, v = _decode_pair_index(np.asarray(idx), n)
    return build_csr(EdgeList(u, v), n)


def write_csr_cache(g: CsrGraph, fh: BinaryIO) -> None:
    """Binary layout: ``FRPG``, u8 version, u64 n, u64 m, u64 offsets, u32 targets."""
    if g.n >= 2**32:
        raise GraphError("binary cache stores targets as u32")
    fh.write(CSR_MAGIC)
    fh.write(struct.pack("<BQQ", CSR_VERSION, g.n, g.m))
    fh.write(g.offsets.astype("<u8").tobytes())
    fh.write(g.targets.astype("<u4").tobytes())


def read_csr_cache(fh: BinaryIO) -> CsrGraph:
    if fh.read(4) != CSR_MAGIC:
        raise ParseError("not a FRPG graph cache")
    head = fh.read(17)
    if len(head) != 17:
        raise ParseError("truncated graph cache header")
    version, n, m = struct.unpack("<BQQ", head)
    if version != CSR_VERSION:
        raise ParseError(f"unsupported graph cache version {version}")
    off_bytes = fh.read(8 * (n + 1))
    tgt_bytes = fh.read(4 * 2 * m)
    if len(off_bytes) != 8 * (n + 1) or len(tgt_bytes) != 8 * m:
        raise ParseError("truncated graph cache body")
    offsets = np.frombuffer(off_bytes, dtype="<u8").astype(np.int64)
    targets = np.frombuffer(tgt_bytes, dtype="<u4").astype(np.int32)
    return CsrGraph(offsets, targets, np.diff(offsets))
