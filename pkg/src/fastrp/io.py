"""Graph and embedding files.

Embedding text format follows the word-vector convention: a first line
``"n d"`` then one line per node, ``node_id v_1 ... v_d``.  Values are written
with 9 significant digits, which round-trips float32 exactly.

Embedding binary format: ``FRPE``, u8 version, u64 n, u32 d, then ``n * d``
little-endian float32 values in row-major order.
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import CSR_MAGIC, CsrGraph, build_csr, parse_edge_list, read_csr_cache

EMB_MAGIC = b"FRPE"
EMB_VERSION = 1


def load_graph(path: str | os.PathLike, header: bool = False, n: int | None = None) -> CsrGraph:
    """Load an edge list, or a binary CSR cache when the file starts with ``FRPG``."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) == CSR_MAGIC:
            fh.seek(0)
            return read_csr_cache(fh)
    with open(path) as fh:
        parsed = parse_edge_list(fh, header=header)
    edges, declared = parsed if header else (parsed, None)
    if n is None:
        n = declared if declared is not None else edges.max_node() + 1
    return build_csr(edges, n)


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_embedding_text(emb: np.ndarray, path: str | os.PathLike) -> None:
    emb = np.asarray(emb, dtype=np.float32)
    n, d = emb.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {d}\n")
        for i, row in enumerate(emb):
            fh.write(f"{i} " + " ".join(f"{v:.9g}" for v in row.tolist()) + "\n")


def load_embedding_text(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise ParseError("embedding header must be 'n d'")
        n, d = int(head[0]), int(head[1])
        out = np.zeros((n, d), dtype=np.float32)
        for lineno, line in enumerate(fh, start=2):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != d + 1:
                raise ParseError(f"line {lineno}: expected {d + 1} fields, got {len(tokens)}")
            node = int(tokens[0])
            if not 0 <= node < n:
                raise ParseError(f"line {lineno}: node id {node} outside [0, {n})")
            out[node] = np.array(tokens[1:], dtype=np.float32)
    return out


def save_embedding_binary(emb: np.ndarray, path: str | os.PathLike) -> None:
    emb = np.ascontiguousarray(emb, dtype="<f4")
    n, d = emb.shape
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<BQI", EMB_VERSION, n, d))
        fh.write(emb.tobytes())


def load_embedding_binary(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != EMB_MAGIC:
            raise ParseError("not a FRPE embedding file")
        head = fh.read(13)
        if len(head) != 13:
            raise ParseError("truncated embedding header")
        version, n, d = struct.unpack("<BQI", head)
        if version != EMB_VERSION:
            raise ParseError(f"unsupported embedding version {version}")
        body = fh.read()
    if len(body) != 4 * n * d:
        raise ParseError("embedding body size does not match header")
    return np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float32)


def save_embedding(emb: np.ndarray, path: str | os.PathLike, fmt: str | None = None) -> None:
    fmt = fmt or ("binary" if str(path).endswith((".bin", ".frpe")) else "text")
    if fmt == "binary":
        save_embedding_binary(emb, path)
    else:
        save_embedding_text(emb, path)


def load_embedding(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == EMB_MAGIC:
        return load_embedding_binary(path)
    return load_embedding_text(path)
