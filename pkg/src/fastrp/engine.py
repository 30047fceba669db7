"""FastRP embeddings: very sparse random projection of transition-matrix powers.

The embedding is ``N = sum_i alpha_i * A^i @ L @ R`` where ``A`` is the
transition matrix, ``L = diag((d_j / 2m) ** beta)`` down-weights popular
nodes and ``R`` is a random projection.  ``A^i @ L @ R`` is computed right to
left, one sparse product per power, so the cost is ``O((n + m) k d)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numba
import numpy as np

from . import _kernels
from .errors import NumericError, ShapeError
from .graph import CsrGraph, apply_transition, transition_matrix_dense
from .projection import (
    ProjectionKind,
    ProjectionMatrix,
    ProjectionSpec,
    default_sparsity,
    sample,
)

log = logging.getLogger(__name__)

DEFAULT_DIM = 512
DEFAULT_K = 4
DEFAULT_BETA = -0.9
DEFAULT_WEIGHTS = (0.0, 0.0, 1.0, 4.0)
ORACLE_LIMIT = 512


def set_threads(n: int | None) -> int:
    """Cap the kernel worker pool; returns the effective thread count."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None or n <= 0 else min(int(n), limit)
    numba.set_num_threads(n)
    return n


@dataclass(frozen=True)
class FastRpConfig:
    d: int = DEFAULT_DIM
    k: int = DEFAULT_K
    beta: float = DEFAULT_BETA
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    s: float | None = None  # None means sqrt(n)
    kind: ProjectionKind = ProjectionKind.VERY_SPARSE
    seed: int = 0
    normalize_rows: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "kind", ProjectionKind(self.kind))
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.weights) != self.k:
            raise ValueError(f"expected {self.k} weights, got {len(self.weights)}")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite and non-negative")
        if not any(self.weights):
            raise ValueError("at least one weight must be nonzero")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.s is not None and not self.s >= 1:
            raise ValueError("s must be >= 1")

    def sparsity(self, n: int) -> float:
        return default_sparsity(n) if self.s is None else float(self.s)

    def projection_spec(self, n: int) -> ProjectionSpec:
        return ProjectionSpec(n=n, d=self.d, s=self.sparsity(n), kind=self.kind, seed=self.seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FastRpConfig":
        return cls(**{**data, "weights": tuple(data["weights"])})


@dataclass(frozen=True, eq=False)
class PowerEmbeddings:
    """``N_1 .. N_k`` sharing one projection and one normalizer."""

    matrices: list[np.ndarray]
    beta: float
    projection: ProjectionMatrix = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.matrices)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrices[0].shape


def compute_normalizer(g: CsrGraph, beta: float) -> np.ndarray:
    """Diagonal of ``L``: ``(d_j / 2m) ** beta``, and 0 for isolated nodes."""
    if g.m == 0:
        raise ValueError("normalizer undefined for a graph without edges")
    deg = g.degrees.astype(np.float64)
    out = np.zeros(g.n)
    mask = deg > 0
    out[mask] = (deg[mask] / (2.0 * g.m)) ** beta
    if not np.all(np.isfinite(out)):
        raise NumericError(f"normalizer overflows at beta={beta}")
    return out


def initial_block(g: CsrGraph, cfg: FastRpConfig, projection: ProjectionMatrix | None = None):
    """Sample ``R`` and return it with the dense float32 ``L @ R`` (scale included)."""
    if projection is None:
        projection = sample(cfg.projection_spec(g.n))
    elif projection.spec.n != g.n or projection.spec.d != cfg.d:
        raise ShapeError("projection shape does not match graph and config")
    lr = projection.scaled_rows(compute_normalizer(g, cfg.beta), dtype=np.float32)
    return projection, lr


def _check_finite(x: np.ndarray, power: int) -> None:
    if not _kernels.all_finite(x):
        where = f"power {power} embedding" if power else "normalized projection L @ R"
        raise NumericError(f"non-finite values in {where}")


def compute_power_embeddings(
    g: CsrGraph, cfg: FastRpConfig, projection: ProjectionMatrix | None = None
) -> PowerEmbeddings:
    projection, current = initial_block(g, cfg, projection)
    _check_finite(current, 0)
    mats = []
    for i in range(1, cfg.k + 1):
        current = apply_transition(g, current)
        _check_finite(current, i)
        mats.append(current)
    return PowerEmbeddings(mats, cfg.beta, projection)


def merge_weighted(powers: PowerEmbeddings, weights: Sequence[float]) -> np.ndarray:
    """``sum_i weights[i] * N_i`` accumulated in power order, float32."""
    if len(weights) != powers.k:
        raise ShapeError(f"expected {powers.k} weights, got {len(weights)}")
    out = np.zeros(powers.shape, dtype=np.float32)
    for w, mat in zip(weights, powers.matrices):
        if w:
            _kernels.axpy_rows(np.float32(w), mat, out)
    return out


def normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def fastrp_embed(
    g: CsrGraph, cfg: FastRpConfig, projection: ProjectionMatrix | None = None
) -> np.ndarray:
    """Embed ``g``; identical to merging :func:`compute_power_embeddings`.

    Only the running power and the accumulator are kept in memory, and
    propagation stops after the last nonzero weight.
    """
    projection, current = initial_block(g, cfg, projection)
    _check_finite(current, 0)
    last = max(i for i, w in enumerate(cfg.weights) if w) + 1
    out = np.zeros_like(current)
    scratch = np.empty_like(current)
    for i in range(1, last + 1):
        apply_transition(g, current, out=scratch)
        current, scratch = scratch, current
        _check_finite(current, i)
        w = cfg.weights[i - 1]
        if w:
            _kernels.axpy_rows(np.float32(w), current, out)
    if cfg.normalize_rows:
        out = normalize_rows(out)
    return out


def normalized_similarity_dense(g: CsrGraph, cfg: FastRpConfig) -> np.ndarray:
    """Float64 ``sum_i alpha_i A^i L``, the matrix that FastRP projects."""
    if g.n > ORACLE_LIMIT * 4:
        raise ValueError(f"dense similarity refused for n={g.n}")
    a = transition_matrix_dense(g)
    lvec = compute_normalizer(g, cfg.beta)
    total = np.zeros((g.n, g.n))
    power = np.eye(g.n)
    for w in cfg.weights:
        power = a @ power
        if w:
            total += w * (power * lvec[None, :])
    return total


def dense_oracle_embed(
    g: CsrGraph, cfg: FastRpConfig, r: np.ndarray, limit: int = ORACLE_LIMIT
) -> np.ndarray:
    """Reference ``sum_i alpha_i (A^i L) R`` from explicit float64 dense products."""
    if g.n > limit:
        raise ValueError(f"dense oracle refused: n={g.n} exceeds limit {limit}")
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != g.n:
        raise ShapeError(f"R has {r.shape[0]} rows, graph has {g.n} nodes")
    a = transition_matrix_dense(g)
    lmat = np.diag(compute_normalizer(g, cfg.beta))
    out = np.zeros((g.n, r.shape[1]))
    for i, w in enumerate(cfg.weights, start=1):
        if w:
            out += w * (np.linalg.matrix_power(a, i) @ lmat @ r)
    if cfg.normalize_rows:
        out = normalize_rows(out)
    return out


Evaluator = Callable[[np.ndarray], float]


@dataclass
class SweepResult:
    best_beta: float
    best_weights: tuple[float, ...]
    best_score: float
    table: list[dict]
    power_computations: int = 0
    merges: int = 0

    def best_config(self, cfg: FastRpConfig) -> FastRpConfig:
        return replace(cfg, beta=self.best_beta, weights=self.best_weights)


def sweep(
    powers: PowerEmbeddings,
    weight_grid: Sequence[Sequence[float]],
    evaluator: Evaluator,
) -> SweepResult:
    """Score each weight vector by re-merging precomputed powers."""
    if not len(weight_grid):
        raise ValueError("empty weight grid")
    table = []
    for weights in weight_grid:
        weights = tuple(float(w) for w in weights)
        score = float(evaluator(merge_weighted(powers, weights)))
        table.append({"beta": powers.beta, "weights": weights, "score": score})
    best = max(table, key=lambda row: row["score"])
    return SweepResult(best["beta"], best["weights"], best["score"], table, 0, len(table))


def sweep_grid(
    g: CsrGraph,
    cfg: FastRpConfig,
    betas: Sequence[float],
    weight_grid: Sequence[Sequence[float]],
    evaluator: Evaluator,
) -> SweepResult:
    """Outer loop over beta (recompute powers), inner loop over weights (re-merge).

    ``R`` is sampled once and shared by every beta.
    """
    if not len(betas) or not len(weight_grid):
        raise ValueError("empty sweep grid")
    k = len(weight_grid[0])
    base = replace(cfg, k=k, weights=tuple(weight_grid[0]))
    projection = sample(base.projection_spec(g.n))
    table: list[dict] = []
    n_powers = n_merges = 0
    for beta in betas:
        powers = compute_power_embeddings(g, replace(base, beta=float(beta)), projection)
        n_powers += 1
        inner = sweep(powers, weight_grid, evaluator)
        n_merges += inner.merges
        table.extend(inner.table)
        log.info("beta=%g best=%.4f weights=%s", beta, inner.best_score, inner.best_weights)
    best = max(table, key=lambda row: row["score"])
    return SweepResult(best["beta"], best["weights"], best["score"], table, n_powers, n_merges)
