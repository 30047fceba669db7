"""Random projection matrices.

Very sparse projections draw each entry as ``+sqrt(s)`` or ``-sqrt(s)`` with
probability ``1/(2s)`` each and ``0`` otherwise.  Only the signs are stored;
the ``sqrt(s)`` factor is applied once, by the caller, as a scalar.

Row ``r`` of a very sparse matrix is a pure function of ``(seed, r)``: draw
``c`` of row ``r`` is ``splitmix64(key_r + (c + 1) * golden)`` with
``key_r = splitmix64(splitmix64(seed) ^ r * salt)``, turned into a uniform
double ``u``.  The entry is nonzero iff ``u < 1/s`` and positive iff
``u < 1/(2s)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


class ProjectionKind(str, enum.Enum):
    VERY_SPARSE = "very-sparse"
    GAUSSIAN = "gaussian"


def _as_seed(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def default_sparsity(n: int) -> float:
    """sqrt(n): for graphs the feature dimensionality equals the node count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(n)


@dataclass(frozen=True)
class ProjectionSpec:
    n: int
    d: int
    s: float = 3.0
    kind: ProjectionKind = ProjectionKind.VERY_SPARSE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProjectionKind(self.kind))
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if self.kind is ProjectionKind.VERY_SPARSE and not self.s >= 1:
            raise ValueError("sparsity s must be >= 1")


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """An ``n x d`` projection.

    For very sparse matrices ``offsets``/``cols``/``signs`` hold the nonzero
    pattern row by row (columns ascending) and ``scale`` is ``sqrt(s)``.
    For Gaussian matrices ``dense`` holds the values and ``scale`` is 1.
    """

    spec: ProjectionSpec
    offsets: np.ndarray | None = None
    cols: np.ndarray | None = None
    signs: np.ndarray | None = None
    dense: np.ndarray | None = None

    @property
    def is_sparse(self) -> bool:
        return self.dense is None

    @property
    def scale(self) -> float:
        return math.sqrt(self.spec.s) if self.is_sparse else 1.0

    @property
    def entry_variance(self) -> float:
        """``E[R_ij^2]``: 1 for very sparse entries, ``1/d`` for Gaussian ones.

        Projection multiplies expected squared distances by ``d * entry_variance``.
        """
        return 1.0 if self.is_sparse else 1.0 / self.spec.d

    @property
    def nnz(self) -> int:
        return len(self.cols) if self.is_sparse else int(np.count_nonzero(self.dense))

    def row(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        start, end = self.offsets[r], self.offsets[r + 1]
        return self.cols[start:end], self.signs[start:end]

    def scaled_rows(self, row_scale: np.ndarray, dtype=np.float32) -> np.ndarray:
        """Dense ``diag(row_scale) @ R`` with ``scale`` folded into ``row_scale``."""
        row_scale = np.asarray(row_scale, dtype=np.float64) * self.scale
        with np.errstate(over="ignore"):
            if self.is_sparse:
                out = np.empty((self.spec.n, self.spec.d), dtype=dtype)
                _kernels.scatter_scaled_signs(
                    self.offsets, self.cols, self.signs, row_scale.astype(dtype), out
                )
                return out
            return (self.dense * row_scale[:, None]).astype(dtype)

    def to_dense(self) -> np.ndarray:
        """Float64 matrix with the scale applied."""
        return self.scaled_rows(np.ones(self.spec.n), dtype=np.float64)


def _probs(s: float) -> tuple[float, float]:
    p = 1.0 / s
    return 0.5 * p, p


def sample_very_sparse(spec: ProjectionSpec) -> ProjectionMatrix:
    if spec.kind is not ProjectionKind.VERY_SPARSE:
        raise ValueError("spec.kind must be very-sparse")
    seed = _as_seed(spec.seed)
    p_half, p = _probs(spec.s)
    counts = _kernels.sparse_sign_counts(seed, spec.n, spec.d, p)
    offsets = np.zeros(spec.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    cols = np.empty(offsets[-1], dtype=np.int32)
    signs = np.empty(offsets[-1], dtype=np.int8)
    _kernels.sparse_sign_fill(seed, spec.n, spec.d, p_half, p, offsets, cols, signs)
    return ProjectionMatrix(spec, offsets=offsets, cols=cols, signs=signs)


def sample_row(spec: ProjectionSpec, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Regenerate row ``r`` of :func:`sample_very_sparse` in isolation."""
    p_half, p = _probs(spec.s)
    return _kernels.sample_one_row(_as_seed(spec.seed), r, spec.d, p_half, p)


def sample_gaussian(spec: ProjectionSpec) -> ProjectionMatrix:
    """Dense i.i.d. N(0, 1/d) entries from a Philox stream keyed by the seed."""
    if spec.kind is not ProjectionKind.GAUSSIAN:
        raise ValueError("spec.kind must be gaussian")
    rng = np.random.Generator(np.random.Philox(key=int(_as_seed(spec.seed))))
    values = rng.standard_normal((spec.n, spec.d)) / math.sqrt(spec.d)
    return ProjectionMatrix(spec, dense=values)


def sample(spec: ProjectionSpec) -> ProjectionMatrix:
    if spec.kind is ProjectionKind.GAUSSIAN:
        return sample_gaussian(spec)
    return sample_very_sparse(spec)
