"""Downstream evaluation: cosine nearest neighbours and multi-label node
classification with one-vs-rest L2-regularized logistic regression."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .errors import ParseError, QueryError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelSet:
    n: int
    labels: dict[int, frozenset[int]]
    num_classes: int

    def __post_init__(self):
        for node, classes in self.labels.items():
            if not 0 <= node < self.n:
                raise ShapeError(f"labeled node {node} outside [0, {self.n})")
            if not classes:
                raise ValueError(f"node {node} has an empty label set")
            if max(classes) >= self.num_classes or min(classes) < 0:
                raise ValueError(f"node {node} has a class id outside [0, {self.num_classes})")

    @classmethod
    def from_mapping(cls, labels: dict[int, Iterable[int]], n: int, num_classes: int | None = None):
        labels = {int(k): frozenset(int(c) for c in v) for k, v in labels.items()}
        if num_classes is None:
            num_classes = 1 + max((max(v) for v in labels.values()), default=-1)
        return cls(n, labels, num_classes)

    @property
    def nodes(self) -> np.ndarray:
        return np.array(sorted(self.labels), dtype=np.int64)

    def indicator(self, nodes: np.ndarray) -> np.ndarray:
        y = np.zeros((len(nodes), self.num_classes), dtype=bool)
        for row, node in enumerate(nodes):
            y[row, list(self.labels[int(node)])] = True
        return y


def parse_labels(stream: TextIO | Iterable[str], n: int, num_classes: int | None = None) -> LabelSet:
    """Read ``node_id class_id [class_id ...]`` lines; repeated nodes accumulate."""
    acc: dict[int, set[int]] = {}
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        tokens = stripped.replace(",", " ").split()
        if len(tokens) < 2:
            raise ParseError(f"line {lineno}: expected node id and at least one class id")
        try:
            ids = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer token in {stripped!r}") from None
        if min(ids) < 0:
            raise ParseError(f"line {lineno}: negative id")
        acc.setdefault(ids[0], set()).update(ids[1:])
    return LabelSet.from_mapping(acc, n, num_classes)


# --- nearest neighbours -------------------------------------------------------


@dataclass(frozen=True)
class KnnResult:
    query: int
    neighbors: list[tuple[int, float]]


def knn_query(emb: np.ndarray, query: int, k: int) -> KnnResult:
    """Exact top-``k`` by cosine similarity; ties broken by ascending node id.

    The query itself and all-zero rows are never returned.
    """
    n = emb.shape[0]
    if not 0 <= query < n:
        raise QueryError(f"node {query} not in embedding (n={n})")
    x = np.asarray(emb, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if norms[query] == 0:
        raise QueryError(f"node {query} has a zero embedding")
    eligible = norms > 0
    eligible[query] = False
    ids = np.flatnonzero(eligible)
    sims = (x[ids] @ x[query]) / (norms[ids] * norms[query])
    np.clip(sims, -1.0, 1.0, out=sims)
    order = np.lexsort((ids, -sims))[: max(k, 0)]
    return KnnResult(query, [(int(ids[i]), float(sims[i])) for i in order])


# --- classification -----------------------------------------------------------


def split_train_test(labels: LabelSet, train_fraction: float, trial_seed: int, max_retries: int = 100):
    """Uniform split of labeled nodes.

    Redraws (up to ``max_retries`` times) until every class with at least two
    members has a training member; otherwise keeps the last draw with a warning.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    nodes = labels.nodes
    total = len(nodes)
    if total < 2:
        raise ValueError("need at least two labeled nodes")
    n_train = min(max(int(round(train_fraction * total)), 1), total - 1)
    y = labels.indicator(nodes)
    needs = y.sum(axis=0) >= 2
    rng = np.random.default_rng(trial_seed)
    for _ in range(max_retries + 1):
        perm = rng.permutation(total)
        train, test = perm[:n_train], perm[n_train:]
        if np.all(y[train].any(axis=0) | ~needs):
            break
    else:
        warnings.warn(
            f"no split in {max_retries} retries covers every class; "
            "some classes have no training example",
            stacklevel=2,
        )
    return np.sort(nodes[train]), np.sort(nodes[test])


def logistic_objective(w: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float):
    """Mean logistic loss plus ``l2/2 * ||w[:-1]||^2`` and its gradient.

    ``w[-1]`` is an unpenalized bias; ``y`` holds 0/1 targets.
    """
    z = x @ w[:-1] + w[-1]
    sign = 2.0 * y - 1.0
    loss = np.logaddexp(0.0, -sign * z).mean() + 0.5 * l2 * (w[:-1] @ w[:-1])
    p = _sigmoid(z)
    r = (p - y) / len(y)
    grad = np.empty_like(w)
    grad[:-1] = x.T @ r + l2 * w[:-1]
    grad[-1] = r.sum()
    return loss, grad


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _newton(x, y, l2, w0=None, tol=1e-5, max_iter=100):
    n, d = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    w = np.zeros(d + 1) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0
    loss, grad = logistic_objective(w, x, y, l2)
    for _ in range(max_iter):
        if np.linalg.norm(grad) < tol:
            break
        p = _sigmoid(xb @ w)
        h = (xb.T * (p * (1 - p) / n)) @ xb
        h[np.diag_indices_from(h)] += reg + 1e-12
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while t > 1e-10:
            cand = w - t * step
            c_loss, c_grad = logistic_objective(cand, x, y, l2)
            if c_loss <= loss - 1e-4 * t * (grad @ step):
                break
            t *= 0.5
        else:
            break
        w, loss, grad = cand, c_loss, c_grad
    return w, np.linalg.norm(grad)


@dataclass
class OvrModel:
    coef: np.ndarray  # (num_classes, d)
    intercept: np.ndarray  # (num_classes,); +-inf for classes that are all/none positive
    grad_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.asarray(x, dtype=np.float64) @ self.coef.T + self.intercept


def train_ovr_logreg(
    emb: np.ndarray,
    labels: LabelSet,
    train_ids: np.ndarray,
    l2_strength: float | None = None,
    tol: float = 1e-5,
    max_iter: int = 100,
    workers: int | None = None,
) -> OvrModel:
    """One binary logistic regression per class, trained independently.

    ``l2_strength=None`` uses ``1 / len(train_ids)``, the mean-loss form of
    LIBLINEAR's default ``C = 1``.
    """
    train_ids = np.asarray(train_ids, dtype=np.int64)
    if not len(train_ids):
        raise ValueError("no training nodes")
    if l2_strength is None:
        l2_strength = 1.0 / len(train_ids)
    x = np.asarray(emb, dtype=np.float64)[train_ids]
    y = labels.indicator(train_ids)
    d = x.shape[1]
    coef = np.zeros((labels.num_classes, d))
    intercept = np.zeros(labels.num_classes)
    grad_norms = np.zeros(labels.num_classes)

    def fit(c):
        yc = y[:, c].astype(np.float64)
        if not yc.any():
            return c, None, -np.inf, 0.0
        if yc.all():
            return c, None, np.inf, 0.0
        w, gnorm = _newton(x, yc, l2_strength, tol=tol, max_iter=max_iter)
        return c, w, None, gnorm

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fit, range(labels.num_classes)))
    for c, w, fixed, gnorm in results:
        if w is None:
            intercept[c] = fixed
            if fixed < 0:
                warnings.warn(f"class {c} has no positive training example", stacklevel=2)
        else:
            coef[c], intercept[c] = w[:-1], w[-1]
        grad_norms[c] = gnorm
    return OvrModel(coef, intercept, grad_norms)


@dataclass
class ClassificationReport:
    macro_f1: float
    micro_f1: float
    accuracy: float
    train_fraction: float = float("nan")
    trials: int = 1
    per_trial: list[dict] = field(default_factory=list)


def f1_scores(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float, float]:
    """Macro F1, micro F1, and subset accuracy of boolean indicator matrices.

    Classes with no true and no predicted members score F1 = 0 in the macro
    mean; they are rare and scikit-learn does the same by default.
    """
    tp = (truth & pred).sum(axis=0).astype(np.float64)
    fp = (~truth & pred).sum(axis=0)
    fn = (truth & ~pred).sum(axis=0)
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    total = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 2 * tp.sum() / total if total else 0.0
    accuracy = float(np.mean(np.all(truth == pred, axis=1))) if len(truth) else 0.0
    return float(per_class.mean()), float(micro), accuracy


def predict_top_l(scores: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Mark the ``counts[i]`` highest-scoring classes of each row; ties go to lower ids."""
    order = np.argsort(-scores, axis=1, kind="stable")
    pred = np.zeros(scores.shape, dtype=bool)
    for i, c in enumerate(counts):
        pred[i, order[i, :c]] = True
    return pred


def predict_and_score(model: OvrModel, emb: np.ndarray, labels: LabelSet, test_ids) -> ClassificationReport:
    test_ids = np.asarray(test_ids, dtype=np.int64)
    if model.coef.shape[1] != emb.shape[1]:
        raise ShapeError("model and embedding dimensionality differ")
    truth = labels.indicator(test_ids)
    scores = model.decision_function(np.asarray(emb)[test_ids])
    pred = predict_top_l(scores, truth.sum(axis=1))
    macro, micro, acc = f1_scores(truth, pred)
    return ClassificationReport(macro, micro, acc)


def standardize(x: np.ndarray, ref_ids: np.ndarray) -> np.ndarray:
    mu = x[ref_ids].mean(axis=0)
    sd = x[ref_ids].std(axis=0)
    sd[sd == 0] = 1.0
    return (x - mu) / sd


def evaluate_classification(
    emb: np.ndarray,
    labels: LabelSet,
    train_fraction: float,
    trials: int = 10,
    trial_seed: int = 0,
    l2_strength: float | None = None,
    standardize_features: bool = False,
) -> ClassificationReport:
    """Mean scores over ``trials`` random splits with seeds ``trial_seed + t``."""
    if emb.shape[0] != labels.n:
        raise ShapeError(f"embedding has {emb.shape[0]} rows, labels expect {labels.n} nodes")
    rows = []
    for t in range(trials):
        train, test = split_train_test(labels, train_fraction, trial_seed + t)
        x = standardize(np.asarray(emb, np.float64), train) if standardize_features else emb
        model = train_ovr_logreg(x, labels, train, l2_strength)
        rep = predict_and_score(model, x, labels, test)
        rows.append({"trial": t, "macro_f1": rep.macro_f1, "micro_f1": rep.micro_f1, "accuracy": rep.accuracy})
    return ClassificationReport(
        macro_f1=float(np.mean([r["macro_f1"] for r in rows])),
        micro_f1=float(np.mean([r["micro_f1"] for r in rows])),
        accuracy=float(np.mean([r["accuracy"] for r in rows])),
        train_fraction=train_fraction,
        trials=trials,
        per_trial=rows,
    )


def macro_f1_evaluator(labels: LabelSet, fraction: float = 0.01, trials: int = 1, seed: int = 0, l2_strength: float | None = None):
    """Callback for :func:`fastrp.engine.sweep`: validation macro-F1 of an embedding."""

    def evaluate(emb: np.ndarray) -> float:
        return evaluate_classification(emb, labels, fraction, trials, seed, l2_strength).macro_f1

    return evaluate
