"""CART primitives: impurity, exhaustive split search, growth, prediction.

Features are small non-negative integers (ordinal answers), so split search
runs on per-value histograms: every threshold is the midpoint between two
consecutive distinct observed values. Ties between equal-gain splits go to
the lowest feature index, then the lowest threshold. The left branch always
takes ``feature <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ValidationError

N_CLASSES = 2
SPLIT_CRITERIA = ("gini", "variance", "second_order")
# A split must beat the incumbent by more than accumulated float noise.
GAIN_EPS = 1e-12
# Regularization of the second-order gain, and the bound on Newton leaves.
SECOND_ORDER_LAMBDA = 1.0
LEAF_VALUE_BOUND = 10.0


@dataclass(frozen=True)
class HyperParams:
    """Shared learner configuration; ensemble kinds ignore unused fields."""

    max_depth: int | None = None
    min_samples_split: int = 2
    n_members: int = 1
    feature_subsample: str = "all"
    learning_rate: float = 0.1
    bootstrap: bool = False
    second_order_gain: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValidationError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.n_members < 0:
            raise ValidationError(f"n_members must be >= 0, got {self.n_members}")
        if self.feature_subsample not in ("all", "sqrt"):
            raise ValidationError(
                f"feature_subsample must be 'all' or 'sqrt', got {self.feature_subsample!r}"
            )
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValidationError(f"learning_rate must be in (0,1], got {self.learning_rate}")


@dataclass
class TreeNode:
    """Internal node (feature_index set) or leaf (feature_index None).

    ``gain`` and ``weight_fraction`` record the split quality and the node's
    share of the root weight; feature importance is computed from them.
    """

    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    class_distribution: np.ndarray | None = None
    prediction: int | None = None
    raw_value: float | None = None
    gain: float = 0.0
    weight_fraction: float = 0.0

    def is_leaf(self) -> bool:
        return self.feature_index is None


def as_feature_matrix(X) -> np.ndarray:
    """Validate and coerce a rectangular matrix of small non-negative ints."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.size and not np.issubdtype(X.dtype, np.integer):
        if not np.all(X == np.floor(X)):
            raise ValidationError("feature matrix must contain integers")
    X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise ValidationError("feature values must be non-negative")
    return X


def as_binary_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValidationError(f"labels must have shape ({n},), got {y.shape}")
    y = y.astype(np.int64)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be binary (0/1)")
    return y


def gini(class_counts) -> float:
    """Gini impurity 1 - sum(p^2) of non-negative class counts."""
    counts = np.asarray(class_counts, dtype=float)
    if counts.size == 0 or np.any(counts < 0):
        raise ValidationError(f"class counts must be non-negative, got {class_counts}")
    total = counts.sum()
    if total <= 0:
        raise ValidationError("gini is undefined for all-zero class counts")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _gini_from_sums(class_weights: np.ndarray) -> float:
    total = class_weights.sum()
    p = class_weights / total
    return 1.0 - float(np.dot(p, p))


def _variance_from_sums(s0: float, s1: float, s2: float) -> float:
    mean = s1 / s0
    return s2 / s0 - mean * mean


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    candidate_features: Iterable[int],
    *,
    criterion: str = "gini",
    hessians: np.ndarray | None = None,
    reg_lambda: float = SECOND_ORDER_LAMBDA,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) over all candidate splits, or None.

    Gain is the weighted impurity decrease (``gini``), weighted variance
    decrease (``variance``), or the regularized second-order improvement
    (``second_order``, requires per-sample hessians). Only strictly positive
    gains qualify.
    """
    if criterion not in SPLIT_CRITERIA:
        raise ValidationError(f"criterion must be one of {SPLIT_CRITERIA}, got {criterion!r}")
    if criterion == "second_order" and hessians is None:
        raise ValidationError("second_order criterion requires hessians")
    n = X.shape[0]
    if n < 2:
        return None
    w = np.asarray(weights, dtype=float)

    best: tuple[int, float, float] | None = None
    best_gain = 0.0
    for f in sorted(int(f) for f in candidate_features):
        x = X[:, f]
        vmax = int(x.max())
        present = np.flatnonzero(np.bincount(x, minlength=vmax + 1))
        if len(present) < 2:
            continue

        if criterion == "gini":
            # per-(value, class) weight sums, then prefix sums over values
            wc = np.bincount(
                x * N_CLASSES + y, weights=w, minlength=(vmax + 1) * N_CLASSES
            ).reshape(vmax + 1, N_CLASSES)
            cum = np.cumsum(wc, axis=0)
            parent = cum[-1]
            parent_total = parent.sum()
            if parent_total <= 0:
                continue
            parent_imp = _gini_from_sums(parent)
            for k in range(len(present) - 1):
                left = cum[present[k]]
                right = parent - left
                wl, wr = left.sum(), right.sum()
                if wl <= 0 or wr <= 0:
                    continue
                gain = (
                    parent_imp
                    - wl / parent_total * _gini_from_sums(left)
                    - wr / parent_total * _gini_from_sums(right)
                )
                if gain > best_gain + GAIN_EPS:
                    threshold = (present[k] + present[k + 1]) / 2.0
                    best = (f, threshold, float(gain))
                    best_gain = gain
        else:
            s0 = np.bincount(x, weights=w, minlength=vmax + 1)
            if criterion == "variance":
                s1 = np.bincount(x, weights=w * y, minlength=vmax + 1)
                s2 = np.bincount(x, weights=w * y * y, minlength=vmax + 1)
            else:
                s1 = np.bincount(x, weights=w * y, minlength=vmax + 1)  # gradient sums
                s2 = np.bincount(x, weights=w * hessians, minlength=vmax + 1)  # hessian sums
            c0, c1, c2 = np.cumsum(s0), np.cumsum(s1), np.cumsum(s2)
            t0, t1, t2 = c0[-1], c1[-1], c2[-1]
            if t0 <= 0:
                continue
            if criterion == "variance":
                parent_imp = _variance_from_sums(t0, t1, t2)
            for k in range(len(present) - 1):
                v = present[k]
                wl, wr = c0[v], t0 - c0[v]
                if wl <= 0 or wr <= 0:
                    continue
                if criterion == "variance":
                    gain = (
                        parent_imp
                        - wl / t0 * _variance_from_sums(wl, c1[v], c2[v])
                        - wr / t0 * _variance_from_sums(wr, t1 - c1[v], t2 - c2[v])
                    )
                else:
                    gl, hl = c1[v], c2[v]
                    gr, hr = t1 - c1[v], t2 - c2[v]
                    gain = 0.5 * (
                        gl * gl / (hl + reg_lambda)
                        + gr * gr / (hr + reg_lambda)
                        - t1 * t1 / (t2 + reg_lambda)
                    )
                if gain > best_gain + GAIN_EPS:
                    threshold = (present[k] + present[k + 1]) / 2.0
                    best = (f, threshold, float(gain))
                    best_gain = gain
    return best


def _leaf(y, w, mode, hessians) -> TreeNode:
    if mode == "classify":
        dist = np.bincount(y, weights=w, minlength=N_CLASSES)
        return TreeNode(class_distribution=dist, prediction=int(np.argmax(dist)))
    if hessians is None:
        value = float((w * y).sum() / w.sum())
    else:
        num = (w * y).sum()
        den = (w * hessians).sum()
        value = float(num / max(den, 1e-12))
    value = float(np.clip(value, -LEAF_VALUE_BOUND, LEAF_VALUE_BOUND))
    return TreeNode(raw_value=value)


def fit_tree(
    X,
    y,
    weights=None,
    params: HyperParams | None = None,
    mode: str = "classify",
    *,
    hessians: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Grow a CART tree by greedy recursive splitting.

    Stops at max_depth, nodes below min_samples_split, pure nodes, or when
    no split has positive gain. Classification leaves store weighted class
    distributions; regression leaves store the weighted mean of ``y``, or
    the clamped one-step Newton value sum(w*y)/sum(w*h) when ``hessians``
    are supplied. With ``feature_subsample="sqrt"`` each split draws a fresh
    feature subset from ``rng`` before searching.
    """
    if mode not in ("classify", "regress"):
        raise ValidationError(f"mode must be 'classify' or 'regress', got {mode!r}")
    X = as_feature_matrix(X)
    n, n_features = X.shape
    if n == 0:
        raise ValidationError("empty training set")
    params = params or HyperParams()
    if mode == "classify":
        y = as_binary_labels(y, n)
        criterion = "gini"
    else:
        y = np.asarray(y, dtype=float)
        criterion = "second_order" if (params.second_order_gain and hessians is not None) else "variance"
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or (w.size and w.min() < 0):
        raise ValidationError("weights must be non-negative, one per sample")
    h = None if hessians is None else np.asarray(hessians, dtype=float)

    if params.feature_subsample == "sqrt":
        if rng is None:
            rng = np.random.default_rng(params.seed)
        subset_size = int(np.ceil(np.sqrt(n_features)))
    else:
        subset_size = None
    all_features = np.arange(n_features)
    root_weight = max(w.sum(), 1e-300)

    def build(Xn, yn, wn, hn, depth) -> TreeNode:
        if (
            len(yn) < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or (mode == "classify" and (yn == yn[0]).all())
        ):
            return _leaf(yn, wn, mode, hn)
        if subset_size is not None:
            candidates = np.sort(rng.choice(n_features, size=subset_size, replace=False))
        else:
            candidates = all_features
        found = best_split(
            Xn, yn, wn, candidates, criterion=criterion, hessians=hn
        )
        if found is None:
            return _leaf(yn, wn, mode, hn)
        feature, threshold, gain = found
        go_left = Xn[:, feature] <= threshold
        node = TreeNode(
            feature_index=feature,
            threshold=threshold,
            gain=gain,
            weight_fraction=float(wn.sum() / root_weight),
        )
        node.left = build(
            Xn[go_left], yn[go_left], wn[go_left], None if hn is None else hn[go_left], depth + 1
        )
        keep = ~go_left
        node.right = build(
            Xn[keep], yn[keep], wn[keep], None if hn is None else hn[keep], depth + 1
        )
        return node

    return build(X, y, w, h, 0)


def predict_tree(root: TreeNode, x, mode: str = "classify"):
    """Route a single feature row to a leaf; equality goes left."""
    node = root
    while not node.is_leaf():
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.prediction if mode == "classify" else node.raw_value


def predict_tree_many(root: TreeNode, X, mode: str = "classify") -> np.ndarray:
    """Vectorized prediction for a whole matrix."""
    X = np.asarray(X)
    out = np.empty(X.shape[0], dtype=np.int64 if mode == "classify" else float)

    def walk(node: TreeNode, idx: np.ndarray) -> None:
        if idx.size == 0:
            return
        if node.is_leaf():
            out[idx] = node.prediction if mode == "classify" else node.raw_value
            return
        go_left = X[idx, node.feature_index] <= node.threshold
        walk(node.left, idx[go_left])
        walk(node.right, idx[~go_left])

    walk(root, np.arange(X.shape[0]))
    return out


def tree_importance(root: TreeNode, n_features: int) -> np.ndarray:
    """Unnormalized importance: gain times weight fraction, summed per feature."""
    acc = np.zeros(n_features)

    def walk(node: TreeNode) -> None:
        if node.is_leaf():
            return
        acc[node.feature_index] += node.gain * node.weight_fraction
        walk(node.left)
        walk(node.right)

    walk(root)
    return acc


def count_nodes(root: TreeNode) -> int:
    if root.is_leaf():
        return 1
    return 1 + count_nodes(root.left) + count_nodes(root.right)
