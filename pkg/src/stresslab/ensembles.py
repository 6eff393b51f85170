"""Tree ensembles built on the CART primitives, plus a per-label wrapper.

Four kinds: ``tree`` (a single CART), ``forest`` (bootstrap + per-split
feature subsets, majority vote), ``adaboost`` (SAMME on stumps), and
``gboost`` (stage-wise binomial-deviance boosting with one-step Newton
leaves; optionally second-order split gain). Every fit is a pure function
of (X, y, params including seed): repeated runs are bit-identical.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .trees import (
    HyperParams,
    LEAF_VALUE_BOUND,
    TreeNode,
    as_binary_labels,
    as_feature_matrix,
    fit_tree,
    predict_tree_many,
    tree_importance,
)

MODEL_KINDS = ("tree", "forest", "adaboost", "gboost")

# alpha assigned to a perfect AdaBoost round (error exactly zero)
ALPHA_CAP = math.log(1e12)

FORMAT_VERSION = 1


@dataclass
class EnsembleModel:
    """A fitted ensemble: members, their weights, and feature importance."""

    kind: str
    members: tuple[TreeNode, ...]
    member_weights: tuple[float, ...]
    learning_rate: float
    init_raw: float
    hyperparams: HyperParams
    importance: np.ndarray
    n_features: int


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict(model: EnsembleModel, X) -> np.ndarray:
    """Predict binary classes for every row of X."""
    X = as_feature_matrix(X)
    n = X.shape[0]
    if model.kind == "tree":
        return predict_tree_many(model.members[0], X)
    if model.kind == "forest":
        if not model.members:
            return np.zeros(n, dtype=np.int64)
        ones = np.zeros(n, dtype=np.int64)
        for member in model.members:
            ones += predict_tree_many(member, X)
        # strict majority; ties go to class 0
        return (2 * ones > len(model.members)).astype(np.int64)
    if model.kind == "adaboost":
        score = np.zeros(n)
        for member, alpha in zip(model.members, model.member_weights):
            score += alpha * (2 * predict_tree_many(member, X) - 1)
        return (score > 0).astype(np.int64)
    if model.kind == "gboost":
        raw = np.full(n, model.init_raw)
        for member in model.members:
            raw += model.learning_rate * predict_tree_many(member, X, mode="regress")
        return (_sigmoid(raw) > 0.5).astype(np.int64)
    raise ValidationError(f"unknown model kind {model.kind!r}")


def feature_importance(model: EnsembleModel) -> np.ndarray:
    """Impurity-decrease importance, member-weighted, normalized to sum 1.

    All-zero when the model contains no splits.
    """
    acc = np.zeros(model.n_features)
    for member, weight in zip(model.members, model.member_weights):
        acc += weight * tree_importance(member, model.n_features)
    total = acc.sum()
    if total <= 0:
        return np.zeros(model.n_features)
    return acc / total


def _finish(kind, members, weights, params, n_features, init_raw=0.0) -> EnsembleModel:
    model = EnsembleModel(
        kind=kind,
        members=tuple(members),
        member_weights=tuple(float(w) for w in weights),
        learning_rate=params.learning_rate,
        init_raw=float(init_raw),
        hyperparams=params,
        importance=np.zeros(n_features),
        n_features=n_features,
    )
    model.importance = feature_importance(model)
    return model


def fit_single_tree(X, y, params: HyperParams) -> EnsembleModel:
    X = as_feature_matrix(X)
    y = as_binary_labels(y, X.shape[0])
    rng = np.random.default_rng(params.seed)
    root = fit_tree(X, y, params=params, rng=rng)
    return _finish("tree", [root], [1.0], params, X.shape[1])


def fit_forest(X, y, params: HyperParams) -> EnsembleModel:
    """Bagged trees; per-member generators spawn from the forest seed."""
    X = as_feature_matrix(X)
    n = X.shape[0]
    y = as_binary_labels(y, n)
    members = []
    for child in np.random.SeedSequence(params.seed).spawn(params.n_members):
        rng = np.random.default_rng(child)
        if params.bootstrap:
            take = rng.integers(0, n, size=n)
            Xm, ym = X[take], y[take]
        else:
            Xm, ym = X, y
        members.append(fit_tree(Xm, ym, params=params, rng=rng))
    return _finish("forest", members, [1.0] * len(members), params, X.shape[1])


def fit_adaboost(X, y, params: HyperParams, *, weight_log: list | None = None) -> EnsembleModel:
    """SAMME boosting. Rounds with error 0 keep a capped-alpha member and
    stop; rounds at or above chance level (error >= 0.5) are discarded and
    stop. ``weight_log`` collects the renormalized weights of each round.
    """
    X = as_feature_matrix(X)
    n = X.shape[0]
    y = as_binary_labels(y, n)
    if n == 0:
        raise ValidationError("empty training set")
    n_features = X.shape[1]
    rng = np.random.default_rng(params.seed)

    if (y == y[0]).all():
        root = fit_tree(X, y, params=params, rng=rng)
        return _finish("adaboost", [root], [1.0], params, n_features)

    w = np.full(n, 1.0 / n)
    members: list[TreeNode] = []
    alphas: list[float] = []
    for _ in range(params.n_members):
        stump = fit_tree(X, y, weights=w, params=params, rng=rng)
        mistakes = predict_tree_many(stump, X) != y
        eps = float(w[mistakes].sum())
        if eps <= 0.0:
            members.append(stump)
            alphas.append(ALPHA_CAP)
            break
        if eps >= 0.5:
            break
        alpha = math.log((1.0 - eps) / eps)
        members.append(stump)
        alphas.append(alpha)
        w = w * np.exp(alpha * mistakes)
        w = w / w.sum()
        if weight_log is not None:
            weight_log.append(w.copy())
    return _finish("adaboost", members, alphas, params, n_features)


def _binomial_deviance(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def fit_gboost(X, y, params: HyperParams, *, deviance_log: list | None = None) -> EnsembleModel:
    """Binomial-deviance gradient boosting.

    Starts from the clamped base-rate log-odds; each stage fits a regression
    tree to the residuals y - sigmoid(F) and sets leaf values by the clamped
    one-step Newton update. With ``second_order_gain`` the splits maximize
    the regularized second-order improvement instead of variance reduction.
    ``deviance_log`` collects the mean training deviance after each stage.
    """
    X = as_feature_matrix(X)
    n = X.shape[0]
    y = as_binary_labels(y, n)
    if n == 0:
        raise ValidationError("empty training set")
    n_features = X.shape[1]
    rng = np.random.default_rng(params.seed)

    base_rate = float(y.mean())
    if base_rate <= 0.0:
        init_raw = -LEAF_VALUE_BOUND
    elif base_rate >= 1.0:
        init_raw = LEAF_VALUE_BOUND
    else:
        init_raw = float(
            np.clip(math.log(base_rate / (1.0 - base_rate)), -LEAF_VALUE_BOUND, LEAF_VALUE_BOUND)
        )
    if base_rate in (0.0, 1.0):
        return _finish("gboost", [], [], params, n_features, init_raw)

    yf = y.astype(float)
    raw = np.full(n, init_raw)
    members: list[TreeNode] = []
    for _ in range(params.n_members):
        p = _sigmoid(raw)
        residuals = yf - p
        hessians = p * (1.0 - p)
        tree = fit_tree(
            X, residuals, params=params, mode="regress", hessians=hessians, rng=rng
        )
        raw = raw + params.learning_rate * predict_tree_many(tree, X, mode="regress")
        members.append(tree)
        if deviance_log is not None:
            deviance_log.append(_binomial_deviance(yf, _sigmoid(raw)))
    return _finish("gboost", members, [1.0] * len(members), params, n_features, init_raw)


_FITTERS = {
    "tree": fit_single_tree,
    "forest": fit_forest,
    "adaboost": fit_adaboost,
    "gboost": fit_gboost,
}


def fit_kind(kind: str, X, y, params: HyperParams, **hooks) -> EnsembleModel:
    if kind not in _FITTERS:
        raise ValidationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    return _FITTERS[kind](X, y, params, **hooks)


# ----------------------------------------------------------------- multi-label


@dataclass(frozen=True)
class MultiOutputModel:
    """Independent per-label ensembles sharing kind and configuration."""

    kind: str
    models: tuple[EnsembleModel, ...]

    def predict(self, X) -> np.ndarray:
        return np.stack([predict(m, X) for m in self.models], axis=1)


def derive_label_seeds(master_seed: int, n_labels: int) -> tuple[int, ...]:
    """Per-label fit seeds, a fixed function of the master seed."""
    state = np.random.SeedSequence(master_seed).generate_state(n_labels, np.uint64)
    return tuple(int(v) for v in state)


def fit_multioutput(
    kind: str,
    params: HyperParams,
    X,
    Y,
    label_seeds: tuple[int, ...] | None = None,
) -> MultiOutputModel:
    """Fit one ensemble per label column of Y."""
    X = as_feature_matrix(X)
    Y = np.asarray(Y)
    if Y.ndim != 2:
        raise ValidationError(f"label matrix must be 2-D, got shape {Y.shape}")
    if Y.shape[0] != X.shape[0]:
        raise ValidationError(
            f"label matrix row count {Y.shape[0]} does not match features {X.shape[0]}"
        )
    n_labels = Y.shape[1]
    if label_seeds is None:
        label_seeds = derive_label_seeds(params.seed, n_labels)
    elif len(label_seeds) != n_labels:
        raise ValidationError(
            f"expected {n_labels} label seeds, got {len(label_seeds)}"
        )
    models = tuple(
        fit_kind(kind, X, Y[:, col], dataclasses.replace(params, seed=label_seeds[col]))
        for col in range(n_labels)
    )
    return MultiOutputModel(kind, models)


# --------------------------------------------------------------- model catalog


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    kind: str
    params: HyperParams


DEFAULT_MODEL_IDS = ("dt", "rf", "ada", "gb", "gb2")

_DEFAULTS = {
    "dt": ("tree", dict(n_members=1)),
    "rf": ("forest", dict(n_members=100, feature_subsample="sqrt", bootstrap=True)),
    "ada": ("adaboost", dict(n_members=50, max_depth=1)),
    "gb": ("gboost", dict(n_members=100, max_depth=3, learning_rate=0.1)),
    "gb2": ("gboost", dict(n_members=100, max_depth=3, learning_rate=0.1, second_order_gain=True)),
}


def default_hyperparams(model_id: str, seed: int = 0, **overrides) -> HyperParams:
    if model_id not in _DEFAULTS:
        raise ValidationError(
            f"unknown model id {model_id!r}; expected one of {sorted(_DEFAULTS)}"
        )
    _, fields = _DEFAULTS[model_id]
    return HyperParams(seed=seed, **{**fields, **overrides})


def default_model_specs(
    model_ids: tuple[str, ...] = DEFAULT_MODEL_IDS, seed: int = 0
) -> tuple[ModelSpec, ...]:
    specs = []
    for model_id in model_ids:
        kind, _ = _DEFAULTS.get(model_id, (None, None))
        if kind is None:
            raise ValidationError(
                f"unknown model id {model_id!r}; expected one of {sorted(_DEFAULTS)}"
            )
        specs.append(ModelSpec(model_id, kind, default_hyperparams(model_id, seed=seed)))
    return tuple(specs)


# -------------------------------------------------------------- serialization


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf():
        return {
            "class_distribution": None
            if node.class_distribution is None
            else [float(v) for v in node.class_distribution],
            "prediction": node.prediction,
            "raw_value": node.raw_value,
        }
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "gain": node.gain,
        "weight_fraction": node.weight_fraction,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: dict) -> TreeNode:
    if "feature_index" in data:
        return TreeNode(
            feature_index=int(data["feature_index"]),
            threshold=float(data["threshold"]),
            gain=float(data["gain"]),
            weight_fraction=float(data["weight_fraction"]),
            left=_node_from_dict(data["left"]),
            right=_node_from_dict(data["right"]),
        )
    dist = data.get("class_distribution")
    return TreeNode(
        class_distribution=None if dist is None else np.asarray(dist, dtype=float),
        prediction=None if data.get("prediction") is None else int(data["prediction"]),
        raw_value=None if data.get("raw_value") is None else float(data["raw_value"]),
    )


def model_to_dict(model: EnsembleModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "n_features": model.n_features,
        "hyperparams": dataclasses.asdict(model.hyperparams),
        "learning_rate": model.learning_rate,
        "init_raw": model.init_raw,
        "member_weights": list(model.member_weights),
        "members": [_node_to_dict(m) for m in model.members],
        "importance": [float(v) for v in model.importance],
    }


def model_from_dict(data: dict) -> EnsembleModel:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version: {version!r}")
    kind = data["kind"]
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    return EnsembleModel(
        kind=kind,
        members=tuple(_node_from_dict(m) for m in data["members"]),
        member_weights=tuple(float(w) for w in data["member_weights"]),
        learning_rate=float(data["learning_rate"]),
        init_raw=float(data["init_raw"]),
        hyperparams=HyperParams(**data["hyperparams"]),
        importance=np.asarray(data["importance"], dtype=float),
        n_features=int(data["n_features"]),
    )


def multioutput_to_dict(model: MultiOutputModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "models": [model_to_dict(m) for m in model.models],
    }


def multioutput_from_dict(data: dict) -> MultiOutputModel:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version: {version!r}")
    return MultiOutputModel(
        kind=data["kind"],
        models=tuple(model_from_dict(m) for m in data["models"]),
    )
