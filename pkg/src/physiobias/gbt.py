"""Gradient-boosted decision trees for binary classification, from scratch.

Each round fits one depth-limited regression tree to the first- and
second-order gradients of the logistic loss. Split quality is the standard
second-order gain

    0.5 * ( GL^2/(HL+lam) + GR^2/(HR+lam) - (GL+GR)^2/(HL+HR+lam) )

with candidate thresholds at midpoints between consecutive distinct sorted
values (exact greedy). Rows with a missing value follow the split's default
branch, chosen to maximize gain. Ties break deterministically: lowest
feature index, then lowest threshold, then default-left.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DegenerateLabels, ShapeError


@dataclass
class GbtParams:
    depth: int = 4
    rounds: int = 100
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0  # minimum hessian sum per child
    subsample: float = 1.0         # row fraction per round; 1.0 = bagging off
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1 or self.rounds < 0:
            raise ValueError("depth must be >= 1 and rounds >= 0")
        if not (0 < self.learning_rate <= 1):
            raise ValueError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0 or self.min_child_weight < 0:
            raise ValueError("reg_lambda and min_child_weight must be >= 0")
        if not (0 < self.subsample <= 1):
            raise ValueError("subsample must be in (0, 1]")


@dataclass
class TreeNode:
    """Split node or leaf. Leaves keep feature = None and a weight."""

    feature: int | None = None
    threshold: float = 0.0
    missing_left: bool = True
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class TrainedModel:
    trees: list[TreeNode]
    learning_rate: float
    base_score: float              # log-odds of the training prior
    column_names: list[str]
    params: GbtParams
    train_losses: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.column_names)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass
class _Split:
    feature: int
    threshold: float
    missing_left: bool
    gain: float


def _variant_gain(
    gl: np.ndarray,
    hl: np.ndarray,
    g_tot: float,
    h_tot: float,
    parent: float,
    valid: np.ndarray,
    reg_lambda: float,
    min_child_weight: float,
) -> np.ndarray:
    gr = g_tot - gl
    hr = h_tot - hl
    gain = gl * gl / (hl + reg_lambda)
    gain += gr * gr / (hr + reg_lambda)
    gain -= parent
    gain *= 0.5
    bad = ~valid | (hl < min_child_weight) | (hr < min_child_weight)
    gain[bad] = -np.inf
    return gain


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    reg_lambda: float,
    min_child_weight: float,
) -> _Split | None:
    """Exact greedy split search, vectorized across all features at once.

    An unstable sort along each column is safe: candidates sit only at
    boundaries between distinct values, where prefix sums do not depend on
    the order within a tie block.
    """
    sub = X[rows]
    n, d = sub.shape
    if n < 2:
        return None
    g_sub = g[rows]
    h_sub = h[rows]
    g_tot = float(g_sub.sum())
    h_tot = float(h_sub.sum())

    nan_mask = np.isnan(sub)
    any_missing = bool(nan_mask.any())
    keys = np.where(nan_mask, np.inf, sub) if any_missing else sub
    order = np.argsort(keys, axis=0)                     # NaNs sort last
    sv = np.take_along_axis(keys, order, axis=0)
    sg = g_sub[order]
    sh = h_sub[order]
    if any_missing:
        finite = np.isfinite(sv)
        sg[~finite] = 0.0
        sh[~finite] = 0.0
    cg = np.cumsum(sg, axis=0)
    ch = np.cumsum(sh, axis=0)

    # Split between sorted positions i-1 and i for i in 1..n-1, valid when
    # both values are finite and distinct.
    if any_missing:
        valid = finite[1:] & (sv[1:] > sv[:-1])
    else:
        valid = sv[1:] > sv[:-1]
    if not valid.any():
        return None
    gl_base = cg[:-1]
    hl_base = ch[:-1]
    parent = g_tot * g_tot / (h_tot + reg_lambda)

    gains = _variant_gain(
        gl_base, hl_base, g_tot, h_tot, parent, valid, reg_lambda, min_child_weight
    )
    if any_missing:
        # Columns holding missing values get a second variant that routes
        # them left; ties between variants default left.
        g_missing = g_tot - cg[-1]
        h_missing = h_tot - ch[-1]
        cols = np.flatnonzero(g_missing != 0.0)
        cols = np.union1d(cols, np.flatnonzero(h_missing != 0.0))
        cols = np.union1d(cols, np.flatnonzero(nan_mask.any(axis=0)))
        missing_left = np.zeros_like(gains, dtype=bool)
        if cols.size:
            gain_left = _variant_gain(
                gl_base[:, cols] + g_missing[cols],
                hl_base[:, cols] + h_missing[cols],
                g_tot, h_tot, parent, valid[:, cols], reg_lambda, min_child_weight,
            )
            left_wins = gain_left >= gains[:, cols]      # tie -> default left
            merged = np.where(left_wins, gain_left, gains[:, cols])
            gains[:, cols] = merged
            missing_left[:, cols] = left_wins
        # Columns with no missing values behave identically either way;
        # pin their default to left for determinism.
        no_miss = np.ones(d, dtype=bool)
        no_miss[cols] = False
        missing_left[:, no_miss] = True
    else:
        missing_left = None

    # First maximum in (feature, threshold) order for deterministic ties.
    flat = np.argmax(gains.T)
    f, i = divmod(int(flat), n - 1)
    best_gain = float(gains[i, f])
    if not np.isfinite(best_gain) or best_gain <= 0.0:
        return None
    return _Split(
        feature=f,
        threshold=float(0.5 * (sv[i + 1, f] + sv[i, f])),
        missing_left=True if missing_left is None else bool(missing_left[i, f]),
        gain=best_gain,
    )


def _build_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    depth: int,
    params: GbtParams,
) -> TreeNode:
    g_tot = float(g[rows].sum())
    h_tot = float(h[rows].sum())
    leaf_weight = -g_tot / (h_tot + params.reg_lambda)
    if depth >= params.depth or rows.size < 2:
        return TreeNode(weight=leaf_weight)
    split = _best_split(X, g, h, rows, params.reg_lambda, params.min_child_weight)
    if split is None:
        return TreeNode(weight=leaf_weight)
    v = X[rows, split.feature]
    nan_mask = np.isnan(v)
    go_left = np.where(nan_mask, split.missing_left, v < split.threshold)
    left_rows = rows[go_left]
    right_rows = rows[~go_left]
    return TreeNode(
        feature=split.feature,
        threshold=split.threshold,
        missing_left=split.missing_left,
        gain=split.gain,
        left=_build_tree(X, g, h, left_rows, depth + 1, params),
        right=_build_tree(X, g, h, right_rows, depth + 1, params),
    )


def _tree_values(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, rows = stack.pop()
        if rows.size == 0:
            continue
        if nd.is_leaf:
            out[rows] = nd.weight
            continue
        v = X[rows, nd.feature]
        nan_mask = np.isnan(v)
        go_left = np.where(nan_mask, nd.missing_left, v < nd.threshold)
        stack.append((nd.left, rows[go_left]))
        stack.append((nd.right, rows[~go_left]))
    return out


def train(data: Dataset, params: GbtParams | None = None) -> TrainedModel:
    """Fit the boosted ensemble on a Dataset.

    Raises:
        DegenerateLabels: only one class present.
    """
    params = params or GbtParams()
    X, y = data.X, data.y.astype(float)
    n = X.shape[0]
    if n < 2 or np.unique(data.y).size < 2:
        raise DegenerateLabels("training data must contain both classes")

    prior = float(y.mean())
    base_score = float(np.log(prior / (1.0 - prior)))
    margin = np.full(n, base_score)
    rng = np.random.default_rng(params.seed)

    trees: list[TreeNode] = []
    losses: list[float] = []
    for _ in range(params.rounds):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        if params.subsample < 1.0:
            rows = np.flatnonzero(rng.random(n) < params.subsample)
            if rows.size == 0:
                rows = np.arange(n)
        else:
            rows = np.arange(n)
        tree = _build_tree(X, g, h, rows, 0, params)
        trees.append(tree)
        margin = margin + params.learning_rate * _tree_values(tree, X)
        losses.append(_log_loss(y, _sigmoid(margin)))

    return TrainedModel(
        trees=trees,
        learning_rate=params.learning_rate,
        base_score=base_score,
        column_names=list(data.column_names),
        params=params,
        train_losses=losses,
    )


def predict_margin(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Raw additive score for a matrix of rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(
            f"expected rows of width {model.n_features}, got shape {X.shape}"
        )
    margin = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        margin += model.learning_rate * _tree_values(tree, X)
    return margin


def predict_proba_matrix(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return _sigmoid(predict_margin(model, X))


def predict_proba(model: TrainedModel, row: np.ndarray) -> float:
    """Probability of class 1 for a single feature vector."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.size != model.n_features:
        raise ShapeError(
            f"expected a row of width {model.n_features}, got shape {row.shape}"
        )
    return float(predict_proba_matrix(model, row[None, :])[0])


def importance(model: TrainedModel) -> dict[str, float]:
    """Total split gain per feature, normalized to sum 1. Empty when the
    ensemble never split."""
    totals = np.zeros(model.n_features)

    def visit(node: TreeNode) -> None:
        if node.is_leaf:
            return
        totals[node.feature] += node.gain
        visit(node.left)
        visit(node.right)

    for tree in model.trees:
        visit(tree)
    total = totals.sum()
    if total <= 0:
        return {}
    return {
        model.column_names[i]: float(totals[i] / total)
        for i in np.flatnonzero(totals > 0)
    }


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"weight": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "missing_left": node.missing_left,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "feature" not in d:
        return TreeNode(weight=d["weight"])
    return TreeNode(
        feature=d["feature"],
        threshold=d["threshold"],
        missing_left=d["missing_left"],
        gain=d["gain"],
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Serialize to a self-describing JSON document."""
    doc = {
        "format": "physiobias-gbt-v1",
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "column_names": model.column_names,
        "params": vars(model.params),
        "train_losses": model.train_losses,
        "trees": [_node_to_dict(t) for t in model.trees],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path: str | Path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "physiobias-gbt-v1":
        raise ValueError(f"{path}: not a physiobias model file")
    return TrainedModel(
        trees=[_node_from_dict(t) for t in doc["trees"]],
        learning_rate=doc["learning_rate"],
        base_score=doc["base_score"],
        column_names=doc["column_names"],
        params=GbtParams(**doc["params"]),
        train_losses=list(doc["train_losses"]),
    )
