"""Classification random forests grown on bootstrap samples with random
per-split covariate subsets, plus the derived quantities the rest of the
toolkit consumes: predictions, out-of-bag accuracy, impurity and
permutation importance, and stratified-CV tuning of the per-split sample
size (mtry).

Determinism contract: every randomised operation takes a 64-bit seed and
derives one independent RNG stream per unit of parallel work (tree, fold
set, (tree, covariate, repeat) permutation) via ``SeedSequence`` spawn
keys, so results are bit-identical across runs and thread counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from forestflow import _kernels

__all__ = [
    "Dataset",
    "RFConfig",
    "Tree",
    "ForestModel",
    "ImportanceReport",
    "train_forest",
    "best_split",
    "predict",
    "predict_codes",
    "oob_accuracy",
    "impurity_importance",
    "permutation_importance",
    "tune_mtry",
    "stratified_folds",
    "validate_tree",
]

# spawn-key namespaces: keeps tree, fold and permutation streams disjoint
_KEY_TREE = 0
_KEY_FOLDS = 1
_KEY_PERM = 2


def _rng(seed, *key):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Dataset:
    """Tabular observations: a numeric covariate matrix and a categorical
    response encoded against an ordered class list.

    ``rows`` is (n_obs, n_covariates) float64 and must be free of missing
    (non-finite) values; ``response_codes`` indexes into ``class_names``.
    """

    covariate_names: tuple
    rows: np.ndarray
    response_codes: np.ndarray
    class_names: tuple

    def __post_init__(self):
        self.covariate_names = tuple(self.covariate_names)
        self.class_names = tuple(self.class_names)
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        self.response_codes = np.asarray(self.response_codes, dtype=np.int64)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-d matrix")
        if self.rows.shape[1] != len(self.covariate_names):
            raise ValueError("column count does not match covariate_names")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise ValueError("duplicate covariate names")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("duplicate class names")
        if self.response_codes.shape != (self.rows.shape[0],):
            raise ValueError("one response per row required")
        if self.rows.size and not np.isfinite(self.rows).all():
            raise ValueError("covariate matrix contains missing/non-finite values")
        if self.response_codes.size and (
            self.response_codes.min() < 0
            or self.response_codes.max() >= len(self.class_names)
        ):
            raise ValueError("response code outside class_names")

    @classmethod
    def from_labels(cls, covariate_names, rows, responses, class_names=None):
        """Build a Dataset from raw response labels; class order is first
        appearance unless ``class_names`` is given."""
        if class_names is None:
            seen = {}
            for r in responses:
                if r not in seen:
                    seen[r] = len(seen)
            class_names = tuple(seen)
        index = {c: i for i, c in enumerate(class_names)}
        try:
            codes = np.array([index[r] for r in responses], dtype=np.int64)
        except KeyError as e:
            raise ValueError(f"response {e.args[0]!r} not in class_names") from None
        return cls(tuple(covariate_names), rows, codes, tuple(class_names))

    @property
    def n_rows(self):
        return self.rows.shape[0]

    @property
    def n_covariates(self):
        return self.rows.shape[1]

    @property
    def responses(self):
        return [self.class_names[c] for c in self.response_codes]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.covariate_names,
            self.rows[indices],
            self.response_codes[indices],
            self.class_names,
        )


@dataclass
class RFConfig:
    """Training parameters.

    ``mtry`` covariates are sampled (without replacement) as split
    candidates at every node; nodes with fewer than ``2 * min_node_size``
    observations are not split; ``bootstrap_size`` defaults to the number
    of observations, drawn with replacement.
    """

    n_trees: int
    mtry: int
    min_node_size: int = 1
    max_nodes: Optional[int] = None
    seed: int = 0
    bootstrap_size: Optional[int] = None

    def validate(self, n_covariates):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 1 <= self.mtry <= n_covariates:
            raise ValueError(
                f"mtry must be in 1..{n_covariates}, got {self.mtry}"
            )
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1 when set")
        if self.bootstrap_size is not None and self.bootstrap_size < 1:
            raise ValueError("bootstrap_size must be >= 1 when set")


@dataclass
class Tree:
    """One binary decision tree in flat-array form.

    ``feature[i] == -1`` marks node i as a leaf; for leaves ``threshold``
    is NaN and ``left``/``right`` are -1.  Rows with a covariate value
    equal to a node's threshold are routed left (the <= convention).
    ``pred`` holds the majority class code at every node for trained
    trees; ingested trees may carry -1 at internal nodes.  ``n_train`` and
    ``impurity_decrease`` are present for trained trees only.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    pred: np.ndarray
    n_train: Optional[np.ndarray] = None
    impurity_decrease: Optional[np.ndarray] = None
    root: int = 0

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def leaf_mask(self):
        return self.feature < 0

    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.feature < 0))


@dataclass
class ForestModel:
    """An ordered ensemble of trees plus the naming context they index
    into.  ``config`` and ``oob_indices`` are present for forests trained
    here and absent for ingested foreign forests."""

    trees: list
    covariate_names: tuple
    class_names: tuple
    config: Optional[RFConfig] = None
    oob_indices: Optional[list] = None

    @property
    def n_trees(self):
        return len(self.trees)


@dataclass
class ImportanceReport:
    """Per-covariate importance scores; either metric may be absent."""

    covariate_names: tuple
    impurity: Optional[np.ndarray] = None
    permutation: Optional[np.ndarray] = None


def validate_tree(tree, n_covariates, n_classes, require_internal_pred=False):
    """Check all structural invariants of a Tree; raises ValueError.

    Internal nodes must have exactly two in-range children, leaves none;
    the child links must form a single tree rooted at ``tree.root`` (every
    non-root node has exactly one parent, no cycles, no strays).
    """
    n = tree.n_nodes
    arrays = [tree.feature, tree.threshold, tree.left, tree.right, tree.pred]
    if any(a.shape != (n,) for a in arrays):
        raise ValueError("tree arrays have inconsistent lengths")
    if n == 0:
        raise ValueError("empty tree")
    if not 0 <= tree.root < n:
        raise ValueError("root index out of range")
    indegree = np.zeros(n, dtype=np.int64)
    for i in range(n):
        internal = tree.feature[i] >= 0
        children = (int(tree.left[i]), int(tree.right[i]))
        if internal:
            if not 0 <= tree.feature[i] < n_covariates:
                raise ValueError(f"node {i}: split covariate out of range")
            if not np.isfinite(tree.threshold[i]):
                raise ValueError(f"node {i}: non-finite threshold")
            for c in children:
                if not 0 <= c < n:
                    raise ValueError(f"node {i}: child index {c} out of range")
                indegree[c] += 1
            if children[0] == children[1]:
                raise ValueError(f"node {i}: duplicate children")
            if require_internal_pred and tree.pred[i] < 0:
                raise ValueError(f"node {i}: internal node lacks prediction")
        else:
            if children != (-1, -1):
                raise ValueError(f"node {i}: leaf with children")
            if not 0 <= tree.pred[i] < n_classes:
                raise ValueError(f"node {i}: leaf prediction out of range")
    if indegree[tree.root] != 0:
        raise ValueError("root has a parent (cycle through root)")
    for i in range(n):
        if i != tree.root and indegree[i] != 1:
            raise ValueError(
                f"node {i}: expected exactly one parent, found {indegree[i]}"
            )
    # reachability + cycle check: with indegrees valid, a cycle would make
    # some node unreachable from the root
    seen = np.zeros(n, dtype=bool)
    stack = [tree.root]
    while stack:
        i = stack.pop()
        if seen[i]:
            raise ValueError(f"cycle detected at node {i}")
        seen[i] = True
        if tree.feature[i] >= 0:
            stack.append(int(tree.right[i]))
            stack.append(int(tree.left[i]))
    if not seen.all():
        raise ValueError("tree contains nodes unreachable from the root")


def best_split(rows, responses, candidate_covariates):
    """Exhaustive best-Gini-split search over a covariate-matrix subset.

    Scans, for each candidate covariate, every midpoint between
    consecutive distinct sorted values and returns ``(covariate index,
    threshold, impurity decrease)`` for the split maximising the decrease,
    or ``None`` when no split gives a strictly positive decrease.  Ties
    break to the lowest covariate index, then the lowest threshold.
    """
    X = np.ascontiguousarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("rows must be a nonempty 2-d matrix")
    cands = np.unique(np.asarray(list(candidate_covariates), dtype=np.int64))
    if cands.size == 0:
        raise ValueError("candidate covariate list is empty")
    if cands.min() < 0 or cands.max() >= X.shape[1]:
        raise ValueError("candidate covariate index out of range")
    labels = list(responses)
    if len(labels) != X.shape[0]:
        raise ValueError("one response per row required")
    seen = {}
    for r in labels:
        if r not in seen:
            seen[r] = len(seen)
    codes = np.array([seen[r] for r in labels], dtype=np.int64)
    all_rows = np.arange(X.shape[0], dtype=np.int64)
    return _kernels.best_split(X, all_rows, codes, cands, len(seen))


def _grow_tree(X, y, n_classes, config, rng):
    n = X.shape[0]
    p = X.shape[1]
    size = config.bootstrap_size if config.bootstrap_size is not None else n
    boot = rng.integers(0, n, size=size, dtype=np.int64)

    feature, threshold, left, right = [], [], [], []
    pred, n_train, imp = [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        pred.append(-1)
        n_train.append(0)
        imp.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, boot)]
    while stack:
        nid, node_rows = stack.pop()
        counts = np.bincount(y[node_rows], minlength=n_classes)
        pred[nid] = int(np.argmax(counts))  # first max = lowest class code
        n_node = node_rows.shape[0]
        n_train[nid] = n_node
        if n_node < 2 * config.min_node_size or counts.max() == n_node:
            continue
        if config.max_nodes is not None and len(feature) + 2 > config.max_nodes:
            continue
        if config.mtry >= p:
            cands = np.arange(p, dtype=np.int64)
        else:
            cands = np.sort(rng.choice(p, size=config.mtry, replace=False))
            cands = cands.astype(np.int64, copy=False)
        found = _kernels.best_split(X, node_rows, y, cands, n_classes)
        if found is None:
            continue
        f, thr, dec = found
        go_left = X[node_rows, f] <= thr
        lid = new_node()
        rid = new_node()
        feature[nid] = f
        threshold[nid] = thr
        left[nid] = lid
        right[nid] = rid
        imp[nid] = dec
        # LIFO: left child grown (and numbered below) before the right subtree
        stack.append((rid, node_rows[~go_left]))
        stack.append((lid, node_rows[go_left]))

    tree = Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        pred=np.array(pred, dtype=np.int32),
        n_train=np.array(n_train, dtype=np.int64),
        impurity_decrease=np.array(imp, dtype=np.float64),
    )
    return tree, boot


def train_forest(data, config, n_threads=1):
    """Grow ``config.n_trees`` trees, each on its own bootstrap sample.

    At every node a fresh sample of ``config.mtry`` covariates is
    considered and the split maximising the Gini impurity decrease is
    taken; growth stops at purity, below ``2 * min_node_size``
    observations, at the optional ``max_nodes`` cap, or when no candidate
    split improves impurity.  Leaves predict the majority class of their
    bootstrap observations.

    The result is a deterministic function of (data, config): per-tree
    RNG streams are derived from ``config.seed`` by tree index, so any
    ``n_threads`` yields the identical forest.
    """
    config.validate(data.n_covariates)
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    if np.unique(data.response_codes).size < 2:
        raise ValueError("training requires at least 2 distinct classes")
    X = data.rows
    y = data.response_codes
    n_classes = len(data.class_names)

    def build(i):
        return _grow_tree(X, y, n_classes, config, _rng(config.seed, _KEY_TREE, i))

    if n_threads <= 1:
        built = [build(i) for i in range(config.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            built = list(pool.map(build, range(config.n_trees)))

    all_rows = np.arange(data.n_rows, dtype=np.int64)
    return ForestModel(
        trees=[t for t, _ in built],
        covariate_names=data.covariate_names,
        class_names=data.class_names,
        config=config,
        oob_indices=[np.setdiff1d(all_rows, boot) for _, boot in built],
    )


def predict_codes(forest, X):
    """Vectorised prediction: returns (class codes, vote counts) for a
    (m, p) covariate matrix."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(forest.covariate_names):
        raise ValueError(
            f"expected {len(forest.covariate_names)} covariates per row"
        )
    m = X.shape[0]
    votes = np.zeros((m, len(forest.class_names)), dtype=np.int64)
    rows = np.arange(m, dtype=np.int64)
    row_ix = np.arange(m)
    for t in forest.trees:
        leaves = _kernels.route_rows(
            X, rows, t.feature, t.threshold, t.left, t.right, t.root
        )
        votes[row_ix, t.pred[leaves]] += 1
    return np.argmax(votes, axis=1), votes


def predict(forest, row):
    """Majority-vote prediction for one covariate vector.

    Returns ``(class label, vote fractions per class)``; ties go to the
    earliest class in ``class_names``.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != len(forest.covariate_names):
        raise ValueError(
            f"expected a covariate vector of length {len(forest.covariate_names)}"
        )
    codes, votes = predict_codes(forest, row[None, :])
    n = forest.n_trees
    fractions = {
        name: votes[0, c] / n for c, name in enumerate(forest.class_names)
    }
    return forest.class_names[codes[0]], fractions


def oob_accuracy(forest, data):
    """Fraction of observations predicted correctly by majority vote over
    only the trees whose bootstrap excluded them.  Observations that are
    in every bootstrap are left out of the denominator."""
    if forest.oob_indices is None:
        raise ValueError("forest carries no out-of-bag indices (ingested forest?)")
    X = data.rows
    votes = np.zeros((data.n_rows, len(forest.class_names)), dtype=np.int64)
    for t, oob in zip(forest.trees, forest.oob_indices):
        if oob.size == 0:
            continue
        leaves = _kernels.route_rows(
            X, oob, t.feature, t.threshold, t.left, t.right, t.root
        )
        votes[oob, t.pred[leaves]] += 1
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        raise ValueError("no observation is out-of-bag for any tree")
    pred = np.argmax(votes[covered], axis=1)
    return float(np.mean(pred == data.response_codes[covered]))


def impurity_importance(forest):
    """Accumulated Gini-decrease importance.

    Each internal node split on covariate j contributes its impurity
    decrease weighted by (node n_train / root n_train); sums are divided
    by the number of trees.  Covariates never split on score 0.
    """
    p = len(forest.covariate_names)
    acc = np.zeros(p, dtype=np.float64)
    for t in forest.trees:
        if t.n_train is None or t.impurity_decrease is None:
            raise ValueError("forest trees lack n_train/impurity statistics")
        internal = t.feature >= 0
        if not internal.any():
            continue
        w = t.impurity_decrease[internal] * (
            t.n_train[internal] / t.n_train[t.root]
        )
        np.add.at(acc, t.feature[internal], w)
    acc /= forest.n_trees
    return ImportanceReport(covariate_names=forest.covariate_names, impurity=acc)


def permutation_importance(forest, data, repeats=1, seed=0):
    """Mean drop in per-tree out-of-bag accuracy when each covariate is
    permuted among a tree's out-of-bag rows.

    Averaged over trees (those with a nonempty out-of-bag set) and over
    ``repeats`` independent permutations; deterministic given ``seed``
    (one RNG stream per (tree, covariate, repeat))."""
    if forest.oob_indices is None:
        raise ValueError("forest carries no out-of-bag indices (ingested forest?)")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = data.rows
    y = data.response_codes
    p = len(forest.covariate_names)
    total = np.zeros(p, dtype=np.float64)
    n_scored = 0
    for ti, (t, oob) in enumerate(zip(forest.trees, forest.oob_indices)):
        if oob.size == 0:
            continue
        leaves = _kernels.route_rows(
            X, oob, t.feature, t.threshold, t.left, t.right, t.root
        )
        base_acc = np.mean(t.pred[leaves] == y[oob])
        used = set(t.feature[t.feature >= 0].tolist())
        for j in range(p):
            if j not in used:
                continue  # permuting an unused covariate cannot change routing
            for rep in range(repeats):
                rng = _rng(seed, _KEY_PERM, ti, j, rep)
                perm = rng.permutation(oob.size)
                colvals = np.ascontiguousarray(X[oob[perm], j])
                leaves2 = _kernels.route_rows_override(
                    X, oob, t.feature, t.threshold, t.left, t.right,
                    j, colvals, t.root,
                )
                acc = np.mean(t.pred[leaves2] == y[oob])
                total[j] += base_acc - acc
        n_scored += 1
    if n_scored == 0:
        raise ValueError("no tree has out-of-bag rows")
    return ImportanceReport(
        covariate_names=forest.covariate_names,
        permutation=total / (n_scored * repeats),
    )


def stratified_folds(response_codes, n_classes, n_folds, rng):
    """Deal each class's (shuffled) observations round-robin into
    ``n_folds`` folds, carrying the dealing pointer across classes so fold
    sizes stay within one of each other."""
    folds = [[] for _ in range(n_folds)]
    ptr = 0
    for c in range(n_classes):
        idx = np.flatnonzero(response_codes == c)
        idx = idx[rng.permutation(idx.size)]
        for i, obs in enumerate(idx.tolist()):
            folds[(ptr + i) % n_folds].append(obs)
        ptr = (ptr + idx.size) % n_folds
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def tune_mtry(data, candidates, n_folds, base_config):
    """Pick mtry by stratified cross-validation.

    Builds ``n_folds`` folds whose class proportions match the full data
    within rounding, scores every candidate by mean held-out accuracy of
    forests trained on each fold complement, and returns ``(selected
    mtry, {candidate: mean accuracy})``.  Ties select the smaller mtry;
    the whole procedure is deterministic given ``base_config.seed``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    p = data.n_covariates
    for c in candidates:
        if not 1 <= c <= p:
            raise ValueError(f"candidate mtry {c} outside 1..{p}")
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    counts = np.bincount(data.response_codes, minlength=len(data.class_names))
    if counts.min() < n_folds:
        worst = data.class_names[int(np.argmin(counts))]
        raise ValueError(
            f"class {worst!r} has {int(counts.min())} members, fewer than "
            f"n_folds={n_folds}"
        )
    folds = stratified_folds(
        data.response_codes, len(data.class_names), n_folds,
        _rng(base_config.seed, _KEY_FOLDS),
    )
    all_rows = np.arange(data.n_rows, dtype=np.int64)
    scores = {}
    for cand in candidates:
        accs = []
        for fold in folds:
            train_idx = np.setdiff1d(all_rows, fold)
            forest = train_forest(data.subset(train_idx), replace(base_config, mtry=cand))
            codes, _ = predict_codes(forest, data.rows[fold])
            accs.append(float(np.mean(codes == data.response_codes[fold])))
        scores[cand] = float(np.mean(accs))
    best_acc = max(scores.values())
    selected = min(c for c in candidates if scores[c] == best_acc)
    return selected, scores
