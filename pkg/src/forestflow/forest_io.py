"""Dataset and forest interchange.

Datasets are comma-separated text with a header row.  Forests travel as
JSON documents (format_version "1") whose node records mirror the Tree
arrays; thresholds round-trip at full precision via repr.  Single trees
exported by the reference random-forest software's node-table format
(columns: left daughter, right daughter, split var, split point, status,
prediction; status -1 = leaf, daughter 0 = none, 1-based ids) can be
ingested directly.  Every ingested tree passes the full structural
validator before a model is returned.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from forestflow.rf_core import (
    Dataset,
    ForestModel,
    RFConfig,
    Tree,
    validate_tree,
)

__all__ = [
    "FOREST_FORMAT_VERSION",
    "read_dataset",
    "write_forest",
    "read_forest",
    "forest_to_document",
    "document_to_forest",
    "read_node_table",
    "trees_structurally_equal",
    "forests_structurally_equal",
]

FOREST_FORMAT_VERSION = "1"

_MISSING = {"", "na", "<na>", "nan", "null", "none"}


def read_dataset(path, response_column, covariate_columns=None):
    """Parse a comma-separated file with a header row into a Dataset.

    Every column except ``response_column`` becomes a covariate unless an
    explicit ``covariate_columns`` list is given.  Cells must be numeric
    and present; the response is categorical with class order fixed by
    first appearance in the file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, a header row is required") from None
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        if response_column not in header:
            raise ValueError(
                f"{path}: response column {response_column!r} not in header {header}"
            )
        if covariate_columns is None:
            covariates = [h for h in header if h != response_column]
        else:
            covariates = list(covariate_columns)
            if response_column in covariates:
                raise ValueError(
                    f"response column {response_column!r} listed among covariates"
                )
            for c in covariates:
                if c not in header:
                    raise ValueError(f"{path}: covariate column {c!r} not in header")
            if len(set(covariates)) != len(covariates):
                raise ValueError("duplicate covariate column requested")
        if not covariates:
            raise ValueError(f"{path}: no covariate columns")
        col_of = {h: i for i, h in enumerate(header)}
        rows, labels = [], []
        for rownum, rec in enumerate(reader, start=2):
            if not rec:
                continue  # blank line
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}: row {rownum}: expected {len(header)} fields, "
                    f"found {len(rec)}"
                )
            vals = []
            for c in covariates:
                cell = rec[col_of[c]].strip()
                if cell.lower() in _MISSING:
                    raise ValueError(
                        f"{path}: row {rownum}, column {c!r}: missing value"
                    )
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {rownum}, column {c!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ValueError(
                        f"{path}: row {rownum}, column {c!r}: non-finite value"
                    )
                vals.append(v)
            resp = rec[col_of[response_column]].strip()
            if resp.lower() in _MISSING:
                raise ValueError(
                    f"{path}: row {rownum}, column {response_column!r}: missing value"
                )
            rows.append(vals)
            labels.append(resp)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    X = np.array(rows, dtype=np.float64)
    return Dataset.from_labels(tuple(covariates), X, labels)


def _node_records(tree, covariate_names, class_names):
    records = []
    for i in range(tree.n_nodes):
        rec = {"id": i}
        if tree.feature[i] >= 0:
            rec["split"] = covariate_names[tree.feature[i]]
            rec["threshold"] = float(tree.threshold[i])
            rec["left"] = int(tree.left[i])
            rec["right"] = int(tree.right[i])
        if tree.pred[i] >= 0:
            rec["prediction"] = class_names[tree.pred[i]]
        if tree.n_train is not None:
            rec["n_train"] = int(tree.n_train[i])
        if tree.impurity_decrease is not None and tree.feature[i] >= 0:
            rec["impurity_decrease"] = float(tree.impurity_decrease[i])
        records.append(rec)
    return records


def forest_to_document(forest):
    """Render a ForestModel as a plain dict following the ForestDocument
    schema (format_version "1").  Names must be text."""
    for name in (*forest.covariate_names, *forest.class_names):
        if not isinstance(name, str):
            raise TypeError(
                f"covariate and class names must be text for serialization, "
                f"got {name!r}"
            )
    doc = {
        "format_version": FOREST_FORMAT_VERSION,
        "kind": "forestflow-forest",
        "covariate_names": list(forest.covariate_names),
        "class_names": list(forest.class_names),
    }
    if forest.config is not None:
        c = forest.config
        doc["config"] = {
            "n_trees": c.n_trees,
            "mtry": c.mtry,
            "min_node_size": c.min_node_size,
            "max_nodes": c.max_nodes,
            "seed": c.seed,
            "bootstrap_size": c.bootstrap_size,
        }
    doc["n_trees"] = forest.n_trees
    doc["trees"] = [
        {"nodes": _node_records(t, forest.covariate_names, forest.class_names)}
        for t in forest.trees
    ]
    if forest.oob_indices is not None:
        doc["oob_indices"] = [list(map(int, oob)) for oob in forest.oob_indices]
    return doc


def write_forest(forest, path):
    """Serialize a forest to ``path`` as a ForestDocument (UTF-8 JSON,
    stable field order)."""
    doc = forest_to_document(forest)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _parse_tree_record(nodes, cov_index, class_index, tree_num):
    if not isinstance(nodes, list) or not nodes:
        raise ValueError(f"tree {tree_num}: empty or malformed node list")
    ids = []
    for rec in nodes:
        if "id" not in rec:
            raise ValueError(f"tree {tree_num}: node record without id")
        ids.append(rec["id"])
    if len(set(ids)) != len(ids):
        raise ValueError(f"tree {tree_num}: duplicate node ids")
    remap = {nid: i for i, nid in enumerate(ids)}  # document order defines indices
    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int32)
    threshold = np.full(n, np.nan, dtype=np.float64)
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    pred = np.full(n, -1, dtype=np.int32)
    n_train = np.full(n, -1, dtype=np.int64)
    imp = np.zeros(n, dtype=np.float64)
    have_n_train = True
    have_imp = True
    for i, rec in enumerate(nodes):
        if "split" in rec:
            name = rec["split"]
            if name not in cov_index:
                raise ValueError(
                    f"tree {tree_num}, node {rec['id']}: "
                    f"covariate name {name!r} not in header list"
                )
            feature[i] = cov_index[name]
            thr = rec.get("threshold")
            if not isinstance(thr, (int, float)) or not math.isfinite(thr):
                raise ValueError(
                    f"tree {tree_num}, node {rec['id']}: missing or non-finite threshold"
                )
            threshold[i] = float(thr)
            for side in ("left", "right"):
                child = rec.get(side)
                if child not in remap:
                    raise ValueError(
                        f"tree {tree_num}, node {rec['id']}: "
                        f"dangling child id {child!r}"
                    )
            left[i] = remap[rec["left"]]
            right[i] = remap[rec["right"]]
            if "impurity_decrease" in rec:
                imp[i] = float(rec["impurity_decrease"])
            else:
                have_imp = False
        elif "prediction" not in rec:
            raise ValueError(
                f"tree {tree_num}, node {rec['id']}: neither split nor prediction"
            )
        if "prediction" in rec:
            label = rec["prediction"]
            if label not in class_index:
                raise ValueError(
                    f"tree {tree_num}, node {rec['id']}: "
                    f"prediction {label!r} not in class list"
                )
            pred[i] = class_index[label]
        if "n_train" in rec:
            n_train[i] = int(rec["n_train"])
        else:
            have_n_train = False
    return Tree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        pred=pred,
        n_train=n_train if have_n_train else None,
        impurity_decrease=imp if have_imp else None,
    )


def document_to_forest(doc):
    """Validate a ForestDocument dict and build the ForestModel; every
    tree passes the structural validator or this raises ValueError."""
    if not isinstance(doc, dict) or doc.get("kind") != "forestflow-forest":
        raise ValueError("not a forestflow forest document")
    version = doc.get("format_version")
    if version != FOREST_FORMAT_VERSION:
        raise ValueError(f"unknown format_version {version!r}")
    covariate_names = tuple(doc.get("covariate_names", ()))
    class_names = tuple(doc.get("class_names", ()))
    if not covariate_names or not class_names:
        raise ValueError("document lacks covariate_names or class_names")
    if len(set(covariate_names)) != len(covariate_names):
        raise ValueError("duplicate covariate names in document")
    if len(set(class_names)) != len(class_names):
        raise ValueError("duplicate class names in document")
    trees_node = doc.get("trees")
    if not isinstance(trees_node, list) or not trees_node:
        raise ValueError("document contains no trees")
    cov_index = {c: i for i, c in enumerate(covariate_names)}
    class_index = {c: i for i, c in enumerate(class_names)}
    trees = []
    for tnum, trec in enumerate(trees_node):
        tree = _parse_tree_record(
            trec.get("nodes"), cov_index, class_index, tnum
        )
        validate_tree(tree, len(covariate_names), len(class_names))
        trees.append(tree)
    config = None
    if "config" in doc:
        c = doc["config"]
        config = RFConfig(
            n_trees=int(c["n_trees"]),
            mtry=int(c["mtry"]),
            min_node_size=int(c.get("min_node_size", 1)),
            max_nodes=None if c.get("max_nodes") is None else int(c["max_nodes"]),
            seed=int(c.get("seed", 0)),
            bootstrap_size=(
                None if c.get("bootstrap_size") is None else int(c["bootstrap_size"])
            ),
        )
    oob = None
    if "oob_indices" in doc:
        raw = doc["oob_indices"]
        if len(raw) != len(trees):
            raise ValueError("oob_indices length does not match tree count")
        oob = [np.asarray(ix, dtype=np.int64) for ix in raw]
    return ForestModel(
        trees=trees,
        covariate_names=covariate_names,
        class_names=class_names,
        config=config,
        oob_indices=oob,
    )


def read_forest(path):
    """Load a ForestDocument file written by write_forest (or any
    conforming document)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not parseable as a forest document: {e}") from None
    return document_to_forest(doc)


def _norm_header(h):
    return " ".join(h.strip().lower().replace(".", " ").replace("_", " ").split())


def _parse_link(cell):
    cell = cell.strip()
    if cell.lower() in _MISSING:
        return 0
    return int(float(cell))


def read_node_table(path, covariate_names, class_names, strict=False):
    """Ingest a single tree from a node-table export.

    Expected comma-separated columns (header names case-insensitive,
    "." / "_" / " " interchangeable): left daughter, right daughter,
    split var, split point, status, prediction.  Row order defines node
    ids starting at 1, row 1 being the root; status -1 marks a leaf and
    daughter 0 means none.  "split var" is a 1-based covariate index or a
    covariate name; "prediction" is a 1-based class index or a class
    name.  With ``strict`` set, internal rows must leave the prediction
    cell absent.  Returns a one-tree ForestModel without training
    statistics.
    """
    covariate_names = tuple(covariate_names)
    class_names = tuple(class_names)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        pos = {}
        for i, h in enumerate(header):
            pos.setdefault(_norm_header(h), i)
        required = (
            "left daughter", "right daughter", "split var",
            "split point", "status", "prediction",
        )
        for col in required:
            if col not in pos:
                raise ValueError(f"{path}: required column {col!r} not found")
        records = [rec for rec in reader if rec]
    n = len(records)
    if n == 0:
        raise ValueError(f"{path}: no node rows")

    feature = np.full(n, -1, dtype=np.int32)
    threshold = np.full(n, np.nan, dtype=np.float64)
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    pred = np.full(n, -1, dtype=np.int32)

    p = len(covariate_names)
    cov_index = {c: i for i, c in enumerate(covariate_names)}
    class_index = {str(c): i for i, c in enumerate(class_names)}
    for i, rec in enumerate(records):
        rownum = i + 2  # header occupies line 1

        def cell(col):
            j = pos[col]
            return rec[j].strip() if j < len(rec) else ""

        try:
            status = int(float(cell("status")))
        except ValueError:
            raise ValueError(
                f"{path}: row {rownum}: unparseable status {cell('status')!r}"
            ) from None
        ld = _parse_link(cell("left daughter"))
        rd = _parse_link(cell("right daughter"))
        pred_cell = cell("prediction")
        if status == -1:
            if ld or rd:
                raise ValueError(
                    f"{path}: row {rownum}: leaf (status -1) with nonzero daughters"
                )
            if pred_cell.lower() in _MISSING:
                raise ValueError(f"{path}: row {rownum}: leaf without prediction")
            try:
                k = int(float(pred_cell))
            except ValueError:
                k = None
            if k is not None:
                if not 1 <= k <= len(class_names):
                    raise ValueError(
                        f"{path}: row {rownum}: prediction index {k} out of "
                        f"range 1..{len(class_names)}"
                    )
                pred[i] = k - 1
            elif pred_cell in class_index:
                pred[i] = class_index[pred_cell]
            else:
                raise ValueError(
                    f"{path}: row {rownum}: prediction {pred_cell!r} "
                    f"matches no class"
                )
        else:
            if ld == 0 or rd == 0:
                raise ValueError(
                    f"{path}: row {rownum}: status {status} (internal) "
                    f"but a daughter is absent"
                )
            for d in (ld, rd):
                if not 1 <= d <= n:
                    raise ValueError(
                        f"{path}: row {rownum}: daughter id {d} out of range 1..{n}"
                    )
            sv = cell("split var")
            try:
                k = int(float(sv))
            except ValueError:
                k = None
            if k is not None:
                if not 1 <= k <= p:
                    raise ValueError(
                        f"{path}: row {rownum}: split var index {k} out of "
                        f"range 1..{p}"
                    )
                feature[i] = k - 1
            elif sv in cov_index:
                feature[i] = cov_index[sv]
            else:
                raise ValueError(
                    f"{path}: row {rownum}: split var {sv!r} matches no covariate"
                )
            try:
                thr = float(cell("split point"))
            except ValueError:
                raise ValueError(
                    f"{path}: row {rownum}: unparseable split point "
                    f"{cell('split point')!r}"
                ) from None
            if not math.isfinite(thr):
                raise ValueError(f"{path}: row {rownum}: non-finite split point")
            threshold[i] = thr
            left[i] = ld - 1
            right[i] = rd - 1
            if strict and pred_cell.lower() not in {*_MISSING, "0"}:
                raise ValueError(
                    f"{path}: row {rownum}: internal row with prediction set"
                )

    tree = Tree(
        feature=feature, threshold=threshold, left=left, right=right, pred=pred
    )
    validate_tree(tree, p, len(class_names))
    return ForestModel(
        trees=[tree], covariate_names=covariate_names, class_names=class_names
    )


def trees_structurally_equal(a, b, check_stats=False):
    """Node-by-node equality of two trees (indices, thresholds with
    NaN-aware comparison, predictions); training statistics only when
    ``check_stats`` is set."""
    if a.n_nodes != b.n_nodes or a.root != b.root:
        return False
    same = (
        np.array_equal(a.feature, b.feature)
        and np.array_equal(a.threshold, b.threshold, equal_nan=True)
        and np.array_equal(a.left, b.left)
        and np.array_equal(a.right, b.right)
        and np.array_equal(a.pred, b.pred)
    )
    if not same or not check_stats:
        return same
    for x, y in ((a.n_train, b.n_train), (a.impurity_decrease, b.impurity_decrease)):
        if (x is None) != (y is None):
            return False
        if x is not None and not np.array_equal(x, y):
            return False
    return True


def forests_structurally_equal(a, b, check_stats=False):
    return (
        a.covariate_names == b.covariate_names
        and a.class_names == b.class_names
        and a.n_trees == b.n_trees
        and all(
            trees_structurally_equal(x, y, check_stats)
            for x, y in zip(a.trees, b.trees)
        )
    )
